#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iterator>
#include <numbers>
#include <sstream>

#include "homoshear/harness.hpp"
#include "homoshear/statistics.hpp"

namespace homoshear {

namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

std::string format(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + p.string());
  return {std::istreambuf_iterator<char>(is), {}};
}

struct Context {
  AcceptanceOptions opt;
  KernelMoments km;
  double C1 = 0, C2 = 0, K0 = 0;
  std::vector<std::pair<fs::path, RunManifest>> runs;  // for the determinism check

  RunManifest run(Scenario s, const std::string& tag) {
    s.sim.threads = opt.threads;
    s.out_dir = opt.work_dir / tag;
    auto m = run_scenario(s);
    runs.emplace_back(s.out_dir, m);
    return m;
  }
};

std::string verdict_detail(const RunManifest& m, const std::string& name) {
  const auto* v = m.find(name);
  return v ? v->detail : "missing verdict " + name;
}

bool verdict_passed(const RunManifest& m, const std::string& name) {
  const auto* v = m.find(name);
  return v && v->passed;
}

CriterionResult kernel_constants(Context&) {
  const auto km = kernel_moments(CollisionKernel::constant());
  const double ea = std::abs(km.alpha / (4 * kPi / 5) - 1);
  const double eb = std::abs(km.beta / (4 * kPi / 3) - 1);
  const double el = std::abs(km.b_l1 / (4 * kPi) - 1);
  return {1, "kernel constants", ea <= 1e-10 && eb <= 1e-10 && el <= 1e-12,
          format("alpha rel err %.2e, beta rel err %.2e, |b| rel err %.2e", ea, eb, el)};
}

CriterionResult equilibrium(Context& ctx) {
  auto s = preset("relax_k0");
  const auto m = ctx.run(s, "relax_k0");
  return {2, "equilibrium preservation", verdict_passed(m, "equilibrium"), verdict_detail(m, "equilibrium")};
}

CriterionResult source_constant_check(Context& ctx) {
  auto s = preset("relax_k0");
  s.sim.initial = InitialCondition::point_mass({2, 0, 0});
  s.sim.t_end = 0.24;
  s.sim.record_times = {0.05, 0.12, 0.24};
  s.sim.seed = 21;
  const auto m = ctx.run(s, "relax_k0_point_mass");
  return {3, "source constant", verdict_passed(m, "trace_closed_form") && verdict_passed(m, "alternative_source_excluded"),
          "c = beta: " + verdict_detail(m, "trace_closed_form") +
              "; c = beta/3: " + verdict_detail(m, "alternative_source_excluded")};
}

CriterionResult subcritical(Context& ctx) {
  auto s = preset("subcritical");
  s.sim.record_times = {0.5, 1.0, 2.0, 5.0};
  s.window = 2;
  const auto m = ctx.run(s, "subcritical");
  return {4, "subcritical MC vs ODE", verdict_passed(m, "ode_agreement"), verdict_detail(m, "ode_agreement")};
}

CriterionResult threshold(Context& ctx) {
  const double closed = find_K0(ctx.C1, ctx.C2);
  const double bis = find_K0_bisection(ctx.C1, ctx.C2);
  const double dense = find_K0_dense(ctx.C1, ctx.C2);
  const double e1 = std::abs(bis / closed - 1), e2 = std::abs(dense / closed - 1);
  auto max_re = [&](double K) {
    double r = -INFINITY;
    for (auto z : dense_eigenvalues(ctx.C1, ctx.C2, K)) r = std::max(r, z.real());
    return r;
  };
  const bool flips = max_re(0.999 * closed) < 0 && max_re(1.001 * closed) > 0;
  return {5, "threshold K0", e1 <= 1e-8 && e2 <= 1e-8 && flips,
          format("K0 = %.10f, bisection rel %.1e, dense rel %.1e, sign flip %s", closed, e1, e2, flips ? "yes" : "no")};
}

CriterionResult supercritical(Context& ctx) {
  const double K = 2 * ctx.K0;
  const auto rep = eigenvalues(ctx.C1, ctx.C2, K);
  const double mu = *rep.mu;
  int positive = 0;
  for (auto z : dense_eigenvalues(ctx.C1, ctx.C2, K)) positive += z.real() > 0;

  // exact moment ODE over a long horizon, fit over its final decade
  const auto op = build_operator(ctx.km, K, ctx.km.beta);
  std::vector<double> t, tr;
  const double horizon = 40.0 / mu;
  for (int i = 0; i <= 200; ++i) {
    const double ti = horizon * (0.5 + 0.5 * i / 200.0);
    t.push_back(ti);
    tr.push_back(std::log(evolve(op, MomentMatrix::identity(), ti).trace()));
  }
  const double ode_rate = fit_line(t, tr).slope;
  const double ode_err = std::abs(ode_rate / mu - 1);

  const auto m = ctx.run(preset("supercritical"), "supercritical");
  const bool ok = ode_err <= 1e-6 && positive == 1 && verdict_passed(m, "growth_rate");
  return {6, "supercritical growth", ok,
          format("mu = %.8f, ODE rate rel err %.1e, unstable eigenvalues %d, MC: ", mu, ode_err, positive) +
              verdict_detail(m, "growth_rate")};
}

CriterionResult asymptotics(Context& ctx) {
  const double K = 1e5;
  const auto g = growing_mode(ctx.C1, ctx.C2, K);
  const double theta = std::cbrt(2 * ctx.C2);
  const double e_mu = std::abs(g.mu * std::pow(K, -2.0 / 3.0) / theta - 1);
  const double k13 = std::cbrt(K), k23 = k13 * k13;
  const double scaled[] = {g.eigvec.m11(), k13 * g.eigvec.m12(), k23 * g.eigvec.m22(), k23 * g.eigvec.m33()};
  const double limit[] = {1.0, -theta / 2, theta * theta / 2, theta * theta / 2};
  double e_vec = 0;
  for (int i = 0; i < 4; ++i) e_vec = std::max(e_vec, std::abs(scaled[i] / limit[i] - 1));
  return {7, "large-K asymptotics", e_mu <= 5e-3 && e_vec <= 1e-2,
          format("mu K^(-2/3) rel err %.3e, eigenvector rel err %.3e", e_mu, e_vec)};
}

CriterionResult reconstruction(Context& ctx) {
  double worst = 0;
  bool negative_atom = true;
  for (double f : {1.5, 10.0}) {
    const auto g = growing_mode(ctx.C1, ctx.C2, f * ctx.K0);
    const auto p = reconstruct_measure(g);
    const auto back = p.moments();
    for (std::size_t k : {0u, 1u, 3u, 5u}) worst = std::max(worst, std::abs(back[k] / g.eigvec[k] - 1));
    negative_atom = negative_atom && p.beta_mass < 0;
  }
  return {8, "reconstruction roundtrip", worst <= 1e-10,
          format("max rel err %.2e, beta_mass < 0: %s", worst, negative_atom ? "yes" : "no")};
}

CriterionResult povzner(Context&) {
  std::string detail;
  bool ok = true;
  for (double s : {2.1, 2.5, 2.9}) {
    const double cs = find_povzner_constant(s, 1000000, 7);
    CounterRng rng(8, static_cast<std::uint64_t>(s * 1000));
    std::size_t violations = 0;
    std::array<double, 8> u{};
    for (int n = 0; n < 1000000; ++n) {
      for (auto& x : u) x = rng.uniform();
      const auto tri = povzner_triple(u);
      violations += !povzner_check(tri.v, tri.v_star, tri.omega, s, cs);
    }
    ok = ok && violations == 0;
    detail += format("s=%.1f Cs=%g violations=%zu; ", s, cs, violations);
  }
  return {9, "Povzner constants", ok, detail};
}

CriterionResult hard_potential(Context& ctx) {
  const auto m = ctx.run(preset("hard_potential"), "hard_potential");
  return {10, "hard-potential stationarity", verdict_passed(m, "stationarity") && verdict_passed(m, "m2_bounded"),
          verdict_detail(m, "stationarity") + "; M2 " + verdict_detail(m, "m2_bounded")};
}

CriterionResult thinning(Context& ctx) {
  SimConfig c;
  c.K = 3.0;
  c.n_particles = 25000;
  c.trace_particles = 25000;
  c.trace_gaps_per_particle = 4;
  c.t_end = 3.0;
  c.seed = 31;
  c.threads = ctx.opt.threads;
  const auto res = run(c);
  const auto& gaps = res.interarrivals;
  const auto gof = exponential_gof(gaps, 4 * kPi);
  const bool ok = gaps.size() >= 100000 && gof.p_value > 1e-3;
  return {11, "thinning exactness", ok,
          format("%zu gaps, chi2 = %.1f (dof %d), p = %.4f, acceptance ratio %.4f", gaps.size(), gof.statistic,
                 gof.dof, gof.p_value, res.acceptance_ratio())};
}

CriterionResult determinism(Context& ctx) {
  std::size_t files = 0;
  std::string mismatch;
  for (const auto& [dir, manifest] : ctx.runs) {
    const auto rerun_dir = ctx.opt.work_dir / "rerun" / dir.filename();
    auto s = scenario_from_manifest(dir / "manifest.json", rerun_dir);
    run_scenario(s);
    for (const auto& f : manifest.files) {
      ++files;
      if (slurp(dir / f) != slurp(rerun_dir / f)) mismatch += (dir / f).string() + " ";
    }
  }
  return {12, "determinism", mismatch.empty() && files > 0,
          mismatch.empty() ? format("%zu scenario runs, %zu files byte-identical", ctx.runs.size(), files)
                           : "differs: " + mismatch};
}

}  // namespace

std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& options) {
  Context ctx{options, kernel_moments(CollisionKernel::constant()), 0.0, 0.0, 0.0, {}};
  const auto op = build_operator(ctx.km, 0.0, ctx.km.beta);
  ctx.C1 = op.C1;
  ctx.C2 = op.C2;
  ctx.K0 = find_K0(ctx.C1, ctx.C2);
  fs::create_directories(options.work_dir);

  const std::vector<std::function<CriterionResult(Context&)>> criteria = {
      kernel_constants, equilibrium,   source_constant_check, subcritical,    threshold, supercritical,
      asymptotics,      reconstruction, povzner,              hard_potential, thinning,  determinism};
  std::vector<CriterionResult> out;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    CriterionResult r;
    try {
      r = criteria[i](ctx);
    } catch (const std::exception& e) {
      r = {static_cast<int>(i + 1), "criterion " + std::to_string(i + 1), false, std::string("error: ") + e.what()};
    }
    if (options.verbose) {
      std::printf("[%s] %2d %-28s %s\n", r.passed ? "PASS" : "FAIL", r.id, r.title.c_str(), r.detail.c_str());
      std::fflush(stdout);
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace homoshear
