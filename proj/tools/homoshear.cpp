// Command-line front end: simulate, moments, spectrum, scan-k, selfsim, check.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "homoshear/harness.hpp"
#include "homoshear/moment_dynamics.hpp"
#include "homoshear/spectral.hpp"

namespace fs = std::filesystem;
using namespace homoshear;
using nlohmann::json;

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool paper_source = false;
  unsigned threads = 1;
};

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::vector<double> numbers(const std::string& s, char sep = ',') {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(std::stod(item));
  return out;
}

// "lo:hi:n" -> n evenly spaced points including both ends
std::vector<double> range(const std::string& text) {
  const auto p = numbers(text, ':');
  if (p.size() != 3 || p[2] < 1) throw std::invalid_argument("range must be lo:hi:n, got '" + text + "'");
  const auto n = static_cast<int>(p[2]);
  std::vector<double> out;
  for (int i = 0; i < n; ++i) out.push_back(n == 1 ? p[0] : p[0] + (p[1] - p[0]) * i / (n - 1));
  return out;
}

MomentMatrix parse_m0(const std::string& text) {
  if (text == "identity") return MomentMatrix::identity();
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw std::invalid_argument("unknown M0 '" + text + "'");
  const std::string kind = text.substr(0, colon);
  const auto v = numbers(text.substr(colon + 1));
  if (kind == "point" && v.size() == 3) return MomentMatrix::outer({v[0], v[1], v[2]});
  if (kind == "aniso" && v.size() == 3) return MomentMatrix({v[0], 0, 0, v[1], 0, v[2]});
  if (kind == "six" && v.size() == 6) return MomentMatrix({v[0], v[1], v[2], v[3], v[4], v[5]});
  throw std::invalid_argument("unknown M0 '" + text + "'");
}

void write_text(const fs::path& p, const std::string& s) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream os(p, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  os << s;
}

Scenario load_scenario(const Globals& g, const std::string& name, const std::string& manifest) {
  Scenario s;
  if (!manifest.empty()) {
    s = scenario_from_manifest(manifest, g.out.empty() ? fs::path(manifest).parent_path() / "rerun" : fs::path(g.out));
  } else if (!g.config.empty()) {
    auto cfg = read_ini(g.config);
    if (!name.empty()) cfg["scenario"]["name"] = name;
    s = Scenario::from_config(cfg);
  } else {
    s = preset(name.empty() ? "relax_k0" : name);
  }
  if (g.seed) s.sim.seed = *g.seed;
  if (g.paper_source) s.paper_source = true;
  if (!g.out.empty() && manifest.empty()) s.out_dir = g.out;
  s.sim.threads = g.threads;
  return s;
}

int report(const RunManifest& m, const Scenario& s) {
  for (const auto& v : m.verdicts)
    std::printf("%-6s %-28s %s\n", !v.asserted ? "info" : (v.passed ? "pass" : "FAIL"), v.name.c_str(),
                v.detail.c_str());
  std::printf("wrote %s (%.1f s, acceptance ratio %.4f)\n", (s.out_dir / "manifest.json").c_str(), m.wall_time_s,
              m.acceptance_ratio);
  return m.ok() ? 0 : 1;
}

json report_json(const SpectralReport& r) {
  json j{{"C1", r.C1}, {"C2", r.C2}, {"K", r.K}, {"K0", r.K0}, {"stable", r.stable}, {"max_real_part", r.max_real_part}};
  for (auto z : r.eigenvalues) j["eigenvalues"].push_back({z.real(), z.imag()});
  if (r.mu) {
    const auto g = growing_mode(r.C1, r.C2, r.K);
    j["mu"] = *r.mu;
    j["growing_mode"] = g.eigvec.entries();
    try {
      const auto p = reconstruct_measure(g);
      j["reconstruction"] = {{"A1", p.A1}, {"A2", p.A2}, {"A3", p.A3}, {"beta_mass", p.beta_mass}};
    } catch (const std::domain_error& e) {
      j["reconstruction"] = e.what();
    }
  } else {
    j["mu"] = nullptr;
  }
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Homoenergetic simple-shear solutions of the linear Boltzmann equation"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "INI config file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "override the random seed");
  app.add_option("--out", g.out, "output directory");
  app.add_flag("--paper-source", g.paper_source, "use the source constant beta/3 instead of beta");
  app.add_option("--threads", g.threads, "worker threads")->check(CLI::PositiveNumber);

  auto* simulate = app.add_subcommand("simulate", "run a scenario and write CSV + manifest");
  std::string scenario_name, manifest;
  simulate->add_option("--scenario", scenario_name, "preset name")->check(CLI::IsMember(scenario_names()));
  simulate->add_option("--manifest", manifest, "rerun the scenario recorded in a manifest")->check(CLI::ExistingFile);

  auto* moments = app.add_subcommand("moments", "exact second-moment dynamics");
  std::string kernel = "constant", table, m0 = "identity", tgrid = "0:5:51";
  double K = 0.0;
  moments->add_option("--kernel", kernel, "angular preset");
  moments->add_option("--table", table, "tabulated b(x) CSV")->check(CLI::ExistingFile);
  moments->add_option("--K", K, "shear rate")->check(CLI::NonNegativeNumber);
  moments->add_option("--m0", m0, "identity | point:v1,v2,v3 | aniso:s1,s2,s3 | six:m11,..,m33");
  moments->add_option("--t-grid", tgrid, "lo:hi:n");

  auto* spectrum = app.add_subcommand("spectrum", "eigenvalues, K0 and growing mode");
  std::optional<double> alpha, beta, K_single;
  std::string sweep;
  spectrum->add_option("--kernel", kernel, "angular preset");
  spectrum->add_option("--table", table, "tabulated b(x) CSV")->check(CLI::ExistingFile);
  spectrum->add_option("--alpha", alpha, "explicit alpha (with --beta)");
  spectrum->add_option("--beta", beta, "explicit beta (with --alpha)");
  spectrum->add_option("--K", K_single, "single shear rate");
  spectrum->add_option("--k-sweep", sweep, "lo:hi:n sweep in K");

  auto* scan = app.add_subcommand("scan-k", "Monte Carlo threshold scan across K0");
  std::string grid;
  scan->add_option("--grid", grid, "comma-separated K/K0 multiples");

  app.add_subcommand("selfsim", "self-similar rescaling diagnostic (report only)");
  app.add_subcommand("check", "run the acceptance suite");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*simulate) {
      const auto s = load_scenario(g, scenario_name, manifest);
      return report(run_scenario(s), s);
    }
    if (app.got_subcommand("scan-k")) {
      auto s = load_scenario(g, "k_sweep", "");
      if (!grid.empty()) s.k_grid = numbers(grid);
      return report(run_scenario(s), s);
    }
    if (app.got_subcommand("selfsim")) {
      const auto s = load_scenario(g, "selfsim", "");
      return report(run_scenario(s), s);
    }
    if (app.got_subcommand("check")) {
      AcceptanceOptions opt;
      opt.threads = g.threads;
      if (!g.out.empty()) opt.work_dir = g.out;
      const auto results = run_acceptance(opt);
      const bool ok = std::all_of(results.begin(), results.end(), [](const auto& r) { return r.passed; });
      return ok ? 0 : 1;
    }

    const auto kern = table.empty() ? CollisionKernel::from_preset(kernel) : CollisionKernel::from_csv(table);
    const fs::path out = g.out.empty() ? fs::path("out") : fs::path(g.out);

    if (*moments) {
      const auto km = kernel_moments(kern);
      const auto conv = g.paper_source ? SourceConvention::paper_constant : SourceConvention::unit_covariance;
      const auto op = build_operator(km, K, source_constant(km, conv));
      const auto M0 = parse_m0(m0);
      std::ostringstream csv;
      csv << "# homoshear moments v1\nt,M11,M12,M13,M22,M23,M33,min_eigenvalue\n";
      for (double t : range(tgrid)) {
        const auto M = evolve(op, M0, t);
        csv << fmt(t);
        for (double x : M.entries()) csv << ',' << fmt(x);
        csv << ',' << fmt(M.min_eigenvalue()) << '\n';
      }
      write_text(out / "moments.csv", csv.str());
      json j{{"K", K}, {"C1", op.C1}, {"C2", op.C2}, {"source_c", op.source_c}};
      try {
        j["stationary"] = stationary_moments(op).entries();
        j["stable"] = eigenvalues(op.C1, op.C2, K).stable;
      } catch (const ResonanceError& e) {
        j["stationary"] = nullptr;
        j["reason"] = e.what();
      }
      write_text(out / "stationary.json", j.dump(2) + "\n");
      std::cout << j.dump(2) << '\n';
      return 0;
    }

    if (*spectrum) {
      double C1, C2;
      if (alpha || beta) {
        if (!(alpha && beta)) throw std::invalid_argument("--alpha and --beta go together");
        if (!(*beta > *alpha && *alpha > 0)) throw std::invalid_argument("need beta > alpha > 0");
        C1 = (5 * *beta - 3 * *alpha) / 2;
        C2 = (*beta - *alpha) / 2;
      } else {
        const auto op = build_operator(kernel_moments(kern), 0.0, 0.0);
        C1 = op.C1;
        C2 = op.C2;
      }
      std::vector<double> ks = sweep.empty() ? std::vector<double>{K_single.value_or(0.0)} : range(sweep);
      json reports = json::array();
      std::ostringstream csv;
      csv << "# homoshear spectrum v1\nK,max_re_lambda,mu\n";
      for (double k : ks) {
        const auto r = eigenvalues(C1, C2, k);
        reports.push_back(report_json(r));
        csv << fmt(k) << ',' << fmt(r.max_real_part) << ',' << (r.mu ? fmt(*r.mu) : "") << '\n';
      }
      write_text(out / "spectrum.json", reports.dump(2) + "\n");
      if (!sweep.empty()) write_text(out / "spectrum_sweep.csv", csv.str());
      std::cout << (ks.size() == 1 ? reports[0] : reports).dump(2) << '\n';
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
