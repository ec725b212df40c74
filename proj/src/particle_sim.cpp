#include "homoshear/particle_sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "homoshear/statistics.hpp"

namespace homoshear {

namespace {

constexpr std::size_t kChunk = 1024;

// Runs body(chunk_index) over all chunks on up to `threads` workers.
void for_each_chunk(std::size_t n_chunks, unsigned threads, const std::function<void(std::size_t)>& body) {
  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n_chunks)));
  if (workers == 1) {
    for (std::size_t c = 0; c < n_chunks; ++c) body(c);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t c; (c = next.fetch_add(1)) < n_chunks;) {
          try {
            body(c);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
            next = n_chunks;
          }
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

Vec3 random_unit(CounterRng& rng) {
  for (;;) {
    const Vec3 g = sample_background(rng);
    const double n = norm(g);
    if (n > 0.0) return g * (1.0 / n);
  }
}

}  // namespace

MomentMatrix InitialCondition::moments() const {
  switch (kind) {
    case Kind::maxwellian:
      return MomentMatrix::identity();
    case Kind::point_mass:
      return MomentMatrix::outer(param);
    case Kind::anisotropic_gaussian:
      return MomentMatrix({param.x, 0, 0, param.y, 0, param.z});
  }
  return {};
}

std::string InitialCondition::name() const {
  switch (kind) {
    case Kind::maxwellian:
      return "maxwellian";
    case Kind::point_mass:
      return "point_mass";
    case Kind::anisotropic_gaussian:
      return "anisotropic_gaussian";
  }
  return "";
}

InitialCondition::Kind InitialCondition::parse_kind(const std::string& name) {
  if (name == "maxwellian") return Kind::maxwellian;
  if (name == "point_mass") return Kind::point_mass;
  if (name == "anisotropic_gaussian") return Kind::anisotropic_gaussian;
  throw std::invalid_argument("unknown initial condition '" + name + "'");
}

double SimConfig::effective_substep() const { return substep ? *substep : std::min(0.05, 0.5 / (1.0 + K)); }

void SimConfig::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("invalid simulation config: " + m); };
  if (!(K >= 0.0) || !std::isfinite(K)) fail("K must be finite and >= 0");
  if (n_particles < 1) fail("n_particles must be >= 1");
  if (!(t_end > 0.0) || !std::isfinite(t_end)) fail("t_end must be positive");
  const double tau = effective_substep();
  if (!(tau > 0.0) || tau > t_end) fail("substep must lie in (0, t_end]");
  if (!std::is_sorted(record_times.begin(), record_times.end())) fail("record_times must be sorted");
  for (double t : record_times)
    if (!(t >= 0.0 && t <= t_end)) fail("record_times must lie in [0, t_end]");
  if (initial.kind == InitialCondition::Kind::anisotropic_gaussian &&
      !(initial.param.x > 0.0 && initial.param.y > 0.0 && initial.param.z > 0.0))
    fail("anisotropic variances must be positive");
  if (!is_finite(initial.param)) fail("initial parameters must be finite");
  if (trace_particles > n_particles) fail("trace_particles exceeds n_particles");
}

struct Simulation::Engine {
  MajorantTable majorant;
  double b_l1;
  std::vector<double> last_collision;
  std::vector<std::vector<double>> gaps;
};

Simulation::Simulation(SimConfig config) : config_(std::move(config)) {
  config_.validate();
  engine_ = std::make_unique<Engine>(Engine{MajorantTable(config_.kernel.gamma()),
                                            kernel_moments(config_.kernel).b_l1,
                                            std::vector<double>(config_.trace_particles, std::numeric_limits<double>::quiet_NaN()),
                                            std::vector<std::vector<double>>(config_.trace_particles)});
  const std::size_t n = config_.n_particles;
  ensemble_.velocities.resize(n);
  ensemble_.rngs.resize(n);
  const auto& ic = config_.initial;
  for (std::size_t i = 0; i < n; ++i) {
    CounterRng rng(config_.seed, i);
    Vec3 v;
    switch (ic.kind) {
      case InitialCondition::Kind::maxwellian:
        v = sample_background(rng);
        break;
      case InitialCondition::Kind::point_mass:
        v = ic.param;
        break;
      case InitialCondition::Kind::anisotropic_gaussian: {
        const Vec3 g = sample_background(rng);
        v = {std::sqrt(ic.param.x) * g.x, std::sqrt(ic.param.y) * g.y, std::sqrt(ic.param.z) * g.z};
        break;
      }
    }
    ensemble_.velocities[i] = v;
    ensemble_.rngs[i] = rng;
  }
}

Simulation::~Simulation() = default;
Simulation::Simulation(Simulation&&) noexcept = default;
Simulation& Simulation::operator=(Simulation&&) noexcept = default;

void Simulation::advance_to(double t_target) {
  if (!(t_target >= ensemble_.time)) throw std::invalid_argument("cannot advance backwards in time");
  if (t_target == ensemble_.time) return;

  const double K = config_.K;
  const double tau = config_.effective_substep();
  const double gamma = config_.kernel.gamma();
  const double b_l1 = engine_->b_l1;
  const double t_start = ensemble_.time;
  const std::size_t n = ensemble_.size();
  const std::size_t n_chunks = (n + kChunk - 1) / kChunk;
  // E[r^gamma] for r ~ chi(3), weight of the second mixture component
  const double chi_moment = relative_speed_moment(gamma, 0.0);

  std::vector<std::uint64_t> accepted(n_chunks, 0), candidates(n_chunks, 0);

  // Draws v_* with density proportional to M(v_*) (R + |v_*|)^gamma, using
  // (R + r)^gamma <= R^gamma + r^gamma.
  auto sample_tilted = [&](double R, CounterRng& rng) -> Vec3 {
    if (gamma == 0.0) return sample_background(rng);
    const double w1 = std::pow(R, gamma);
    for (;;) {
      Vec3 vs;
      double r;
      if (rng.uniform() * (w1 + chi_moment) < w1) {
        vs = sample_background(rng);
        r = norm(vs);
      } else {
        r = std::sqrt(2.0 * rng.gamma_shape_ge1(0.5 * (3.0 + gamma)));
        vs = r * random_unit(rng);
      }
      if (rng.uniform() * (w1 + std::pow(r, gamma)) <= std::pow(R + r, gamma)) return vs;
    }
  };

  auto advance_particle = [&](std::size_t i, std::uint64_t& acc, std::uint64_t& cand) {
    Vec3 v = ensemble_.velocities[i];
    CounterRng& rng = ensemble_.rngs[i];
    const bool traced = i < config_.trace_particles;
    double t = t_start;
    while (t < t_target) {
      const double w_end = std::min(t + tau, t_target);
      // |v(s)| <= |v(t)| (1 + K (s - t)) inside the window
      const auto bound = engine_->majorant.lookup(norm(v) * (1.0 + K * (w_end - t)));
      const double rate = b_l1 * bound.value;
      bool collided = false;
      while (!collided) {
        const double dt = rng.exponential(rate);
        if (t + dt >= w_end) {
          v = shear_drift(v, w_end - t, K);
          t = w_end;
          break;
        }
        t += dt;
        v = shear_drift(v, dt, K);
        ++cand;
        const Vec3 vs = sample_tilted(bound.radius, rng);
        const Vec3 rel = v - vs;
        const double rel_speed = norm(rel);
        const double p = gamma == 0.0 ? 1.0 : std::pow(rel_speed / (bound.radius + norm(vs)), gamma);
        if (p > 1.0 + 1e-12) {
          std::ostringstream msg;
          msg << "thinning majorant violated for particle " << i << " at t = " << t << ": acceptance " << p;
          throw MajorantViolation(msg.str());
        }
        if (!(rel_speed > 0.0)) continue;
        if (gamma != 0.0 && rng.uniform() >= p) continue;
        v = apply_collision(v, vs, sample_scatter_direction(config_.kernel, v, vs, rng)).v_prime;
        if (!is_finite(v)) throw std::runtime_error("non-finite velocity after collision");
        ++acc;
        if (traced) {
          auto& last = engine_->last_collision[i];
          auto& gaps = engine_->gaps[i];
          if (!std::isnan(last) && gaps.size() < config_.trace_gaps_per_particle) gaps.push_back(t - last);
          last = t;
        }
        collided = true;  // restart the window from the new speed
      }
    }
    ensemble_.velocities[i] = v;
  };

  for_each_chunk(n_chunks, config_.threads, [&](std::size_t c) {
    const std::size_t end = std::min(n, (c + 1) * kChunk);
    for (std::size_t i = c * kChunk; i < end; ++i) advance_particle(i, accepted[c], candidates[c]);
  });

  for (std::size_t c = 0; c < n_chunks; ++c) {
    ensemble_.accepted_collisions += accepted[c];
    ensemble_.candidate_collisions += candidates[c];
  }
  ensemble_.time = t_target;
}

std::vector<double> Simulation::interarrival_times() const {
  std::vector<double> out;
  for (const auto& g : engine_->gaps) out.insert(out.end(), g.begin(), g.end());
  return out;
}

MomentEstimate estimate_moments(const Ensemble& ensemble, const std::vector<double>& s_list) {
  if (ensemble.size() == 0) throw std::invalid_argument("cannot estimate moments of an empty ensemble");
  std::array<RunningStats, 6> m;
  std::vector<RunningStats> ms(s_list.size());
  for (const Vec3& v : ensemble.velocities) {
    const auto outer = MomentMatrix::outer(v).entries();
    for (std::size_t k = 0; k < 6; ++k) m[k].add(outer[k]);
    const double speed = norm(v);
    for (std::size_t k = 0; k < s_list.size(); ++k) ms[k].add(std::pow(speed, s_list[k]));
  }
  MomentEstimate e;
  e.time = ensemble.time;
  e.n = ensemble.size();
  for (std::size_t k = 0; k < 6; ++k) {
    e.M[k] = m[k].mean();
    e.M_se[k] = m[k].standard_error();
  }
  for (std::size_t k = 0; k < s_list.size(); ++k) {
    e.Ms[s_list[k]] = ms[k].mean();
    e.Ms_se[s_list[k]] = ms[k].standard_error();
  }
  e.accepted = ensemble.accepted_collisions;
  e.candidates = ensemble.candidate_collisions;
  return e;
}

RunResult run(const SimConfig& config) {
  Simulation sim(config);
  RunResult out;
  for (double t : config.record_times) {
    sim.advance_to(t);
    out.trajectory.push_back(sim.estimate());
  }
  sim.advance_to(config.t_end);
  out.interarrivals = sim.interarrival_times();
  out.final = sim.ensemble();
  return out;
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::stationary:
      return "stationary";
    case Verdict::drifting:
      return "drifting";
    case Verdict::inconclusive:
      return "inconclusive";
  }
  return "";
}

StationarityResult stationarity_test(const std::vector<MomentEstimate>& trajectory, std::size_t window,
                                     double tol_sigma) {
  if (window == 0 || !(tol_sigma > 0.0)) throw std::invalid_argument("window and tol_sigma must be positive");
  if (trajectory.size() < 2 * window)
    throw std::invalid_argument("stationarity test needs at least two windows of records");

  const std::size_t b0 = trajectory.size() - 2 * window;
  auto series = [&](const MomentEstimate& e, std::size_t q) -> std::pair<double, double> {
    if (q < 6) return {e.M[q], e.M_se[q]};
    auto it = e.Ms.find(2.0);
    if (it != e.Ms.end()) return {it->second, e.Ms_se.at(2.0)};
    return {e.M.trace(), e.M_se[0] + e.M_se[3] + e.M_se[5]};
  };

  StationarityResult res;
  bool all_within = true;
  bool any_far = false;
  for (std::size_t q = 0; q < 7; ++q) {
    double mean[2] = {0, 0}, se[2] = {0, 0};
    for (std::size_t blk = 0; blk < 2; ++blk) {
      for (std::size_t k = 0; k < window; ++k) {
        const auto [x, s] = series(trajectory[b0 + blk * window + k], q);
        mean[blk] += x;
        se[blk] += s;
      }
      mean[blk] /= static_cast<double>(window);
      se[blk] /= static_cast<double>(window);
    }
    const double diff = std::abs(mean[1] - mean[0]);
    const double pooled = std::hypot(se[0], se[1]);
    if (diff == 0.0) continue;
    const double ratio = pooled > 0.0 ? diff / pooled : std::numeric_limits<double>::infinity();
    res.max_ratio = std::max(res.max_ratio, ratio);
    if (ratio > tol_sigma) all_within = false;
    if (ratio > 3.0 * tol_sigma) any_far = true;
  }
  res.verdict = all_within ? Verdict::stationary : (any_far ? Verdict::drifting : Verdict::inconclusive);
  return res;
}

double selfsim_diagnostic(const Ensemble& early, const Ensemble& late, double mu) {
  if (!(mu > 0.0)) throw std::invalid_argument("self-similar rescaling needs mu > 0");
  auto rescaled = [mu](const Ensemble& e) {
    std::vector<double> r;
    r.reserve(e.size());
    const double f = std::exp(-0.5 * mu * e.time);
    for (const Vec3& v : e.velocities) r.push_back(norm(v) * f);
    return r;
  };
  return ks_two_sample(rescaled(early), rescaled(late));
}

}  // namespace homoshear
