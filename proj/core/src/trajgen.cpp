#include "andikit/trajgen.hpp"

#include "andikit/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace andikit::traj {
namespace {

constexpr std::array<std::string_view, kNumClasses> kNames{
    "SubATTM", "SubCTRW", "SubFBM", "SubSBM", "SupFBM", "SupLW", "SupSBM", "BM"};

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

void require_length(std::size_t length) {
  if (length < 2) throw std::invalid_argument("trajectory length must be at least 2");
}

void require_alpha(Mechanism m, double alpha) {
  if (!alpha_valid_for(m, alpha)) {
    throw std::invalid_argument("alpha " + std::to_string(alpha) + " out of range for " +
                                std::string(to_string(m)));
  }
}

}  // namespace

std::string_view to_string(Mechanism m) { return kNames.at(class_index(m)); }

Mechanism parse_mechanism(std::string_view name) {
  for (std::size_t i = 0; i < kNames.size(); ++i) {
    if (kNames[i] == name) return static_cast<Mechanism>(i);
  }
  throw std::invalid_argument("unknown mechanism label '" + std::string(name) + "'");
}

Mechanism mechanism_at(std::size_t index) {
  if (index >= kNumClasses) throw std::out_of_range("class index out of range");
  return static_cast<Mechanism>(index);
}

Process process_of(Mechanism m) {
  switch (m) {
    case Mechanism::SubATTM: return Process::ATTM;
    case Mechanism::SubCTRW: return Process::CTRW;
    case Mechanism::SubFBM:
    case Mechanism::SupFBM: return Process::FBM;
    case Mechanism::SubSBM:
    case Mechanism::SupSBM: return Process::SBM;
    case Mechanism::SupLW: return Process::LW;
    case Mechanism::BM: return Process::BM;
  }
  throw std::invalid_argument("unknown mechanism");
}

bool is_subdiffusive(Mechanism m) {
  return m == Mechanism::SubATTM || m == Mechanism::SubCTRW || m == Mechanism::SubFBM ||
         m == Mechanism::SubSBM;
}

bool is_superdiffusive(Mechanism m) {
  return m == Mechanism::SupFBM || m == Mechanism::SupLW || m == Mechanism::SupSBM;
}

bool alpha_valid_for(Mechanism m, double alpha) {
  if (!std::isfinite(alpha)) return false;
  if (m == Mechanism::BM) return alpha == 1.0;
  if (is_subdiffusive(m)) return alpha >= 0.1 && alpha <= 0.9;
  return alpha >= 1.1 && alpha <= 1.9;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(splitmix64(seed) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

double uniform01(Rng& rng) {
  // 53 random mantissa bits; independent of the standard library's
  // distribution implementations.
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double uniform01_open_low(Rng& rng) { return 1.0 - uniform01(rng); }

double standard_normal(Rng& rng) {
  // Box-Muller, one variate per call.
  const double u1 = uniform01_open_low(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double sample_exponent(Mechanism label, Rng& rng) {
  if (class_index(label) >= kNumClasses) throw std::invalid_argument("unknown mechanism");
  if (label == Mechanism::BM) return 1.0;
  const double lo = is_subdiffusive(label) ? 0.1 : 1.1;
  return lo + 0.8 * uniform01(rng);
}

double sample_ctrw_waiting_time(double alpha, Rng& rng) {
  // Kozubowski-Rachev sampler for the Mittag-Leffler law
  const double u = uniform01_open_low(rng);
  const double v = uniform01_open_low(rng);
  const double pa = std::numbers::pi * alpha;
  return -std::log(u) * std::pow(std::sin(pa) / std::tan(pa * v) - std::cos(pa), 1.0 / alpha);
}

double sample_flight_duration(double sigma, Rng& rng) {
  return kFlightTimeScale * std::pow(uniform01_open_low(rng), -1.0 / sigma);
}

double sample_residual_flight_duration(double sigma, Rng& rng) {
  // forward recurrence time of the Pareto renewal process: uniform on
  // [0, t0] with weight (sigma-1)/sigma, else Pareto with index sigma-1
  const double u = uniform01_open_low(rng);
  if (uniform01(rng) < (sigma - 1.0) / sigma) return kFlightTimeScale * u;
  return kFlightTimeScale * std::pow(u, -1.0 / (sigma - 1.0));
}

GeneratedPath generate_attm(double alpha, std::size_t length, Rng& rng) {
  require_length(length);
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("ATTM requires 0 < alpha < 1");
  GeneratedPath out;
  // keep gamma <= sigma + 1/2: near the regime line gamma = sigma + 1 the t^alpha
  // law sets in too slowly to show at T ~ 1000
  const double sigma_max = std::min(3.0, alpha / (2.0 * (1.0 - alpha)));
  const double sigma = sigma_max * uniform01_open_low(rng);
  const double gamma = sigma / alpha;
  out.params.sigma = sigma;
  out.params.gamma = gamma;
  out.params.diffusion_coeff = 1.0;

  out.positions.resize(length);
  std::size_t t = 1;
  Point p{};
  while (t < length) {
    out.event_times.push_back(static_cast<double>(t - 1));
    const double d = std::pow(uniform01_open_low(rng), 1.0 / sigma);
    const double hold = d > 0.0 ? std::ceil(std::pow(d, -gamma)) : HUGE_VAL;
    const auto remaining = static_cast<double>(length - t);
    const auto steps = static_cast<std::size_t>(std::min(hold, remaining));
    const double step_std = std::sqrt(2.0 * d);
    for (std::size_t s = 0; s < steps; ++s, ++t) {
      p.x += step_std * standard_normal(rng);
      p.y += step_std * standard_normal(rng);
      out.positions[t] = p;
    }
  }
  return out;
}

GeneratedPath generate_ctrw(double alpha, std::size_t length, Rng& rng) {
  require_length(length);
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("CTRW requires 0 < alpha < 1");
  GeneratedPath out;
  out.params.diffusion_coeff = 1.0;
  out.positions.resize(length);
  const double jump_std = 1.0;
  double next_jump = sample_ctrw_waiting_time(alpha, rng);
  Point p{};
  for (std::size_t t = 1; t < length; ++t) {
    const auto now = static_cast<double>(t);
    while (next_jump <= now) {
      out.event_times.push_back(next_jump);
      p.x += jump_std * standard_normal(rng);
      p.y += jump_std * standard_normal(rng);
      next_jump += sample_ctrw_waiting_time(alpha, rng);
    }
    out.positions[t] = p;
  }
  return out;
}

GeneratedPath generate_fbm(double alpha, std::size_t length, Rng& rng) {
  require_length(length);
  if (!(alpha > 0.0 && alpha < 2.0)) throw std::invalid_argument("FBM requires 0 < alpha < 2");
  GeneratedPath out;
  // Unit-variance increments: 2K = 1.
  out.params.fbm_coeff = 0.5;
  const auto noise = fractional_gaussian_noise(alpha / 2.0, length - 1, rng);
  out.positions.resize(length);
  for (std::size_t t = 1; t < length; ++t) {
    out.positions[t].x = out.positions[t - 1].x + noise.first[t - 1];
    out.positions[t].y = out.positions[t - 1].y + noise.second[t - 1];
  }
  return out;
}

GeneratedPath generate_levy_walk(double alpha, std::size_t length, Rng& rng) {
  require_length(length);
  if (!(alpha > 1.0 && alpha < 2.0)) throw std::invalid_argument("LW requires 1 < alpha < 2");
  GeneratedPath out;
  const double sigma = 3.0 - alpha;
  constexpr double kMaxSpeed = 10.0;
  out.params.sigma = sigma;
  out.params.speed = kMaxSpeed;
  out.positions.resize(length);

  const auto horizon = static_cast<double>(length - 1);
  double flight_start = 0.0;
  Point origin{};
  std::size_t t = 1;
  while (t < length) {
    out.event_times.push_back(flight_start);
    const double duration = out.event_times.size() == 1 ? sample_residual_flight_duration(sigma, rng)
                                                        : sample_flight_duration(sigma, rng);
    const double speed = kMaxSpeed * uniform01_open_low(rng);
    const double angle = 2.0 * std::numbers::pi * uniform01(rng);
    const double vx = speed * std::cos(angle);
    const double vy = speed * std::sin(angle);
    const double flight_end = flight_start + duration;
    for (; t < length && static_cast<double>(t) <= flight_end; ++t) {
      const double dt = static_cast<double>(t) - flight_start;
      out.positions[t] = {origin.x + vx * dt, origin.y + vy * dt};
    }
    origin = {origin.x + vx * duration, origin.y + vy * duration};
    flight_start = flight_end;
    if (flight_start > horizon) break;
  }
  return out;
}

GeneratedPath generate_sbm(double alpha, std::size_t length, Rng& rng) {
  require_length(length);
  if (!(alpha > 0.0 && alpha < 2.0)) throw std::invalid_argument("SBM requires 0 < alpha < 2");
  GeneratedPath out;
  constexpr double kD = 0.5;
  out.params.diffusion_coeff = kD;
  out.positions.resize(length);
  for (std::size_t t = 1; t < length; ++t) {
    const auto tf = static_cast<double>(t);
    const double var = 2.0 * kD * (std::pow(tf, alpha) - std::pow(tf - 1.0, alpha));
    const double s = std::sqrt(var);
    out.positions[t].x = out.positions[t - 1].x + s * standard_normal(rng);
    out.positions[t].y = out.positions[t - 1].y + s * standard_normal(rng);
  }
  return out;
}

GeneratedPath generate_brownian(std::size_t length, Rng& rng) {
  require_length(length);
  GeneratedPath out;
  out.params.diffusion_coeff = 0.5;
  out.positions.resize(length);
  for (std::size_t t = 1; t < length; ++t) {
    out.positions[t].x = out.positions[t - 1].x + standard_normal(rng);
    out.positions[t].y = out.positions[t - 1].y + standard_normal(rng);
  }
  return out;
}

Trajectory gen_trajectory(Mechanism label, double alpha, std::size_t length, Rng& rng) {
  require_length(length);
  require_alpha(label, alpha);
  GeneratedPath path;
  switch (process_of(label)) {
    case Process::ATTM: path = generate_attm(alpha, length, rng); break;
    case Process::CTRW: path = generate_ctrw(alpha, length, rng); break;
    case Process::FBM: path = generate_fbm(alpha, length, rng); break;
    case Process::LW: path = generate_levy_walk(alpha, length, rng); break;
    case Process::SBM: path = generate_sbm(alpha, length, rng); break;
    case Process::BM: path = generate_brownian(length, rng); break;
  }
  Trajectory traj;
  traj.label = label;
  traj.alpha = alpha;
  traj.positions = std::move(path.positions);
  traj.params = path.params;
  return traj;
}

double pooled_displacement_std(const Trajectory& traj) {
  const auto& p = traj.positions;
  if (p.size() < 2) throw std::invalid_argument("trajectory length must be at least 2");
  const auto n = static_cast<double>(2 * (p.size() - 1));
  double mean = 0.0;
  for (std::size_t t = 1; t < p.size(); ++t) mean += (p[t].x - p[t - 1].x) + (p[t].y - p[t - 1].y);
  mean /= n;
  double ss = 0.0;
  for (std::size_t t = 1; t < p.size(); ++t) {
    const double dx = p[t].x - p[t - 1].x - mean;
    const double dy = p[t].y - p[t - 1].y - mean;
    ss += dx * dx + dy * dy;
  }
  return std::sqrt(ss / n);
}

Trajectory rescale_unit_variance(Trajectory traj) {
  const double s = pooled_displacement_std(traj);
  if (!(s > 0.0) || !std::isfinite(s)) {
    throw DegenerateTrajectory("cannot rescale a trajectory with zero displacement variance");
  }
  for (auto& pt : traj.positions) {
    pt.x /= s;
    pt.y /= s;
  }
  return traj;
}

Trajectory add_measurement_noise(Trajectory traj, double amplitude, Rng& rng) {
  if (!(amplitude >= 0.0) || !std::isfinite(amplitude)) {
    throw std::invalid_argument("noise amplitude must be finite and nonnegative");
  }
  if (amplitude == 0.0) return traj;
  for (auto& pt : traj.positions) {
    pt.x += amplitude * standard_normal(rng);
    pt.y += amplitude * standard_normal(rng);
  }
  return traj;
}

std::vector<double> preprocess_input(const Trajectory& traj, std::size_t target_len) {
  const std::size_t n = traj.positions.size();
  if (n > target_len) {
    throw std::invalid_argument("trajectory length " + std::to_string(n) +
                                " exceeds model input length " + std::to_string(target_len));
  }
  std::vector<double> out(2 * target_len, 0.0);
  if (n == 0) return out;
  const std::size_t pad = target_len - n;
  auto fill = [&](std::size_t channel, auto coord) {
    double lo = coord(traj.positions[0]);
    double hi = lo;
    for (const auto& pt : traj.positions) {
      lo = std::min(lo, coord(pt));
      hi = std::max(hi, coord(pt));
    }
    double* dst = out.data() + channel * target_len + pad;
    if (!(hi > lo)) return;  // constant coordinate: channel stays zero
    const double range = hi - lo;
    for (std::size_t t = 0; t < n; ++t) dst[t] = (coord(traj.positions[t]) - lo) / range;
  };
  fill(0, [](const Point& p) { return p.x; });
  fill(1, [](const Point& p) { return p.y; });
  return out;
}

void DatasetSpec::validate() const {
  if (classes.empty()) throw std::invalid_argument("dataset spec lists no classes");
  for (auto c : classes) {
    if (class_index(c) >= kNumClasses) throw std::invalid_argument("unknown class in dataset spec");
  }
  if (per_class == 0) throw std::invalid_argument("per_class must be positive");
  if (length.min_length < 2) throw std::invalid_argument("trajectory length must be at least 2");
  if (length.max_length < length.min_length) {
    throw std::invalid_argument("length range is empty");
  }
  if (!(noise_amplitude >= 0.0) || !std::isfinite(noise_amplitude)) {
    throw std::invalid_argument("noise amplitude must be finite and nonnegative");
  }
}

namespace {

Trajectory make_record(const DatasetSpec& spec, std::size_t index) {
  const Mechanism label = spec.classes[index / spec.per_class];
  const std::uint64_t seed = derive_seed(spec.seed, index);
  Rng rng(seed);
  const std::size_t span = spec.length.max_length - spec.length.min_length + 1;
  const std::size_t length =
      spec.length.min_length +
      std::min(span - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(span)));
  const double alpha = sample_exponent(label, rng);
  // A heavy-tailed sojourn can leave a short path without motion; redraw from
  // the same stream until it moves.
  for (int attempt = 0;; ++attempt) {
    Trajectory traj = gen_trajectory(label, alpha, length, rng);
    traj.params.seed = seed;
    try {
      traj = rescale_unit_variance(std::move(traj));
    } catch (const DegenerateTrajectory&) {
      if (attempt >= 1000) throw;
      continue;
    }
    return add_measurement_noise(std::move(traj), spec.noise_amplitude, rng);
  }
}

}  // namespace

Dataset build_dataset(const DatasetSpec& spec, unsigned workers) {
  spec.validate();
  Dataset data(spec.classes.size() * spec.per_class);
  parallel_for(data.size(), workers, [&](std::size_t i) { data[i] = make_record(spec, i); });
  return data;
}

}  // namespace andikit::traj
