#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace andikit::traj {

/// The eight classification targets. The enumerator order is the class index
/// used everywhere (network outputs, confusion matrices, files).
enum class Mechanism : std::uint8_t {
  SubATTM = 0,
  SubCTRW,
  SubFBM,
  SubSBM,
  SupFBM,
  SupLW,
  SupSBM,
  BM,
};

inline constexpr std::size_t kNumClasses = 8;

inline constexpr std::array<Mechanism, kNumClasses> kAllMechanisms{
    Mechanism::SubATTM, Mechanism::SubCTRW, Mechanism::SubFBM, Mechanism::SubSBM,
    Mechanism::SupFBM,  Mechanism::SupLW,   Mechanism::SupSBM, Mechanism::BM};

/// Underlying stochastic process family of a mechanism.
enum class Process : std::uint8_t { ATTM, CTRW, FBM, LW, SBM, BM };

std::string_view to_string(Mechanism m);
Mechanism parse_mechanism(std::string_view name);
Process process_of(Mechanism m);

constexpr std::size_t class_index(Mechanism m) { return static_cast<std::size_t>(m); }
Mechanism mechanism_at(std::size_t index);

bool is_subdiffusive(Mechanism m);
bool is_superdiffusive(Mechanism m);

/// True when `alpha` lies in the exponent range of `m`.
bool alpha_valid_for(Mechanism m, double alpha);

/// Thrown when a trajectory carries no motion (all displacements zero).
class DegenerateTrajectory : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

/// Generator parameters actually used for one trajectory. Fields that do not
/// apply to the generating process are left at zero.
struct GenerationParams {
  double sigma = 0.0;            // ATTM / LW tail parameter
  double gamma = 0.0;            // ATTM sojourn exponent
  double diffusion_coeff = 0.0;  // D
  double fbm_coeff = 0.0;        // K in the fGn covariance
  double speed = 0.0;            // LW maximum flight speed
  std::uint64_t seed = 0;
};

struct Trajectory {
  Mechanism label = Mechanism::BM;
  double alpha = 1.0;
  std::vector<Point> positions;
  GenerationParams params;

  std::size_t length() const { return positions.size(); }
};

// ---------------------------------------------------------------------------
// Random streams

using Rng = std::mt19937_64;

/// Mixes a dataset seed and a record index into an independent 64-bit seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

inline Rng make_substream(std::uint64_t seed, std::uint64_t index) {
  return Rng(derive_seed(seed, index));
}

/// Uniform on [0, 1).
double uniform01(Rng& rng);
/// Uniform on (0, 1].
double uniform01_open_low(Rng& rng);
double standard_normal(Rng& rng);

// ---------------------------------------------------------------------------
// Generators

double sample_exponent(Mechanism label, Rng& rng);

/// A generated path plus the event times of the underlying renewal process
/// (CTRW jump times, LW flight switches, ATTM diffusivity changes). Event
/// times are in units of the sampling step; empty for FBM/SBM/BM.
struct GeneratedPath {
  std::vector<Point> positions;
  std::vector<double> event_times;
  GenerationParams params;
};

GeneratedPath generate_attm(double alpha, std::size_t length, Rng& rng);
GeneratedPath generate_ctrw(double alpha, std::size_t length, Rng& rng);
GeneratedPath generate_fbm(double alpha, std::size_t length, Rng& rng);
GeneratedPath generate_levy_walk(double alpha, std::size_t length, Rng& rng);
GeneratedPath generate_sbm(double alpha, std::size_t length, Rng& rng);
GeneratedPath generate_brownian(std::size_t length, Rng& rng);

/// Mittag-Leffler distributed waiting time (unit scale): a power-law tail
/// with index `alpha` and no hard minimum, so the renewal transient is short.
double sample_ctrw_waiting_time(double alpha, Rng& rng);

/// Minimum flight duration of the Levy walk.
inline constexpr double kFlightTimeScale = 0.1;
/// Pareto flight duration with minimum kFlightTimeScale and tail index `sigma`.
double sample_flight_duration(double sigma, Rng& rng);
/// Residual duration of the flight in progress at t = 0 for a walk started in
/// equilibrium. Used for the first flight of every LW path.
double sample_residual_flight_duration(double sigma, Rng& rng);

Trajectory gen_trajectory(Mechanism label, double alpha, std::size_t length, Rng& rng);

// ---------------------------------------------------------------------------
// Fractional Gaussian noise

/// Autocovariance of unit-variance fGn at integer lag k for Hurst exponent h.
double fgn_autocovariance(double hurst, std::size_t lag);

enum class FgnMethod : std::uint8_t { Auto, Circulant, Hosking };

struct FgnPair {
  std::vector<double> first;
  std::vector<double> second;
  FgnMethod method_used = FgnMethod::Auto;
};

/// Two independent unit-variance fGn sequences of length n. `Auto` uses
/// circulant embedding and falls back to Hosking's recursion if the embedding
/// has a negative eigenvalue.
FgnPair fractional_gaussian_noise(double hurst, std::size_t n, Rng& rng,
                                  FgnMethod method = FgnMethod::Auto);

/// Eigenvalues of the minimal circulant embedding (size 2n) of the fGn
/// covariance. All nonnegative means the embedding is usable.
std::vector<double> circulant_eigenvalues(double hurst, std::size_t n);

// ---------------------------------------------------------------------------
// Transforms

/// Pooled standard deviation (population convention) of the per-step
/// displacements of both coordinates.
double pooled_displacement_std(const Trajectory& traj);

Trajectory rescale_unit_variance(Trajectory traj);
Trajectory add_measurement_noise(Trajectory traj, double amplitude, Rng& rng);

/// Per-coordinate min-max normalization followed by left zero padding.
/// Returns channel-major data: [x_0..x_{L-1}, y_0..y_{L-1}].
std::vector<double> preprocess_input(const Trajectory& traj, std::size_t target_len);

// ---------------------------------------------------------------------------
// Datasets

struct LengthLaw {
  std::size_t min_length = 200;
  std::size_t max_length = 200;

  static LengthLaw fixed(std::size_t t) { return {t, t}; }
  bool is_fixed() const { return min_length == max_length; }
};

struct DatasetSpec {
  std::vector<Mechanism> classes{kAllMechanisms.begin(), kAllMechanisms.end()};
  std::size_t per_class = 10;
  LengthLaw length;
  double noise_amplitude = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

using Dataset = std::vector<Trajectory>;

/// Trajectory `index` of the dataset is generated from substream
/// (spec.seed, index), so the result does not depend on `workers`.
Dataset build_dataset(const DatasetSpec& spec, unsigned workers = 1);

inline constexpr std::string_view kDatasetHeader = "andikit-dataset v1";

void write_dataset(std::ostream& out, const Dataset& data);
Dataset read_dataset(std::istream& in);
void save_dataset(const std::string& path, const Dataset& data);
Dataset load_dataset(const std::string& path);

}  // namespace andikit::traj
