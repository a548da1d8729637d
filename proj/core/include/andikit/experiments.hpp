#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "andikit/gradcam.hpp"
#include "andikit/network.hpp"

namespace andikit::exp {

// ---------------------------------------------------------------------------
// Erasure

/// Sets the points covered by the masked input indices to (0, 0). `index_mask`
/// spans the model input (length L); input index i maps to trajectory index
/// i - (L - T), so indices in the zero padding have no effect.
traj::Trajectory erase_indices(traj::Trajectory traj, std::span<const bool> index_mask);

/// Subinterval form of erase_indices: `node_mask` has one entry per Grad-CAM
/// node, expanded over assign_to_subintervals(|mask|, input_len).
traj::Trajectory erase_subintervals(traj::Trajectory traj, std::span<const bool> node_mask,
                                    std::size_t input_len);

/// Input-index mask of decile d (1 = lowest scores, 10 = highest). Every input
/// index carries its node's score; indices are ranked by (score, index) and
/// decile d takes ranks [floor((d-1) L / 10), floor(d L / 10)).
std::vector<bool> decile_mask(std::span<const double> node_scores, std::size_t input_len, std::size_t decile);

enum class DecileScope { PerTrajectory, Global };

struct ErasureSpec {
  cam::ClassChoice class_choice = cam::ClassChoice::Predicted;
  DecileScope scope = DecileScope::PerTrajectory;
  std::uint64_t seed = 0;
};

struct ErasureCurve {
  std::array<double, 10> decile_accuracy{};
  /// Same erased fraction with node scores replaced by random values.
  double random_accuracy = 0.0;
  double baseline_accuracy = 0.0;
  std::size_t samples = 0;
  cam::ClassChoice class_choice = cam::ClassChoice::Predicted;
  DecileScope scope = DecileScope::PerTrajectory;
};

template <typename T>
ErasureCurve targeted_erasure_curve(net::ResAnDi<T>& model, const traj::Dataset& data, const ErasureSpec& spec,
                                    unsigned workers = 1);

// ---------------------------------------------------------------------------
// Augmentation

/// Rotation about the origin by `angle` radians.
traj::Trajectory rotate_trajectory(traj::Trajectory traj, double angle);

enum class AugmentMode { Targeted, Random };

std::string_view to_string(AugmentMode m);
AugmentMode parse_augment_mode(std::string_view s);

struct AugmentationSpec {
  AugmentMode mode = AugmentMode::Targeted;
  double fraction = 0.6;
  cam::ClassChoice class_choice = cam::ClassChoice::Predicted;
  std::uint64_t seed = 0;

  void validate() const;
};

struct AugmentationManifest {
  std::vector<std::size_t> selected;  // indices into the original set, in append order
  std::vector<double> angles;
  /// Mean node score of every original trajectory (targeted mode only).
  std::vector<double> mean_scores;
};

struct Augmented {
  traj::Dataset data;
  AugmentationManifest manifest;
};

/// Appends ceil(fraction * N) rotated copies. Targeted mode ranks trajectories
/// by mean Grad-CAM score of `model` and copies the top ones; random mode
/// draws the copies uniformly without replacement.
Augmented augment_dataset(const traj::Dataset& train, net::ResAnDi<float>* model, const AugmentationSpec& spec,
                          unsigned workers = 1);

// ---------------------------------------------------------------------------
// Noise robustness

struct NoiseLevel {
  double noise = 0.0;
  std::vector<double> accuracies;  // one per model
  double mean = 0.0;
  double std_error = 0.0;  // sample sd / sqrt(n); 0 for a single model
};

struct NoiseCurve {
  std::string scheme;
  std::vector<NoiseLevel> levels;
};

/// Default grid 0, 0.1, ..., 1.0.
std::vector<double> default_noise_grid();

/// Generates one test set per noise level from `test_spec` (noise amplitude
/// replaced by the level, seed derived from the level index) and evaluates
/// every model of every scheme on it.
std::vector<NoiseCurve> noise_robustness_curve(const std::vector<std::pair<std::string, std::vector<net::ResAnDi<float>*>>>& schemes,
                                               const traj::DatasetSpec& test_spec, std::span<const double> grid,
                                               unsigned workers = 1);

}  // namespace andikit::exp
