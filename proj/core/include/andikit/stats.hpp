#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "andikit/gradcam.hpp"
#include "andikit/trajgen.hpp"

namespace andikit::stats {

using traj::Point;

// Cumulants, population convention.
double mean(std::span<const double> x);
double variance(std::span<const double> x);
/// m4 - 3 m2^2 on central moments.
double fourth_cumulant(std::span<const double> x);

/// Per-step displacements of one coordinate (0 = x, 1 = y).
std::vector<double> displacements(std::span<const Point> window, int coord);

/// Lag-1 displacement autocorrelation averaged over both coordinates. A
/// coordinate with zero displacement variance contributes 0.
double autocorrelation(std::span<const Point> window);

/// Angles in [0, pi] between consecutive nonzero displacement vectors.
std::vector<double> turning_angles(std::span<const Point> window);

/// sqrt of the variance of turning_angles / pi; 0 when fewer than two angles
/// are available.
double turning_spread(std::span<const Point> window);

/// AC * turning_spread.
double consistency_raw(std::span<const Point> window);

/// |(1 / (2 n_sub)) sum_r sum_i k4_i / k2_i^2| over n_sub equal runs of the
/// displacements; zero-variance runs contribute 0.
double non_gaussianity_raw(std::span<const Point> window, std::size_t n_sub);

/// max over coordinates of the standard deviation of (d[t+1] + eps) / (d[t] + eps).
double ratio_spread(std::span<const Point> window, double eps = 1e-6);

/// ratio_spread * NG_raw.
double singularity_raw(std::span<const Point> window, std::size_t n_sub, double eps = 1e-6);

/// (1 / (2 n_sub)) sum_r (sqrt(k2_last) - sqrt(k2_first)) / sqrt(k2_all).
double diffusivity_drift(std::span<const Point> window, std::size_t n_sub);

/// diffusivity_drift * NG_raw.
double varying_diffusivity_raw(std::span<const Point> window, std::size_t n_sub);

/// (v - min) / (max - min); a constant corpus maps to 0.
std::vector<double> minmax_normalize(std::span<const double> values);

/// Pearson coefficient, or nullopt when either series is constant.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

struct WindowStats {
  std::size_t trajectory_id = 0;
  std::size_t label = 0;
  std::size_t start = 0;
  std::size_t length = 0;
  std::size_t n_sub = 4;
  double gradcam = 0.0;
  double AC = 0.0;
  double turning = 0.0;  // turning_spread
  double ratio = 0.0;    // ratio_spread
  double drift = 0.0;    // diffusivity_drift
  double CS_raw = 0.0;
  double NG_raw = 0.0;
  double SG_raw = 0.0;
  double VD_raw = 0.0;
  // corpus-normalized variants, filled by normalize_corpus
  double CS = 0.0;
  double NG = 0.0;
  double SG = 0.0;
  double VD = 0.0;
};

WindowStats window_stats(std::span<const Point> window, std::size_t n_sub);

/// Fills the normalized fields from min-max scaling over the whole corpus:
/// CS = AC * mm(turning), NG = mm(NG_raw), SG = mm(ratio) * mm(NG_raw),
/// VD = drift * mm(NG_raw).
void normalize_corpus(std::vector<WindowStats>& corpus);

inline constexpr std::array<const char*, 4> kCorrelatedStats{"AC", "CS", "SG", "VD"};

struct CorrelationTable {
  /// r[class][stat] for stats in kCorrelatedStats order; nullopt when undefined.
  std::array<std::array<std::optional<double>, 4>, traj::kNumClasses> r{};
  std::array<std::size_t, traj::kNumClasses> windows{};
};

/// Per class, Pearson r between each statistic and the window's Grad-CAM score,
/// pooling the windows of all trajectories of that class.
CorrelationTable correlate(const std::vector<WindowStats>& corpus);

struct CorrelationReport {
  std::size_t window = 0;
  std::size_t stride = 0;
  std::size_t n_sub = 4;
  cam::ClassChoice class_choice = cam::ClassChoice::True;
  std::vector<WindowStats> windows;
  CorrelationTable table;
};

/// Window statistics and Grad-CAM correlations over a fixed-length dataset
/// whose length equals the model input length.
template <typename T>
CorrelationReport correlation_report(net::ResAnDi<T>& model, const traj::Dataset& data, std::size_t window,
                                     std::size_t stride, std::size_t n_sub,
                                     cam::ClassChoice choice = cam::ClassChoice::True, unsigned workers = 1);

}  // namespace andikit::stats
