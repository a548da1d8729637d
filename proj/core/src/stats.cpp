#include "andikit/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace andikit::stats {
namespace {

void require_points(std::span<const Point> window, std::size_t min_points, const char* what) {
  if (window.size() < min_points) {
    throw std::invalid_argument(std::string(what) + ": window needs at least " + std::to_string(min_points) +
                                " points, got " + std::to_string(window.size()));
  }
}

std::vector<cam::Range> runs_for(std::size_t n_disp, std::size_t n_sub, std::size_t min_each, const char* what) {
  if (n_sub == 0) throw std::invalid_argument(std::string(what) + ": n_sub must be positive");
  if (n_disp < n_sub * min_each) {
    throw std::invalid_argument(std::string(what) + ": " + std::to_string(n_disp) + " displacements cannot fill " +
                                std::to_string(n_sub) + " subintervals of " + std::to_string(min_each));
  }
  return cam::assign_to_subintervals(n_sub, n_disp);
}

std::span<const double> slice(const std::vector<double>& v, const cam::Range& r) {
  return std::span<const double>(v).subspan(r.start, r.size());
}

}  // namespace

double mean(std::span<const double> x) {
  if (x.empty()) throw std::invalid_argument("mean of an empty sample");
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

double variance(std::span<const double> x) {
  const double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size());
}

double fourth_cumulant(std::span<const double> x) {
  const double m = mean(x);
  double m2 = 0.0, m4 = 0.0;
  for (double v : x) {
    const double d2 = (v - m) * (v - m);
    m2 += d2;
    m4 += d2 * d2;
  }
  m2 /= static_cast<double>(x.size());
  m4 /= static_cast<double>(x.size());
  return m4 - 3.0 * m2 * m2;
}

std::vector<double> displacements(std::span<const Point> window, int coord) {
  std::vector<double> d;
  if (window.size() < 2) return d;
  d.reserve(window.size() - 1);
  for (std::size_t t = 1; t < window.size(); ++t) {
    d.push_back(coord == 0 ? window[t].x - window[t - 1].x : window[t].y - window[t - 1].y);
  }
  return d;
}

double autocorrelation(std::span<const Point> window) {
  require_points(window, 3, "autocorrelation");
  double total = 0.0;
  for (int c = 0; c < 2; ++c) {
    const auto d = displacements(window, c);
    const double var = variance(d);
    if (var == 0.0) continue;
    double lag = 0.0;
    for (std::size_t t = 0; t + 1 < d.size(); ++t) lag += d[t] * d[t + 1];
    lag /= static_cast<double>(d.size() - 1);
    const double m = mean(d);
    total += (lag - m * m) / var;
  }
  return 0.5 * total;
}

std::vector<double> turning_angles(std::span<const Point> window) {
  std::vector<Point> steps;
  for (std::size_t t = 1; t < window.size(); ++t) {
    const Point s{window[t].x - window[t - 1].x, window[t].y - window[t - 1].y};
    if (s.x != 0.0 || s.y != 0.0) steps.push_back(s);
  }
  if (steps.size() < 2) throw std::invalid_argument("turning_angles: fewer than 2 nonzero displacements");
  std::vector<double> out;
  out.reserve(steps.size() - 1);
  for (std::size_t t = 1; t < steps.size(); ++t) {
    const auto& a = steps[t - 1];
    const auto& b = steps[t];
    const double c = (a.x * b.x + a.y * b.y) / (std::hypot(a.x, a.y) * std::hypot(b.x, b.y));
    out.push_back(std::acos(std::clamp(c, -1.0, 1.0)));
  }
  return out;
}

double turning_spread(std::span<const Point> window) {
  std::vector<double> angles;
  try {
    angles = turning_angles(window);
  } catch (const std::invalid_argument&) {
    return 0.0;
  }
  for (auto& a : angles) a /= std::numbers::pi;
  return std::sqrt(variance(angles));
}

double consistency_raw(std::span<const Point> window) { return autocorrelation(window) * turning_spread(window); }

double non_gaussianity_raw(std::span<const Point> window, std::size_t n_sub) {
  const std::size_t n = window.size() < 2 ? 0 : window.size() - 1;
  const auto runs = runs_for(n, n_sub, 4, "non_gaussianity");
  double total = 0.0;
  for (int c = 0; c < 2; ++c) {
    const auto d = displacements(window, c);
    for (const auto& r : runs) {
      const auto part = slice(d, r);
      const double k2 = variance(part);
      if (k2 == 0.0) continue;
      total += fourth_cumulant(part) / (k2 * k2);
    }
  }
  return std::abs(total / (2.0 * static_cast<double>(n_sub)));
}

double ratio_spread(std::span<const Point> window, double eps) {
  require_points(window, 4, "singularity");
  double best = 0.0;
  for (int c = 0; c < 2; ++c) {
    const auto d = displacements(window, c);
    std::vector<double> ratio(d.size() - 1);
    for (std::size_t t = 0; t + 1 < d.size(); ++t) ratio[t] = (d[t + 1] + eps) / (d[t] + eps);
    best = std::max(best, std::sqrt(variance(ratio)));
  }
  return best;
}

double singularity_raw(std::span<const Point> window, std::size_t n_sub, double eps) {
  return ratio_spread(window, eps) * non_gaussianity_raw(window, n_sub);
}

double diffusivity_drift(std::span<const Point> window, std::size_t n_sub) {
  const std::size_t n = window.size() < 2 ? 0 : window.size() - 1;
  const auto runs = runs_for(n, n_sub, 2, "varying_diffusivity");
  double total = 0.0;
  for (int c = 0; c < 2; ++c) {
    const auto d = displacements(window, c);
    const double all = variance(d);
    if (all == 0.0) continue;
    const double first = variance(slice(d, runs.front()));
    const double last = variance(slice(d, runs.back()));
    total += (std::sqrt(last) - std::sqrt(first)) / std::sqrt(all);
  }
  return total / (2.0 * static_cast<double>(n_sub));
}

double varying_diffusivity_raw(std::span<const Point> window, std::size_t n_sub) {
  return diffusivity_drift(window, n_sub) * non_gaussianity_raw(window, n_sub);
}

std::vector<double> minmax_normalize(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("minmax_normalize: empty corpus");
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double a = *lo, range = *hi - *lo;
  std::vector<double> out(values.size(), 0.0);
  if (range > 0.0) {
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - a) / range;
  }
  return out;
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("pearson: series lengths differ");
  if (x.size() < 2) throw std::invalid_argument("pearson: need at least 2 samples");
  const double mx = mean(x), my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

WindowStats window_stats(std::span<const Point> window, std::size_t n_sub) {
  WindowStats w;
  w.length = window.size();
  w.n_sub = n_sub;
  w.AC = autocorrelation(window);
  w.turning = turning_spread(window);
  w.ratio = ratio_spread(window);
  w.drift = diffusivity_drift(window, n_sub);
  w.NG_raw = non_gaussianity_raw(window, n_sub);
  w.CS_raw = w.AC * w.turning;
  w.SG_raw = w.ratio * w.NG_raw;
  w.VD_raw = w.drift * w.NG_raw;
  return w;
}

void normalize_corpus(std::vector<WindowStats>& corpus) {
  if (corpus.empty()) return;
  std::vector<double> turning, ratio, ng;
  for (const auto& w : corpus) {
    turning.push_back(w.turning);
    ratio.push_back(w.ratio);
    ng.push_back(w.NG_raw);
  }
  const auto t = minmax_normalize(turning);
  const auto r = minmax_normalize(ratio);
  const auto g = minmax_normalize(ng);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    auto& w = corpus[i];
    w.CS = w.AC * t[i];
    w.NG = g[i];
    w.SG = r[i] * g[i];
    w.VD = w.drift * g[i];
  }
}

CorrelationTable correlate(const std::vector<WindowStats>& corpus) {
  CorrelationTable table;
  for (std::size_t c = 0; c < traj::kNumClasses; ++c) {
    std::array<std::vector<double>, 4> s;
    std::vector<double> g;
    for (const auto& w : corpus) {
      if (w.label != c) continue;
      s[0].push_back(w.AC);
      s[1].push_back(w.CS);
      s[2].push_back(w.SG);
      s[3].push_back(w.VD);
      g.push_back(w.gradcam);
    }
    table.windows[c] = g.size();
    if (g.size() < 2) continue;
    for (std::size_t k = 0; k < 4; ++k) table.r[c][k] = pearson(s[k], g);
  }
  return table;
}

template <typename T>
CorrelationReport correlation_report(net::ResAnDi<T>& model, const traj::Dataset& data, std::size_t window,
                                     std::size_t stride, std::size_t n_sub, cam::ClassChoice choice,
                                     unsigned workers) {
  if (data.empty()) throw std::invalid_argument("correlation_report: empty dataset");
  const std::size_t len = model.config().input_len;
  for (const auto& t : data) {
    if (t.length() != len) {
      throw std::invalid_argument("correlation_report needs trajectories of the model input length " +
                                  std::to_string(len));
    }
  }
  CorrelationReport report;
  report.window = window;
  report.stride = stride;
  report.n_sub = n_sub;
  report.class_choice = choice;
  const auto cams = cam::gradcam_dataset(model, data, choice, workers);
  for (std::size_t n = 0; n < data.size(); ++n) {
    const std::span<const double> g(cams.scores.data() + n * cams.nodes, cams.nodes);
    for (const auto& win : cam::subtrajectory_scores(g, len, window, stride)) {
      const std::span<const Point> pts(data[n].positions.data() + win.start, window);
      auto w = window_stats(pts, n_sub);
      w.trajectory_id = n;
      w.label = traj::class_index(data[n].label);
      w.start = win.start;
      w.gradcam = win.score;
      report.windows.push_back(w);
    }
  }
  normalize_corpus(report.windows);
  report.table = correlate(report.windows);
  return report;
}

template CorrelationReport correlation_report(net::ResAnDi<float>&, const traj::Dataset&, std::size_t, std::size_t,
                                              std::size_t, cam::ClassChoice, unsigned);
template CorrelationReport correlation_report(net::ResAnDi<double>&, const traj::Dataset&, std::size_t, std::size_t,
                                              std::size_t, cam::ClassChoice, unsigned);

}  // namespace andikit::stats
