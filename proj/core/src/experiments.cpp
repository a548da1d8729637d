#include "andikit/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace andikit::exp {

traj::Trajectory erase_indices(traj::Trajectory traj, std::span<const bool> index_mask) {
  const std::size_t len = index_mask.size();
  const std::size_t t_len = traj.length();
  if (t_len > len) throw std::invalid_argument("erase: trajectory longer than the input mask");
  const std::size_t pad = len - t_len;
  for (std::size_t i = pad; i < len; ++i) {
    if (index_mask[i]) traj.positions[i - pad] = {0.0, 0.0};
  }
  return traj;
}

traj::Trajectory erase_subintervals(traj::Trajectory traj, std::span<const bool> node_mask, std::size_t input_len) {
  const auto runs = cam::assign_to_subintervals(node_mask.size(), input_len);
  std::vector<char> mask(input_len, 0);
  for (std::size_t j = 0; j < runs.size(); ++j) {
    if (!node_mask[j]) continue;
    std::fill(mask.begin() + static_cast<std::ptrdiff_t>(runs[j].start),
              mask.begin() + static_cast<std::ptrdiff_t>(runs[j].end), 1);
  }
  std::vector<bool> m(mask.begin(), mask.end());
  std::unique_ptr<bool[]> flat(new bool[input_len]);
  for (std::size_t i = 0; i < input_len; ++i) flat[i] = m[i];
  return erase_indices(std::move(traj), std::span<const bool>(flat.get(), input_len));
}

namespace {

void require_decile(std::size_t d) {
  if (d < 1 || d > 10) throw std::invalid_argument("decile must be in 1..10, got " + std::to_string(d));
}

/// Input indices ordered by (score, index).
std::vector<std::size_t> rank_indices(std::span<const double> index_scores) {
  std::vector<std::size_t> order(index_scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return index_scores[a] < index_scores[b]; });
  return order;
}

std::unique_ptr<bool[]> to_flat(const std::vector<bool>& v) {
  std::unique_ptr<bool[]> flat(new bool[v.size()]);
  for (std::size_t i = 0; i < v.size(); ++i) flat[i] = v[i];
  return flat;
}

traj::Trajectory erase_with(const traj::Trajectory& t, const std::vector<bool>& mask) {
  const auto flat = to_flat(mask);
  return erase_indices(t, std::span<const bool>(flat.get(), mask.size()));
}

}  // namespace

std::vector<bool> decile_mask(std::span<const double> node_scores, std::size_t input_len, std::size_t decile) {
  require_decile(decile);
  const auto scores = cam::expand_to_input(node_scores, input_len);
  const auto order = rank_indices(scores);
  std::vector<bool> mask(input_len, false);
  const std::size_t lo = (decile - 1) * input_len / 10;
  const std::size_t hi = decile * input_len / 10;
  for (std::size_t r = lo; r < hi; ++r) mask[order[r]] = true;
  return mask;
}

template <typename T>
ErasureCurve targeted_erasure_curve(net::ResAnDi<T>& model, const traj::Dataset& data, const ErasureSpec& spec,
                                    unsigned workers) {
  if (data.empty()) throw std::invalid_argument("erasure: empty dataset");
  const std::size_t len = model.config().input_len;
  ErasureCurve curve;
  curve.samples = data.size();
  curve.class_choice = spec.class_choice;
  curve.scope = spec.scope;
  curve.baseline_accuracy = net::evaluate(model, data, workers).accuracy;

  const auto cams = cam::gradcam_dataset(model, data, spec.class_choice, workers);
  const std::size_t nodes = cams.nodes;
  auto node_scores = [&](std::size_t n) { return std::span<const double>(cams.scores.data() + n * nodes, nodes); };

  // Global scope: rank every (trajectory, index) pair once.
  std::vector<std::size_t> global_rank;
  if (spec.scope == DecileScope::Global) {
    std::vector<double> all;
    all.reserve(data.size() * len);
    for (std::size_t n = 0; n < data.size(); ++n) {
      const auto s = cam::expand_to_input(node_scores(n), len);
      all.insert(all.end(), s.begin(), s.end());
    }
    const auto order = rank_indices(all);
    global_rank.resize(order.size());
    for (std::size_t r = 0; r < order.size(); ++r) global_rank[order[r]] = r;
  }

  for (std::size_t d = 1; d <= 10; ++d) {
    traj::Dataset erased(data.size());
    for (std::size_t n = 0; n < data.size(); ++n) {
      std::vector<bool> mask;
      if (spec.scope == DecileScope::PerTrajectory) {
        mask = decile_mask(node_scores(n), len, d);
      } else {
        const std::size_t total = global_rank.size();
        const std::size_t lo = (d - 1) * total / 10, hi = d * total / 10;
        mask.assign(len, false);
        for (std::size_t i = 0; i < len; ++i) {
          const std::size_t r = global_rank[n * len + i];
          mask[i] = r >= lo && r < hi;
        }
      }
      erased[n] = erase_with(data[n], mask);
    }
    curve.decile_accuracy[d - 1] = net::evaluate(model, erased, workers).accuracy;
  }

  traj::Dataset erased(data.size());
  for (std::size_t n = 0; n < data.size(); ++n) {
    traj::Rng rng = traj::make_substream(spec.seed, n);
    std::vector<double> random_scores(nodes);
    for (auto& s : random_scores) s = traj::uniform01(rng);
    const std::size_t d = 1 + std::min<std::size_t>(9, static_cast<std::size_t>(traj::uniform01(rng) * 10.0));
    erased[n] = erase_with(data[n], decile_mask(random_scores, len, d));
  }
  curve.random_accuracy = net::evaluate(model, erased, workers).accuracy;
  return curve;
}

template ErasureCurve targeted_erasure_curve(net::ResAnDi<float>&, const traj::Dataset&, const ErasureSpec&, unsigned);
template ErasureCurve targeted_erasure_curve(net::ResAnDi<double>&, const traj::Dataset&, const ErasureSpec&, unsigned);

traj::Trajectory rotate_trajectory(traj::Trajectory traj, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  for (auto& p : traj.positions) p = {p.x * c - p.y * s, p.x * s + p.y * c};
  return traj;
}

std::string_view to_string(AugmentMode m) { return m == AugmentMode::Targeted ? "targeted" : "random"; }

AugmentMode parse_augment_mode(std::string_view s) {
  if (s == "targeted") return AugmentMode::Targeted;
  if (s == "random") return AugmentMode::Random;
  throw std::invalid_argument("augmentation mode must be 'targeted' or 'random', got '" + std::string(s) + "'");
}

void AugmentationSpec::validate() const {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw std::invalid_argument("augmentation fraction must be in (0, 1]");
}

Augmented augment_dataset(const traj::Dataset& train, net::ResAnDi<float>* model, const AugmentationSpec& spec,
                          unsigned workers) {
  spec.validate();
  if (train.empty()) throw std::invalid_argument("augment: empty training set");
  const std::size_t n = train.size();
  const auto extra = static_cast<std::size_t>(std::ceil(spec.fraction * static_cast<double>(n) - 1e-9));
  Augmented out;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  traj::Rng rng = traj::make_substream(spec.seed, 0xa06);
  if (spec.mode == AugmentMode::Targeted) {
    if (!model) throw std::invalid_argument("targeted augmentation needs a trained model");
    const auto cams = cam::gradcam_dataset(*model, train, spec.class_choice, workers);
    out.manifest.mean_scores.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < cams.nodes; ++j) s += cams.scores[i * cams.nodes + j];
      out.manifest.mean_scores[i] = s / static_cast<double>(cams.nodes);
    }
    const auto& ms = out.manifest.mean_scores;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ms[a] > ms[b]; });
  } else {
    for (std::size_t i = n; i > 1; --i) {
      const auto j = std::min(i - 1, static_cast<std::size_t>(traj::uniform01(rng) * static_cast<double>(i)));
      std::swap(order[i - 1], order[j]);
    }
  }
  out.data = train;
  out.data.reserve(n + extra);
  for (std::size_t k = 0; k < extra; ++k) {
    const std::size_t idx = order[k];
    const double angle = 2.0 * std::numbers::pi * traj::uniform01(rng);
    out.manifest.selected.push_back(idx);
    out.manifest.angles.push_back(angle);
    out.data.push_back(rotate_trajectory(train[idx], angle));
  }
  return out;
}

std::vector<double> default_noise_grid() {
  std::vector<double> g;
  for (int i = 0; i <= 10; ++i) g.push_back(i / 10.0);
  return g;
}

std::vector<NoiseCurve> noise_robustness_curve(
    const std::vector<std::pair<std::string, std::vector<net::ResAnDi<float>*>>>& schemes,
    const traj::DatasetSpec& test_spec, std::span<const double> grid, unsigned workers) {
  if (grid.empty()) throw std::invalid_argument("noise grid is empty");
  if (schemes.empty()) throw std::invalid_argument("noise robustness needs at least one scheme");
  std::vector<NoiseCurve> curves;
  for (const auto& [name, models] : schemes) {
    if (models.empty()) throw std::invalid_argument("scheme '" + name + "' has no models");
    curves.push_back({name, {}});
  }
  for (std::size_t g = 0; g < grid.size(); ++g) {
    auto spec = test_spec;
    spec.noise_amplitude = grid[g];
    spec.seed = traj::derive_seed(test_spec.seed, g);
    const auto test = traj::build_dataset(spec, workers);
    for (std::size_t s = 0; s < schemes.size(); ++s) {
      NoiseLevel level;
      level.noise = grid[g];
      for (auto* m : schemes[s].second) level.accuracies.push_back(net::evaluate(*m, test, workers).accuracy);
      const auto k = static_cast<double>(level.accuracies.size());
      level.mean = std::accumulate(level.accuracies.begin(), level.accuracies.end(), 0.0) / k;
      if (level.accuracies.size() > 1) {
        double ss = 0.0;
        for (double a : level.accuracies) ss += (a - level.mean) * (a - level.mean);
        level.std_error = std::sqrt(ss / (k - 1.0)) / std::sqrt(k);
      }
      curves[s].levels.push_back(level);
    }
  }
  return curves;
}

}  // namespace andikit::exp
