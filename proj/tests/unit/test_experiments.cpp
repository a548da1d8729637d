#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "andikit/experiments.hpp"

using namespace andikit;
using namespace andikit::exp;

namespace {

traj::Trajectory line(std::size_t n) {
  traj::Trajectory t;
  for (std::size_t i = 0; i < n; ++i) t.positions.push_back({double(i + 1), -double(i + 1)});
  return t;
}

std::vector<bool> as_vec(std::span<const bool> s) { return {s.begin(), s.end()}; }

std::vector<bool> mask_of(std::size_t len, std::initializer_list<std::size_t> on) {
  std::vector<bool> m(len, false);
  for (auto i : on) m[i] = true;
  return m;
}

traj::Trajectory erase_vec(const traj::Trajectory& t, const std::vector<bool>& m) {
  std::unique_ptr<bool[]> flat(new bool[m.size()]);
  for (std::size_t i = 0; i < m.size(); ++i) flat[i] = m[i];
  return erase_indices(t, std::span<const bool>(flat.get(), m.size()));
}

net::ModelConfig tiny() {
  net::ModelConfig c;
  c.input_len = 64;
  c.scale = 0.0625;
  return c;
}

traj::Dataset small_data(std::size_t per_class, std::size_t len, std::uint64_t seed) {
  traj::DatasetSpec s;
  s.per_class = per_class;
  s.length = traj::LengthLaw::fixed(len);
  s.seed = seed;
  return traj::build_dataset(s);
}

}  // namespace

TEST(Erase, FullLengthIndices) {
  const auto t = erase_vec(line(6), mask_of(6, {0, 4}));
  EXPECT_EQ(t.positions[0], (traj::Point{0, 0}));
  EXPECT_EQ(t.positions[4], (traj::Point{0, 0}));
  EXPECT_EQ(t.positions[1], (traj::Point{2, -2}));
  EXPECT_EQ(t.positions[5], (traj::Point{6, -6}));
}

TEST(Erase, PaddedIndicesShift) {
  // input length 8, trajectory 5: input index i is point i - 3
  const auto t = erase_vec(line(5), mask_of(8, {0, 1, 2, 3, 7}));
  EXPECT_EQ(t.positions[0], (traj::Point{0, 0}));
  EXPECT_EQ(t.positions[4], (traj::Point{0, 0}));
  for (std::size_t i = 1; i < 4; ++i) EXPECT_EQ(t.positions[i], (traj::Point{double(i + 1), -double(i + 1)}));
  EXPECT_THROW(erase_vec(line(9), mask_of(8, {})), std::invalid_argument);
}

TEST(Erase, SubintervalNodes) {
  // 10 inputs over 4 nodes: runs 3,3,2,2
  const bool nodes[4] = {false, true, false, true};
  const auto t = erase_subintervals(line(10), nodes, 10);
  for (std::size_t i = 0; i < 10; ++i) {
    const bool erased = (i >= 3 && i < 6) || i >= 8;
    EXPECT_EQ(t.positions[i] == (traj::Point{0, 0}), erased) << i;
  }
}

TEST(Deciles, PartitionExactly) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u;
  for (std::size_t len : {1000u, 200u, 64u, 57u}) {
    std::vector<double> s(len >= 32 ? 32 : 2);
    for (auto& v : s) v = u(rng);
    std::vector<int> hits(len, 0);
    for (std::size_t d = 1; d <= 10; ++d) {
      const auto m = decile_mask(s, len, d);
      const auto count = std::count(m.begin(), m.end(), true);
      EXPECT_EQ(std::size_t(count), d * len / 10 - (d - 1) * len / 10);
      for (std::size_t i = 0; i < len; ++i) hits[i] += m[i];
    }
    for (int h : hits) EXPECT_EQ(h, 1);
  }
  EXPECT_THROW(decile_mask(std::vector<double>{1.0}, 10, 0), std::invalid_argument);
  EXPECT_THROW(decile_mask(std::vector<double>{1.0}, 10, 11), std::invalid_argument);
}

TEST(Deciles, OrderedByScore) {
  // node scores increase except the last: deciles 1..10 are ordered
  std::vector<double> s(32);
  for (std::size_t j = 0; j < 32; ++j) s[j] = double(j);
  s[31] = -1.0;
  const auto lowest = decile_mask(s, 1000, 1);
  const auto runs = cam::assign_to_subintervals(32, 1000);
  for (std::size_t i = runs[31].start; i < runs[31].end; ++i) EXPECT_TRUE(lowest[i]);
  const auto top = decile_mask(s, 1000, 10);
  for (std::size_t i = runs[30].start; i < runs[30].end; ++i) EXPECT_TRUE(top[i]);
  // ties break by index
  const std::vector<double> flat(4, 0.0);
  EXPECT_EQ(decile_mask(flat, 20, 1), mask_of(20, {0, 1}));
  EXPECT_EQ(decile_mask(flat, 20, 10), mask_of(20, {18, 19}));
}

TEST(ErasureCurve, StructureAndRandomBaseline) {
  net::ResAnDi<float> model(tiny(), 2);
  const auto data = small_data(3, 64, 3);
  ErasureSpec spec;
  spec.seed = 4;
  const auto a = targeted_erasure_curve(model, data, spec);
  const auto b = targeted_erasure_curve(model, data, spec, 3);
  EXPECT_EQ(a.decile_accuracy, b.decile_accuracy);
  EXPECT_EQ(a.random_accuracy, b.random_accuracy);
  EXPECT_EQ(a.samples, data.size());
  EXPECT_EQ(a.baseline_accuracy, net::evaluate(model, data).accuracy);
  // decile 1 by hand
  const auto cams = cam::gradcam_dataset(model, data, spec.class_choice);
  traj::Dataset erased;
  for (std::size_t n = 0; n < data.size(); ++n) {
    const std::span<const double> g(cams.scores.data() + n * cams.nodes, cams.nodes);
    erased.push_back(erase_vec(data[n], decile_mask(g, 64, 1)));
  }
  EXPECT_EQ(a.decile_accuracy[0], net::evaluate(model, erased).accuracy);
  spec.scope = DecileScope::Global;
  const auto g = targeted_erasure_curve(model, data, spec);
  EXPECT_EQ(g.random_accuracy, a.random_accuracy);
  for (double v : g.decile_accuracy) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Rotation, PreservesDistancesAndComposes) {
  const auto data = small_data(1, 50, 5);
  for (const auto& t : data) {
    const auto r = rotate_trajectory(t, 0.7);
    for (std::size_t i = 0; i < t.length(); ++i) {
      EXPECT_NEAR(std::hypot(r.positions[i].x, r.positions[i].y), std::hypot(t.positions[i].x, t.positions[i].y),
                  1e-9 * (1 + std::hypot(t.positions[i].x, t.positions[i].y)));
    }
    const auto back = rotate_trajectory(rotate_trajectory(r, 1.1), -1.8);
    for (std::size_t i = 0; i < t.length(); ++i) {
      EXPECT_NEAR(back.positions[i].x, t.positions[i].x, 1e-9 * (1 + std::abs(t.positions[i].x)));
      EXPECT_NEAR(back.positions[i].y, t.positions[i].y, 1e-9 * (1 + std::abs(t.positions[i].y)));
    }
    EXPECT_EQ(r.label, t.label);
    EXPECT_EQ(r.alpha, t.alpha);
  }
  const auto q = rotate_trajectory(line(1), std::numbers::pi / 2);
  EXPECT_NEAR(q.positions[0].x, 1.0, 1e-12);
  EXPECT_NEAR(q.positions[0].y, 1.0, 1e-12);
}

TEST(Augment, RandomSizesAndSelection) {
  const auto data = small_data(5, 40, 6);
  AugmentationSpec spec;
  spec.mode = AugmentMode::Random;
  spec.fraction = 0.6;
  spec.seed = 7;
  const auto out = augment_dataset(data, nullptr, spec);
  EXPECT_EQ(out.data.size(), data.size() + 24);
  EXPECT_EQ(out.manifest.selected.size(), 24u);
  std::set<std::size_t> uniq(out.manifest.selected.begin(), out.manifest.selected.end());
  EXPECT_EQ(uniq.size(), 24u);
  for (std::size_t i = 0; i < data.size(); ++i) EXPECT_EQ(out.data[i].positions, data[i].positions);
  for (std::size_t k = 0; k < 24; ++k) {
    const auto& copy = out.data[data.size() + k];
    const auto expect = rotate_trajectory(data[out.manifest.selected[k]], out.manifest.angles[k]);
    EXPECT_EQ(copy.positions, expect.positions);
    EXPECT_EQ(copy.label, data[out.manifest.selected[k]].label);
    EXPECT_GE(out.manifest.angles[k], 0.0);
    EXPECT_LT(out.manifest.angles[k], 2 * std::numbers::pi);
  }
  EXPECT_EQ(augment_dataset(data, nullptr, spec).manifest.selected, out.manifest.selected);
  spec.fraction = 1.0;
  EXPECT_EQ(augment_dataset(data, nullptr, spec).data.size(), 2 * data.size());
  spec.fraction = 0.01;
  EXPECT_EQ(augment_dataset(data, nullptr, spec).data.size(), data.size() + 1);
  spec.fraction = 0.0;
  EXPECT_THROW(augment_dataset(data, nullptr, spec), std::invalid_argument);
}

TEST(Augment, RandomSelectionUniform) {
  // each trajectory is picked with probability 0.5 over many seeds
  const auto data = small_data(1, 20, 8);
  AugmentationSpec spec;
  spec.mode = AugmentMode::Random;
  spec.fraction = 0.5;
  std::vector<int> hits(data.size(), 0);
  const int reps = 2000;
  for (int s = 0; s < reps; ++s) {
    spec.seed = s;
    for (auto i : augment_dataset(data, nullptr, spec).manifest.selected) ++hits[i];
  }
  const double sd = std::sqrt(reps * 0.25);
  for (int h : hits) EXPECT_NEAR(h, reps * 0.5, 5 * sd);
}

TEST(Augment, TargetedTakesTopMeanScores) {
  net::ResAnDi<float> model(tiny(), 9);
  const auto data = small_data(3, 64, 10);
  AugmentationSpec spec;
  spec.fraction = 0.25;
  spec.seed = 11;
  const auto out = augment_dataset(data, &model, spec);
  const auto& ms = out.manifest.mean_scores;
  ASSERT_EQ(ms.size(), data.size());
  const auto cams = cam::gradcam_dataset(model, data, spec.class_choice);
  for (std::size_t i = 0; i < data.size(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < cams.nodes; ++j) s += cams.scores[i * cams.nodes + j];
    EXPECT_NEAR(ms[i], s / double(cams.nodes), 1e-9);
  }
  ASSERT_EQ(out.manifest.selected.size(), 6u);
  double cutoff = 1e300;
  for (auto i : out.manifest.selected) cutoff = std::min(cutoff, ms[i]);
  std::set<std::size_t> chosen(out.manifest.selected.begin(), out.manifest.selected.end());
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!chosen.count(i)) EXPECT_LE(ms[i], cutoff);
  }
  EXPECT_THROW(augment_dataset(data, nullptr, spec), std::invalid_argument);
  EXPECT_EQ(parse_augment_mode("random"), AugmentMode::Random);
  EXPECT_THROW(parse_augment_mode("rotate"), std::invalid_argument);
}

TEST(Noise, GridAndCurve) {
  const auto grid = default_noise_grid();
  ASSERT_EQ(grid.size(), 11u);
  EXPECT_EQ(grid.front(), 0.0);
  EXPECT_NEAR(grid.back(), 1.0, 1e-15);
  net::ResAnDi<float> m1(tiny(), 12), m2(tiny(), 13);
  traj::DatasetSpec spec;
  spec.per_class = 2;
  spec.length = traj::LengthLaw::fixed(64);
  spec.seed = 14;
  const std::vector<double> levels{0.0, 0.5};
  const auto curves = noise_robustness_curve({{"a", {&m1, &m2}}, {"b", {&m1}}}, spec, levels);
  ASSERT_EQ(curves.size(), 2u);
  ASSERT_EQ(curves[0].levels.size(), 2u);
  for (std::size_t g = 0; g < 2; ++g) {
    auto s = spec;
    s.noise_amplitude = levels[g];
    s.seed = traj::derive_seed(spec.seed, g);
    const auto test = traj::build_dataset(s);
    const double a1 = net::evaluate(m1, test).accuracy, a2 = net::evaluate(m2, test).accuracy;
    const auto& lv = curves[0].levels[g];
    EXPECT_EQ(lv.noise, levels[g]);
    EXPECT_EQ(lv.accuracies, (std::vector<double>{a1, a2}));
    EXPECT_NEAR(lv.mean, 0.5 * (a1 + a2), 1e-15);
    // sample sd / sqrt(2) for two values is |a1 - a2| / 2
    EXPECT_NEAR(lv.std_error, std::abs(a1 - a2) / 2.0, 1e-12);
    EXPECT_EQ(curves[1].levels[g].std_error, 0.0);
    EXPECT_EQ(curves[1].levels[g].mean, a1);
  }
}
