// One line per acceptance criterion. Exit status 0 only when every selected
// criterion passes.
//
//   acceptance [--only 1,5,9] [--workers N] [--cli PATH] [--keep DIR]

#include <malloc.h>

#include <sys/wait.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "andikit/autodiff.hpp"
#include "andikit/experiments.hpp"
#include "andikit/gradcam.hpp"
#include "andikit/network.hpp"
#include "andikit/parallel.hpp"
#include "andikit/stats.hpp"
#include "andikit/trajgen.hpp"
#include "oracles.hpp"

using namespace andikit;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Options {
  std::set<int> only;
  unsigned workers = 1;
  std::string cli;
  std::string keep;
};

Options g_opt;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

std::string shortest(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

// ---------------------------------------------------------------------------
// Shared desk-scale artifacts

constexpr std::uint64_t kSeed = 20261018;

traj::DatasetSpec fixed_spec(std::size_t per_class, std::size_t len, std::uint64_t stream, double noise = 0.0) {
  traj::DatasetSpec s;
  s.per_class = per_class;
  s.length = traj::LengthLaw::fixed(len);
  s.noise_amplitude = noise;
  s.seed = traj::derive_seed(kSeed, stream);
  return s;
}

struct DeskModel {
  net::ResAnDi<float> model;
  double test_accuracy = 0.0;
  double minutes = 0.0;
  std::size_t epochs = 0;
};

std::optional<DeskModel> g_desk;

DeskModel& desk_model() {
  if (g_desk) return *g_desk;
  const auto t0 = Clock::now();
  const auto train_set = traj::build_dataset(fixed_spec(2000, 200, 1), g_opt.workers);
  const auto val_set = traj::build_dataset(fixed_spec(250, 200, 2), g_opt.workers);
  const auto test_set = traj::build_dataset(fixed_spec(250, 200, 3), g_opt.workers);
  net::TrainingSpec spec;
  spec.max_epochs = 12;
  spec.seed = kSeed;
  auto result = net::train(net::ModelConfig::desk_scale(), train_set, val_set, spec, g_opt.workers,
                           [](const net::EpochRecord& e) {
                             std::cerr << "  desk epoch " << e.epoch << " val " << fmt(e.val_loss) << "/"
                                       << fmt(e.val_accuracy, 3) << "\n";
                           });
  DeskModel d{std::move(result.model), 0.0, 0.0, result.history.size()};
  d.test_accuracy = net::evaluate(d.model, test_set, g_opt.workers).accuracy;
  d.minutes = seconds_since(t0) / 60.0;
  if (!g_opt.keep.empty()) net::save_checkpoint(g_opt.keep + "/desk.ckpt", d.model, result.meta);
  g_desk.emplace(std::move(d));
  return *g_desk;
}

// ---------------------------------------------------------------------------
// 1. Generator fidelity

Outcome generator_fidelity() {
  const auto t0 = Clock::now();
  const double sub[] = {0.2, 0.5, 0.8}, sup[] = {1.2, 1.5, 1.8};
  std::vector<std::pair<traj::Mechanism, double>> cases;
  for (auto m : traj::kAllMechanisms) {
    if (m == traj::Mechanism::BM) {
      cases.emplace_back(m, 1.0);
      continue;
    }
    for (double a : traj::is_superdiffusive(m) ? sup : sub) cases.emplace_back(m, a);
  }
  double worst = 0.0;
  std::string worst_case, fails;
  for (std::size_t c = 0; c < cases.size(); ++c) {
    const auto [m, alpha] = cases[c];
    std::vector<std::vector<traj::Point>> paths(1000);
    parallel_for(paths.size(), g_opt.workers, [&](std::size_t i) {
      traj::Rng rng = traj::make_substream(traj::derive_seed(kSeed, 0x1000 + c), i);
      paths[i] = traj::gen_trajectory(m, alpha, 1000, rng).positions;
    });
    const double slope = oracle::loglog_slope(oracle::ensemble_msd(paths), 10, 999);
    const double err = std::abs(slope - alpha);
    const std::string name = std::string(traj::to_string(m)) + "@" + fmt(alpha, 2);
    std::cerr << "  " << name << " slope " << fmt(slope) << "\n";
    if (err > worst) {
      worst = err;
      worst_case = name + " slope " + fmt(slope);
    }
    if (err > 0.1) fails += " " + name + "=" + fmt(slope, 3);
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = fails.empty() && secs <= 300.0;
  o.detail = std::to_string(cases.size()) + " cases, worst |slope-alpha| " + fmt(worst, 3) + " (" + worst_case +
             "), tol 0.1, " + fmt(secs, 3) + " s of 300";
  if (!fails.empty()) o.detail += "; out of tolerance:" + fails;
  return o;
}

// ---------------------------------------------------------------------------
// 2. Gradient correctness

ad::TensorPtr<double> random_param(ad::Shape s, std::uint64_t seed, double scale = 1.0) {
  auto t = ad::make_tensor<double>(std::move(s));
  traj::Rng rng(seed);
  for (auto& v : t->value) v = scale * traj::standard_normal(rng);
  t->requires_grad = true;
  t->grad.assign(t->size(), 0.0);
  return t;
}

// loss = sum_i w_i y_i with fixed random w, built from taped ops only
ad::TensorPtr<double> weighted_sum(ad::Tape<double>& tape, const ad::TensorPtr<double>& y, std::uint64_t seed) {
  traj::Rng rng(seed);
  if (y->shape.size() == 2) {
    auto w = ad::make_tensor<double>({1, y->dim(1)});
    for (auto& v : w->value) v = traj::standard_normal(rng);
    return ad::sum(tape, ad::linear(tape, y, w, ad::make_tensor<double>({1}, 0.0)));
  }
  // [N, C, L]: a full-length kernel weights every element
  auto k = ad::make_tensor<double>({1, y->dim(1), y->dim(2)});
  for (auto& v : k->value) v = traj::standard_normal(rng);
  return ad::sum(tape, ad::conv1d(tape, y, k, 1, 0));
}

Outcome gradient_correctness() {
  const auto t0 = Clock::now();
  ad::GradCheckOptions opt;
  opt.tolerance = 1e-4;
  std::vector<std::pair<std::string, ad::GradCheckResult>> results;
  auto x3 = random_param({2, 3, 12}, 1);
  {
    auto w = random_param({4, 3, 5}, 2);
    results.emplace_back("conv1d", ad::finite_difference_check(
                                       [&](ad::Tape<double>& t) { return weighted_sum(t, ad::conv1d(t, x3, w, 2, 2), 3); },
                                       {{"x", x3}, {"w", w}}, opt));
  }
  {
    ad::BatchNorm<double> bn(3);
    bn.scale->value = {1.2, -0.6, 0.9};
    bn.shift->value = {0.1, -0.3, 0.2};
    std::vector<ad::Parameter<double>> ps{{"x", x3}, {"scale", bn.scale}, {"shift", bn.shift}};
    results.emplace_back("batchnorm/train",
                         ad::finite_difference_check(
                             [&](ad::Tape<double>& t) { return weighted_sum(t, ad::batchnorm1d(t, x3, bn, ad::Mode::Train), 4); },
                             ps, opt));
    bn.running_mean = {0.2, -0.1, 0.4};
    bn.running_var = {1.5, 0.6, 2.0};
    results.emplace_back("batchnorm/eval",
                         ad::finite_difference_check(
                             [&](ad::Tape<double>& t) { return weighted_sum(t, ad::batchnorm1d(t, x3, bn, ad::Mode::Eval), 5); },
                             ps, opt));
  }
  results.emplace_back("relu", ad::finite_difference_check(
                                   [&](ad::Tape<double>& t) { return weighted_sum(t, ad::relu(t, x3), 6); }, {{"x", x3}}, opt));
  results.emplace_back("max_pool1d",
                       ad::finite_difference_check(
                           [&](ad::Tape<double>& t) { return weighted_sum(t, ad::max_pool1d(t, x3, 3, 2, 1), 7); },
                           {{"x", x3}}, opt));
  results.emplace_back("global_avg_pool1d",
                       ad::finite_difference_check(
                           [&](ad::Tape<double>& t) { return weighted_sum(t, ad::global_avg_pool1d(t, x3), 8); },
                           {{"x", x3}}, opt));
  {
    auto y = random_param({2, 3, 12}, 9);
    results.emplace_back("add", ad::finite_difference_check(
                                    [&](ad::Tape<double>& t) { return weighted_sum(t, ad::add(t, x3, y), 10); },
                                    {{"a", x3}, {"b", y}}, opt));
  }
  auto f = random_param({3, 6}, 11), w = random_param({4, 6}, 12), b = random_param({4}, 13);
  results.emplace_back("linear", ad::finite_difference_check(
                                     [&](ad::Tape<double>& t) { return weighted_sum(t, ad::linear(t, f, w, b), 14); },
                                     {{"x", f}, {"w", w}, {"b", b}}, opt));
  auto z = random_param({3, 8}, 15);
  const std::vector<std::size_t> labels{1, 7, 0};
  results.emplace_back("softmax", ad::finite_difference_check(
                                      [&](ad::Tape<double>& t) { return weighted_sum(t, ad::softmax(t, z), 16); },
                                      {{"z", z}}, opt));
  results.emplace_back("softmax_cross_entropy",
                       ad::finite_difference_check(
                           [&](ad::Tape<double>& t) { return ad::softmax_cross_entropy(t, z, labels); }, {{"z", z}}, opt));
  results.emplace_back("pick_sum", ad::finite_difference_check(
                                       [&](ad::Tape<double>& t) {
                                         return ad::pick_sum(t, z, std::span<const std::size_t>(labels));
                                       },
                                       {{"z", z}}, opt));
  // composed desk-scale network, train-mode batch statistics, CE loss
  {
    net::ResAnDi<double> model(net::ModelConfig::desk_scale(), kSeed);
    const auto data = traj::build_dataset(fixed_spec(1, 200, 50));
    const std::vector<std::size_t> idx{0, 3, 6};
    auto input = net::make_batch<double>(data, idx, 200);
    std::vector<std::size_t> y;
    for (auto i : idx) y.push_back(traj::class_index(data[i].label));
    auto o = opt;
    o.max_per_tensor = 4;
    o.max_checked = 100000;
    results.emplace_back("ResAnDi(desk)", ad::finite_difference_check(
                                              [&](ad::Tape<double>& t) {
                                                auto r = model.forward(t, input, ad::Mode::Train);
                                                return ad::softmax_cross_entropy(t, r.logits, y);
                                              },
                                              model.parameters(), o));
  }
  Outcome out;
  out.pass = true;
  double worst = 0.0;
  std::size_t checked = 0, kinks = 0;
  std::string failed;
  for (const auto& [name, r] : results) {
    out.pass = out.pass && r.passed && r.checked > 0;
    worst = std::max(worst, r.worst_rel_error);
    checked += r.checked;
    kinks += r.skipped_kinks;
    if (!r.passed) failed += " " + name + "(" + fmt(r.worst_rel_error, 3) + " at " + r.worst_param + ")";
  }
  const double secs = seconds_since(t0);
  out.pass = out.pass && secs <= 120.0;
  out.detail = std::to_string(results.size()) + " checks, " + std::to_string(checked) + " entries, worst rel " +
               fmt(worst, 3) + " (tol 1e-4), kinks skipped " + std::to_string(kinks) + ", " + fmt(secs, 3) + " s of 120";
  if (!failed.empty()) out.detail += "; failed:" + failed;
  return out;
}

// ---------------------------------------------------------------------------
// 3. Grad-CAM oracle equivalence

Outcome gradcam_oracle() {
  // toy: maps [2, 5, 12] (120 activations), head softmax(W gap(A) + b), 4 classes
  const std::size_t n = 2, c = 5, len = 12, classes = 4;
  traj::Rng rng(31);
  ad::Tensor<double> maps({n, c, len});
  for (auto& v : maps.value) v = std::abs(traj::standard_normal(rng));
  auto w = ad::make_tensor<double>({classes, c});
  for (auto& v : w->value) v = traj::standard_normal(rng);
  auto b = ad::make_tensor<double>({classes});
  for (auto& v : b->value) v = 0.1 * traj::standard_normal(rng);
  cam::ProbabilityHead<double> head = [&](ad::Tape<double>& t, const ad::TensorPtr<double>& a) {
    return ad::softmax(t, ad::linear(t, ad::global_avg_pool1d(t, a), w, b));
  };
  const std::vector<std::size_t> cls{2, 0};
  const auto weights = cam::feature_weights(head, maps, cls);
  const auto scores = cam::gradcam_scores(head, maps, cls);

  auto prob = [&](const std::vector<double>& values, std::size_t s) {
    ad::Tape<double> t(false);
    return head(t, ad::make_tensor<double>(maps.shape, values))->value[s * classes + cls[s]];
  };
  // brute force: element-wise central differences, mean over positions, then the weighted sum
  double worst_w = 0.0, worst_g = 0.0;
  const double h = 1e-6;
  std::vector<double> fd_weights(n * c, 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t k = 0; k < c; ++k) {
      double acc = 0.0;
      for (std::size_t i = 0; i < len; ++i) {
        auto up = maps.value, dn = maps.value;
        up[(s * c + k) * len + i] += h;
        dn[(s * c + k) * len + i] -= h;
        acc += (prob(up, s) - prob(dn, s)) / (2 * h);
      }
      fd_weights[s * c + k] = acc / double(len);
      worst_w = std::max(worst_w, std::abs(weights[s * c + k] - fd_weights[s * c + k]) /
                                      std::max(std::abs(fd_weights[s * c + k]), 1e-8));
    }
    for (std::size_t i = 0; i < len; ++i) {
      double g = 0.0;
      for (std::size_t k = 0; k < c; ++k) g += fd_weights[s * c + k] * maps.value[(s * c + k) * len + i];
      worst_g = std::max(worst_g, std::abs(scores[s * len + i] - g) / std::max(std::abs(g), 1e-8));
    }
  }
  // single map with unit weight: G = A
  ad::Tensor<double> one({1, 1, len});
  for (auto& v : one.value) v = traj::standard_normal(rng);
  const std::vector<double> unit{1.0};
  const auto g1 = cam::combine_maps<double>(unit, one);
  bool identity = true;
  for (std::size_t i = 0; i < len; ++i) identity = identity && g1[i] == one.value[i];
  // two equal maps with opposite weights: G = 0, no rectification
  ad::Tensor<double> two({1, 2, len});
  for (std::size_t i = 0; i < len; ++i) two.value[i] = two.value[len + i] = one.value[i];
  const std::vector<double> opposite{0.7, -0.7};
  bool cancel = true;
  for (double v : cam::combine_maps<double>(opposite, two)) cancel = cancel && v == 0.0;

  Outcome o;
  o.pass = worst_w <= 1e-4 && worst_g <= 1e-4 && identity && cancel;
  o.detail = "toy " + std::to_string(n * c * len) + " activations: weights rel err " + fmt(worst_w, 3) +
             ", scores rel err " + fmt(worst_g, 3) + " (tol 1e-4); G=A " + (identity ? "ok" : "FAIL") + ", G=0 " +
             (cancel ? "ok" : "FAIL");
  return o;
}

// ---------------------------------------------------------------------------
// 4. Statistics fixtures

std::vector<traj::Point> from_steps(const std::vector<double>& dx, const std::vector<double>& dy) {
  std::vector<traj::Point> p{{0.0, 0.0}};
  for (std::size_t t = 0; t < dx.size(); ++t) p.push_back({p.back().x + dx[t], p.back().y + dy[t]});
  return p;
}

Outcome statistics_fixtures() {
  std::vector<std::string> failures;
  auto check = [&](bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  };
  const std::vector<double> alt{1, -1, 1, -1, 1, -1, 1, -1};
  const double ac = stats::autocorrelation(from_steps(alt, alt));
  check(ac == -1.0 || std::abs(ac + 1.0) < 1e-12, "AC=" + fmt(ac));

  // +-1 in both coordinates, balanced inside each of 4 runs
  const std::vector<double> pm{1, -1, -1, 1, 1, 1, -1, -1};
  std::vector<double> dx, dy;
  for (int r = 0; r < 4; ++r) {
    dx.insert(dx.end(), alt.begin(), alt.end());
    dy.insert(dy.end(), pm.begin(), pm.end());
  }
  const double ng = stats::non_gaussianity_raw(from_steps(dx, dy), 4);
  check(std::abs(ng - 2.0) < 1e-12, "NG=" + fmt(ng));

  const double sg = stats::singularity_raw(from_steps({1, 1, 1, 10}, {1, 1, 1, 1}), 1);
  check(std::abs(sg - 1.414) <= 1e-3, "SG=" + fmt(sg, 6));

  const double vd = stats::varying_diffusivity_raw(from_steps({1, -1, 2, -2, 2, -2, 1, -1}, {3, -3, 1, -1, 1, -1, 3, -3}), 2);
  check(std::abs(vd) < 1e-12, "VD=" + fmt(vd));

  const auto straight = stats::turning_angles(from_steps({1, 1}, {0, 0}));
  const auto right = stats::turning_angles(from_steps({1, 0}, {0, 1}));
  const auto back = stats::turning_angles(from_steps({1, -1}, {0, 0}));
  check(straight.size() == 1 && straight[0] == 0.0, "dtheta straight");
  check(right.size() == 1 && std::abs(right[0] - std::numbers::pi / 2) < 1e-12, "dtheta right angle");
  check(back.size() == 1 && std::abs(back[0] - std::numbers::pi) < 1e-12, "dtheta reversal");

  Outcome o;
  o.pass = failures.empty();
  o.detail = "AC " + fmt(ac) + ", NG_raw " + fmt(ng) + ", SG_raw " + fmt(sg, 6) + ", VD_raw " + fmt(vd) +
             ", dtheta {" + fmt(straight[0]) + ", " + fmt(right[0]) + ", " + fmt(back[0]) + "}";
  for (const auto& f : failures) o.detail += "; bad " + f;
  return o;
}

// ---------------------------------------------------------------------------
// 5. Desk-scale classification

Outcome desk_classification() {
  auto& d = desk_model();
  Outcome o;
  o.pass = d.test_accuracy >= 0.50 && d.minutes <= 60.0;
  o.detail = "test balanced accuracy " + fmt(d.test_accuracy) + " (floor 0.50, chance 0.125) after " +
             std::to_string(d.epochs) + " epochs, " + fmt(d.minutes, 3) + " min of 60";
  return o;
}

// ---------------------------------------------------------------------------
// 6. Erasure ordering

Outcome erasure_ordering() {
  auto& d = desk_model();
  std::array<double, 10> mean{};
  double random = 0.0, baseline = 0.0;
  const std::size_t seeds = 3;
  for (std::size_t s = 0; s < seeds; ++s) {
    const auto test = traj::build_dataset(fixed_spec(125, 200, 60 + s), g_opt.workers);
    exp::ErasureSpec spec;
    spec.seed = traj::derive_seed(kSeed, 70 + s);
    const auto curve = exp::targeted_erasure_curve(d.model, test, spec, g_opt.workers);
    for (std::size_t k = 0; k < 10; ++k) mean[k] += curve.decile_accuracy[k] / double(seeds);
    random += curve.random_accuracy / double(seeds);
    baseline += curve.baseline_accuracy / double(seeds);
    std::cerr << "  erasure seed " << s << ": bottom " << fmt(curve.decile_accuracy[0]) << " top "
              << fmt(curve.decile_accuracy[9]) << " random " << fmt(curve.random_accuracy) << "\n";
  }
  Outcome o;
  const bool order = mean[9] < mean[0];
  const bool top3 = mean[7] < random && mean[8] < random && mean[9] < random;
  o.pass = order && top3;
  std::string curve;
  for (double v : mean) curve += (curve.empty() ? "" : " ") + fmt(v, 3);
  o.detail = "mean over 3 seeds: deciles 1..10 [" + curve + "], random " + fmt(random, 3) + ", unerased " +
             fmt(baseline, 3) + "; top<bottom " + (order ? "yes" : "no") + ", top three<random " + (top3 ? "yes" : "no");
  return o;
}

// ---------------------------------------------------------------------------
// 7. Augmentation robustness

Outcome augmentation_robustness() {
  auto& d = desk_model();
  const auto train_set = traj::build_dataset(fixed_spec(500, 200, 80), g_opt.workers);
  const auto val_set = traj::build_dataset(fixed_spec(100, 200, 81), g_opt.workers);
  net::ModelConfig cfg = net::ModelConfig::desk_scale();
  cfg.scale = 0.25;
  std::vector<net::ResAnDi<float>> models;
  models.reserve(6);
  std::vector<std::string> names{"targeted", "random"};
  for (std::size_t m = 0; m < 2; ++m) {
    for (std::size_t r = 0; r < 3; ++r) {
      exp::AugmentationSpec aug;
      aug.mode = m == 0 ? exp::AugmentMode::Targeted : exp::AugmentMode::Random;
      aug.seed = traj::derive_seed(kSeed, 90 + r);
      const auto augmented = exp::augment_dataset(train_set, &d.model, aug, g_opt.workers);
      net::TrainingSpec spec;
      spec.lr0 = 1e-3;
      spec.max_epochs = 15;
      spec.seed = traj::derive_seed(kSeed, 100 + r);
      auto result = net::train(cfg, augmented.data, val_set, spec, g_opt.workers);
      std::cerr << "  " << names[m] << " replicate " << r << ": " << result.history.size() << " epochs, best val "
                << fmt(result.meta.best_val_loss) << "\n";
      models.push_back(std::move(result.model));
    }
  }
  std::vector<std::pair<std::string, std::vector<net::ResAnDi<float>*>>> schemes{
      {"targeted", {&models[0], &models[1], &models[2]}}, {"random", {&models[3], &models[4], &models[5]}}};
  const std::vector<double> grid{0.0, 0.25, 0.5, 0.75, 1.0};
  const auto curves = exp::noise_robustness_curve(schemes, fixed_spec(100, 200, 110), grid, g_opt.workers);
  Outcome o;
  o.pass = true;
  std::string detail;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const auto& t = curves[0].levels[g];
    const auto& r = curves[1].levels[g];
    detail += (detail.empty() ? "" : "; ") + fmt(grid[g], 2) + ": " + fmt(t.mean, 3) + "+-" + fmt(t.std_error, 2) +
              " vs " + fmt(r.mean, 3) + "+-" + fmt(r.std_error, 2);
    if (g >= grid.size() - 2) {
      // targeted may trail by at most one standard error of the difference
      const double se = std::sqrt(t.std_error * t.std_error + r.std_error * r.std_error);
      if (t.mean < r.mean - se) o.pass = false;
    }
  }
  o.detail = "targeted vs random mean accuracy (+-SE), 3 replicates: " + detail;
  return o;
}

// ---------------------------------------------------------------------------
// 8. Correlation signs

Outcome correlation_signs() {
  auto& d = desk_model();
  const auto rf = cam::probe_receptive_field(d.model, 0.9, g_opt.workers);
  const auto data = traj::build_dataset(fixed_spec(500, 200, 120), g_opt.workers);
  const auto rep = stats::correlation_report(d.model, data, rf.window, rf.stride, 4, cam::ClassChoice::True, g_opt.workers);
  using M = traj::Mechanism;
  auto r = [&](M m, std::size_t k) { return rep.table.r[traj::class_index(m)][k]; };
  enum { AC = 0, CS = 1, SG = 2, VD = 3 };
  struct Cond {
    std::string text;
    bool ok;
  };
  auto neg = [](std::optional<double> v) { return v && *v < -0.05; };
  auto pos = [](std::optional<double> v) { return v && *v > 0.05; };
  const auto cs_fbm = r(M::SupFBM, CS), cs_lw = r(M::SupLW, CS);
  const bool cs_split = cs_fbm && cs_lw && std::abs(*cs_fbm) > 0.05 && std::abs(*cs_lw) > 0.05 &&
                        ((*cs_fbm > 0) != (*cs_lw > 0));
  auto show = [](std::optional<double> v) { return v ? fmt(*v, 3) : std::string("n/a"); };
  const std::vector<Cond> conds{
      {"AC(SubFBM)=" + show(r(M::SubFBM, AC)) + "<0", neg(r(M::SubFBM, AC))},
      {"AC(SupFBM)=" + show(r(M::SupFBM, AC)) + ">0", pos(r(M::SupFBM, AC))},
      {"AC(SupLW)=" + show(r(M::SupLW, AC)) + ">0", pos(r(M::SupLW, AC))},
      {"CS(SupFBM)=" + show(cs_fbm) + " vs CS(SupLW)=" + show(cs_lw) + " opposite", cs_split},
      {"SG(SubCTRW)=" + show(r(M::SubCTRW, SG)) + ">0", pos(r(M::SubCTRW, SG))},
      {"VD(SupSBM)=" + show(r(M::SupSBM, VD)) + ">0", pos(r(M::SupSBM, VD))},
      {"VD(SubSBM)=" + show(r(M::SubSBM, VD)) + "<0", neg(r(M::SubSBM, VD))},
  };
  Outcome o;
  o.pass = true;
  std::size_t met = 0;
  std::string detail;
  for (const auto& c : conds) {
    o.pass = o.pass && c.ok;
    met += c.ok;
    detail += (detail.empty() ? "" : ", ") + c.text + (c.ok ? "" : " [no]");
  }
  o.detail = std::to_string(met) + "/7 sign conditions with |r|>0.05 (W=" + std::to_string(rf.window) +
             ", S=" + std::to_string(rf.stride) + ", " + std::to_string(rep.windows.size()) + " windows): " + detail;
  return o;
}

// ---------------------------------------------------------------------------
// 9. Receptive-field probe

Outcome receptive_field() {
  net::ResAnDi<float> model(net::ModelConfig::full_scale(), traj::derive_seed(kSeed, net::kInitSeedStream));
  const auto rf = cam::probe_receptive_field(model, 0.9, g_opt.workers);
  const bool window_ok = std::abs(double(rf.window) - 225.0) <= 0.15 * 225.0;
  const bool spacing_ok = std::abs(rf.peak_spacing - 25.0) <= 0.20 * 25.0;
  Outcome o;
  o.pass = window_ok && spacing_ok;
  o.detail = "full-scale window " + std::to_string(rf.window) + " (target 225+-15%) " + (window_ok ? "ok" : "out") +
             ", peak spacing " + fmt(rf.peak_spacing, 3) + " (target 25+-20%) " + (spacing_ok ? "ok" : "out") +
             ", recommended stride " + std::to_string(rf.stride);
  return o;
}

// ---------------------------------------------------------------------------
// 10. Determinism

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string library_pipeline() {
  std::ostringstream out;
  const auto train_set = traj::build_dataset(fixed_spec(6, 64, 130), g_opt.workers);
  const auto val_set = traj::build_dataset(fixed_spec(2, 64, 131), g_opt.workers);
  traj::write_dataset(out, train_set);
  net::ModelConfig cfg;
  cfg.input_len = 64;
  cfg.scale = 0.0625;
  net::TrainingSpec spec;
  spec.lr0 = 1e-3;
  spec.batch_size = 16;
  spec.max_epochs = 3;
  spec.seed = kSeed;
  auto r = net::train(cfg, train_set, val_set, spec, g_opt.workers);
  net::write_checkpoint(out, r.model, r.meta);
  exp::ErasureSpec es;
  es.seed = 5;
  const auto curve = exp::targeted_erasure_curve(r.model, val_set, es, g_opt.workers);
  for (double v : curve.decile_accuracy) out << shortest(v) << ",";
  out << shortest(curve.random_accuracy) << "\n";
  const auto rep = stats::correlation_report(r.model, val_set, 32, 32, 4, cam::ClassChoice::True, g_opt.workers);
  for (const auto& w : rep.windows) out << shortest(w.gradcam) << "," << shortest(w.SG) << "," << shortest(w.VD) << "\n";
  return out.str();
}

int run_in(const fs::path& dir, const std::string& args) {
  const std::string cmd = "cd '" + dir.string() + "' && '" + g_opt.cli + "' " + args + " >>log.txt 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

// Runs the same CLI pipeline in two directories and compares every output file.
std::pair<std::size_t, std::vector<std::string>> cli_pipeline() {
  const auto base = fs::temp_directory_path() / ("andikit_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(base);
  std::vector<std::string> problems;
  const std::vector<std::string> steps{
      "generate -o tr seed=9 data.per_class=6 data.length=64 data.stream=1",
      "generate -o va seed=9 data.per_class=2 data.length=64 data.stream=2",
      "train -o m seed=9 data.train=tr/dataset.txt data.val=va/dataset.txt model.scale=0.0625 model.input_len=64 "
      "train.max_epochs=2 train.batch_size=16 train.lr0=0.001",
      "evaluate -o ev model.checkpoint=m/model.ckpt data.input=va/dataset.txt",
      "erase-eval -o er model.checkpoint=m/model.ckpt data.input=va/dataset.txt erase.seed=3",
      "gradcam -o gc model.checkpoint=m/model.ckpt data.input=va/dataset.txt",
      "stats-corr -o sc model.checkpoint=m/model.ckpt data.input=va/dataset.txt stats.window=32 stats.stride=32",
      "noise-eval -o nz noise.schemes=a noise.a=m/model.ckpt noise.grid=0,0.5 data.per_class=1 data.length=64 seed=9",
      "augment-train -o au augment.mode=random augment.fraction=0.5 data.train=tr/dataset.txt data.val=va/dataset.txt "
      "model.scale=0.0625 model.input_len=64 train.max_epochs=1 train.batch_size=16 seed=9",
  };
  for (const char* run : {"a", "b"}) {
    fs::create_directories(base / run);
    for (const auto& s : steps) {
      if (run_in(base / run, s) != 0) problems.push_back(std::string(run) + ": '" + s.substr(0, s.find(' ')) + "' failed");
    }
  }
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(base / "a")) {
    if (!e.is_regular_file() || e.path().filename() == "log.txt") continue;
    const auto rel = fs::relative(e.path(), base / "a");
    ++files;
    if (!fs::exists(base / "b" / rel) || slurp(e.path()) != slurp(base / "b" / rel)) problems.push_back(rel.string());
  }
  if (problems.empty()) fs::remove_all(base);
  return {files, problems};
}

Outcome determinism() {
  const auto a = library_pipeline();
  const auto b = library_pipeline();
  Outcome o;
  o.pass = a == b;
  o.detail = "library pipeline " + std::string(a == b ? "identical" : "DIFFERS") + " (" + std::to_string(a.size()) +
             " bytes: dataset, checkpoint, erasure, correlation)";
  if (g_opt.cli.empty() || !fs::exists(g_opt.cli)) {
    o.pass = false;
    o.detail += "; CLI binary not available, report files unchecked";
    return o;
  }
  const auto [files, problems] = cli_pipeline();
  o.pass = o.pass && problems.empty() && files > 0;
  o.detail += "; CLI pipeline x2: " + std::to_string(files) + " files compared";
  if (problems.empty()) {
    o.detail += ", all byte-identical";
  } else {
    o.detail += ", mismatched:";
    for (const auto& p : problems) o.detail += " " + p;
  }
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#ifdef ANDIKIT_CLI_PATH
  g_opt.cli = ANDIKIT_CLI_PATH;
#endif
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    auto next = [&]() -> std::string {
      if (i + 1 >= argc) {
        std::cerr << "missing value for " << a << "\n";
        std::exit(2);
      }
      return argv[++i];
    };
    if (a == "--only") {
      std::stringstream ss(next());
      std::string tok;
      while (std::getline(ss, tok, ',')) g_opt.only.insert(std::stoi(tok));
    } else if (a == "--workers") {
      g_opt.workers = static_cast<unsigned>(std::stoul(next()));
    } else if (a == "--cli") {
      g_opt.cli = next();
    } else if (a == "--keep") {
      g_opt.keep = next();
      fs::create_directories(g_opt.keep);
    } else {
      std::cerr << "usage: acceptance [--only 1,2,..] [--workers N] [--cli PATH] [--keep DIR]\n";
      return 2;
    }
  }

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"generator fidelity", generator_fidelity},
      {"gradient correctness", gradient_correctness},
      {"grad-cam oracle equivalence", gradcam_oracle},
      {"statistics fixtures", statistics_fixtures},
      {"desk-scale classification", desk_classification},
      {"erasure ordering", erasure_ordering},
      {"augmentation robustness", augmentation_robustness},
      {"correlation signs", correlation_signs},
      {"receptive-field probe", receptive_field},
      {"determinism", determinism},
  };
  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!g_opt.only.empty() && !g_opt.only.count(id)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    all = all && o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  C" << id << " " << criteria[i].first << ": " << o.detail << " ["
              << fmt(seconds_since(t0), 3) << " s]" << std::endl;
  }
  return all ? 0 : 1;
}
