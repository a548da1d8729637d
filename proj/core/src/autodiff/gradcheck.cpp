#include "andikit/autodiff/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace andikit::ad {
namespace {

struct Probe {
  double loss;
  std::uint64_t signature;
};

Probe evaluate(const LossFn& loss) {
  Tape<double> tape(false);
  tape.set_track_branches(true);
  const auto out = loss(tape);
  return {out->value.at(0), tape.branch_signature()};
}

std::vector<std::size_t> pick_indices(std::size_t n, std::size_t limit, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (limit == 0 || limit >= n) return idx;
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(limit);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

GradCheckResult finite_difference_check(const LossFn& loss, const std::vector<Parameter<double>>& params,
                                        const GradCheckOptions& options) {
  std::mt19937_64 rng(options.seed);
  std::vector<std::vector<std::size_t>> plan;
  std::size_t total = 0;
  for (const auto& p : params) {
    plan.push_back(pick_indices(p.tensor->size(), options.max_per_tensor, rng));
    total += plan.back().size();
  }
  if (total > options.max_checked) {
    throw std::invalid_argument("finite_difference_check: " + std::to_string(total) +
                                " entries exceed the oracle cost guard of " +
                                std::to_string(options.max_checked));
  }

  for (const auto& p : params) p.tensor->zero_grad();
  std::uint64_t base_signature = 0;
  {
    Tape<double> tape(true);
    tape.set_track_branches(true);
    const auto out = loss(tape);
    base_signature = tape.branch_signature();
    tape.backward(out);
  }

  GradCheckResult result;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& tensor = *params[k].tensor;
    for (const auto i : plan[k]) {
      const double saved = tensor.value[i];
      tensor.value[i] = saved + options.step;
      const Probe plus = evaluate(loss);
      tensor.value[i] = saved - options.step;
      const Probe minus = evaluate(loss);
      tensor.value[i] = saved;
      if (plus.signature != base_signature || minus.signature != base_signature) {
        ++result.skipped_kinks;
        continue;
      }
      const double numeric = (plus.loss - minus.loss) / (2.0 * options.step);
      const double analytic = tensor.grad[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), options.floor});
      const double rel = std::abs(analytic - numeric) / denom;
      ++result.checked;
      if (rel > result.worst_rel_error || std::isnan(rel)) {
        result.worst_rel_error = rel;
        result.worst_param = params[k].name;
        result.worst_index = i;
        result.worst_analytic = analytic;
        result.worst_numeric = numeric;
      }
      if (!(rel <= options.tolerance)) result.passed = false;
    }
  }
  return result;
}

}  // namespace andikit::ad
