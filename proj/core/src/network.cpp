#include "andikit/network.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <tuple>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "andikit/parallel.hpp"

namespace andikit::net {

using ad::Mode;
using ad::Tape;
using ad::TensorPtr;

ModelConfig ModelConfig::desk_scale() {
  ModelConfig c;
  c.input_len = 200;
  c.scale = 0.5;
  return c;
}

void ModelConfig::validate() const {
  if (input_len < 2) throw std::invalid_argument("model: input_len must be >= 2");
  if (!(scale > 0.0) || !std::isfinite(scale)) throw std::invalid_argument("model: scale must be positive");
  if (num_classes < 2) throw std::invalid_argument("model: need at least 2 classes");
  if (blocks_per_stage < 1) throw std::invalid_argument("model: blocks_per_stage must be >= 1");
  if (block_kernel % 2 == 0) throw std::invalid_argument("model: block_kernel must be odd");
  for (auto c : channels) {
    if (c == 0) throw std::invalid_argument("model: channel counts must be positive");
  }
  if (pool_padding >= pool_kernel) throw std::invalid_argument("model: pool padding must be < pool kernel");
  // throws when a stage would shrink below one position
  (void)stage_lengths();
}

std::array<std::size_t, 4> ModelConfig::stage_channels() const {
  std::array<std::size_t, 4> out{};
  for (std::size_t i = 0; i < 4; ++i) {
    out[i] = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(static_cast<double>(channels[i]) * scale)));
  }
  return out;
}

std::array<std::size_t, 5> ModelConfig::stage_lengths() const {
  std::array<std::size_t, 5> out{};
  out[0] = ad::conv_output_length(input_len, stem_kernel, stem_stride, stem_padding);
  std::size_t len = ad::conv_output_length(out[0], pool_kernel, pool_stride, pool_padding);
  const std::size_t pad = block_kernel / 2;
  for (std::size_t s = 0; s < 4; ++s) {
    if (s > 0) len = ad::conv_output_length(len, block_kernel, 2, pad);
    out[s + 1] = len;
  }
  return out;
}

namespace {

template <typename T>
TensorPtr<T> init_weight(ad::Shape shape, double fan_in, double gain, traj::Rng& rng) {
  auto t = ad::make_tensor<T>(std::move(shape));
  const double sd = std::sqrt(gain / fan_in);
  for (auto& v : t->value) v = static_cast<T>(sd * traj::standard_normal(rng));
  t->requires_grad = true;
  return t;
}

template <typename T>
void push_bn_stats(std::vector<typename ResAnDi<T>::NamedArray>& out, const std::string& prefix,
                   ad::BatchNorm<T>& bn) {
  const ad::Shape shape{bn.channels()};
  out.push_back({prefix + ".running_mean", shape, &bn.running_mean});
  out.push_back({prefix + ".running_var", shape, &bn.running_var});
}

std::string block_name(std::size_t stage, std::size_t block) {
  return "stage" + std::to_string(stage + 1) + ".block" + std::to_string(block);
}

}  // namespace

template <typename T>
ResAnDi<T>::ResAnDi(const ModelConfig& config, std::uint64_t init_seed) : config_(config) {
  config_.validate();
  traj::Rng rng(init_seed);
  const auto ch = config_.stage_channels();
  const std::size_t k0 = config_.stem_kernel, kb = config_.block_kernel;
  stem_ = init_weight<T>({ch[0], 2, k0}, static_cast<double>(2 * k0), 2.0, rng);
  stem_bn_ = ad::BatchNorm<T>(ch[0]);
  std::size_t in = ch[0];
  stages_.resize(4);
  for (std::size_t s = 0; s < 4; ++s) {
    for (std::size_t b = 0; b < config_.blocks_per_stage; ++b) {
      Block blk;
      const std::size_t out = ch[s];
      blk.stride = (s > 0 && b == 0) ? 2 : 1;
      blk.conv1 = init_weight<T>({out, in, kb}, static_cast<double>(in * kb), 2.0, rng);
      blk.bn1 = ad::BatchNorm<T>(out);
      blk.conv2 = init_weight<T>({out, out, kb}, static_cast<double>(out * kb), 2.0, rng);
      blk.bn2 = ad::BatchNorm<T>(out);
      if (blk.stride != 1 || in != out) {
        blk.proj = init_weight<T>({out, in, 1}, static_cast<double>(in), 2.0, rng);
        blk.proj_bn = ad::BatchNorm<T>(out);
      }
      stages_[s].push_back(std::move(blk));
      in = out;
    }
  }
  fc_w_ = init_weight<T>({config_.num_classes, in}, static_cast<double>(in), 1.0, rng);
  fc_b_ = ad::make_tensor<T>({config_.num_classes});
  fc_b_->requires_grad = true;
}

template <typename T>
TensorPtr<T> ResAnDi<T>::trunk(Tape<T>& tape, const TensorPtr<T>& input, Mode mode,
                               std::array<TensorPtr<T>, 4>* stage_outputs) {
  if (input->shape.size() != 3 || input->dim(1) != 2 || input->dim(2) != config_.input_len) {
    throw std::invalid_argument("model input must be [N, 2, " + std::to_string(config_.input_len) +
                                "], got " + ad::shape_string(input->shape));
  }
  auto x = ad::conv1d(tape, input, stem_, config_.stem_stride, config_.stem_padding);
  x = ad::relu(tape, ad::batchnorm1d(tape, x, stem_bn_, mode));
  x = ad::max_pool1d(tape, x, config_.pool_kernel, config_.pool_stride, config_.pool_padding);
  const std::size_t pad = config_.block_kernel / 2;
  for (std::size_t s = 0; s < stages_.size(); ++s) {
    for (auto& blk : stages_[s]) {
      auto y = ad::conv1d(tape, x, blk.conv1, blk.stride, pad);
      y = ad::relu(tape, ad::batchnorm1d(tape, y, blk.bn1, mode));
      y = ad::conv1d(tape, y, blk.conv2, 1, pad);
      y = ad::batchnorm1d(tape, y, blk.bn2, mode);
      auto shortcut = x;
      if (blk.proj) {
        shortcut = ad::batchnorm1d(tape, ad::conv1d(tape, x, blk.proj, blk.stride, 0), blk.proj_bn, mode);
      }
      x = ad::relu(tape, ad::add(tape, y, shortcut));
    }
    if (stage_outputs) (*stage_outputs)[s] = x;
  }
  return x;
}

template <typename T>
TensorPtr<T> ResAnDi<T>::head(Tape<T>& tape, const TensorPtr<T>& final_maps) {
  return ad::linear(tape, ad::global_avg_pool1d(tape, final_maps), fc_w_, fc_b_);
}

template <typename T>
ForwardResult<T> ResAnDi<T>::forward(Tape<T>& tape, const TensorPtr<T>& input, Mode mode,
                                     bool keep_stages) {
  ForwardResult<T> r;
  r.final_maps = trunk(tape, input, mode, keep_stages ? &r.stage_outputs : nullptr);
  r.logits = head(tape, r.final_maps);
  return r;
}

template <typename T>
std::vector<ad::Parameter<T>> ResAnDi<T>::parameters() const {
  std::vector<ad::Parameter<T>> out;
  out.push_back({"stem.conv", stem_});
  out.push_back({"stem.bn.scale", stem_bn_.scale});
  out.push_back({"stem.bn.shift", stem_bn_.shift});
  for (std::size_t s = 0; s < stages_.size(); ++s) {
    for (std::size_t b = 0; b < stages_[s].size(); ++b) {
      const auto& blk = stages_[s][b];
      const auto p = block_name(s, b);
      out.push_back({p + ".conv1", blk.conv1});
      out.push_back({p + ".bn1.scale", blk.bn1.scale});
      out.push_back({p + ".bn1.shift", blk.bn1.shift});
      out.push_back({p + ".conv2", blk.conv2});
      out.push_back({p + ".bn2.scale", blk.bn2.scale});
      out.push_back({p + ".bn2.shift", blk.bn2.shift});
      if (blk.proj) {
        out.push_back({p + ".proj", blk.proj});
        out.push_back({p + ".proj_bn.scale", blk.proj_bn.scale});
        out.push_back({p + ".proj_bn.shift", blk.proj_bn.shift});
      }
    }
  }
  out.push_back({"fc.weight", fc_w_});
  out.push_back({"fc.bias", fc_b_});
  return out;
}

template <typename T>
std::vector<typename ResAnDi<T>::NamedArray> ResAnDi<T>::state() {
  std::vector<NamedArray> out;
  for (const auto& p : parameters()) out.push_back({p.name, p.tensor->shape, &p.tensor->value});
  push_bn_stats<T>(out, "stem.bn", stem_bn_);
  for (std::size_t s = 0; s < stages_.size(); ++s) {
    for (std::size_t b = 0; b < stages_[s].size(); ++b) {
      auto& blk = stages_[s][b];
      const auto p = block_name(s, b);
      push_bn_stats<T>(out, p + ".bn1", blk.bn1);
      push_bn_stats<T>(out, p + ".bn2", blk.bn2);
      if (blk.proj) push_bn_stats<T>(out, p + ".proj_bn", blk.proj_bn);
    }
  }
  return out;
}

template <typename T>
std::size_t ResAnDi<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.tensor->size();
  return n;
}

template <typename T>
template <typename U>
ResAnDi<U> ResAnDi<T>::cast() const {
  ResAnDi<U> out(config_, 0);
  auto src = const_cast<ResAnDi<T>*>(this)->state();
  auto dst = out.state();
  for (std::size_t i = 0; i < src.size(); ++i) {
    std::transform(src[i].data->begin(), src[i].data->end(), dst[i].data->begin(),
                   [](T v) { return static_cast<U>(v); });
  }
  return out;
}

template class ResAnDi<float>;
template class ResAnDi<double>;
template ResAnDi<float> ResAnDi<float>::cast<float>() const;
template ResAnDi<double> ResAnDi<float>::cast<double>() const;
template ResAnDi<float> ResAnDi<double>::cast<float>() const;
template ResAnDi<double> ResAnDi<double>::cast<double>() const;

// ---------------------------------------------------------------------------

template <typename T>
TensorPtr<T> make_batch(const traj::Dataset& data, std::span<const std::size_t> indices,
                        std::size_t input_len) {
  auto batch = ad::make_tensor<T>({indices.size(), 2, input_len});
  for (std::size_t n = 0; n < indices.size(); ++n) {
    const auto v = traj::preprocess_input(data.at(indices[n]), input_len);
    std::transform(v.begin(), v.end(), batch->value.begin() + static_cast<std::ptrdiff_t>(n * 2 * input_len),
                   [](double d) { return static_cast<T>(d); });
  }
  return batch;
}

template TensorPtr<float> make_batch<float>(const traj::Dataset&, std::span<const std::size_t>, std::size_t);
template TensorPtr<double> make_batch<double>(const traj::Dataset&, std::span<const std::size_t>, std::size_t);

namespace {

/// Eval-mode logits in dataset order, [N * classes].
template <typename T>
std::vector<double> predict_logits(ResAnDi<T>& model, const traj::Dataset& data, std::size_t batch_size,
                                   unsigned workers) {
  const std::size_t classes = model.config().num_classes;
  std::vector<double> logits(data.size() * classes);
  const std::size_t chunks = (data.size() + batch_size - 1) / batch_size;
  parallel_for(chunks, workers, [&](std::size_t c) {
    const std::size_t begin = c * batch_size;
    const std::size_t end = std::min(data.size(), begin + batch_size);
    std::vector<std::size_t> idx(end - begin);
    std::iota(idx.begin(), idx.end(), begin);
    Tape<T> tape(false);
    const auto out = model.forward(tape, make_batch<T>(data, idx, model.config().input_len), Mode::Eval);
    std::transform(out.logits->value.begin(), out.logits->value.end(),
                   logits.begin() + static_cast<std::ptrdiff_t>(begin * classes),
                   [](T v) { return static_cast<double>(v); });
  });
  return logits;
}

std::vector<std::size_t> labels_of(const traj::Dataset& data) {
  std::vector<std::size_t> out;
  out.reserve(data.size());
  for (const auto& t : data) out.push_back(traj::class_index(t.label));
  return out;
}

}  // namespace

template <typename T>
std::vector<double> predict_proba(ResAnDi<T>& model, const traj::Dataset& data, std::size_t batch_size,
                                  unsigned workers) {
  if (batch_size == 0) throw std::invalid_argument("predict: batch_size must be positive");
  auto logits = predict_logits(model, data, batch_size, workers);
  std::vector<double> probs(logits.size());
  ad::softmax_rows<double>(logits, model.config().num_classes, probs);
  return probs;
}

template std::vector<double> predict_proba(ResAnDi<float>&, const traj::Dataset&, std::size_t, unsigned);
template std::vector<double> predict_proba(ResAnDi<double>&, const traj::Dataset&, std::size_t, unsigned);

std::size_t argmax_row(std::span<const double> probs, std::size_t row, std::size_t cols) {
  const auto first = probs.begin() + static_cast<std::ptrdiff_t>(row * cols);
  return static_cast<std::size_t>(std::max_element(first, first + static_cast<std::ptrdiff_t>(cols)) - first);
}

Evaluation evaluate_predictions(std::span<const std::size_t> labels, std::span<const double> probs) {
  if (labels.empty()) throw std::invalid_argument("evaluate: empty dataset");
  if (probs.size() != labels.size() * kNumClasses) {
    throw std::invalid_argument("evaluate: probability table does not match label count");
  }
  Evaluation ev;
  ev.samples = labels.size();
  std::array<std::array<std::size_t, kNumClasses>, kNumClasses> counts{};
  std::size_t hits = 0;
  for (std::size_t n = 0; n < labels.size(); ++n) {
    if (labels[n] >= kNumClasses) throw std::out_of_range("evaluate: label out of range");
    const std::size_t pred = argmax_row(probs, n, kNumClasses);
    ++counts[labels[n]][pred];
    ++ev.class_counts[labels[n]];
    if (pred == labels[n]) ++hits;
  }
  double sum = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    if (ev.class_counts[c] == 0) continue;
    ++present;
    for (std::size_t p = 0; p < kNumClasses; ++p) {
      ev.confusion[c][p] = static_cast<double>(counts[c][p]) / static_cast<double>(ev.class_counts[c]);
    }
    sum += ev.confusion[c][c];
  }
  ev.accuracy = sum / static_cast<double>(present);
  ev.overall_accuracy = static_cast<double>(hits) / static_cast<double>(labels.size());
  return ev;
}

template <typename T>
Evaluation evaluate(ResAnDi<T>& model, const traj::Dataset& data, unsigned workers) {
  if (data.empty()) throw std::invalid_argument("evaluate: empty dataset");
  const auto probs = predict_proba(model, data, 64, workers);
  return evaluate_predictions(labels_of(data), probs);
}

template Evaluation evaluate(ResAnDi<float>&, const traj::Dataset&, unsigned);
template Evaluation evaluate(ResAnDi<double>&, const traj::Dataset&, unsigned);

std::vector<AlphaBin> confidence_by_alpha(std::span<const std::size_t> labels, std::span<const double> alphas,
                                          std::span<const double> probs, std::size_t bins) {
  if (bins == 0) throw std::invalid_argument("confidence_by_alpha: bins must be positive");
  if (labels.size() != alphas.size() || probs.size() != labels.size() * kNumClasses) {
    throw std::invalid_argument("confidence_by_alpha: input sizes disagree");
  }
  // slot layout: class c, bin b -> c * bins + b
  std::vector<AlphaBin> slots(kNumClasses * bins);
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const auto m = traj::mechanism_at(c);
    for (std::size_t b = 0; b < bins; ++b) {
      auto& s = slots[c * bins + b];
      s.true_class = c;
      if (m == traj::Mechanism::BM) {
        s.lo = s.hi = 1.0;
      } else {
        const double base = traj::is_subdiffusive(m) ? 0.1 : 1.1;
        const double w = 0.8 / static_cast<double>(bins);
        s.lo = base + w * static_cast<double>(b);
        s.hi = b + 1 == bins ? base + 0.8 : base + w * static_cast<double>(b + 1);
      }
    }
  }
  for (std::size_t n = 0; n < labels.size(); ++n) {
    const std::size_t c = labels[n];
    if (c >= kNumClasses) throw std::out_of_range("confidence_by_alpha: label out of range");
    std::size_t b = 0;
    if (traj::mechanism_at(c) != traj::Mechanism::BM) {
      const double base = traj::is_subdiffusive(traj::mechanism_at(c)) ? 0.1 : 1.1;
      const double pos = (alphas[n] - base) / 0.8 * static_cast<double>(bins);
      b = static_cast<std::size_t>(std::clamp(std::floor(pos), 0.0, static_cast<double>(bins - 1)));
    }
    auto& s = slots[c * bins + b];
    ++s.count;
    for (std::size_t k = 0; k < kNumClasses; ++k) s.mean_probs[k] += probs[n * kNumClasses + k];
  }
  std::vector<AlphaBin> out;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const std::size_t nb = traj::mechanism_at(c) == traj::Mechanism::BM ? 1 : bins;
    for (std::size_t b = 0; b < nb; ++b) {
      auto s = slots[c * bins + b];
      if (s.count == 0) continue;
      for (auto& p : s.mean_probs) p /= static_cast<double>(s.count);
      out.push_back(s);
    }
  }
  return out;
}

template <typename T>
std::vector<AlphaBin> confidence_by_alpha(ResAnDi<T>& model, const traj::Dataset& data, std::size_t bins,
                                          unsigned workers) {
  if (data.empty()) throw std::invalid_argument("confidence_by_alpha: empty dataset");
  const auto probs = predict_proba(model, data, 64, workers);
  std::vector<double> alphas;
  for (const auto& t : data) alphas.push_back(t.alpha);
  return confidence_by_alpha(labels_of(data), alphas, probs, bins);
}

template std::vector<AlphaBin> confidence_by_alpha(ResAnDi<float>&, const traj::Dataset&, std::size_t, unsigned);
template std::vector<AlphaBin> confidence_by_alpha(ResAnDi<double>&, const traj::Dataset&, std::size_t, unsigned);

template <typename T>
void export_activations(ResAnDi<T>& model, const traj::Dataset& data, std::size_t block_index,
                        std::ostream& out, unsigned workers) {
  if (block_index < 1 || block_index > 4) {
    throw std::invalid_argument("export_activations: block index must be in 1..4");
  }
  const std::size_t dim = model.config().stage_channels()[block_index - 1];
  std::vector<double> rows(data.size() * dim);
  const std::size_t batch = 64;
  const std::size_t chunks = (data.size() + batch - 1) / batch;
  parallel_for(chunks, workers, [&](std::size_t c) {
    const std::size_t begin = c * batch;
    const std::size_t end = std::min(data.size(), begin + batch);
    std::vector<std::size_t> idx(end - begin);
    std::iota(idx.begin(), idx.end(), begin);
    Tape<T> tape(false);
    const auto r = model.forward(tape, make_batch<T>(data, idx, model.config().input_len), Mode::Eval, true);
    auto pooled = ad::global_avg_pool1d(tape, r.stage_outputs[block_index - 1]);
    std::transform(pooled->value.begin(), pooled->value.end(),
                   rows.begin() + static_cast<std::ptrdiff_t>(begin * dim),
                   [](T v) { return static_cast<double>(v); });
  });
  std::string line = "label,alpha";
  for (std::size_t k = 1; k <= dim; ++k) line += ",v" + std::to_string(k);
  out << line << '\n';
  char buf[32];
  for (std::size_t n = 0; n < data.size(); ++n) {
    line.assign(traj::to_string(data[n].label));
    auto append = [&](double v) {
      const auto res = std::to_chars(buf, buf + sizeof(buf), v);
      line.push_back(',');
      line.append(buf, res.ptr);
    };
    append(data[n].alpha);
    for (std::size_t k = 0; k < dim; ++k) append(rows[n * dim + k]);
    out << line << '\n';
  }
}

template void export_activations(ResAnDi<float>&, const traj::Dataset&, std::size_t, std::ostream&, unsigned);
template void export_activations(ResAnDi<double>&, const traj::Dataset&, std::size_t, std::ostream&, unsigned);

// ---------------------------------------------------------------------------
// Training

void TrainingSpec::validate() const {
  if (!(lr0 > 0.0)) throw std::invalid_argument("training: lr0 must be positive");
  if (batch_size == 0 || patience == 0 || lr_halving_period == 0 || max_epochs == 0) {
    throw std::invalid_argument("training: batch_size, patience, lr_halving_period and max_epochs must be positive");
  }
}

StepLr::StepLr(double lr0, std::size_t period) : lr0_(lr0), period_(period) {
  if (period == 0) throw std::invalid_argument("StepLr: period must be positive");
}

double StepLr::lr(std::size_t epoch) const {
  return lr0_ * std::ldexp(1.0, -static_cast<int>(epoch / period_));
}

EarlyStopping::EarlyStopping(std::size_t patience)
    : patience_(patience), best_(std::numeric_limits<double>::infinity()) {
  if (patience == 0) throw std::invalid_argument("EarlyStopping: patience must be positive");
}

bool EarlyStopping::update(double val_loss) {
  if (val_loss < best_) {
    best_ = val_loss;
    stale_ = 0;
  } else {
    ++stale_;
  }
  return stale_ >= patience_;
}

std::pair<double, double> loss_and_accuracy(ResAnDi<float>& model, const traj::Dataset& data, unsigned workers) {
  if (data.empty()) throw std::invalid_argument("loss_and_accuracy: empty dataset");
  const std::size_t classes = model.config().num_classes;
  const auto logits = predict_logits(model, data, 64, workers);
  const auto labels = labels_of(data);
  double loss = 0.0;
  for (std::size_t n = 0; n < data.size(); ++n) {
    const double* row = logits.data() + n * classes;
    const double mx = *std::max_element(row, row + classes);
    double z = 0.0;
    for (std::size_t c = 0; c < classes; ++c) z += std::exp(row[c] - mx);
    loss += std::log(z) - (row[labels[n]] - mx);
  }
  std::vector<double> probs(logits.size());
  ad::softmax_rows<double>(logits, classes, probs);
  return {loss / static_cast<double>(data.size()), evaluate_predictions(labels, probs).accuracy};
}

TrainResult train(const ModelConfig& config, const traj::Dataset& train_set, const traj::Dataset& val_set,
                  const TrainingSpec& spec, unsigned workers,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
  spec.validate();
  if (train_set.empty() || val_set.empty()) throw std::invalid_argument("train: empty dataset");
  ResAnDi<float> model(config, traj::derive_seed(spec.seed, kInitSeedStream));
  ad::Adam<float> opt(model.parameters(), {.lr = spec.lr0});
  const StepLr schedule(spec.lr0, spec.lr_halving_period);
  EarlyStopping stopper(spec.patience);
  TrainResult result{model.cast<float>(), {}, {}, false};
  result.meta.seed = spec.seed;

  const auto labels = labels_of(train_set);
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t epoch = 0; epoch < spec.max_epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = schedule.lr(epoch);
    opt.set_lr(rec.lr);

    std::iota(order.begin(), order.end(), 0);
    traj::Rng rng = traj::make_substream(spec.seed, 0x5eed0000ULL + epoch);
    for (std::size_t i = order.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(traj::uniform01(rng) * static_cast<double>(i));
      std::swap(order[i - 1], order[std::min(j, i - 1)]);
    }

    double loss_sum = 0.0;
    std::size_t hits = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += spec.batch_size) {
      const std::size_t end = std::min(order.size(), begin + spec.batch_size);
      const std::span<const std::size_t> idx(order.data() + begin, end - begin);
      std::vector<std::size_t> y;
      for (auto i : idx) y.push_back(labels[i]);
      Tape<float> tape(true);
      const auto out = model.forward(tape, make_batch<float>(train_set, idx, config.input_len), Mode::Train);
      const auto loss = ad::softmax_cross_entropy(tape, out.logits, y);
      tape.backward(loss);
      opt.step();
      opt.zero_grad();
      loss_sum += static_cast<double>(loss->value[0]) * static_cast<double>(idx.size());
      const std::size_t classes = config.num_classes;
      for (std::size_t n = 0; n < idx.size(); ++n) {
        const float* row = out.logits->value.data() + n * classes;
        if (static_cast<std::size_t>(std::max_element(row, row + classes) - row) == y[n]) ++hits;
      }
    }
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.train_accuracy = static_cast<double>(hits) / static_cast<double>(order.size());
    std::tie(rec.val_loss, rec.val_accuracy) = loss_and_accuracy(model, val_set, workers);
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);

    const bool stop = stopper.update(rec.val_loss);
    if (stopper.improved()) {
      result.model = model.cast<float>();
      result.meta.best_epoch = epoch;
      result.meta.best_val_loss = rec.val_loss;
    }
    result.meta.epochs_run = epoch + 1;
    result.meta.final_val_loss = rec.val_loss;
    if (stop) {
      result.early_stopped = true;
      break;
    }
  }
  return result;
}

}  // namespace andikit::net
