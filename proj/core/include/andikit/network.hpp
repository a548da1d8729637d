#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "andikit/autodiff.hpp"
#include "andikit/trajgen.hpp"

namespace andikit::net {

using traj::kNumClasses;

/// Architecture of the residual 1-D classifier. Defaults are the full-scale
/// reference: input 2 x 1000, stage lengths 500 / 250 / 125 / 63 / 32.
struct ModelConfig {
  std::size_t input_len = 1000;
  std::array<std::size_t, 4> channels{64, 128, 256, 512};
  std::size_t stem_kernel = 35;
  std::size_t stem_stride = 2;
  std::size_t stem_padding = 17;
  std::size_t pool_kernel = 3;
  std::size_t pool_stride = 2;
  std::size_t pool_padding = 1;
  std::size_t block_kernel = 15;
  std::size_t blocks_per_stage = 2;
  std::size_t num_classes = kNumClasses;
  double scale = 1.0;

  static ModelConfig full_scale() { return {}; }
  /// Length 200, width 0.5.
  static ModelConfig desk_scale();

  void validate() const;
  /// Channel counts after applying `scale` (rounded, at least 1).
  std::array<std::size_t, 4> stage_channels() const;
  /// Output lengths of the stem convolution and of the four stages.
  std::array<std::size_t, 5> stage_lengths() const;
  /// Number of final-layer positions (Grad-CAM nodes).
  std::size_t final_length() const { return stage_lengths()[4]; }
  std::size_t final_channels() const { return stage_channels()[3]; }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

template <typename T>
struct ForwardResult {
  ad::TensorPtr<T> logits;      // [N, classes]
  ad::TensorPtr<T> final_maps;  // [N, C4, L4], post-activation output of stage 4
  std::array<ad::TensorPtr<T>, 4> stage_outputs;  // filled when requested
};

/// Residual network: stem conv -> BN -> ReLU -> max pool -> 4 stages of basic
/// blocks -> global average pool -> fully connected.
template <typename T>
class ResAnDi {
 public:
  struct Block {
    ad::TensorPtr<T> conv1;
    ad::BatchNorm<T> bn1;
    ad::TensorPtr<T> conv2;
    ad::BatchNorm<T> bn2;
    ad::TensorPtr<T> proj;  // null for identity shortcuts
    ad::BatchNorm<T> proj_bn;
    std::size_t stride = 1;
  };

  ResAnDi(const ModelConfig& config, std::uint64_t init_seed);

  const ModelConfig& config() const { return config_; }

  /// Stem and stages only. Returns the stage-4 maps.
  ad::TensorPtr<T> trunk(ad::Tape<T>& tape, const ad::TensorPtr<T>& input, ad::Mode mode,
                         std::array<ad::TensorPtr<T>, 4>* stage_outputs = nullptr);
  /// Global average pool and fully-connected layer on stage-4 maps.
  ad::TensorPtr<T> head(ad::Tape<T>& tape, const ad::TensorPtr<T>& final_maps);
  ForwardResult<T> forward(ad::Tape<T>& tape, const ad::TensorPtr<T>& input, ad::Mode mode,
                           bool keep_stages = false);

  /// Trainable tensors in declaration order.
  std::vector<ad::Parameter<T>> parameters() const;
  /// Trainable tensors followed by every batch-norm running statistic, in the
  /// fixed checkpoint order. Running statistics are exposed as views that the
  /// callback may read or overwrite.
  struct NamedArray {
    std::string name;
    ad::Shape shape;
    std::vector<T>* data;
  };
  std::vector<NamedArray> state();

  std::size_t parameter_count() const;

  template <typename U>
  ResAnDi<U> cast() const;

 private:
  template <typename U>
  friend class ResAnDi;

  ModelConfig config_;
  ad::TensorPtr<T> stem_;
  ad::BatchNorm<T> stem_bn_;
  std::vector<std::vector<Block>> stages_;
  ad::TensorPtr<T> fc_w_;
  ad::TensorPtr<T> fc_b_;
};

extern template class ResAnDi<float>;
extern template class ResAnDi<double>;

/// Stacks preprocessed trajectories into an [N, 2, L] tensor.
template <typename T>
ad::TensorPtr<T> make_batch(const traj::Dataset& data, std::span<const std::size_t> indices,
                            std::size_t input_len);

/// Class probabilities [N * classes] in dataset order, eval mode.
template <typename T>
std::vector<double> predict_proba(ResAnDi<T>& model, const traj::Dataset& data,
                                  std::size_t batch_size = 64, unsigned workers = 1);

std::size_t argmax_row(std::span<const double> probs, std::size_t row, std::size_t cols);

// ---------------------------------------------------------------------------
// Evaluation

struct Evaluation {
  /// Mean over present classes of the per-class hit rate.
  double accuracy = 0.0;
  /// Fraction of all samples classified correctly.
  double overall_accuracy = 0.0;
  std::size_t samples = 0;
  std::array<std::size_t, kNumClasses> class_counts{};
  /// Row-normalized counts of predicted classes; rows of absent classes stay 0
  /// and are flagged by class_counts == 0.
  std::array<std::array<double, kNumClasses>, kNumClasses> confusion{};
};

/// Scores argmax predictions. probs is row-major [labels.size() x kNumClasses].
Evaluation evaluate_predictions(std::span<const std::size_t> labels, std::span<const double> probs);

template <typename T>
Evaluation evaluate(ResAnDi<T>& model, const traj::Dataset& data, unsigned workers = 1);

struct AlphaBin {
  std::size_t true_class = 0;
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;
  std::array<double, kNumClasses> mean_probs{};
};

/// Mean predicted probabilities per ground-truth class and alpha bin. Sub
/// classes split [0.1, 0.9] and Sup classes split [1.1, 1.9] into `bins` equal
/// bins; BM has the single bin [1, 1]. Empty bins are omitted.
std::vector<AlphaBin> confidence_by_alpha(std::span<const std::size_t> labels,
                                          std::span<const double> alphas,
                                          std::span<const double> probs, std::size_t bins);

template <typename T>
std::vector<AlphaBin> confidence_by_alpha(ResAnDi<T>& model, const traj::Dataset& data,
                                          std::size_t bins, unsigned workers = 1);

/// Global-average-pooled output of stage `block_index` (1..4), one row per
/// trajectory, written as a header line and `label,alpha,v1,...,vC` records.
template <typename T>
void export_activations(ResAnDi<T>& model, const traj::Dataset& data, std::size_t block_index,
                        std::ostream& out, unsigned workers = 1);

// ---------------------------------------------------------------------------
// Training

/// train() draws initial weights from derive_seed(spec.seed, kInitSeedStream).
inline constexpr std::uint64_t kInitSeedStream = 0x1417;

struct TrainingSpec {
  double lr0 = 1e-4;
  std::size_t batch_size = 64;
  std::size_t patience = 10;
  std::size_t lr_halving_period = 10;
  std::size_t max_epochs = 100;
  std::uint64_t seed = 0;

  void validate() const;
};

/// lr(epoch) = lr0 * 0.5^floor(epoch / period), epochs counted from 0.
class StepLr {
 public:
  StepLr(double lr0, std::size_t period);
  double lr(std::size_t epoch) const;

 private:
  double lr0_;
  std::size_t period_;
};

/// Stops after `patience` consecutive epochs without a strictly lower
/// validation loss.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience);
  /// Records one epoch. Returns true when training should stop.
  bool update(double val_loss);
  bool improved() const { return stale_ == 0; }
  double best() const { return best_; }
  std::size_t stale_epochs() const { return stale_; }

 private:
  std::size_t patience_;
  double best_;
  std::size_t stale_ = 0;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
};

struct CheckpointMeta {
  std::uint64_t seed = 0;
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  double final_val_loss = 0.0;
};

struct TrainResult {
  ResAnDi<float> model;  // best-validation weights
  CheckpointMeta meta;
  std::vector<EpochRecord> history;
  bool early_stopped = false;
};

/// Mean cross-entropy and balanced accuracy of `model` on `data` (eval mode).
std::pair<double, double> loss_and_accuracy(ResAnDi<float>& model, const traj::Dataset& data,
                                            unsigned workers = 1);

/// Trains a freshly initialized model (weights drawn from spec.seed). The
/// optional callback sees each finished epoch.
TrainResult train(const ModelConfig& config, const traj::Dataset& train_set,
                  const traj::Dataset& val_set, const TrainingSpec& spec, unsigned workers = 1,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

// ---------------------------------------------------------------------------
// Checkpoints

inline constexpr std::string_view kCheckpointMagic = "ANDICKPT";
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ResAnDi<float> model;
  CheckpointMeta meta;
};

void write_checkpoint(std::ostream& out, ResAnDi<float>& model, const CheckpointMeta& meta);
Checkpoint read_checkpoint(std::istream& in);
void save_checkpoint(const std::string& path, ResAnDi<float>& model, const CheckpointMeta& meta);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace andikit::net
