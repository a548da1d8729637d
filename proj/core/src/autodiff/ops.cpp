#include "andikit/autodiff/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace andikit::ad {
namespace {

template <typename T>
using ColMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor>;
template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

void require_rank(const Shape& s, std::size_t rank, const char* op) {
  if (s.size() != rank) {
    throw std::invalid_argument(std::string(op) + ": expected rank " + std::to_string(rank) +
                                " input, got " + shape_string(s));
  }
}

std::uint64_t mix_bits(std::uint64_t h, std::uint64_t v) {
  h ^= v;
  return h * 0x100000001b3ULL;
}

}  // namespace

std::size_t conv_output_length(std::size_t length, std::size_t kernel, std::size_t stride,
                               std::size_t padding) {
  if (stride == 0 || kernel == 0) throw std::invalid_argument("conv: stride and kernel must be positive");
  if (length + 2 * padding < kernel) {
    throw std::invalid_argument("conv: padded input shorter than kernel");
  }
  return (length + 2 * padding - kernel) / stride + 1;
}

template <typename T>
BatchNorm<T>::BatchNorm(std::size_t channels)
    : scale(make_tensor<T>({channels}, T{1})),
      shift(make_tensor<T>({channels}, T{0})),
      running_mean(channels, T{0}),
      running_var(channels, T{1}) {
  scale->requires_grad = true;
  shift->requires_grad = true;
}

template <typename T>
TensorPtr<T> conv1d(Tape<T>& tape, const TensorPtr<T>& x, const TensorPtr<T>& w,
                    std::size_t stride, std::size_t padding) {
  require_rank(x->shape, 3, "conv1d");
  require_rank(w->shape, 3, "conv1d weights");
  const std::size_t n = x->dim(0), cin = x->dim(1), len = x->dim(2);
  const std::size_t cout = w->dim(0), k = w->dim(2);
  if (w->dim(1) != cin) {
    throw std::invalid_argument("conv1d: weight " + shape_string(w->shape) +
                                " does not match input " + shape_string(x->shape));
  }
  const std::size_t lout = conv_output_length(len, k, stride, padding);
  const std::size_t rows = n * lout;
  const std::size_t cink = cin * k;

  // im2col: column (c*K + j) holds x[n, c, l*stride + j - padding] for every
  // (n, l), stacked as row n*lout + l.
  auto cols = std::make_shared<std::vector<T>>(rows * cink, T{0});
  for (std::size_t c = 0; c < cin; ++c) {
    for (std::size_t j = 0; j < k; ++j) {
      T* col = cols->data() + (c * k + j) * rows;
      for (std::size_t b = 0; b < n; ++b) {
        const T* src = x->value.data() + (b * cin + c) * len;
        T* dst = col + b * lout;
        for (std::size_t l = 0; l < lout; ++l) {
          const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(l * stride + j) -
                                     static_cast<std::ptrdiff_t>(padding);
          if (pos >= 0 && pos < static_cast<std::ptrdiff_t>(len)) dst[l] = src[pos];
        }
      }
    }
  }

  auto out = tape.output({n, cout, lout}, {x.get(), w.get()});
  Eigen::Map<const ColMat<T>> colmat(cols->data(), static_cast<Eigen::Index>(rows),
                                     static_cast<Eigen::Index>(cink));
  Eigen::Map<const ColMat<T>> wt(w->value.data(), static_cast<Eigen::Index>(cink),
                                 static_cast<Eigen::Index>(cout));
  ColMat<T> y = colmat * wt;  // rows x cout
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t co = 0; co < cout; ++co) {
      const T* src = y.data() + co * rows + b * lout;
      std::copy(src, src + lout, out->value.data() + (b * cout + co) * lout);
    }
  }

  if (tape.recording() && out->requires_grad) {
    tape.record([x, w, out, cols, n, cin, len, cout, k, lout, rows, cink, stride, padding] {
      ColMat<T> dy(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cout));
      for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t co = 0; co < cout; ++co) {
          const T* src = out->grad.data() + (b * cout + co) * lout;
          std::copy(src, src + lout, dy.data() + co * rows + b * lout);
        }
      }
      Eigen::Map<const ColMat<T>> colmat(cols->data(), static_cast<Eigen::Index>(rows),
                                         static_cast<Eigen::Index>(cink));
      if (w->requires_grad) {
        Eigen::Map<ColMat<T>> dw(w->grad.data(), static_cast<Eigen::Index>(cink),
                                 static_cast<Eigen::Index>(cout));
        dw.noalias() += colmat.transpose() * dy;
      }
      if (x->requires_grad) {
        Eigen::Map<const ColMat<T>> wt(w->value.data(), static_cast<Eigen::Index>(cink),
                                       static_cast<Eigen::Index>(cout));
        ColMat<T> dcols = dy * wt.transpose();  // rows x cink
        for (std::size_t c = 0; c < cin; ++c) {
          for (std::size_t j = 0; j < k; ++j) {
            const T* col = dcols.data() + (c * k + j) * rows;
            for (std::size_t b = 0; b < n; ++b) {
              T* dst = x->grad.data() + (b * cin + c) * len;
              const T* src = col + b * lout;
              for (std::size_t l = 0; l < lout; ++l) {
                const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(l * stride + j) -
                                           static_cast<std::ptrdiff_t>(padding);
                if (pos >= 0 && pos < static_cast<std::ptrdiff_t>(len)) dst[pos] += src[l];
              }
            }
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
TensorPtr<T> batchnorm1d(Tape<T>& tape, const TensorPtr<T>& x, BatchNorm<T>& bn, Mode mode) {
  require_rank(x->shape, 3, "batchnorm1d");
  const std::size_t n = x->dim(0), ch = x->dim(1), len = x->dim(2);
  if (ch != bn.channels()) throw std::invalid_argument("batchnorm1d: channel count mismatch");
  const std::size_t m = n * len;
  require(m >= 1, "batchnorm1d: empty batch");

  auto out = tape.output(x->shape, {x.get(), bn.scale.get(), bn.shift.get()});
  auto inv_std = std::make_shared<std::vector<T>>(ch);
  auto centre = std::make_shared<std::vector<T>>(ch);

  for (std::size_t c = 0; c < ch; ++c) {
    T mean;
    T var;
    if (mode == Mode::Train) {
      double s = 0.0;
      for (std::size_t b = 0; b < n; ++b) {
        const T* p = x->value.data() + (b * ch + c) * len;
        for (std::size_t l = 0; l < len; ++l) s += static_cast<double>(p[l]);
      }
      const double mu = s / static_cast<double>(m);
      double ss = 0.0;
      for (std::size_t b = 0; b < n; ++b) {
        const T* p = x->value.data() + (b * ch + c) * len;
        for (std::size_t l = 0; l < len; ++l) {
          const double d = static_cast<double>(p[l]) - mu;
          ss += d * d;
        }
      }
      const double v = ss / static_cast<double>(m);
      mean = static_cast<T>(mu);
      var = static_cast<T>(v);
      const double unbiased = m > 1 ? v * static_cast<double>(m) / static_cast<double>(m - 1) : v;
      bn.running_mean[c] = static_cast<T>((1.0 - bn.momentum) * bn.running_mean[c] + bn.momentum * mu);
      bn.running_var[c] =
          static_cast<T>((1.0 - bn.momentum) * bn.running_var[c] + bn.momentum * unbiased);
    } else {
      mean = bn.running_mean[c];
      var = bn.running_var[c];
    }
    const T inv = T{1} / std::sqrt(var + static_cast<T>(bn.eps));
    (*inv_std)[c] = inv;
    (*centre)[c] = mean;
    const T g = bn.scale->value[c];
    const T beta = bn.shift->value[c];
    for (std::size_t b = 0; b < n; ++b) {
      const T* p = x->value.data() + (b * ch + c) * len;
      T* q = out->value.data() + (b * ch + c) * len;
      for (std::size_t l = 0; l < len; ++l) q[l] = g * (p[l] - mean) * inv + beta;
    }
  }

  if (tape.recording() && out->requires_grad) {
    auto scale = bn.scale;
    auto shift = bn.shift;
    tape.record([x, out, scale, shift, inv_std, centre, n, ch, len, m, mode] {
      for (std::size_t c = 0; c < ch; ++c) {
        const T inv = (*inv_std)[c];
        const T mean = (*centre)[c];
        T sum_dy = 0;
        T sum_dy_xhat = 0;
        for (std::size_t b = 0; b < n; ++b) {
          const T* p = x->value.data() + (b * ch + c) * len;
          const T* dy = out->grad.data() + (b * ch + c) * len;
          for (std::size_t l = 0; l < len; ++l) {
            sum_dy += dy[l];
            sum_dy_xhat += dy[l] * (p[l] - mean) * inv;
          }
        }
        if (scale->requires_grad) scale->grad[c] += sum_dy_xhat;
        if (shift->requires_grad) shift->grad[c] += sum_dy;
        if (!x->requires_grad) continue;
        const T g = scale->value[c];
        for (std::size_t b = 0; b < n; ++b) {
          const T* p = x->value.data() + (b * ch + c) * len;
          const T* dy = out->grad.data() + (b * ch + c) * len;
          T* dx = x->grad.data() + (b * ch + c) * len;
          if (mode == Mode::Train) {
            const T mt = static_cast<T>(m);
            for (std::size_t l = 0; l < len; ++l) {
              const T xhat = (p[l] - mean) * inv;
              dx[l] += g * inv * (dy[l] - sum_dy / mt - xhat * sum_dy_xhat / mt);
            }
          } else {
            for (std::size_t l = 0; l < len; ++l) dx[l] += g * inv * dy[l];
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
TensorPtr<T> relu(Tape<T>& tape, const TensorPtr<T>& x) {
  auto out = tape.output(x->shape, {x.get()});
  const std::size_t n = x->size();
  for (std::size_t i = 0; i < n; ++i) out->value[i] = x->value[i] > T{0} ? x->value[i] : T{0};
  if (tape.tracking_branches()) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < n; ++i) h = mix_bits(h, x->value[i] > T{0} ? 1u : 0u);
    tape.note_branch(h);
  }
  if (tape.recording() && out->requires_grad) {
    tape.record([x, out, n] {
      for (std::size_t i = 0; i < n; ++i) {
        if (x->value[i] > T{0}) x->grad[i] += out->grad[i];
      }
    });
  }
  return out;
}

template <typename T>
TensorPtr<T> max_pool1d(Tape<T>& tape, const TensorPtr<T>& x, std::size_t kernel,
                        std::size_t stride, std::size_t padding) {
  require_rank(x->shape, 3, "max_pool1d");
  require(padding < kernel, "max_pool1d: padding must be smaller than the kernel");
  const std::size_t rows = x->dim(0) * x->dim(1), len = x->dim(2);
  const std::size_t lout = conv_output_length(len, kernel, stride, padding);
  auto out = tape.output({x->dim(0), x->dim(1), lout}, {x.get()});
  auto winner = std::make_shared<std::vector<std::size_t>>(rows * lout);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* src = x->value.data() + r * len;
    for (std::size_t o = 0; o < lout; ++o) {
      const std::ptrdiff_t start =
          static_cast<std::ptrdiff_t>(o * stride) - static_cast<std::ptrdiff_t>(padding);
      T best = -std::numeric_limits<T>::infinity();
      std::size_t arg = 0;
      for (std::size_t j = 0; j < kernel; ++j) {
        const std::ptrdiff_t pos = start + static_cast<std::ptrdiff_t>(j);
        if (pos < 0 || pos >= static_cast<std::ptrdiff_t>(len)) continue;
        if (src[pos] > best) {
          best = src[pos];
          arg = static_cast<std::size_t>(pos);
        }
      }
      out->value[r * lout + o] = best;
      (*winner)[r * lout + o] = arg;
    }
  }
  if (tape.tracking_branches()) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (auto w : *winner) h = mix_bits(h, w);
    tape.note_branch(h);
  }
  if (tape.recording() && out->requires_grad) {
    tape.record([x, out, winner, rows, len, lout] {
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t o = 0; o < lout; ++o) {
          x->grad[r * len + (*winner)[r * lout + o]] += out->grad[r * lout + o];
        }
      }
    });
  }
  return out;
}

template <typename T>
TensorPtr<T> global_avg_pool1d(Tape<T>& tape, const TensorPtr<T>& x) {
  require_rank(x->shape, 3, "global_avg_pool1d");
  const std::size_t rows = x->dim(0) * x->dim(1), len = x->dim(2);
  require(len > 0, "global_avg_pool1d: empty length");
  auto out = tape.output({x->dim(0), x->dim(1)}, {x.get()});
  const T inv = T{1} / static_cast<T>(len);
  for (std::size_t r = 0; r < rows; ++r) {
    T s = 0;
    const T* src = x->value.data() + r * len;
    for (std::size_t l = 0; l < len; ++l) s += src[l];
    out->value[r] = s * inv;
  }
  if (tape.recording() && out->requires_grad) {
    tape.record([x, out, rows, len, inv] {
      for (std::size_t r = 0; r < rows; ++r) {
        const T g = out->grad[r] * inv;
        T* dst = x->grad.data() + r * len;
        for (std::size_t l = 0; l < len; ++l) dst[l] += g;
      }
    });
  }
  return out;
}

template <typename T>
TensorPtr<T> add(Tape<T>& tape, const TensorPtr<T>& a, const TensorPtr<T>& b) {
  if (a->shape != b->shape) {
    throw std::invalid_argument("add: shape mismatch " + shape_string(a->shape) + " vs " +
                                shape_string(b->shape));
  }
  auto out = tape.output(a->shape, {a.get(), b.get()});
  const std::size_t n = a->size();
  for (std::size_t i = 0; i < n; ++i) out->value[i] = a->value[i] + b->value[i];
  if (tape.recording() && out->requires_grad) {
    tape.record([a, b, out, n] {
      if (a->requires_grad) {
        for (std::size_t i = 0; i < n; ++i) a->grad[i] += out->grad[i];
      }
      if (b->requires_grad) {
        for (std::size_t i = 0; i < n; ++i) b->grad[i] += out->grad[i];
      }
    });
  }
  return out;
}

template <typename T>
TensorPtr<T> linear(Tape<T>& tape, const TensorPtr<T>& x, const TensorPtr<T>& w,
                    const TensorPtr<T>& b) {
  require_rank(x->shape, 2, "linear");
  require_rank(w->shape, 2, "linear weights");
  const std::size_t n = x->dim(0), f = x->dim(1), o = w->dim(0);
  if (w->dim(1) != f || b->size() != o) throw std::invalid_argument("linear: shape mismatch");
  auto out = tape.output({n, o}, {x.get(), w.get(), b.get()});
  const auto ni = static_cast<Eigen::Index>(n), fi = static_cast<Eigen::Index>(f),
             oi = static_cast<Eigen::Index>(o);
  Eigen::Map<const RowMat<T>> xm(x->value.data(), ni, fi);
  Eigen::Map<const RowMat<T>> wm(w->value.data(), oi, fi);
  Eigen::Map<RowMat<T>> ym(out->value.data(), ni, oi);
  ym.noalias() = xm * wm.transpose();
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < o; ++c) out->value[r * o + c] += b->value[c];
  }
  if (tape.recording() && out->requires_grad) {
    tape.record([x, w, b, out, ni, fi, oi] {
      Eigen::Map<const RowMat<T>> dy(out->grad.data(), ni, oi);
      if (x->requires_grad) {
        Eigen::Map<const RowMat<T>> wm(w->value.data(), oi, fi);
        Eigen::Map<RowMat<T>> dx(x->grad.data(), ni, fi);
        dx.noalias() += dy * wm;
      }
      if (w->requires_grad) {
        Eigen::Map<const RowMat<T>> xm(x->value.data(), ni, fi);
        Eigen::Map<RowMat<T>> dw(w->grad.data(), oi, fi);
        dw.noalias() += dy.transpose() * xm;
      }
      if (b->requires_grad) {
        for (Eigen::Index r = 0; r < ni; ++r) {
          for (Eigen::Index c = 0; c < oi; ++c) b->grad[static_cast<std::size_t>(c)] += dy(r, c);
        }
      }
    });
  }
  return out;
}

template <typename T>
void softmax_rows(std::span<const T> logits, std::size_t cols, std::span<T> out) {
  const std::size_t rows = logits.size() / cols;
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = logits.data() + r * cols;
    T* p = out.data() + r * cols;
    const T mx = *std::max_element(in, in + cols);
    T z = 0;
    for (std::size_t c = 0; c < cols; ++c) {
      p[c] = std::exp(in[c] - mx);
      z += p[c];
    }
    for (std::size_t c = 0; c < cols; ++c) p[c] /= z;
  }
}

template <typename T>
TensorPtr<T> softmax(Tape<T>& tape, const TensorPtr<T>& logits) {
  require_rank(logits->shape, 2, "softmax");
  const std::size_t rows = logits->dim(0), cols = logits->dim(1);
  auto out = tape.output(logits->shape, {logits.get()});
  softmax_rows<T>(logits->value, cols, out->value);
  if (tape.recording() && out->requires_grad) {
    tape.record([logits, out, rows, cols] {
      for (std::size_t r = 0; r < rows; ++r) {
        const T* p = out->value.data() + r * cols;
        const T* dy = out->grad.data() + r * cols;
        T dot = 0;
        for (std::size_t c = 0; c < cols; ++c) dot += dy[c] * p[c];
        T* dx = logits->grad.data() + r * cols;
        for (std::size_t c = 0; c < cols; ++c) dx[c] += p[c] * (dy[c] - dot);
      }
    });
  }
  return out;
}

template <typename T>
TensorPtr<T> softmax_cross_entropy(Tape<T>& tape, const TensorPtr<T>& logits,
                                   std::span<const std::size_t> labels) {
  require_rank(logits->shape, 2, "softmax_cross_entropy");
  const std::size_t rows = logits->dim(0), cols = logits->dim(1);
  if (labels.size() != rows) throw std::invalid_argument("softmax_cross_entropy: label count mismatch");
  for (auto l : labels) require(l < cols, "softmax_cross_entropy: label out of range");
  auto probs = std::make_shared<std::vector<T>>(logits->size());
  softmax_rows<T>(logits->value, cols, *probs);
  auto out = tape.output({}, {logits.get()});
  double loss = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    // log-sum-exp form keeps the loss finite when a probability underflows
    const T* in = logits->value.data() + r * cols;
    const T mx = *std::max_element(in, in + cols);
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) z += std::exp(static_cast<double>(in[c] - mx));
    loss += std::log(z) - static_cast<double>(in[labels[r]] - mx);
  }
  out->value[0] = static_cast<T>(loss / static_cast<double>(rows));
  if (tape.recording() && out->requires_grad) {
    std::vector<std::size_t> lab(labels.begin(), labels.end());
    tape.record([logits, out, probs, lab = std::move(lab), rows, cols] {
      const T g = out->grad[0] / static_cast<T>(rows);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
          const T target = c == lab[r] ? T{1} : T{0};
          logits->grad[r * cols + c] += g * ((*probs)[r * cols + c] - target);
        }
      }
    });
  }
  return out;
}

template <typename T>
TensorPtr<T> pick_sum(Tape<T>& tape, const TensorPtr<T>& x, std::span<const std::size_t> index) {
  require_rank(x->shape, 2, "pick_sum");
  const std::size_t rows = x->dim(0), cols = x->dim(1);
  if (index.size() != rows) throw std::invalid_argument("pick_sum: index count mismatch");
  for (auto i : index) {
    if (i >= cols) throw std::out_of_range("pick_sum: index out of range");
  }
  auto out = tape.output({}, {x.get()});
  T s = 0;
  for (std::size_t r = 0; r < rows; ++r) s += x->value[r * cols + index[r]];
  out->value[0] = s;
  if (tape.recording() && out->requires_grad) {
    std::vector<std::size_t> idx(index.begin(), index.end());
    tape.record([x, out, idx = std::move(idx), cols] {
      for (std::size_t r = 0; r < idx.size(); ++r) x->grad[r * cols + idx[r]] += out->grad[0];
    });
  }
  return out;
}

template <typename T>
TensorPtr<T> sum(Tape<T>& tape, const TensorPtr<T>& x) {
  auto out = tape.output({}, {x.get()});
  T s = 0;
  for (auto v : x->value) s += v;
  out->value[0] = s;
  if (tape.recording() && out->requires_grad) {
    tape.record([x, out] {
      for (auto& g : x->grad) g += out->grad[0];
    });
  }
  return out;
}

#define ANDIKIT_INSTANTIATE_OPS(T)                                                              \
  template struct BatchNorm<T>;                                                                 \
  template TensorPtr<T> conv1d(Tape<T>&, const TensorPtr<T>&, const TensorPtr<T>&, std::size_t, \
                               std::size_t);                                                    \
  template TensorPtr<T> batchnorm1d(Tape<T>&, const TensorPtr<T>&, BatchNorm<T>&, Mode);        \
  template TensorPtr<T> relu(Tape<T>&, const TensorPtr<T>&);                                    \
  template TensorPtr<T> max_pool1d(Tape<T>&, const TensorPtr<T>&, std::size_t, std::size_t,     \
                                   std::size_t);                                                \
  template TensorPtr<T> global_avg_pool1d(Tape<T>&, const TensorPtr<T>&);                       \
  template TensorPtr<T> add(Tape<T>&, const TensorPtr<T>&, const TensorPtr<T>&);                \
  template TensorPtr<T> linear(Tape<T>&, const TensorPtr<T>&, const TensorPtr<T>&,              \
                               const TensorPtr<T>&);                                            \
  template TensorPtr<T> softmax(Tape<T>&, const TensorPtr<T>&);                                 \
  template TensorPtr<T> softmax_cross_entropy(Tape<T>&, const TensorPtr<T>&,                    \
                                              std::span<const std::size_t>);                    \
  template TensorPtr<T> pick_sum(Tape<T>&, const TensorPtr<T>&, std::span<const std::size_t>);  \
  template TensorPtr<T> sum(Tape<T>&, const TensorPtr<T>&);                                     \
  template void softmax_rows(std::span<const T>, std::size_t, std::span<T>);

ANDIKIT_INSTANTIATE_OPS(float)
ANDIKIT_INSTANTIATE_OPS(double)

#undef ANDIKIT_INSTANTIATE_OPS

}  // namespace andikit::ad
