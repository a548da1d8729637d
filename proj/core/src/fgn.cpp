#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <mutex>

#include "andikit/trajgen.hpp"

namespace andikit::traj {
namespace {

// FFTW planning is not thread-safe; execution of distinct plans is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwDeleter {
  void operator()(fftw_complex* p) const { fftw_free(p); }
};
using FftwBuffer = std::unique_ptr<fftw_complex[], FftwDeleter>;

FftwBuffer make_buffer(std::size_t n) {
  auto* p = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
  if (p == nullptr) throw std::bad_alloc();
  return FftwBuffer(p);
}

/// In-place forward DFT of `data` (length n).
void forward_dft(fftw_complex* data, std::size_t n) {
  fftw_plan plan = nullptr;
  {
    std::lock_guard lock(planner_mutex());
    plan = fftw_plan_dft_1d(static_cast<int>(n), data, data, FFTW_FORWARD, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  std::lock_guard lock(planner_mutex());
  fftw_destroy_plan(plan);
}

void require_hurst(double hurst) {
  if (!(hurst > 0.0 && hurst < 1.0)) throw std::invalid_argument("Hurst exponent must be in (0, 1)");
}

std::vector<double> hosking(double hurst, std::size_t n, Rng& rng) {
  std::vector<double> gamma(n);
  for (std::size_t k = 0; k < n; ++k) gamma[k] = fgn_autocovariance(hurst, k);
  std::vector<double> x(n);
  std::vector<double> phi(n, 0.0);
  std::vector<double> prev(n, 0.0);
  double v = gamma[0];
  x[0] = std::sqrt(v) * standard_normal(rng);
  for (std::size_t t = 1; t < n; ++t) {
    double acc = gamma[t];
    for (std::size_t j = 1; j < t; ++j) acc -= prev[j] * gamma[t - j];
    const double phi_tt = acc / v;
    phi[t] = phi_tt;
    for (std::size_t j = 1; j < t; ++j) phi[j] = prev[j] - phi_tt * prev[t - j];
    v *= (1.0 - phi_tt * phi_tt);
    double mean = 0.0;
    for (std::size_t j = 1; j <= t; ++j) mean += phi[j] * x[t - j];
    x[t] = mean + std::sqrt(std::max(v, 0.0)) * standard_normal(rng);
    std::copy(phi.begin(), phi.begin() + static_cast<std::ptrdiff_t>(t) + 1, prev.begin());
  }
  return x;
}

}  // namespace

double fgn_autocovariance(double hurst, std::size_t lag) {
  const double k = static_cast<double>(lag);
  const double h2 = 2.0 * hurst;
  if (lag == 0) return 1.0;
  return 0.5 * (std::pow(k + 1.0, h2) - 2.0 * std::pow(k, h2) + std::pow(k - 1.0, h2));
}

std::vector<double> circulant_eigenvalues(double hurst, std::size_t n) {
  require_hurst(hurst);
  if (n == 0) return {};
  const std::size_t m = 2 * n;
  auto buf = make_buffer(m);
  for (std::size_t j = 0; j < m; ++j) {
    const std::size_t lag = j <= n ? j : m - j;
    buf[j][0] = fgn_autocovariance(hurst, lag);
    buf[j][1] = 0.0;
  }
  forward_dft(buf.get(), m);
  std::vector<double> eig(m);
  for (std::size_t j = 0; j < m; ++j) eig[j] = buf[j][0];
  return eig;
}

FgnPair fractional_gaussian_noise(double hurst, std::size_t n, Rng& rng, FgnMethod method) {
  require_hurst(hurst);
  FgnPair out;
  if (n == 0) return out;

  if (method != FgnMethod::Hosking) {
    const auto eig = circulant_eigenvalues(hurst, n);
    const double scale = *std::max_element(eig.begin(), eig.end());
    const bool usable = std::all_of(eig.begin(), eig.end(),
                                    [&](double e) { return e >= -1e-10 * scale; });
    if (usable) {
      const std::size_t m = eig.size();
      auto buf = make_buffer(m);
      for (std::size_t k = 0; k < m; ++k) {
        const double amp = std::sqrt(std::max(eig[k], 0.0) / static_cast<double>(m));
        buf[k][0] = amp * standard_normal(rng);
        buf[k][1] = amp * standard_normal(rng);
      }
      forward_dft(buf.get(), m);
      // Real and imaginary parts are independent, each with the target
      // circulant covariance.
      out.first.resize(n);
      out.second.resize(n);
      for (std::size_t j = 0; j < n; ++j) {
        out.first[j] = buf[j][0];
        out.second[j] = buf[j][1];
      }
      out.method_used = FgnMethod::Circulant;
      return out;
    }
    if (method == FgnMethod::Circulant) {
      throw std::runtime_error("circulant embedding is not nonnegative definite");
    }
  }
  out.first = hosking(hurst, n, rng);
  out.second = hosking(hurst, n, rng);
  out.method_used = FgnMethod::Hosking;
  return out;
}

}  // namespace andikit::traj
