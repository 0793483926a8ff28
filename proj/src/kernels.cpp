#include "ade/kernels.hpp"

#include <cassert>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace ade::kernels {

double cosine(const double* u, const double* v, std::size_t d) {
  double uu = 0.0, vv = 0.0, uv = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    uu += u[i] * u[i];
    vv += v[i] * v[i];
    uv += u[i] * v[i];
  }
  const double nu = std::max(std::sqrt(uu), kNormFloor);
  const double nv = std::max(std::sqrt(vv), kNormFloor);
  return uv / (nu * nv);
}

std::size_t masked_argmax(const double* src, const std::uint8_t* mask,
                          std::size_t n) {
  std::size_t best = n;
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    if (best == n || src[i] > src[best]) best = i;
  }
  if (best == n) throw std::invalid_argument("masked_argmax: all entries masked");
  return best;
}

void masked_softmax(const double* src, const std::uint8_t* mask, std::size_t n,
                    double* dst) {
  const std::size_t m = masked_argmax(src, mask, n);
  const double top = src[m];
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (mask[i]) {
      dst[i] = std::exp(src[i] - top);
      z += dst[i];
    } else {
      dst[i] = 0.0;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (mask[i]) dst[i] /= z;
  }
}

void masked_log_softmax(const double* src, const std::uint8_t* mask,
                        std::size_t n, double* dst) {
  const double lse = masked_logsumexp(src, mask, n);
  for (std::size_t i = 0; i < n; ++i) dst[i] = mask[i] ? src[i] - lse : 0.0;
}

double masked_logsumexp(const double* src, const std::uint8_t* mask,
                        std::size_t n) {
  const std::size_t m = masked_argmax(src, mask, n);
  const double top = src[m];
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (mask[i]) z += std::exp(src[i] - top);
  }
  return top + std::log(z);
}

void weighted_row_sum(const double* w, const Tensor& rows, double* out) {
  const std::size_t n = rows.rows(), d = rows.cols();
  for (std::size_t c = 0; c < d; ++c) out[c] = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double wi = w[i];
    const double* r = rows.data() + i * d;
    for (std::size_t c = 0; c < d; ++c) out[c] += wi * r[c];
  }
}

void masked_mean_rows(const Tensor& rows, const std::uint8_t* row_mask,
                      double* out) {
  const std::size_t n = rows.rows(), d = rows.cols();
  std::size_t count = 0;
  for (std::size_t c = 0; c < d; ++c) out[c] = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!row_mask[i]) continue;
    ++count;
    const double* r = rows.data() + i * d;
    for (std::size_t c = 0; c < d; ++c) out[c] += r[c];
  }
  if (count == 0) throw std::invalid_argument("masked_mean_rows: all rows masked");
  for (std::size_t c = 0; c < d; ++c) out[c] /= static_cast<double>(count);
}

void matmul_accumulate(const Tensor& a, const Tensor& b, Tensor& c) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  assert(b.rows() == k && c.rows() == m && c.cols() == n);
  const double* pa = a.data();
  const double* pb = b.data();
  double* pc = c.data();
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = pa + i * k;
    double* crow = pc + i * n;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double av = arow[kk];
      if (av == 0.0) continue;
      const double* brow = pb + kk * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace ade::kernels
