#include "nsnet/kernels.hpp"

#include <algorithm>
#include <cstdint>

namespace nsnet::kernels {

namespace serial {

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> out,
            std::size_t n, std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * m + j];
      out[i * m + j] = acc;
    }
  }
}

void matmul_bt(std::span<const double> a, std::span<const double> b, std::span<double> out,
               std::size_t n, std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[j * k + p];
      out[i * m + j] = acc;
    }
  }
}

void matmul_at(std::span<const double> a, std::span<const double> b, std::span<double> out,
               std::size_t n, std::size_t k, std::size_t m) {
  for (std::size_t r = 0; r < k; ++r) {
    for (std::size_t j = 0; j < m; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) acc += a[i * k + r] * b[i * m + j];
      out[r * m + j] = acc;
    }
  }
}

}  // namespace serial

namespace parallel {

// Loop orders below keep the reduction index outermost within a row so the
// inner loop streams contiguously, while each element still sums in the
// same order as the serial reference.

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> out,
            std::size_t n, std::size_t k, std::size_t m) {
  const auto rows = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static)
  for (std::int64_t ii = 0; ii < rows; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    double* dst = out.data() + i * m;
    std::fill(dst, dst + m, 0.0);
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      const double* src = b.data() + p * m;
      for (std::size_t j = 0; j < m; ++j) dst[j] += aip * src[j];
    }
  }
}

void matmul_bt(std::span<const double> a, std::span<const double> b, std::span<double> out,
               std::size_t n, std::size_t k, std::size_t m) {
  const auto rows = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static)
  for (std::int64_t ii = 0; ii < rows; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    const double* ai = a.data() + i * k;
    for (std::size_t j = 0; j < m; ++j) {
      const double* bj = b.data() + j * k;
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
      out[i * m + j] = acc;
    }
  }
}

void matmul_at(std::span<const double> a, std::span<const double> b, std::span<double> out,
               std::size_t n, std::size_t k, std::size_t m) {
  const auto rows = static_cast<std::int64_t>(k);
#pragma omp parallel for schedule(static)
  for (std::int64_t rr = 0; rr < rows; ++rr) {
    const auto r = static_cast<std::size_t>(rr);
    double* dst = out.data() + r * m;
    std::fill(dst, dst + m, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double air = a[i * k + r];
      const double* src = b.data() + i * m;
      for (std::size_t j = 0; j < m; ++j) dst[j] += air * src[j];
    }
  }
}

}  // namespace parallel

}  // namespace nsnet::kernels
