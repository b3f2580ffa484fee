#pragma once

// Dense kernels behind projection, training and scoring.
//
// Each kernel exists twice: `serial` is the plain reference loop nest kept
// for testing, `parallel` splits output rows across OpenMP threads. Both
// accumulate every output element over the inner index in ascending order,
// so the two agree to rounding and the parallel result does not depend on
// the thread count.
//
// All matrices are row-major spans; shapes are checked by the callers.

#include <cstddef>
#include <span>

namespace nsnet::kernels {

namespace serial {

/// out(n x m) = a(n x k) * b(k x m)
void matmul(std::span<const double> a, std::span<const double> b, std::span<double> out,
            std::size_t n, std::size_t k, std::size_t m);

/// out(n x m) = a(n x k) * b(m x k)^T
void matmul_bt(std::span<const double> a, std::span<const double> b, std::span<double> out,
               std::size_t n, std::size_t k, std::size_t m);

/// out(k x m) = a(n x k)^T * b(n x m)
void matmul_at(std::span<const double> a, std::span<const double> b, std::span<double> out,
               std::size_t n, std::size_t k, std::size_t m);

}  // namespace serial

namespace parallel {

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> out,
            std::size_t n, std::size_t k, std::size_t m);

void matmul_bt(std::span<const double> a, std::span<const double> b, std::span<double> out,
               std::size_t n, std::size_t k, std::size_t m);

void matmul_at(std::span<const double> a, std::span<const double> b, std::span<double> out,
               std::size_t n, std::size_t k, std::size_t m);

}  // namespace parallel

}  // namespace nsnet::kernels
