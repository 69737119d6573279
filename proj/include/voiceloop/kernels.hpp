#pragma once

// Dense kernels behind every network evaluation. The default versions are
// OpenMP-parallel over output rows/columns; `reference` holds plain serial
// loops that the tests and the benchmark compare against.
//
// Inside an enclosing parallel region (per-utterance training workers) the
// inner pragmas fall back to a single thread.

#include <span>

#include "voiceloop/tensor.hpp"

namespace voiceloop::kernels {

// y = W x + b. `b` may be empty.
template <typename Real>
void affine(const Matrix<Real>& w, std::span<const Real> x, std::span<const Real> b,
            std::span<Real> y);

// y += W^T g
template <typename Real>
void accumulate_transposed(const Matrix<Real>& w, std::span<const Real> g, std::span<Real> y);

// G += g x^T
template <typename Real>
void accumulate_outer(std::span<const Real> g, std::span<const Real> x, Matrix<Real>& out);

namespace reference {

template <typename Real>
void affine(const Matrix<Real>& w, std::span<const Real> x, std::span<const Real> b,
            std::span<Real> y);

template <typename Real>
void accumulate_transposed(const Matrix<Real>& w, std::span<const Real> g, std::span<Real> y);

template <typename Real>
void accumulate_outer(std::span<const Real> g, std::span<const Real> x, Matrix<Real>& out);

}  // namespace reference

// Upper bound on OpenMP threads used by the kernels and the training
// workers; 0 means the OpenMP default.
void set_max_threads(int n);
int max_threads();

}  // namespace voiceloop::kernels
