#pragma once

#include <cstdint>

#include "ra/types.hpp"

namespace ra::linalg {

/// Top-K (or full) singular triplet. Columns of u and v are orthonormal,
/// s is sorted descending and non-negative. The sign ambiguity is resolved
/// by making the largest-magnitude entry of each left singular vector
/// positive.
struct SvdTriplet {
  Matrix u;
  Vector s;
  Matrix v;
};

struct QrResult {
  Matrix q;  // orthonormal columns, rows x cols of the input
  Matrix r;  // upper triangular, non-negative diagonal
};

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

/// Thin Householder QR for rows >= cols. A column that is numerically
/// dependent on the previous ones yields a zero diagonal entry in r; this is
/// not an error.
QrResult qr_decompose(const Matrix& a);

/// Top-k singular triplet by randomized subspace iteration: a Gaussian start
/// block of k + oversample columns, t rounds of multiply-by-a/a^T with QR
/// re-orthonormalization, and an exact SVD of the small projected matrix.
/// Bit-deterministic for fixed (a, k, t, seed, oversample).
SvdTriplet randomized_svd(const Matrix& a, Index k, int t, std::uint64_t seed,
                          Index oversample = 8);

/// Full SVD by one-sided Jacobi rotations, iterated until every column pair
/// is orthogonal to within 1e-14 relative. Requires min(rows, cols) <= 512;
/// use randomized_svd beyond that.
SvdTriplet exact_svd_small(const Matrix& a);

/// Moore-Penrose pseudo-inverse via exact_svd_small; singular values below
/// rcond * s_max are treated as zero.
Matrix pseudo_inverse(const Matrix& a, double rcond = 1e-12);

/// Ordinary least squares y = slope * x + intercept with r2 = 1 - SSres/SStot.
/// A constant target has r2 = 1 by convention (zero residual).
LineFit linear_fit(const Vector& xs, const Vector& ys);

}  // namespace ra::linalg
