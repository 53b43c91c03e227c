#include "ra/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "ra/random.hpp"

namespace ra::linalg {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

// Make the largest-magnitude entry of each left singular vector positive,
// flipping the matching right vector to keep u s v^T unchanged.
void fix_signs(Matrix& u, Matrix& v) {
  for (Index j = 0; j < u.cols(); ++j) {
    Index imax = 0;
    u.col(j).cwiseAbs().maxCoeff(&imax);
    if (u(imax, j) < 0.0) {
      u.col(j) = -u.col(j);
      v.col(j) = -v.col(j);
    }
  }
}

// Orthonormal completion for columns whose singular value is numerically
// zero: their post-rotation direction is noise, so replace it with a unit
// vector orthogonal to all trusted columns.
void complete_basis(Matrix& u, const std::vector<Index>& degenerate) {
  const Index m = u.rows();
  for (Index col : degenerate) {
    Vector best;
    double best_norm = -1.0;
    for (Index cand = 0; cand < m; ++cand) {
      Vector e = Vector::Zero(m);
      e(cand) = 1.0;
      for (int pass = 0; pass < 2; ++pass) {
        for (Index j = 0; j < u.cols(); ++j) {
          if (j == col) continue;
          e -= u.col(j).dot(e) * u.col(j);
        }
      }
      const double n = e.norm();
      if (n > best_norm) {
        best_norm = n;
        best = e;
      }
      if (n > 0.5) break;  // good enough, no need to scan further
    }
    u.col(col) = best / best_norm;
  }
}

}  // namespace

QrResult qr_decompose(const Matrix& a) {
  if (!all_finite(a)) throw std::invalid_argument("qr_decompose: non-finite input");
  if (a.rows() < a.cols())
    throw std::invalid_argument("qr_decompose: requires rows >= cols");

  Eigen::HouseholderQR<Matrix> qr(a);
  QrResult out;
  out.q = qr.householderQ() * Matrix::Identity(a.rows(), a.cols());
  out.r = qr.matrixQR().topRows(a.cols()).triangularView<Eigen::Upper>();

  const double zero_tol = kEps * a.norm();
  for (Index i = 0; i < out.r.rows(); ++i) {
    if (out.r(i, i) < 0.0) {
      out.r.row(i) = -out.r.row(i);
      out.q.col(i) = -out.q.col(i);
    }
    if (std::abs(out.r(i, i)) <= zero_tol) out.r(i, i) = 0.0;
  }
  return out;
}

SvdTriplet randomized_svd(const Matrix& a, Index k, int t, std::uint64_t seed,
                          Index oversample) {
  const Index rank_cap = std::min(a.rows(), a.cols());
  if (k < 1 || k > rank_cap)
    throw std::invalid_argument("randomized_svd: k must be in [1, min(rows, cols)]");
  if (t < 1) throw std::invalid_argument("randomized_svd: t must be >= 1");
  if (!all_finite(a)) throw std::invalid_argument("randomized_svd: non-finite input");

  const Index p = std::min(k + std::max<Index>(oversample, 0), rank_cap);

  Rng rng(seed);
  Matrix omega = rng.gaussian_matrix(a.cols(), p);
  Matrix q = qr_decompose(a * omega).q;
  for (int round = 0; round < t; ++round) {
    const Matrix qz = qr_decompose(a.transpose() * q).q;
    q = qr_decompose(a * qz).q;
  }

  // p x cols projection; its exact SVD gives the Ritz triplet.
  const Matrix b = q.transpose() * a;
  SvdTriplet small = exact_svd_small(b);

  SvdTriplet out;
  out.u = q * small.u.leftCols(k);
  out.s = small.s.head(k);
  out.v = small.v.leftCols(k);
  fix_signs(out.u, out.v);
  return out;
}

SvdTriplet exact_svd_small(const Matrix& a) {
  if (std::min(a.rows(), a.cols()) > 512)
    throw std::invalid_argument(
        "exact_svd_small: min dimension above 512, use randomized_svd");
  if (!all_finite(a)) throw std::invalid_argument("exact_svd_small: non-finite input");

  const bool transposed = a.rows() < a.cols();
  Matrix w = transposed ? a.transpose() : a;  // m x n, m >= n
  const Index n = w.cols();
  Matrix v = Matrix::Identity(n, n);

  // One-sided Jacobi (Hestenes): rotate column pairs until all are mutually
  // orthogonal relative to their norms.
  constexpr double kTol = 1e-14;
  constexpr int kMaxSweeps = 60;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool converged = true;
    for (Index p = 0; p < n - 1; ++p) {
      for (Index q = p + 1; q < n; ++q) {
        const double alpha = w.col(p).squaredNorm();
        const double beta = w.col(q).squaredNorm();
        const double gamma = w.col(p).dot(w.col(q));
        const double scale = std::sqrt(alpha * beta);
        if (scale == 0.0 || std::abs(gamma) <= kTol * scale) continue;
        converged = false;
        const double tau = (beta - alpha) / (2.0 * gamma);
        const double tt = (tau >= 0.0 ? 1.0 : -1.0) /
                          (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + tt * tt);
        const double s = c * tt;
        for (Index i = 0; i < w.rows(); ++i) {
          const double wp = w(i, p), wq = w(i, q);
          w(i, p) = c * wp - s * wq;
          w(i, q) = s * wp + c * wq;
        }
        for (Index i = 0; i < n; ++i) {
          const double vp = v(i, p), vq = v(i, q);
          v(i, p) = c * vp - s * vq;
          v(i, q) = s * vp + c * vq;
        }
      }
    }
    if (converged) break;
  }

  Vector norms(n);
  for (Index j = 0; j < n; ++j) norms(j) = w.col(j).norm();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index i, Index j) { return norms(i) > norms(j); });

  SvdTriplet out;
  out.u.resize(w.rows(), n);
  out.v.resize(n, n);
  out.s.resize(n);
  const double s_max = norms(order[0]);
  const double tiny = static_cast<double>(w.rows()) * kEps * s_max;
  std::vector<Index> degenerate;
  for (Index j = 0; j < n; ++j) {
    const Index src = order[static_cast<std::size_t>(j)];
    out.s(j) = norms(src);
    out.v.col(j) = v.col(src);
    if (norms(src) > tiny && norms(src) > 0.0) {
      out.u.col(j) = w.col(src) / norms(src);
    } else {
      out.u.col(j).setZero();
      degenerate.push_back(j);
    }
  }
  if (!degenerate.empty()) complete_basis(out.u, degenerate);

  if (transposed) std::swap(out.u, out.v);
  fix_signs(out.u, out.v);
  return out;
}

Matrix pseudo_inverse(const Matrix& a, double rcond) {
  SvdTriplet svd = exact_svd_small(a);
  const double cutoff = rcond * (svd.s.size() > 0 ? svd.s(0) : 0.0);
  Vector inv = Vector::Zero(svd.s.size());
  for (Index i = 0; i < svd.s.size(); ++i)
    if (svd.s(i) > cutoff) inv(i) = 1.0 / svd.s(i);
  return svd.v * inv.asDiagonal() * svd.u.transpose();
}

LineFit linear_fit(const Vector& xs, const Vector& ys) {
  if (xs.size() != ys.size())
    throw std::invalid_argument("linear_fit: size mismatch");
  if (xs.size() < 2) throw std::invalid_argument("linear_fit: need >= 2 points");
  const double x_mean = xs.mean();
  const double y_mean = ys.mean();
  const Vector xc = xs.array() - x_mean;
  const Vector yc = ys.array() - y_mean;
  const double sxx = xc.squaredNorm();
  if (sxx <= 0.0)
    throw std::invalid_argument("linear_fit: xs are all equal");

  LineFit fit;
  fit.slope = xc.dot(yc) / sxx;
  fit.intercept = y_mean - fit.slope * x_mean;
  const double ss_tot = yc.squaredNorm();
  const Vector resid = ys - (fit.slope * xs.array() + fit.intercept).matrix();
  const double ss_res = resid.squaredNorm();
  fit.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  fit.r2 = std::clamp(fit.r2, 0.0, 1.0);
  return fit;
}

}  // namespace ra::linalg
