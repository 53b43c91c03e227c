#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/SVD>
#include <cmath>

#include "ra/linalg.hpp"
#include "ra/random.hpp"

using ra::Index;
using ra::Matrix;
using ra::Vector;
using namespace ra::linalg;

namespace {

// Random matrix with a prescribed spectrum, orthogonal factors drawn from
// QR of Gaussian blocks.
Matrix matrix_with_spectrum(Index m, Index n, const Vector& svals,
                            std::uint64_t seed) {
  ra::Rng rng(seed);
  const Index r = svals.size();
  Matrix u = qr_decompose(rng.gaussian_matrix(m, r)).q;
  Matrix v = qr_decompose(rng.gaussian_matrix(n, r)).q;
  return u * svals.asDiagonal() * v.transpose();
}

double orthonormality_error(const Matrix& q) {
  return (q.transpose() * q - Matrix::Identity(q.cols(), q.cols()))
      .cwiseAbs()
      .maxCoeff();
}

}  // namespace

TEST_CASE("qr: identity stays identity") {
  Matrix a = Matrix::Identity(3, 3);
  QrResult qr = qr_decompose(a);
  CHECK((qr.q - a).cwiseAbs().maxCoeff() == doctest::Approx(0.0).epsilon(1e-15));
  CHECK((qr.r - a).cwiseAbs().maxCoeff() == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("qr: rank-deficient column zeroes the r diagonal") {
  Matrix a(2, 2);
  a << 3, 0, 4, 0;
  QrResult qr = qr_decompose(a);
  CHECK(qr.r(0, 0) == doctest::Approx(5.0).epsilon(1e-14));
  CHECK(qr.r(1, 1) == 0.0);
}

TEST_CASE("qr: reconstruction and orthonormality on a random 50x20 matrix") {
  ra::Rng rng(42);
  Matrix a = rng.gaussian_matrix(50, 20);
  QrResult qr = qr_decompose(a);
  CHECK(orthonormality_error(qr.q) < 1e-12);
  CHECK((qr.q * qr.r - a).norm() / a.norm() < 1e-12);
  for (Index i = 0; i < qr.r.rows(); ++i) {
    CHECK(qr.r(i, i) >= 0.0);
    for (Index j = 0; j < i; ++j) CHECK(qr.r(i, j) == 0.0);
  }
}

TEST_CASE("qr: rejects non-finite and wide inputs") {
  Matrix bad = Matrix::Zero(2, 2);
  bad(0, 0) = std::nan("");
  CHECK_THROWS_AS(qr_decompose(bad), std::invalid_argument);
  CHECK_THROWS_AS(qr_decompose(Matrix::Zero(2, 3)), std::invalid_argument);
}

TEST_CASE("exact svd: 1x1 and diagonal cases") {
  Matrix a(1, 1);
  a << -2.0;
  SvdTriplet svd = exact_svd_small(a);
  CHECK(svd.s(0) == doctest::Approx(2.0).epsilon(1e-15));

  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 1.0;
  d(1, 1) = 2.0;
  svd = exact_svd_small(d);
  CHECK(svd.s(0) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(svd.s(1) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("exact svd: reconstruction, orthonormality, descending order") {
  for (auto [m, n, seed] : {std::tuple<Index, Index, std::uint64_t>{64, 64, 1},
                            {40, 64, 2},
                            {64, 40, 3}}) {
    ra::Rng rng(seed);
    Matrix a = rng.gaussian_matrix(m, n);
    SvdTriplet svd = exact_svd_small(a);
    CHECK(svd.s.size() == std::min(m, n));
    CHECK(orthonormality_error(svd.u) < 1e-10);
    CHECK(orthonormality_error(svd.v) < 1e-10);
    for (Index i = 1; i < svd.s.size(); ++i) CHECK(svd.s(i) <= svd.s(i - 1));
    CHECK(svd.s(svd.s.size() - 1) >= 0.0);
    Matrix recon = svd.u * svd.s.asDiagonal() * svd.v.transpose();
    CHECK((recon - a).norm() / a.norm() < 1e-10);
  }
}

TEST_CASE("exact svd: agrees with Eigen's JacobiSVD on singular values") {
  ra::Rng rng(7);
  Matrix a = rng.gaussian_matrix(48, 32);
  SvdTriplet svd = exact_svd_small(a);
  Eigen::JacobiSVD<Matrix> ref(a);
  for (Index i = 0; i < svd.s.size(); ++i)
    CHECK(svd.s(i) == doctest::Approx(ref.singularValues()(i)).epsilon(1e-12));
}

TEST_CASE("exact svd: zero and exactly rank-deficient matrices") {
  SvdTriplet svd = exact_svd_small(Matrix::Zero(4, 3));
  CHECK(svd.s.cwiseAbs().maxCoeff() == 0.0);
  CHECK(orthonormality_error(svd.u) < 1e-12);
  CHECK(orthonormality_error(svd.v) < 1e-12);

  ra::Rng rng(11);
  Vector x = rng.gaussian_vector(20), y = rng.gaussian_vector(15);
  Matrix r1 = x * y.transpose();
  svd = exact_svd_small(r1);
  CHECK(svd.s(0) == doctest::Approx(x.norm() * y.norm()).epsilon(1e-12));
  CHECK(svd.s(1) < 1e-12 * svd.s(0));
  CHECK(orthonormality_error(svd.u) < 1e-10);
  Matrix recon = svd.u * svd.s.asDiagonal() * svd.v.transpose();
  CHECK((recon - r1).norm() / r1.norm() < 1e-10);
}

TEST_CASE("exact svd: dimension cap enforced") {
  CHECK_THROWS_AS(exact_svd_small(Matrix::Zero(600, 600)), std::invalid_argument);
}

TEST_CASE("randomized svd: diagonal matrix") {
  Matrix a = Matrix::Zero(5, 5);
  for (Index i = 0; i < 5; ++i) a(i, i) = 5.0 - static_cast<double>(i);
  SvdTriplet svd = randomized_svd(a, 2, 20, 123);
  CHECK(svd.s(0) == doctest::Approx(5.0).epsilon(1e-10));
  CHECK(svd.s(1) == doctest::Approx(4.0).epsilon(1e-10));
}

TEST_CASE("randomized svd: rank-1 outer product") {
  ra::Rng rng(5);
  Vector x = rng.gaussian_vector(30), y = rng.gaussian_vector(24);
  SvdTriplet svd = randomized_svd(x * y.transpose(), 1, 20, 9);
  CHECK(svd.s(0) == doctest::Approx(x.norm() * y.norm()).epsilon(1e-10));
}

TEST_CASE("randomized svd: matches the exact oracle on a 300x300 decaying spectrum") {
  Vector svals(300);
  for (Index j = 0; j < 300; ++j) svals(j) = std::pow(0.9, static_cast<double>(j));
  Matrix a = matrix_with_spectrum(300, 300, svals, 77);
  SvdTriplet fast = randomized_svd(a, 10, 20, 1234);
  SvdTriplet exact = exact_svd_small(a);
  for (Index i = 0; i < 10; ++i)
    CHECK(std::abs(fast.s(i) - exact.s(i)) / exact.s(i) < 1e-8);
  CHECK(orthonormality_error(fast.u) < 1e-10);
  CHECK(orthonormality_error(fast.v) < 1e-10);
}

TEST_CASE("randomized svd: 1.05 decay ratio still meets 1e-8 agreement") {
  for (auto [n, seed] : {std::pair<Index, std::uint64_t>{128, 21}, {512, 22}}) {
    Vector svals(n);
    for (Index j = 0; j < n; ++j) svals(j) = std::pow(1.05, -static_cast<double>(j));
    Matrix a = matrix_with_spectrum(n, n, svals, seed);
    SvdTriplet fast = randomized_svd(a, 10, 20, seed + 100);
    SvdTriplet exact = exact_svd_small(a);
    for (Index i = 0; i < 10; ++i)
      CHECK(std::abs(fast.s(i) - exact.s(i)) / exact.s(i) < 1e-8);
  }
}

TEST_CASE("randomized svd: deterministic for a fixed seed") {
  ra::Rng rng(3);
  Matrix a = rng.gaussian_matrix(60, 45);
  SvdTriplet first = randomized_svd(a, 6, 20, 999);
  SvdTriplet second = randomized_svd(a, 6, 20, 999);
  CHECK((first.u.array() == second.u.array()).all());
  CHECK((first.s.array() == second.s.array()).all());
  CHECK((first.v.array() == second.v.array()).all());
}

TEST_CASE("randomized svd: sign convention makes the largest |u| entry positive") {
  ra::Rng rng(13);
  Matrix a = rng.gaussian_matrix(40, 40);
  SvdTriplet svd = randomized_svd(a, 5, 20, 4);
  for (Index j = 0; j < svd.u.cols(); ++j) {
    Index imax = 0;
    svd.u.col(j).cwiseAbs().maxCoeff(&imax);
    CHECK(svd.u(imax, j) > 0.0);
  }
}

TEST_CASE("randomized svd: rejects k above the dimension") {
  CHECK_THROWS_AS(randomized_svd(Matrix::Zero(4, 4), 5, 20, 1), std::invalid_argument);
}

TEST_CASE("pseudo inverse: recovers the inverse of a well-conditioned matrix") {
  ra::Rng rng(31);
  Matrix a = rng.gaussian_matrix(12, 12) + 5.0 * Matrix::Identity(12, 12);
  Matrix pinv = pseudo_inverse(a);
  CHECK((pinv * a - Matrix::Identity(12, 12)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("linear fit: exact line, constant target, hand-checked slope") {
  Vector xs(4), ys(4);
  xs << 0, 1, 2, 3;
  ys = 2.0 * xs.array() + 1.0;
  LineFit fit = linear_fit(xs, ys);
  CHECK(fit.slope == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(fit.intercept == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(fit.r2 == doctest::Approx(1.0).epsilon(1e-14));

  ys.setConstant(3.5);
  fit = linear_fit(xs, ys);
  CHECK(fit.slope == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(fit.r2 == 1.0);

  // closed-form least squares: slope 3/2, intercept -2/3, r2 = 27/28
  Vector x3(3), y3(3);
  x3 << 1, 2, 3;
  y3 << 1, 2, 4;
  fit = linear_fit(x3, y3);
  CHECK(fit.slope == doctest::Approx(1.5).epsilon(1e-13));
  CHECK(fit.intercept == doctest::Approx(-2.0 / 3.0).epsilon(1e-12));
  CHECK(fit.r2 == doctest::Approx(27.0 / 28.0).epsilon(1e-13));
}

TEST_CASE("linear fit: degenerate xs rejected") {
  Vector xs = Vector::Constant(3, 1.0), ys(3);
  ys << 1, 2, 3;
  CHECK_THROWS_AS(linear_fit(xs, ys), std::invalid_argument);
  CHECK_THROWS_AS(linear_fit(Vector::Zero(1), Vector::Zero(1)), std::invalid_argument);
}
