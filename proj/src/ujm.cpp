#include "ra/ujm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ra/linalg.hpp"
#include "ra/random.hpp"

namespace ra::ujm {

namespace {

void validate(const UJMState& state) {
  if (state.jacobians.empty())
    throw std::invalid_argument("ujm: need at least one Jacobian");
  if (state.y != 1 && state.y != -1)
    throw std::invalid_argument("ujm: label must be +1 or -1");
  if (state.lambda < 0.0)
    throw std::invalid_argument("ujm: lambda must be >= 0");
  const Index dim = state.delta_x.size();
  if (dim < 1 || state.delta_x.norm() == 0.0)
    throw std::invalid_argument("ujm: delta_x must be nonzero");
  if (state.w.size() != dim)
    throw std::invalid_argument("ujm: w dimension mismatch");
  for (const Matrix& j : state.jacobians)
    if (j.rows() != dim || j.cols() != dim)
      throw std::invalid_argument("ujm: Jacobian dimension mismatch");
}

double softplus(double t) {
  return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

// logistic sigma(-y z), saturating cleanly at the extremes
double boundary_sigmoid(double yz) { return 1.0 / (1.0 + std::exp(yz)); }

double penalty(const UJMState& state) {
  double sum = state.w.squaredNorm();
  for (const Matrix& j : state.jacobians) sum += j.squaredNorm();
  return 0.5 * state.lambda * sum;
}

// objective of the aligned rank-1 family and its derivatives
struct Restricted {
  double r;
  Index blocks;
  double lambda;

  double value(double s, double a) const {
    const double z = a * r * std::pow(1.0 + s, double(blocks));
    return softplus(-z) + 0.5 * lambda * (double(blocks) * s * s + a * a);
  }
  void gradient(double s, double a, double& gs, double& ga) const {
    const double pw = std::pow(1.0 + s, double(blocks));
    const double z = a * r * pw;
    const double q = 1.0 / (1.0 + std::exp(z));  // sigma(-z)
    const double za = r * pw;
    const double zs = a * r * double(blocks) * std::pow(1.0 + s, double(blocks) - 1.0);
    ga = -q * za + lambda * a;
    gs = -q * zs + lambda * double(blocks) * s;
  }
  void hessian(double s, double a, double& hss, double& haa, double& hsa) const {
    const double el = double(blocks);
    const double pw = std::pow(1.0 + s, el);
    const double z = a * r * pw;
    const double q = 1.0 / (1.0 + std::exp(z));
    const double dq = q * (1.0 - q);
    const double za = r * pw;
    const double zs = a * r * el * std::pow(1.0 + s, el - 1.0);
    haa = dq * za * za + lambda;
    hss = dq * zs * zs - q * a * r * el * (el - 1.0) * std::pow(1.0 + s, el - 2.0) +
          lambda * el;
    hsa = dq * za * zs - q * r * el * std::pow(1.0 + s, el - 1.0);
  }
};

}  // namespace

double ujm_logit(const UJMState& state) {
  validate(state);
  Vector h = state.delta_x;
  for (const Matrix& j : state.jacobians) h += j * h;
  return state.w.dot(h);
}

double ujm_objective(const UJMState& state) {
  const double z = ujm_logit(state);
  return softplus(-double(state.y) * z) + penalty(state);
}

UJMGradients ujm_grad(const UJMState& state) {
  const Index blocks = Index(state.jacobians.size());

  // prefix[k] = (I + J_k) ... (I + J_1) delta_x, prefix[0] = delta_x
  std::vector<Vector> prefix(std::size_t(blocks) + 1);
  prefix[0] = state.delta_x;
  for (Index k = 0; k < blocks; ++k)
    prefix[std::size_t(k) + 1] =
        prefix[std::size_t(k)] + state.jacobians[std::size_t(k)] * prefix[std::size_t(k)];

  // suffix[k] = (I + J_{k+2})^T ... (I + J_L)^T w pulled back to block k+1
  std::vector<Vector> suffix(static_cast<std::size_t>(blocks));
  suffix[std::size_t(blocks) - 1] = state.w;
  for (Index k = blocks - 2; k >= 0; --k) {
    const Matrix& jn = state.jacobians[std::size_t(k) + 1];
    suffix[std::size_t(k)] =
        suffix[std::size_t(k) + 1] + jn.transpose() * suffix[std::size_t(k) + 1];
  }

  const double z = state.w.dot(prefix[std::size_t(blocks)]);
  const double factor = -double(state.y) * boundary_sigmoid(double(state.y) * z);

  UJMGradients grads;
  grads.jacobians.resize(std::size_t(blocks));
  for (Index k = 0; k < blocks; ++k) {
    grads.jacobians[std::size_t(k)] =
        factor * (suffix[std::size_t(k)] * prefix[std::size_t(k)].transpose());
    grads.jacobians[std::size_t(k)] += state.lambda * state.jacobians[std::size_t(k)];
  }
  grads.w = factor * prefix[std::size_t(blocks)] + state.lambda * state.w;
  return grads;
}

SolveResult ujm_solve(const Vector& delta_x, int y, Index blocks, Index dim,
                      double lambda, double lr, int iters, std::uint64_t seed) {
  if (lr <= 0.0) throw std::invalid_argument("ujm_solve: lr must be positive");
  if (iters < 1) throw std::invalid_argument("ujm_solve: iters must be >= 1");
  if (delta_x.size() != dim)
    throw std::invalid_argument("ujm_solve: delta_x dimension mismatch");

  Rng rng(seed);
  SolveResult result;
  result.state.delta_x = delta_x;
  result.state.y = y;
  result.state.lambda = lambda;
  result.state.jacobians.resize(std::size_t(blocks));
  for (Matrix& j : result.state.jacobians) j = 1e-2 * rng.gaussian_matrix(dim, dim);
  result.state.w = 1e-2 * rng.gaussian_vector(dim);
  validate(result.state);

  double current = ujm_objective(result.state);
  result.history.push_back(current);
  double step = lr;
  UJMState candidate = result.state;
  for (int iter = 0; iter < iters; ++iter) {
    const UJMGradients grads = ujm_grad(result.state);
    while (true) {
      for (std::size_t k = 0; k < candidate.jacobians.size(); ++k)
        candidate.jacobians[k] =
            result.state.jacobians[k] - step * grads.jacobians[k];
      candidate.w = result.state.w - step * grads.w;
      const double next = ujm_objective(candidate);
      if (!std::isfinite(next))
        throw NumericalError("ujm_solve: non-finite objective at iteration " +
                             std::to_string(iter));
      if (next <= current) {
        result.state.jacobians.swap(candidate.jacobians);
        std::swap(result.state.w, candidate.w);
        current = next;
        break;
      }
      step *= 0.5;
      if (step < 1e-18) break;  // stationary at working precision
    }
    if (step < 1e-18) break;
    result.history.push_back(current);
  }
  return result;
}

AnalyticOptimum ujm_analytic_optimum(double r, Index blocks, double lambda) {
  if (r <= 0.0) throw std::invalid_argument("ujm_analytic_optimum: r must be > 0");
  if (lambda <= 0.0)
    throw std::invalid_argument("ujm_analytic_optimum: lambda must be > 0");
  const Restricted fn{r, blocks, lambda};

  // coarse grid, widened until the minimizer is interior
  const double grid_step = 1e-3;
  double hi = 4.0;
  double best_s = 0.0, best_a = 0.0;
  double best = fn.value(0.0, 0.0);
  while (true) {
    const Index cells = Index(std::llround(hi / grid_step));
    best = std::numeric_limits<double>::infinity();
    // row-wise scan reusing the (1+s)^L power
    for (Index is = 0; is <= cells; ++is) {
      const double s = double(is) * grid_step;
      const double pw = std::pow(1.0 + s, double(blocks));
      const double s_pen = 0.5 * lambda * double(blocks) * s * s;
      for (Index ia = 0; ia <= cells; ++ia) {
        const double a = double(ia) * grid_step;
        const double v = softplus(-a * r * pw) + s_pen + 0.5 * lambda * a * a;
        if (v < best) {
          best = v;
          best_s = s;
          best_a = a;
        }
      }
    }
    if ((best_s < hi - 2.0 * grid_step && best_a < hi - 2.0 * grid_step) ||
        hi >= 64.0)
      break;
    hi *= 2.0;
  }

  // projected Newton polish
  double s = best_s, a = best_a;
  for (int iter = 0; iter < 200; ++iter) {
    double gs, ga;
    fn.gradient(s, a, gs, ga);
    const double pg_s = (s == 0.0 && gs > 0.0) ? 0.0 : gs;
    const double pg_a = (a == 0.0 && ga > 0.0) ? 0.0 : ga;
    if (std::max(std::abs(pg_s), std::abs(pg_a)) < 1e-12) break;

    double hss, haa, hsa;
    fn.hessian(s, a, hss, haa, hsa);
    const double det = hss * haa - hsa * hsa;
    double ds, da;
    if (det > 0.0 && hss > 0.0) {
      ds = -(haa * gs - hsa * ga) / det;
      da = -(hss * ga - hsa * gs) / det;
    } else {
      ds = -gs;
      da = -ga;
    }
    const double base = fn.value(s, a);
    double scale = 1.0;
    while (scale > 1e-18) {
      const double ns = std::max(0.0, s + scale * ds);
      const double na = std::max(0.0, a + scale * da);
      if (fn.value(ns, na) <= base) {
        s = ns;
        a = na;
        break;
      }
      scale *= 0.5;
    }
    if (scale <= 1e-18) break;
  }

  AnalyticOptimum opt;
  opt.s = s;
  opt.a = a;
  opt.objective = fn.value(s, a);
  return opt;
}

UJMVerdict ujm_verify(const UJMState& state) {
  validate(state);
  const Index blocks = Index(state.jacobians.size());
  UJMVerdict verdict;

  std::vector<Vector> top_left;
  Vector top_vals(blocks);
  for (Index k = 0; k < blocks; ++k) {
    const linalg::SvdTriplet svd =
        linalg::exact_svd_small(state.jacobians[std::size_t(k)]);
    top_vals(k) = svd.s(0);
    if (svd.s(0) == 0.0) {
      verdict.degenerate = true;
      verdict.max_rank1_ratio = std::max(verdict.max_rank1_ratio, 0.0);
    } else if (svd.s.size() > 1) {
      verdict.max_rank1_ratio =
          std::max(verdict.max_rank1_ratio, svd.s(1) / svd.s(0));
    }
    top_left.push_back(svd.u.col(0));
  }

  verdict.min_alignment = 1.0;
  for (Index i = 0; i < blocks; ++i)
    for (Index j = i + 1; j < blocks; ++j)
      verdict.min_alignment = std::min(
          verdict.min_alignment,
          std::abs(top_left[std::size_t(i)].dot(top_left[std::size_t(j)])));
  if (blocks == 1) verdict.min_alignment = 1.0;

  const double mean = top_vals.mean();
  const double var = (top_vals.array() - mean).square().mean();
  verdict.sval_cv = mean > 0.0 ? std::sqrt(var) / mean : 0.0;

  verdict.w_alignment =
      std::abs(state.w.dot(state.delta_x)) /
      std::max(state.w.norm() * state.delta_x.norm(),
               std::numeric_limits<double>::min());

  if (state.lambda > 0.0) {
    const AnalyticOptimum oracle =
        ujm_analytic_optimum(state.delta_x.norm(), blocks, state.lambda);
    verdict.loss_gap = ujm_objective(state) - oracle.objective;
  } else {
    verdict.loss_gap = std::numeric_limits<double>::quiet_NaN();
  }
  return verdict;
}

double depth_growth_product(Index k) {
  double prod = 1.0;
  for (Index i = 1; i < k; ++i) prod *= 1.0 + 1.0 / double(i);
  return prod;
}

rametrics::Trajectory ra1_construction(const Vector& u, const Vector& h1,
                                       Index blocks) {
  if (std::abs(u.norm() - 1.0) > 1e-12)
    throw std::invalid_argument("ra1_construction: u must be a unit vector");
  if (h1.size() != u.size())
    throw std::invalid_argument("ra1_construction: dimension mismatch");
  if (blocks < 1)
    throw std::invalid_argument("ra1_construction: need at least one block");

  const double proj = u.dot(h1);
  rametrics::Trajectory traj;
  traj.points.push_back(h1);
  Vector h = h1;
  for (Index i = 1; i <= blocks; ++i) {
    h += (u.dot(h) / double(i)) * u;  // (I + (1/i) u u^T) h
    traj.points.push_back(h);

    const Vector expected = h1 + (depth_growth_product(i + 1) - 1.0) * proj * u;
    const double err = (h - expected).cwiseAbs().maxCoeff();
    if (err > 1e-10 * std::max(1.0, h1.cwiseAbs().maxCoeff()))
      throw NumericalError(
          "ra1_construction: propagation left the closed form at block " +
          std::to_string(i) + " (error " + std::to_string(err) + ")");
  }
  return traj;
}

double miranda_bound(const std::vector<Matrix>& as) {
  if (as.empty()) throw std::invalid_argument("miranda_bound: no matrices");
  const Index n = as[0].rows();
  double sign = 1.0;
  Matrix svals(n, Index(as.size()));
  for (std::size_t j = 0; j < as.size(); ++j) {
    if (as[j].rows() != n || as[j].cols() != n)
      throw std::invalid_argument("miranda_bound: matrices must be square, same size");
    svals.col(Index(j)) = linalg::exact_svd_small(as[j]).s;
    const double det = as[j].determinant();
    sign *= det > 0.0 ? 1.0 : det < 0.0 ? -1.0 : 0.0;
  }
  double bound = 0.0;
  for (Index i = 0; i < n - 1; ++i) bound += svals.row(i).prod();
  bound += sign * svals.row(n - 1).prod();
  return bound;
}

TraceInequalityReport trace_inequality_check(Index n, Index m, int trials,
                                             std::uint64_t seed) {
  if (n < 2 || n > 16)
    throw std::invalid_argument("trace_inequality_check: n must be in [2, 16]");
  if (m < 1 || m > 4)
    throw std::invalid_argument("trace_inequality_check: m must be in [1, 4]");
  if (trials < 1)
    throw std::invalid_argument("trace_inequality_check: trials must be >= 1");

  TraceInequalityReport report;
  report.trials = trials;
  report.max_excess = -std::numeric_limits<double>::infinity();

  for (int trial = 0; trial < trials; ++trial) {
    const std::uint64_t trial_seed = seed + std::uint64_t(trial);
    Rng rng(trial_seed);

    std::vector<Matrix> as;
    Matrix product = Matrix::Identity(n, n);
    for (Index j = 0; j < m; ++j) {
      as.push_back(rng.gaussian_matrix(n, n));
      Matrix rot = linalg::qr_decompose(rng.gaussian_matrix(n, n)).q;
      if (rot.determinant() < 0.0) rot.col(n - 1) = -rot.col(n - 1);
      product = product * as.back() * rot;
    }
    const double excess = product.trace() - miranda_bound(as);
    report.max_excess = std::max(report.max_excess, excess);
    if (excess > 1e-9) {
      if (report.violations == 0) report.first_violation_seed = trial_seed;
      ++report.violations;
    }

    // equality case: same-basis symmetric PSD matrices with identity rotations
    Matrix basis = linalg::qr_decompose(rng.gaussian_matrix(n, n)).q;
    std::vector<Matrix> aligned;
    Matrix psd_product = Matrix::Identity(n, n);
    for (Index j = 0; j < m; ++j) {
      Vector diag(n);
      for (Index i = 0; i < n; ++i) diag(i) = 0.5 + 1.5 * rng.uniform();
      std::sort(diag.data(), diag.data() + n, std::greater<double>());
      aligned.push_back(basis * diag.asDiagonal() * basis.transpose());
      psd_product = psd_product * aligned.back();
    }
    const double gap =
        std::abs(psd_product.trace() - miranda_bound(aligned));
    report.max_attainment_gap = std::max(report.max_attainment_gap, gap);
  }
  return report;
}

}  // namespace ra::ujm
