#pragma once

#include <cstdint>
#include <vector>

#include "ra/rametrics.hpp"
#include "ra/types.hpp"

namespace ra::ujm {

/// Free Jacobian matrices J_1..J_L, a classifier vector w, a probe input
/// delta_x with binary label y, and the Frobenius penalty weight lambda.
/// The logit is w^T (I + J_L) ... (I + J_1) delta_x, the product applied in
/// ascending block order to match forward propagation.
struct UJMState {
  std::vector<Matrix> jacobians;
  Vector w;
  Vector delta_x;
  int y = 1;  // +1 or -1
  double lambda = 0.0;
};

struct UJMGradients {
  std::vector<Matrix> jacobians;
  Vector w;
};

struct SolveResult {
  UJMState state;
  std::vector<double> history;  // objective per accepted step, non-increasing
};

/// Minimizer of the objective restricted to the aligned rank-1 family
/// w parallel to delta_x, J_i = s (dx/r)(dx/r)^T:
///   g(s, a) = log(1 + exp(-a r (1+s)^L)) + (lambda/2)(L s^2 + a^2).
struct AnalyticOptimum {
  double s = 0.0;
  double a = 0.0;
  double objective = 0.0;
};

struct UJMVerdict {
  double loss_gap = 0.0;        // objective minus the analytic optimum
  double max_rank1_ratio = 0.0; // worst sigma_2 / sigma_1 over blocks
  double min_alignment = 0.0;   // min over block pairs of |u1_i . u1_j|
  double sval_cv = 0.0;         // cv of sigma_1 across blocks
  double w_alignment = 0.0;     // |cos(w, delta_x)|
  bool degenerate = false;      // some block had sigma_1 = 0
};

struct TraceInequalityReport {
  int trials = 0;
  int violations = 0;
  double max_excess = 0.0;          // max of trace - bound over random trials
  double max_attainment_gap = 0.0;  // |trace - bound| for aligned PSD cases
  std::uint64_t first_violation_seed = 0;
};

double ujm_logit(const UJMState& state);
double ujm_objective(const UJMState& state);
UJMGradients ujm_grad(const UJMState& state);

/// Fixed-step gradient descent from a small Gaussian start (std 1e-2), with
/// step halving whenever the objective would increase.
SolveResult ujm_solve(const Vector& delta_x, int y, Index blocks, Index dim,
                      double lambda, double lr, int iters, std::uint64_t seed);

/// Brute-force 2-D grid (step 1e-3) over the aligned rank-1 family followed
/// by a projected Newton polish to 1e-12 stationarity.
AnalyticOptimum ujm_analytic_optimum(double r, Index blocks, double lambda);

/// Per-block exact SVD structure report; loss_gap is NaN when lambda == 0
/// (the analytic optimum needs a positive penalty).
UJMVerdict ujm_verify(const UJMState& state);

/// prod_{i=1}^{k-1} (1 + 1/i), which telescopes to k.
double depth_growth_product(Index k);

/// Propagates h_{k+1} = (I + J_k) h_k for J_i = (1/i) u u^T and verifies the
/// closed form h_k = h_1 + (k-1) (u^T h_1) u on the way.
rametrics::Trajectory ra1_construction(const Vector& u, const Vector& h1,
                                       Index blocks);

/// Upper bound of Miranda's trace inequality for the given matrices:
/// sum_{i<n} prod_j s_i(A_j) + sign(det prod A_j) prod_j s_n(A_j).
double miranda_bound(const std::vector<Matrix>& as);

/// Monte Carlo check that tr(A_1 P_1 ... A_m P_m) <= miranda_bound for random
/// matrices and rotations, plus equality for same-basis PSD constructions.
TraceInequalityReport trace_inequality_check(Index n, Index m, int trials,
                                             std::uint64_t seed);

}  // namespace ra::ujm
