#pragma once

#include <cstdint>
#include <vector>

#include "ra/linalg.hpp"
#include "ra/resnet.hpp"
#include "ra/types.hpp"

namespace ra::rametrics {

/// Intermediate representations h_1 .. h_{L+1} of one input.
struct Trajectory {
  std::vector<Vector> points;
  int label = -1;
  Index input_id = -1;
};

struct Ra1Score {
  double collinearity = 0.0;    // in [0, 1], 1 = perfectly collinear steps
  double equispacing_cv = 0.0;  // std / mean of step lengths, 0 = equispaced
  bool degenerate = false;      // all steps were zero
};

enum class MapVariant { kUJV, kVJU };

/// m = U_{j,k}^T J_i V_{j,k} (or V^T J_i U for the flipped variant): the
/// probed Jacobian expressed in the top singular basis of block j.
struct AlignmentMap {
  Index probed_block = 0;  // i
  Index basis_block = 0;   // j
  Index k = 0;
  MapVariant variant = MapVariant::kUJV;
  Matrix m;
};

struct Ra2Score {
  double value = 0.0;  // fraction of squared energy on the diagonal
  bool degenerate = false;
};

struct GapRatio {
  double value = 0.0;  // sigma_c / sigma_{c+1}
  bool unbounded = false;
};

struct NCReport {
  double nc1 = 0.0;                // tr(Sigma_W pinv(Sigma_B)) / C
  double equinorm_cv = 0.0;        // cv of centered class-mean norms
  double equiangularity_dev = 0.0; // mean |cos(mu_a, mu_b) + 1/(C-1)|
  double self_duality = 0.0;       // mean cos(classifier row, centered mean)
  double ncc_agreement = 0.0;      // nearest-center vs classifier argmax
};

Trajectory trajectory(const resnet::ModelParams& params,
                      const resnet::ModelConfig& cfg, const Vector& x,
                      int label = -1, Index input_id = -1);

Ra1Score ra1_scores(const Trajectory& traj);

AlignmentMap alignment_map(const Matrix& j_probed,
                           const linalg::SvdTriplet& svd_basis, Index k,
                           MapVariant variant, Index probed_block = 0,
                           Index basis_block = 0);

Ra2Score ra2_score(const AlignmentMap& map);

/// svals must be descending with at least c + 1 entries; an exactly rank-c
/// spectrum yields an infinity sentinel.
GapRatio ra3_gap(const Vector& svals, Index c);

/// Least-squares fit of 1 / sigma_1(i) against the block index i for blocks
/// i >= i0 (1-based). top_svals(i - 1) is the top singular value of block i.
linalg::LineFit ra4_fit(const Vector& top_svals, Index i0);

Index default_ra4_start(Index blocks);  // ceil(L / 3)

NCReport nc_metrics(const Matrix& features, const std::vector<int>& labels,
                    const Matrix& classifier, const Vector& classifier_bias);

/// Project each trajectory onto two seeded Gaussian unit vectors; returns one
/// (points x 2) polyline per trajectory.
std::vector<Matrix> project2d(const std::vector<Trajectory>& trajs,
                              std::uint64_t seed);

}  // namespace ra::rametrics
