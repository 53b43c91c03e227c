#include "ra/rametrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ra/random.hpp"

namespace ra::rametrics {

Trajectory trajectory(const resnet::ModelParams& params,
                      const resnet::ModelConfig& cfg, const Vector& x,
                      int label, Index input_id) {
  Trajectory traj;
  traj.points = resnet::forward(params, cfg, x).h;
  traj.label = label;
  traj.input_id = input_id;
  return traj;
}

Ra1Score ra1_scores(const Trajectory& traj) {
  const Index n_points = Index(traj.points.size());
  if (n_points < 3)
    throw std::invalid_argument("ra1_scores: need at least 3 points");
  const Index n_steps = n_points - 1;
  const Index dim = traj.points[0].size();

  Matrix steps(n_steps, dim);
  for (Index i = 0; i < n_steps; ++i)
    steps.row(i) =
        (traj.points[std::size_t(i) + 1] - traj.points[std::size_t(i)]).transpose();

  const double total = steps.squaredNorm();
  Ra1Score score;
  if (total == 0.0) {
    score.collinearity = 1.0;
    score.equispacing_cv = 0.0;
    score.degenerate = true;
    return score;
  }

  // share of squared step energy captured by the top principal direction
  const linalg::SvdTriplet svd = linalg::exact_svd_small(steps);
  score.collinearity = svd.s(0) * svd.s(0) / total;
  score.collinearity = std::min(score.collinearity, 1.0);

  Vector lengths(n_steps);
  for (Index i = 0; i < n_steps; ++i) lengths(i) = steps.row(i).norm();
  const double mean = lengths.mean();
  const double var = (lengths.array() - mean).square().mean();
  score.equispacing_cv = mean > 0.0 ? std::sqrt(var) / mean : 0.0;
  return score;
}

AlignmentMap alignment_map(const Matrix& j_probed,
                           const linalg::SvdTriplet& svd_basis, Index k,
                           MapVariant variant, Index probed_block,
                           Index basis_block) {
  if (k < 1 || k > svd_basis.u.cols())
    throw std::invalid_argument("alignment_map: k exceeds the basis rank");
  if (j_probed.rows() != svd_basis.u.rows() ||
      j_probed.cols() != svd_basis.v.rows())
    throw std::invalid_argument("alignment_map: dimension mismatch");

  AlignmentMap map;
  map.probed_block = probed_block;
  map.basis_block = basis_block;
  map.k = k;
  map.variant = variant;
  const Matrix u = svd_basis.u.leftCols(k);
  const Matrix v = svd_basis.v.leftCols(k);
  map.m = variant == MapVariant::kUJV ? Matrix(u.transpose() * j_probed * v)
                                      : Matrix(v.transpose() * j_probed * u);
  return map;
}

Ra2Score ra2_score(const AlignmentMap& map) {
  const double total = map.m.squaredNorm();
  Ra2Score score;
  if (total == 0.0) {
    score.value = 0.0;
    score.degenerate = true;
    return score;
  }
  score.value = map.m.diagonal().squaredNorm() / total;
  return score;
}

GapRatio ra3_gap(const Vector& svals, Index c) {
  if (c < 1 || c + 1 > svals.size())
    throw std::invalid_argument("ra3_gap: need at least c + 1 singular values");
  GapRatio gap;
  const double top = svals(c - 1);
  const double next = svals(c);
  if (next == 0.0) {
    gap.value = std::numeric_limits<double>::infinity();
    gap.unbounded = true;
  } else {
    gap.value = top / next;
  }
  return gap;
}

linalg::LineFit ra4_fit(const Vector& top_svals, Index i0) {
  const Index blocks = top_svals.size();
  if (i0 < 1 || i0 >= blocks)
    throw std::invalid_argument("ra4_fit: start index must satisfy 1 <= i0 < L");
  for (Index i = 0; i < blocks; ++i)
    if (!(top_svals(i) > 0.0))
      throw std::invalid_argument("ra4_fit: singular values must be positive");

  const Index n = blocks - i0 + 1;
  Vector xs(n), ys(n);
  for (Index i = 0; i < n; ++i) {
    xs(i) = double(i0 + i);
    ys(i) = 1.0 / top_svals(i0 + i - 1);
  }
  return linalg::linear_fit(xs, ys);
}

Index default_ra4_start(Index blocks) { return (blocks + 2) / 3; }

NCReport nc_metrics(const Matrix& features, const std::vector<int>& labels,
                    const Matrix& classifier, const Vector& classifier_bias) {
  const Index n = features.rows();
  const Index dim = features.cols();
  if (n != Index(labels.size()))
    throw std::invalid_argument("nc_metrics: label count mismatch");
  int c = 0;
  for (int l : labels) c = std::max(c, l + 1);
  if (c < 2) throw std::invalid_argument("nc_metrics: need at least 2 classes");
  if (classifier.rows() != c || classifier.cols() != dim)
    throw std::invalid_argument("nc_metrics: classifier shape mismatch");

  std::vector<Index> counts(std::size_t(c), 0);
  Matrix means = Matrix::Zero(c, dim);
  for (Index i = 0; i < n; ++i) {
    means.row(labels[std::size_t(i)]) += features.row(i);
    ++counts[std::size_t(labels[std::size_t(i)])];
  }
  for (int k = 0; k < c; ++k) {
    if (counts[std::size_t(k)] < 2)
      throw std::invalid_argument("nc_metrics: every class needs >= 2 samples");
    means.row(k) /= double(counts[std::size_t(k)]);
  }
  const Vector global = features.colwise().mean().transpose();
  Matrix centered = means;
  centered.rowwise() -= global.transpose();

  Matrix sigma_w = Matrix::Zero(dim, dim);
  for (Index i = 0; i < n; ++i) {
    const Vector d =
        (features.row(i) - means.row(labels[std::size_t(i)])).transpose();
    sigma_w.noalias() += d * d.transpose();
  }
  sigma_w /= double(n);
  Matrix sigma_b = Matrix::Zero(dim, dim);
  for (int k = 0; k < c; ++k)
    sigma_b.noalias() += centered.row(k).transpose() * centered.row(k);
  sigma_b /= double(c);

  NCReport report;
  report.nc1 =
      (sigma_w * linalg::pseudo_inverse(sigma_b)).trace() / double(c);

  Vector norms(c);
  for (int k = 0; k < c; ++k) norms(k) = centered.row(k).norm();
  const double norm_mean = norms.mean();
  const double norm_var = (norms.array() - norm_mean).square().mean();
  report.equinorm_cv = norm_mean > 0.0 ? std::sqrt(norm_var) / norm_mean : 0.0;

  double angle_sum = 0.0;
  Index pairs = 0;
  for (int a = 0; a < c; ++a) {
    for (int b = a + 1; b < c; ++b) {
      const double denom = norms(a) * norms(b);
      const double cosab = denom > 0.0 ? centered.row(a).dot(centered.row(b)) / denom : 0.0;
      angle_sum += std::abs(cosab + 1.0 / double(c - 1));
      ++pairs;
    }
  }
  report.equiangularity_dev = angle_sum / double(pairs);

  double dual_sum = 0.0;
  for (int k = 0; k < c; ++k) {
    const double denom = classifier.row(k).norm() * norms(k);
    dual_sum += denom > 0.0 ? classifier.row(k).dot(centered.row(k)) / denom : 0.0;
  }
  report.self_duality = dual_sum / double(c);

  Index agree = 0;
  for (Index i = 0; i < n; ++i) {
    Index nearest = 0;
    double best = std::numeric_limits<double>::infinity();
    for (int k = 0; k < c; ++k) {
      const double d = (features.row(i) - means.row(k)).squaredNorm();
      if (d < best) {
        best = d;
        nearest = k;
      }
    }
    Index argmax = 0;
    (classifier * features.row(i).transpose() + classifier_bias).maxCoeff(&argmax);
    if (argmax == nearest) ++agree;
  }
  report.ncc_agreement = double(agree) / double(n);
  return report;
}

std::vector<Matrix> project2d(const std::vector<Trajectory>& trajs,
                              std::uint64_t seed) {
  std::vector<Matrix> polylines;
  if (trajs.empty()) return polylines;
  const Index dim = trajs[0].points.at(0).size();
  Rng rng(seed);
  Vector v1 = rng.gaussian_vector(dim);
  Vector v2 = rng.gaussian_vector(dim);
  v1 /= v1.norm();
  v2 /= v2.norm();
  for (const Trajectory& traj : trajs) {
    Matrix line(Index(traj.points.size()), 2);
    for (std::size_t i = 0; i < traj.points.size(); ++i) {
      if (traj.points[i].size() != dim)
        throw std::invalid_argument("project2d: inconsistent dimensions");
      line(Index(i), 0) = v1.dot(traj.points[i]);
      line(Index(i), 1) = v2.dot(traj.points[i]);
    }
    polylines.push_back(std::move(line));
  }
  return polylines;
}

}  // namespace ra::rametrics
