#include "ra/experiment.hpp"

#include <chrono>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "ra/csv.hpp"
#include "ra/random.hpp"
#include "ra/svg.hpp"

namespace ra::experiment {

namespace {

std::string timestamp_utc() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y%m%dT%H%M%S", &tm);
  return buf;
}

}  // namespace

std::string make_run_dir(const config::ExperimentConfig& cfg) {
  std::string name = cfg.run_name;
  if (name.empty()) {
    char hash[24];
    std::snprintf(hash, sizeof(hash), "%016" PRIx64,
                  config::fnv1a_hash(config::resolve_text(cfg)));
    name = std::string(hash) + "-" + timestamp_utc();
  }
  const std::filesystem::path dir =
      std::filesystem::path(cfg.output_dir) / name;
  std::filesystem::create_directories(dir);
  return dir.string();
}

TrainOutputs run_train(const config::ExperimentConfig& cfg, bool write_files) {
  TrainOutputs out;
  out.dataset = data::load_dataset(cfg.dataset);

  out.model_cfg = cfg.model;
  out.model_cfg.input_dim = out.dataset.train.dim();
  out.model_cfg.classes = out.dataset.train.class_count;
  out.result = resnet::train(out.model_cfg, cfg.train, out.dataset.train);
  out.model_cfg.weight_decay = cfg.train.weight_decay;
  out.model_cfg.stochastic_depth_p = cfg.train.stochastic_depth_p;

  if (write_files) {
    out.run_dir = make_run_dir(cfg);
    const std::string resolved = config::resolve_text(cfg);
    resnet::save_checkpoint(out.result.params, out.model_cfg,
                            out.run_dir + "/checkpoint.racp");

    csv::Table history({"epoch", "loss", "train_accuracy"});
    history.set_comment(resolved);
    for (std::size_t e = 0; e < out.result.history.size(); ++e) {
      history.begin_row()
          .cell(Index(e))
          .cell(out.result.history[e].loss)
          .cell(out.result.history[e].accuracy);
    }
    history.write(out.run_dir + "/history.csv");

    std::ofstream cfg_copy(out.run_dir + "/config.resolved.ini",
                           std::ios::binary | std::ios::trunc);
    if (!cfg_copy)
      throw std::runtime_error("cannot write resolved config in " + out.run_dir);
    cfg_copy << resolved;
  }
  return out;
}

MetricsOutputs run_metrics(const resnet::ModelParams& params,
                           const resnet::ModelConfig& cfg,
                           const data::DatasetPair& dataset,
                           const config::MetricsOptions& options,
                           const std::string& out_dir,
                           const std::string& resolved) {
  const Index blocks = cfg.blocks;
  const Index k = options.k;
  if (options.inputs < 1)
    throw std::invalid_argument("metrics: need at least one probe input");
  if (k > cfg.width)
    throw std::invalid_argument("metrics: k exceeds the model width");

  MetricsOutputs out;
  out.ra2_ujv = Matrix::Zero(blocks, blocks);
  out.ra2_vju = Matrix::Zero(blocks, blocks);
  out.ra3_gaps = Vector::Zero(blocks);
  out.mean_top_svals = Vector::Zero(blocks);
  out.singular_values = Matrix::Zero(blocks, k);

  // probe inputs drawn from the training split
  Rng rng(options.seed);
  const auto perm = rng.permutation(std::size_t(dataset.train.size()));
  const int n_inputs =
      std::min<int>(options.inputs, int(dataset.train.size()));

  std::vector<rametrics::Trajectory> trajectories;
  std::vector<std::vector<Matrix>> first_maps_ujv;  // panels of input 0
  std::vector<std::vector<Matrix>> first_maps_vju;
  double coll_sum = 0.0, cv_sum = 0.0, gap_finite_cap = 1e12;

  for (int input = 0; input < n_inputs; ++input) {
    const Index row = Index(perm[std::size_t(input)]);
    const Vector x = dataset.train.inputs.row(row).transpose();

    rametrics::Trajectory traj = rametrics::trajectory(
        params, cfg, x, dataset.train.labels[std::size_t(row)], row);
    const rametrics::Ra1Score ra1 = rametrics::ra1_scores(traj);
    coll_sum += ra1.collinearity;
    cv_sum += ra1.equispacing_cv;
    trajectories.push_back(std::move(traj));

    std::vector<Matrix> jacobians;
    std::vector<linalg::SvdTriplet> svds;
    for (Index i = 1; i <= blocks; ++i) {
      jacobians.push_back(resnet::residual_jacobian(params, cfg, x, i));
      svds.push_back(linalg::randomized_svd(
          jacobians.back(), k, options.svd_iters,
          options.seed ^ (0x1000u + std::uint64_t(input) * 64 + std::uint64_t(i)),
          options.oversample));
    }

    for (Index i = 0; i < blocks; ++i) {
      out.mean_top_svals(i) += svds[std::size_t(i)].s(0) / double(n_inputs);
      if (input == 0) {
        out.singular_values.row(i) = svds[std::size_t(i)].s.transpose();
        if (k > cfg.classes) {
          const rametrics::GapRatio gap =
              rametrics::ra3_gap(svds[std::size_t(i)].s, cfg.classes);
          out.ra3_gaps(i) = gap.unbounded ? gap_finite_cap : gap.value;
        }
      }
    }

    if (input == 0) {
      first_maps_ujv.resize(std::size_t(blocks));
      first_maps_vju.resize(std::size_t(blocks));
    }
    for (Index i = 0; i < blocks; ++i) {
      for (Index j = 0; j < blocks; ++j) {
        const rametrics::AlignmentMap ujv = rametrics::alignment_map(
            jacobians[std::size_t(i)], svds[std::size_t(j)], k,
            rametrics::MapVariant::kUJV, i + 1, j + 1);
        const rametrics::AlignmentMap vju = rametrics::alignment_map(
            jacobians[std::size_t(i)], svds[std::size_t(j)], k,
            rametrics::MapVariant::kVJU, i + 1, j + 1);
        out.ra2_ujv(i, j) += rametrics::ra2_score(ujv).value / double(n_inputs);
        out.ra2_vju(i, j) += rametrics::ra2_score(vju).value / double(n_inputs);
        if (input == 0) {
          first_maps_ujv[std::size_t(i)].push_back(ujv.m);
          first_maps_vju[std::size_t(i)].push_back(vju.m);
        }
      }
    }
  }
  out.ra1_collinearity = coll_sum / double(n_inputs);
  out.ra1_equispacing_cv = cv_sum / double(n_inputs);

  // mean off-diagonal pair score over the later half of the blocks
  const Index half = blocks / 2;
  double late_ujv = 0.0, late_vju = 0.0;
  Index late_pairs = 0;
  for (Index i = half; i < blocks; ++i)
    for (Index j = half; j < blocks; ++j) {
      if (i == j) continue;
      late_ujv += out.ra2_ujv(i, j);
      late_vju += out.ra2_vju(i, j);
      ++late_pairs;
    }
  out.ra2_late_offdiag_ujv = late_pairs > 0 ? late_ujv / double(late_pairs) : 0.0;
  out.ra2_late_offdiag_vju = late_pairs > 0 ? late_vju / double(late_pairs) : 0.0;

  out.ra4_start = options.i0 > 0 ? options.i0 : rametrics::default_ra4_start(blocks);
  out.ra4 = rametrics::ra4_fit(out.mean_top_svals, out.ra4_start);

  // Neural Collapse on final representations of a held-out batch
  const data::LabeledDataset& held =
      dataset.test.size() > 0 ? dataset.test : dataset.train;
  const Index nc_n = std::min(options.nc_batch, held.size());
  Matrix features(nc_n, cfg.width);
  std::vector<int> nc_labels;
  for (Index i = 0; i < nc_n; ++i) {
    const Vector x = held.inputs.row(i).transpose();
    features.row(i) = resnet::forward(params, cfg, x).h.back().transpose();
    nc_labels.push_back(held.labels[std::size_t(i)]);
  }
  out.nc = rametrics::nc_metrics(features, nc_labels, params.wc, params.bc);

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);

    std::vector<std::string> sval_cols{"block"};
    for (Index j = 0; j < k; ++j)
      sval_cols.push_back("s" + std::to_string(j + 1));
    csv::Table svals(sval_cols);
    svals.set_comment(resolved);
    for (Index i = 0; i < blocks; ++i) {
      svals.begin_row().cell(i + 1);
      for (Index j = 0; j < k; ++j) svals.cell(out.singular_values(i, j));
    }
    svals.write(out_dir + "/singular_values.csv");

    csv::Table pairs({"variant", "i", "j", "score"});
    pairs.set_comment(resolved);
    for (Index i = 0; i < blocks; ++i)
      for (Index j = 0; j < blocks; ++j) {
        pairs.begin_row().cell(std::string("UJV")).cell(i + 1).cell(j + 1)
            .cell(out.ra2_ujv(i, j));
        pairs.begin_row().cell(std::string("VJU")).cell(i + 1).cell(j + 1)
            .cell(out.ra2_vju(i, j));
      }
    pairs.write(out_dir + "/ra_pairs.csv");

    csv::Table report({"ra1_collinearity", "ra1_equispacing_cv",
                       "ra2_late_offdiag_ujv", "ra2_late_offdiag_vju",
                       "ra3_min_gap", "ra4_slope", "ra4_intercept", "ra4_r2",
                       "ra4_start", "nc1", "nc_equinorm_cv",
                       "nc_equiangularity_dev", "nc_self_duality",
                       "nc_ncc_agreement"});
    report.set_comment(resolved);
    report.begin_row()
        .cell(out.ra1_collinearity)
        .cell(out.ra1_equispacing_cv)
        .cell(out.ra2_late_offdiag_ujv)
        .cell(out.ra2_late_offdiag_vju)
        .cell(out.ra3_gaps.size() > 0 ? out.ra3_gaps.minCoeff() : 0.0)
        .cell(out.ra4.slope)
        .cell(out.ra4.intercept)
        .cell(out.ra4.r2)
        .cell(out.ra4_start)
        .cell(out.nc.nc1)
        .cell(out.nc.equinorm_cv)
        .cell(out.nc.equiangularity_dev)
        .cell(out.nc.self_duality)
        .cell(out.nc.ncc_agreement);
    report.write(out_dir + "/ra_report.csv");

    svg::emit_svg_heatmap_grid(first_maps_ujv, "U_j^T J_i V_j alignment maps",
                               out_dir + "/alignment_ujv.svg");
    svg::emit_svg_heatmap_grid(first_maps_vju, "V_j^T J_i U_j alignment maps",
                               out_dir + "/alignment_vju.svg");

    std::vector<svg::Series> ra4_series(2);
    ra4_series[0].label = "1/sigma_1";
    ra4_series[0].xs.resize(blocks - out.ra4_start + 1);
    ra4_series[0].ys.resize(blocks - out.ra4_start + 1);
    for (Index i = out.ra4_start; i <= blocks; ++i) {
      ra4_series[0].xs(i - out.ra4_start) = double(i);
      ra4_series[0].ys(i - out.ra4_start) = 1.0 / out.mean_top_svals(i - 1);
    }
    ra4_series[1].label = "fit";
    ra4_series[1].xs = ra4_series[0].xs;
    ra4_series[1].ys =
        (out.ra4.slope * ra4_series[0].xs.array() + out.ra4.intercept).matrix();
    svg::emit_svg_lines(ra4_series, "reciprocal top singular value vs depth",
                        out_dir + "/ra4_fit.svg");

    std::vector<svg::Series> sval_series;
    for (Index j = 0; j < std::min<Index>(k, 10); ++j) {
      svg::Series s;
      s.label = "s" + std::to_string(j + 1);
      s.xs.resize(blocks);
      s.ys.resize(blocks);
      for (Index i = 0; i < blocks; ++i) {
        s.xs(i) = double(i + 1);
        s.ys(i) = out.singular_values(i, j);
      }
      sval_series.push_back(std::move(s));
    }
    svg::emit_svg_lines(sval_series, "top singular values per block",
                        out_dir + "/singular_values.svg");

    std::vector<int> traj_labels;
    for (const auto& t : trajectories) traj_labels.push_back(t.label);
    svg::emit_svg_trajectories(rametrics::project2d(trajectories, options.seed),
                               traj_labels, "trajectories (2-D projection)",
                               out_dir + "/trajectories.svg");

    csv::Table nc_csv({"nc1", "equinorm_cv", "equiangularity_dev",
                       "self_duality", "ncc_agreement"});
    nc_csv.set_comment(resolved);
    nc_csv.begin_row()
        .cell(out.nc.nc1)
        .cell(out.nc.equinorm_cv)
        .cell(out.nc.equiangularity_dev)
        .cell(out.nc.self_duality)
        .cell(out.nc.ncc_agreement);
    nc_csv.write(out_dir + "/nc_metrics.csv");
  }
  return out;
}

}  // namespace ra::experiment
