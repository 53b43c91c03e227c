#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "ra/csv.hpp"
#include "ra/experiment.hpp"
#include "ra/random.hpp"
#include "ra/ujm.hpp"

namespace {

using ra::Index;
using ra::Matrix;
using ra::Vector;

int cmd_train(const std::string& config_path, const std::string& run_name) {
  ra::config::ExperimentConfig cfg =
      ra::config::load_experiment_config(config_path);
  if (!run_name.empty()) cfg.run_name = run_name;
  const auto out = ra::experiment::run_train(cfg, /*write_files=*/true);
  std::printf("run directory: %s\n", out.run_dir.c_str());
  std::printf("final train accuracy: %.4f, final loss: %.6g\n",
              out.result.history.back().accuracy,
              out.result.history.back().loss);
  return 0;
}

int cmd_metrics(const std::string& checkpoint_path,
                const std::string& config_path, std::string out_dir,
                Index k_override, Index i0_override, int inputs_override) {
  ra::config::ExperimentConfig cfg =
      ra::config::load_experiment_config(config_path);
  if (k_override > 0) cfg.metrics.k = k_override;
  if (i0_override > 0) cfg.metrics.i0 = i0_override;
  if (inputs_override > 0) cfg.metrics.inputs = inputs_override;

  auto [params, model_cfg] = ra::resnet::load_checkpoint(checkpoint_path);
  const auto dataset = ra::data::load_dataset(cfg.dataset);
  if (out_dir.empty())
    out_dir = ra::experiment::make_run_dir(cfg) + "-metrics";
  const auto metrics = ra::experiment::run_metrics(
      params, model_cfg, dataset, cfg.metrics, out_dir,
      ra::config::resolve_text(cfg));
  std::printf("metrics written to %s\n", out_dir.c_str());
  std::printf("ra1 collinearity %.4f, cv %.4f\n", metrics.ra1_collinearity,
              metrics.ra1_equispacing_cv);
  std::printf("ra2 late off-diagonal mean (UJV) %.4f\n",
              metrics.ra2_late_offdiag_ujv);
  std::printf("ra4 slope %.4f r2 %.4f (blocks >= %lld)\n", metrics.ra4.slope,
              metrics.ra4.r2, static_cast<long long>(metrics.ra4_start));
  return 0;
}

int cmd_ujm(Index blocks, Index dim, double lambda, double lr, int iters,
            std::uint64_t seed, const std::string& out_dir) {
  ra::Rng rng(seed);
  Vector delta_x = rng.gaussian_vector(dim);
  const auto solved =
      ra::ujm::ujm_solve(delta_x, +1, blocks, dim, lambda, lr, iters, seed ^ 0x5u);
  const auto verdict = ra::ujm::ujm_verify(solved.state);
  const auto oracle =
      ra::ujm::ujm_analytic_optimum(delta_x.norm(), blocks, lambda);

  std::filesystem::create_directories(out_dir);
  char args[256];
  std::snprintf(args, sizeof(args),
                "ujm blocks=%lld dim=%lld lambda=%.17g lr=%.17g iters=%d seed=%llu",
                static_cast<long long>(blocks), static_cast<long long>(dim),
                lambda, lr, iters, static_cast<unsigned long long>(seed));

  ra::csv::Table verdict_csv({"objective", "oracle_objective", "loss_gap",
                              "max_rank1_ratio", "min_alignment", "sval_cv",
                              "w_alignment", "oracle_s", "oracle_a"});
  verdict_csv.set_comment(args);
  verdict_csv.begin_row()
      .cell(ra::ujm::ujm_objective(solved.state))
      .cell(oracle.objective)
      .cell(verdict.loss_gap)
      .cell(verdict.max_rank1_ratio)
      .cell(verdict.min_alignment)
      .cell(verdict.sval_cv)
      .cell(verdict.w_alignment)
      .cell(oracle.s)
      .cell(oracle.a);
  verdict_csv.write(out_dir + "/ujm_verdict.csv");

  ra::csv::Table history({"iteration", "objective"});
  history.set_comment(args);
  for (std::size_t i = 0; i < solved.history.size(); ++i)
    history.begin_row().cell(Index(i)).cell(solved.history[i]);
  history.write(out_dir + "/ujm_history.csv");

  std::printf("objective %.12g (oracle %.12g, gap %.3e)\n",
              ra::ujm::ujm_objective(solved.state), oracle.objective,
              verdict.loss_gap);
  std::printf("rank-1 ratio %.3e, alignment %.6f, sval cv %.3e, |cos(w,dx)| %.6f\n",
              verdict.max_rank1_ratio, verdict.min_alignment, verdict.sval_cv,
              verdict.w_alignment);
  return 0;
}

int cmd_theory(Index blocks, Index dim, std::uint64_t seed, int trials,
               double perturb) {
  int failures = 0;
  auto report = [&failures](bool ok, const char* name, const std::string& detail) {
    std::printf("[%s] %s%s%s\n", ok ? "PASS" : "FAIL", name,
                detail.empty() ? "" : ": ", detail.c_str());
    if (!ok) ++failures;
  };

  ra::Rng rng(seed);
  Vector u = rng.gaussian_vector(dim);
  u /= u.norm();
  const Vector h1 = rng.gaussian_vector(dim);

  ra::rametrics::Trajectory traj;
  Vector top_svals(blocks);
  if (perturb == 0.0) {
    traj = ra::ujm::ra1_construction(u, h1, blocks);
    for (Index i = 1; i <= blocks; ++i) top_svals(i - 1) = 1.0 / double(i);
  } else {
    // test hook: propagate with singular values (1/i + perturb), which must
    // break both the equispacing and the slope-1 law
    Vector h = h1;
    traj.points.push_back(h);
    for (Index i = 1; i <= blocks; ++i) {
      const double s = 1.0 / double(i) + perturb;
      h += s * u.dot(h) * u;
      traj.points.push_back(h);
      top_svals(i - 1) = s;
    }
  }

  const auto ra1 = ra::rametrics::ra1_scores(traj);
  char detail[160];
  std::snprintf(detail, sizeof(detail),
                "collinearity deviation %.3e, equispacing cv %.3e",
                std::abs(ra1.collinearity - 1.0), ra1.equispacing_cv);
  report(std::abs(ra1.collinearity - 1.0) < 1e-10 &&
             std::abs(ra1.equispacing_cv) < 1e-10,
         "ra1 construction scores (1, 0)", detail);

  const auto fit = ra::rametrics::ra4_fit(top_svals, 1);
  std::snprintf(detail, sizeof(detail), "slope %.12g (deviation %.3e)",
                fit.slope, std::abs(fit.slope - 1.0));
  report(std::abs(fit.slope - 1.0) < 1e-10, "ra4 reciprocal law has slope 1",
         detail);

  const auto trace_report =
      ra::ujm::trace_inequality_check(5, 3, trials, seed ^ 0x7ace);
  std::snprintf(detail, sizeof(detail),
                "%d trials, %d violations, max excess %.3e, attainment gap %.3e",
                trace_report.trials, trace_report.violations,
                trace_report.max_excess, trace_report.max_attainment_gap);
  report(trace_report.violations == 0 &&
             trace_report.max_attainment_gap < 1e-9,
         "trace inequality holds", detail);

  return failures;
}

int cmd_svd_bench(Index dim, Index k, int t, int trials, std::uint64_t seed,
                  const std::string& out_file) {
  using clock = std::chrono::steady_clock;
  ra::csv::Table table({"trial", "dim", "k", "t", "randomized_ms", "exact_ms",
                        "max_rel_error"});
  char args[160];
  std::snprintf(args, sizeof(args),
                "svd-bench dim=%lld k=%lld t=%d trials=%d seed=%llu",
                static_cast<long long>(dim), static_cast<long long>(k), t,
                trials, static_cast<unsigned long long>(seed));
  table.set_comment(args);

  for (int trial = 0; trial < trials; ++trial) {
    ra::Rng rng(seed + std::uint64_t(trial));
    Vector svals(dim);
    for (Index j = 0; j < dim; ++j) svals(j) = std::pow(0.9, double(j));
    const Matrix left = ra::linalg::qr_decompose(rng.gaussian_matrix(dim, dim)).q;
    const Matrix right = ra::linalg::qr_decompose(rng.gaussian_matrix(dim, dim)).q;
    const Matrix a = left * svals.asDiagonal() * right.transpose();

    const auto t0 = clock::now();
    const auto fast = ra::linalg::randomized_svd(a, k, t, seed + 977 + trial);
    const auto t1 = clock::now();
    const auto exact = ra::linalg::exact_svd_small(a);
    const auto t2 = clock::now();

    double err = 0.0;
    for (Index i = 0; i < k; ++i)
      err = std::max(err, std::abs(fast.s(i) - exact.s(i)) / exact.s(i));
    const double ms_fast =
        std::chrono::duration<double, std::milli>(t1 - t0).count();
    const double ms_exact =
        std::chrono::duration<double, std::milli>(t2 - t1).count();
    table.begin_row()
        .cell(Index(trial))
        .cell(dim)
        .cell(k)
        .cell(Index(t))
        .cell(ms_fast)
        .cell(ms_exact)
        .cell(err);
    std::printf("trial %d: randomized %.1f ms, exact %.1f ms, max rel err %.3e\n",
                trial, ms_fast, ms_exact, err);
  }
  if (!out_file.empty()) table.write(out_file);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"residual alignment laboratory"};
  app.require_subcommand(1);

  std::string config_path, run_name, checkpoint_path, out_dir, out_file;
  Index blocks = 4, dim = 8, k = 0, i0 = 0, bench_dim = 300, bench_k = 10;
  int inputs = 0, iters = 20000, trials = 2000, bench_t = 20, bench_trials = 3;
  double lambda = 1e-2, lr = 1.0, perturb = 0.0;
  std::uint64_t seed = 0;

  auto* train = app.add_subcommand("train", "train a model from a config file");
  train->add_option("--config", config_path, "experiment config path")->required();
  train->add_option("--run-name", run_name, "fixed run directory name");

  auto* metrics =
      app.add_subcommand("metrics", "measure RA1-RA4 and NC for a checkpoint");
  metrics->add_option("--checkpoint", checkpoint_path, "checkpoint path")->required();
  metrics->add_option("--config", config_path, "experiment config path")->required();
  metrics->add_option("--out", out_dir, "output directory");
  metrics->add_option("--k", k, "subspace size override");
  metrics->add_option("--i0", i0, "ra4 start block override");
  metrics->add_option("--inputs", inputs, "number of probed inputs");

  auto* ujm = app.add_subcommand("ujm", "solve and verify the free-Jacobian model");
  ujm->add_option("--blocks", blocks, "number of Jacobians");
  ujm->add_option("--dim", dim, "Jacobian dimension");
  ujm->add_option("--lambda", lambda, "penalty weight");
  ujm->add_option("--lr", lr, "descent step");
  ujm->add_option("--iters", iters, "iteration budget");
  ujm->add_option("--seed", seed, "seed");
  ujm->add_option("--out", out_dir, "output directory")->required();

  auto* theory = app.add_subcommand("theory", "run the constructive theorem checks");
  theory->add_option("--blocks", blocks, "trajectory length");
  theory->add_option("--dim", dim, "representation dimension");
  theory->add_option("--seed", seed, "seed");
  theory->add_option("--trials", trials, "trace-inequality trials");
  theory->add_option("--perturb", perturb,
                     "test hook: offset the 1/i singular values");

  auto* bench = app.add_subcommand(
      "svd-bench", "randomized vs exact SVD timing and accuracy");
  bench->add_option("--dim", bench_dim, "matrix side length");
  bench->add_option("--k", bench_k, "top-k");
  bench->add_option("--t", bench_t, "subspace iterations");
  bench->add_option("--trials", bench_trials, "number of matrices");
  bench->add_option("--seed", seed, "seed");
  bench->add_option("--out", out_file, "CSV output path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return cmd_train(config_path, run_name);
    if (metrics->parsed())
      return cmd_metrics(checkpoint_path, config_path, out_dir, k, i0, inputs);
    if (ujm->parsed())
      return cmd_ujm(blocks, dim, lambda, lr, iters, seed, out_dir);
    if (theory->parsed()) return cmd_theory(blocks, dim, seed, trials, perturb);
    if (bench->parsed())
      return cmd_svd_bench(bench_dim, bench_k, bench_t, bench_trials, seed,
                           out_file);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
