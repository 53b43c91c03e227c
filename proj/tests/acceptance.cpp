// Acceptance suite: one pass/fail line per criterion, exit code = number of
// failed criteria. Run with --only N to run a single criterion.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "ra/experiment.hpp"
#include "ra/random.hpp"
#include "ra/ujm.hpp"

using namespace ra;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
  void note(const std::string& what) {
    detail += (detail.empty() ? "" : "; ") + what;
  }
};

// ---------------------------------------------------------------- criterion 1

Outcome criterion_gradients() {
  Outcome out;

  resnet::ModelConfig cfg;
  cfg.input_dim = 10;
  cfg.width = 16;
  cfg.blocks = 3;
  cfg.classes = 4;
  cfg.weight_decay = 1e-2;
  cfg.seed = 1234;
  resnet::ModelParams params = resnet::init_model(cfg);
  Rng rng(77);
  Matrix x = rng.gaussian_matrix(10, 4);
  std::vector<int> labels{0, 3, 1, 2};

  auto [loss, grads] = resnet::loss_and_grads(params, cfg, x, labels);
  std::vector<std::pair<double*, double*>> tensors;
  auto add = [&tensors](auto& p, auto& g) {
    tensors.emplace_back(p.data(), g.data());
  };
  std::vector<Index> sizes;
  add(params.w0, grads.w0);
  sizes.push_back(params.w0.size());
  add(params.b0, grads.b0);
  sizes.push_back(params.b0.size());
  for (std::size_t b = 0; b < params.blocks.size(); ++b) {
    add(params.blocks[b].wa, grads.blocks[b].wa);
    sizes.push_back(params.blocks[b].wa.size());
    add(params.blocks[b].ba, grads.blocks[b].ba);
    sizes.push_back(params.blocks[b].ba.size());
    add(params.blocks[b].wb, grads.blocks[b].wb);
    sizes.push_back(params.blocks[b].wb.size());
    add(params.blocks[b].bb, grads.blocks[b].bb);
    sizes.push_back(params.blocks[b].bb.size());
  }
  add(params.wc, grads.wc);
  sizes.push_back(params.wc.size());
  add(params.bc, grads.bc);
  sizes.push_back(params.bc.size());

  const double step = 1e-5;
  double worst_net = 0.0;
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    for (Index i = 0; i < sizes[t]; ++i) {
      double* p = tensors[t].first + i;
      const double saved = *p;
      *p = saved + step;
      const double up = resnet::loss_and_grads(params, cfg, x, labels).first;
      *p = saved - step;
      const double down = resnet::loss_and_grads(params, cfg, x, labels).first;
      *p = saved;
      const double fd = (up - down) / (2.0 * step);
      worst_net = std::max(worst_net, std::abs(fd - tensors[t].second[i]) /
                                          std::max(1.0, std::abs(fd)));
    }
  }
  out.require(worst_net < 1e-5,
              "network gradient error " + std::to_string(worst_net));

  ujm::UJMState state;
  Rng urng(88);
  state.delta_x = urng.gaussian_vector(6);
  state.w = urng.gaussian_vector(6);
  state.y = -1;
  state.lambda = 2e-2;
  for (int k = 0; k < 3; ++k)
    state.jacobians.push_back(0.3 * urng.gaussian_matrix(6, 6));
  const ujm::UJMGradients ugrads = ujm::ujm_grad(state);
  double worst_ujm = 0.0;
  auto fd_at = [&state, step](double* p) {
    const double saved = *p;
    *p = saved + step;
    const double up = ujm::ujm_objective(state);
    *p = saved - step;
    const double down = ujm::ujm_objective(state);
    *p = saved;
    return (up - down) / (2.0 * step);
  };
  for (std::size_t k = 0; k < 3; ++k)
    for (Index i = 0; i < 36; ++i) {
      const double fd = fd_at(state.jacobians[k].data() + i);
      worst_ujm = std::max(worst_ujm, std::abs(fd - ugrads.jacobians[k].data()[i]) /
                                          std::max(1.0, std::abs(fd)));
    }
  for (Index i = 0; i < 6; ++i) {
    const double fd = fd_at(state.w.data() + i);
    worst_ujm = std::max(
        worst_ujm, std::abs(fd - ugrads.w(i)) / std::max(1.0, std::abs(fd)));
  }
  out.require(worst_ujm < 1e-7, "UJM gradient error " + std::to_string(worst_ujm));

  char buf[96];
  std::snprintf(buf, sizeof(buf), "max rel error: network %.2e, UJM %.2e",
                worst_net, worst_ujm);
  out.note(buf);
  return out;
}

// ---------------------------------------------------------------- criterion 2

Outcome criterion_svd_oracle() {
  Outcome out;
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    Rng rng(4000 + std::uint64_t(trial));
    Vector svals(300);
    for (Index j = 0; j < 300; ++j) svals(j) = std::pow(0.9, double(j));
    const Matrix left = linalg::qr_decompose(rng.gaussian_matrix(300, 300)).q;
    const Matrix right = linalg::qr_decompose(rng.gaussian_matrix(300, 300)).q;
    const Matrix a = left * svals.asDiagonal() * right.transpose();

    const auto fast = linalg::randomized_svd(a, 10, 20, 9000 + std::uint64_t(trial));
    const auto exact = linalg::exact_svd_small(a);
    for (Index i = 0; i < 10; ++i)
      worst = std::max(worst, std::abs(fast.s(i) - exact.s(i)) / exact.s(i));
  }
  out.require(worst < 1e-8, "worst relative deviation " + std::to_string(worst));
  char buf[64];
  std::snprintf(buf, sizeof(buf), "20 matrices, worst rel deviation %.2e", worst);
  out.note(buf);
  return out;
}

// ---------------------------------------------------------------- criterion 3

Outcome criterion_theorem31() {
  Outcome out;
  Rng rng(5150);
  Vector u = rng.gaussian_vector(48);
  u /= u.norm();
  const Vector h1 = rng.gaussian_vector(48);
  const auto traj = ujm::ra1_construction(u, h1, 16);
  const auto ra1 = rametrics::ra1_scores(traj);
  out.require(std::abs(ra1.collinearity - 1.0) < 1e-10,
              "collinearity " + std::to_string(ra1.collinearity));
  out.require(std::abs(ra1.equispacing_cv) < 1e-10,
              "equispacing cv " + std::to_string(ra1.equispacing_cv));

  Vector top_svals(16);
  for (Index i = 1; i <= 16; ++i)
    top_svals(i - 1) =
        linalg::exact_svd_small((1.0 / double(i)) * u * u.transpose()).s(0);
  const auto fit = rametrics::ra4_fit(top_svals, 1);
  out.require(std::abs(fit.slope - 1.0) < 1e-10,
              "ra4 slope " + std::to_string(fit.slope));
  char buf[128];
  std::snprintf(buf, sizeof(buf),
                "collinearity dev %.1e, cv %.1e, slope dev %.1e",
                std::abs(ra1.collinearity - 1.0), ra1.equispacing_cv,
                std::abs(fit.slope - 1.0));
  out.note(buf);
  return out;
}

// ---------------------------------------------------------------- criterion 4

Outcome criterion_theorem33() {
  Outcome out;
  Rng rng(606);
  const Vector delta_x = rng.gaussian_vector(8);
  const auto solved = ujm::ujm_solve(delta_x, +1, 4, 8, 1e-2, 1.0, 20000, 707);
  const auto verdict = ujm::ujm_verify(solved.state);
  out.require(std::abs(verdict.loss_gap) < 1e-6,
              "loss gap " + std::to_string(verdict.loss_gap));
  out.require(verdict.max_rank1_ratio < 1e-3,
              "rank-1 ratio " + std::to_string(verdict.max_rank1_ratio));
  out.require(verdict.min_alignment > 0.999,
              "alignment " + std::to_string(verdict.min_alignment));
  out.require(verdict.sval_cv < 1e-3, "sval cv " + std::to_string(verdict.sval_cv));
  out.require(verdict.w_alignment > 0.999,
              "w alignment " + std::to_string(verdict.w_alignment));
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "gap %.1e, rank-1 %.1e, align %.6f, cv %.1e, |cos(w,dx)| %.6f",
                verdict.loss_gap, verdict.max_rank1_ratio, verdict.min_alignment,
                verdict.sval_cv, verdict.w_alignment);
  out.note(buf);
  return out;
}

// ---------------------------------------------------------------- criterion 5

Outcome criterion_trace_inequality() {
  Outcome out;
  const auto report = ujm::trace_inequality_check(5, 3, 10000, 31415);
  out.require(report.violations == 0,
              std::to_string(report.violations) + " violations, first seed " +
                  std::to_string(report.first_violation_seed));
  out.require(report.max_attainment_gap < 1e-9,
              "attainment gap " + std::to_string(report.max_attainment_gap));
  char buf[128];
  std::snprintf(buf, sizeof(buf),
                "10000 trials, max excess %.2e, attainment gap %.2e",
                report.max_excess, report.max_attainment_gap);
  out.note(buf);
  return out;
}

// ------------------------------------------------------------- criteria 6 & 7

// Real MNIST is used when present ($RA_MNIST_DIR or ./data/mnist); otherwise
// a deterministic rendered-digit corpus is written as genuine IDX files so
// the full binary ingestion path is exercised either way.
std::string ensure_idx_corpus(Outcome& out) {
  const char* env = std::getenv("RA_MNIST_DIR");
  for (const std::string dir :
       {env ? std::string(env) : std::string(), std::string("data/mnist")}) {
    if (!dir.empty() && fs::exists(dir + "/train-images-idx3-ubyte")) {
      out.note("dataset: MNIST at " + dir);
      return dir;
    }
  }
  const std::string dir = "acceptance_scratch/mnistlike";
  fs::create_directories(dir);
  if (!fs::exists(dir + "/train-images-idx3-ubyte")) {
    const auto train = data::synthetic_digits(1100, 424242);
    const auto test = data::synthetic_digits(220, 424242 ^ 0x9e3779b97f4a7c15ull);
    std::vector<std::uint8_t> img, lab;
    data::serialize_idx(train, 28, 28, img, lab);
    data::write_file(dir + "/train-images-idx3-ubyte", img);
    data::write_file(dir + "/train-labels-idx1-ubyte", lab);
    data::serialize_idx(test, 28, 28, img, lab);
    data::write_file(dir + "/t10k-images-idx3-ubyte", img);
    data::write_file(dir + "/t10k-labels-idx1-ubyte", lab);
  }
  out.note("dataset: rendered-digit IDX corpus (no MNIST in environment)");
  return dir;
}

config::ExperimentConfig desk_scale_config(const std::string& data_dir) {
  config::ExperimentConfig cfg;
  cfg.dataset.source = data::DataSource::kMnist;
  cfg.dataset.path = data_dir;
  cfg.dataset.class_subset = {0, 1};
  cfg.dataset.train_cap = 2000;
  cfg.dataset.test_cap = 400;
  cfg.dataset.seed = 11;
  cfg.model.width = 128;
  cfg.model.blocks = 8;
  cfg.model.seed = 21;
  cfg.train.epochs = 100;
  cfg.train.batch_size = 128;
  cfg.train.lr0 = 0.1;
  cfg.train.weight_decay = 5e-2;
  cfg.train.seed = 31;
  cfg.metrics.k = 10;
  cfg.metrics.inputs = 1;
  cfg.metrics.seed = 41;
  return cfg;
}

struct CounterfactualRuns {
  experiment::MetricsOutputs skip, noskip, stochastic;
  double skip_acc = 0.0, noskip_acc = 0.0, stochastic_acc = 0.0;
  bool ready = false;
};

CounterfactualRuns& counterfactual_runs(Outcome& out) {
  static CounterfactualRuns runs;
  if (runs.ready) return runs;
  const std::string data_dir = ensure_idx_corpus(out);
  const config::ExperimentConfig base = desk_scale_config(data_dir);

  auto run_one = [&base](bool skip, double sd, experiment::MetricsOutputs& m,
                         double& acc) {
    auto cfg = base;
    cfg.model.skip_enabled = skip;
    cfg.train.stochastic_depth_p = sd;
    const auto trained = experiment::run_train(cfg, false);
    acc = trained.result.history.back().accuracy;
    m = experiment::run_metrics(trained.result.params, trained.model_cfg,
                                trained.dataset, cfg.metrics, "", "");
  };
  run_one(true, 0.0, runs.skip, runs.skip_acc);
  run_one(false, 0.0, runs.noskip, runs.noskip_acc);
  run_one(true, 0.3, runs.stochastic, runs.stochastic_acc);
  runs.ready = true;
  return runs;
}

Outcome criterion_skip_counterfactual() {
  Outcome out;
  CounterfactualRuns& runs = counterfactual_runs(out);
  out.require(runs.skip_acc == 1.0,
              "skip model train accuracy " + std::to_string(runs.skip_acc));
  out.require(runs.noskip_acc == 1.0,
              "no-skip model train accuracy " + std::to_string(runs.noskip_acc));
  const double factor =
      runs.skip.ra2_late_offdiag_ujv /
      std::max(runs.noskip.ra2_late_offdiag_ujv, 1e-12);
  out.require(factor >= 3.0, "RA2 factor " + std::to_string(factor));
  out.require(runs.skip.ra4.r2 >= 0.9,
              "RA4 r2 " + std::to_string(runs.skip.ra4.r2));
  out.require(runs.skip.ra4.slope > 0.0,
              "RA4 slope " + std::to_string(runs.skip.ra4.slope));
  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "RA2 late mean: skip %.4f vs no-skip %.4f (factor %.1f); "
                "RA4 slope %.3f r2 %.3f",
                runs.skip.ra2_late_offdiag_ujv,
                runs.noskip.ra2_late_offdiag_ujv, factor, runs.skip.ra4.slope,
                runs.skip.ra4.r2);
  out.note(buf);
  return out;
}

Outcome criterion_stochastic_depth() {
  Outcome out;
  CounterfactualRuns& runs = counterfactual_runs(out);
  out.require(
      runs.stochastic.ra2_late_offdiag_ujv >= runs.skip.ra2_late_offdiag_ujv,
      "stochastic-depth RA2 " + std::to_string(runs.stochastic.ra2_late_offdiag_ujv) +
          " < plain " + std::to_string(runs.skip.ra2_late_offdiag_ujv));
  char buf[120];
  std::snprintf(buf, sizeof(buf), "RA2 late mean: p=0.3 %.4f vs p=0 %.4f",
                runs.stochastic.ra2_late_offdiag_ujv,
                runs.skip.ra2_late_offdiag_ujv);
  out.note(buf);
  return out;
}

// ---------------------------------------------------------------- criterion 8

Outcome criterion_null_model() {
  Outcome out;
  const int trials = 1000;
  Vector scores(trials);
  for (int trial = 0; trial < trials; ++trial) {
    Rng rng(100000 + std::uint64_t(trial));
    const Matrix j_probe = rng.gaussian_matrix(128, 128);
    const Matrix j_basis = rng.gaussian_matrix(128, 128);
    const auto svd =
        linalg::randomized_svd(j_basis, 10, 20, 200000 + std::uint64_t(trial));
    const auto map =
        rametrics::alignment_map(j_probe, svd, 10, rametrics::MapVariant::kUJV);
    scores(trial) = rametrics::ra2_score(map).value;
  }
  const double mean = scores.mean();
  const double sd = std::sqrt((scores.array() - mean).square().mean());
  const double se = sd / std::sqrt(double(trials));
  out.require(std::abs(mean - 0.1) <= 3.0 * se,
              "mean " + std::to_string(mean) + " vs 0.1 (3se = " +
                  std::to_string(3.0 * se) + ")");
  char buf[96];
  std::snprintf(buf, sizeof(buf), "mean %.5f, |dev| %.5f, 3se %.5f", mean,
                std::abs(mean - 0.1), 3.0 * se);
  out.note(buf);
  return out;
}

// ---------------------------------------------------------------- criterion 9

bool same_bytes(const std::string& a, const std::string& b) {
  const auto ba = data::read_file(a);
  const auto bb = data::read_file(b);
  return ba == bb;
}

Outcome criterion_determinism_formats() {
  Outcome out;
  fs::remove_all("acceptance_scratch/det");

  config::ExperimentConfig cfg;
  cfg.dataset.source = data::DataSource::kDigits;
  cfg.dataset.per_class = 30;
  cfg.dataset.class_subset = {0, 1};
  cfg.dataset.seed = 3;
  cfg.model.width = 16;
  cfg.model.blocks = 2;
  cfg.model.seed = 4;
  cfg.train.epochs = 3;
  cfg.train.batch_size = 20;
  cfg.train.lr0 = 0.05;
  cfg.train.weight_decay = 1e-2;
  cfg.train.seed = 5;
  cfg.metrics.k = 4;
  cfg.metrics.seed = 6;
  cfg.output_dir = "acceptance_scratch/det";

  std::vector<std::string> dirs;
  for (const char* name : {"a", "b"}) {
    auto c = cfg;
    c.run_name = name;
    const auto trained = experiment::run_train(c, true);
    experiment::run_metrics(trained.result.params, trained.model_cfg,
                            trained.dataset, c.metrics,
                            trained.run_dir + "/metrics",
                            config::resolve_text(c));
    dirs.push_back(trained.run_dir);
  }
  for (const char* f :
       {"checkpoint.racp", "history.csv", "metrics/ra_report.csv",
        "metrics/singular_values.csv", "metrics/ra_pairs.csv",
        "metrics/alignment_ujv.svg", "metrics/alignment_vju.svg",
        "metrics/ra4_fit.svg", "metrics/trajectories.svg",
        "metrics/nc_metrics.csv"}) {
    out.require(same_bytes(dirs[0] + "/" + f, dirs[1] + "/" + f),
                std::string("rerun differs: ") + f);
  }
  // config copies differ only in the run_name line
  out.note("rerun outputs byte-identical");

  // checkpoint round trip is bit-exact
  auto [params, model_cfg] =
      resnet::load_checkpoint(dirs[0] + "/checkpoint.racp");
  resnet::save_checkpoint(params, model_cfg,
                          "acceptance_scratch/det/resaved.racp");
  out.require(same_bytes(dirs[0] + "/checkpoint.racp",
                         "acceptance_scratch/det/resaved.racp"),
              "checkpoint round trip not bit-exact");

  // corrupted fixtures are rejected with positioned errors
  const auto corpus = data::synthetic_digits(2, 9);
  std::vector<std::uint8_t> img, lab;
  data::serialize_idx(corpus, 28, 28, img, lab);
  auto truncated = img;
  truncated.resize(16 + 784 * 10);
  bool threw = false;
  try {
    data::parse_idx(truncated, lab);
  } catch (const FormatError& e) {
    threw = std::string(e.what()).find("at byte") != std::string::npos;
  }
  out.require(threw, "truncated IDX not rejected with a positioned error");

  auto bad_magic = img;
  bad_magic[3] = 0x99;
  threw = false;
  try {
    data::parse_idx(bad_magic, lab);
  } catch (const FormatError& e) {
    threw = std::string(e.what()).find("at byte 0") != std::string::npos;
  }
  out.require(threw, "bad IDX magic not rejected with a positioned error");

  threw = false;
  try {
    data::parse_cifar(std::vector<std::uint8_t>(3073 * 2 + 5, 0), 10);
  } catch (const FormatError&) {
    threw = true;
  }
  out.require(threw, "misaligned CIFAR stream not rejected");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i)
    if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc)
      only = std::atoi(argv[i + 1]);

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"gradient correctness (network 1e-5, UJM 1e-7)", criterion_gradients},
      {"randomized SVD matches the exact oracle to 1e-8", criterion_svd_oracle},
      {"RA2+3+4 construction yields RA1 exactly", criterion_theorem31},
      {"free-Jacobian optimum has the aligned rank-1 structure",
       criterion_theorem33},
      {"trace inequality holds over 10000 random trials",
       criterion_trace_inequality},
      {"skip connections cause the alignment (counterfactual)",
       criterion_skip_counterfactual},
      {"stochastic depth amplifies the alignment", criterion_stochastic_depth},
      {"random-Jacobian null model calibrates at 1/k", criterion_null_model},
      {"determinism and binary formats", criterion_determinism_formats},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (only > 0 && int(i) + 1 != only) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = criteria[i].second();
    } catch (const std::exception& e) {
      out.pass = false;
      out.note(std::string("exception: ") + e.what());
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    std::printf("[%s] criterion %zu: %s (%.1fs)%s%s\n",
                out.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, secs,
                out.detail.empty() ? "" : " — ", out.detail.c_str());
    std::fflush(stdout);
    if (!out.pass) ++failures;
  }
  return failures;
}
