#pragma once

#include <string>

#include "ra/config.hpp"
#include "ra/data.hpp"
#include "ra/rametrics.hpp"
#include "ra/resnet.hpp"

namespace ra::experiment {

struct TrainOutputs {
  std::string run_dir;  // empty when writing was disabled
  resnet::ModelConfig model_cfg;
  resnet::TrainResult result;
  data::DatasetPair dataset;
};

/// Load the dataset, train, and (optionally) write checkpoint + history CSV
/// + resolved config into a fresh run directory.
TrainOutputs run_train(const config::ExperimentConfig& cfg, bool write_files);

struct MetricsOutputs {
  double ra1_collinearity = 0.0;
  double ra1_equispacing_cv = 0.0;
  Matrix ra2_ujv;  // L x L mean pair scores over the probed inputs
  Matrix ra2_vju;
  double ra2_late_offdiag_ujv = 0.0;  // mean over i != j, i,j in the later half
  double ra2_late_offdiag_vju = 0.0;
  Vector ra3_gaps;           // per block, sigma_C / sigma_{C+1}
  Vector mean_top_svals;     // per block, averaged over inputs
  Matrix singular_values;    // L x k, from the first probed input
  linalg::LineFit ra4;
  Index ra4_start = 0;
  rametrics::NCReport nc;
};

/// Residual-Jacobian spectra, alignment maps, RA1-RA4 scores, and Neural
/// Collapse metrics for a trained model. When out_dir is non-empty, writes
/// the CSV/SVG artifact set there with `resolved` embedded in every file.
MetricsOutputs run_metrics(const resnet::ModelParams& params,
                           const resnet::ModelConfig& cfg,
                           const data::DatasetPair& dataset,
                           const config::MetricsOptions& options,
                           const std::string& out_dir,
                           const std::string& resolved);

/// <output_dir>/<run_name or fnv1a(resolved)-UTC timestamp>, created.
std::string make_run_dir(const config::ExperimentConfig& cfg);

}  // namespace ra::experiment
