#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ra/data.hpp"
#include "ra/resnet.hpp"
#include "ra/types.hpp"

namespace ra::config {

/// Line-oriented "key = value" text with [section] headers and '#' comments.
/// Unknown keys and malformed lines are reported with their line number.
class KeyValues {
 public:
  void set(const std::string& section, const std::string& key,
           const std::string& value, int line);
  bool has(const std::string& section, const std::string& key) const;

  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& fallback) const;
  double get_double(const std::string& section, const std::string& key,
                    double fallback) const;
  long long get_int(const std::string& section, const std::string& key,
                    long long fallback) const;
  bool get_bool(const std::string& section, const std::string& key,
                bool fallback) const;
  std::vector<int> get_int_list(const std::string& section,
                                const std::string& key) const;

  /// Keys never read back; used to reject typos.
  std::vector<std::string> unused_keys() const;

 private:
  struct Entry {
    std::string value;
    int line = 0;
    mutable bool used = false;
  };
  std::map<std::string, Entry> entries_;
};

KeyValues parse_config_text(const std::string& text);
KeyValues parse_config_file(const std::string& path);

struct MetricsOptions {
  Index k = 10;
  Index i0 = 0;  // 0 = ceil(L / 3)
  int inputs = 1;
  int svd_iters = 20;
  Index oversample = 8;
  Index nc_batch = 256;
  std::uint64_t seed = 0;
};

struct ExperimentConfig {
  data::DatasetSpec dataset;
  resnet::ModelConfig model;
  resnet::TrainConfig train;
  MetricsOptions metrics;
  std::string output_dir = "runs";
  std::string run_name;  // empty = <config hash>-<timestamp>
  std::uint64_t seed = 0;
};

ExperimentConfig experiment_from_keyvalues(const KeyValues& kv);
ExperimentConfig load_experiment_config(const std::string& path);

/// Canonical serialization of the fully resolved config; hashed for run
/// directory names and embedded in every output file.
std::string resolve_text(const ExperimentConfig& cfg);

std::uint64_t fnv1a_hash(const std::string& text);

}  // namespace ra::config
