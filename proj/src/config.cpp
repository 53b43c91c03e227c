#include "ra/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace ra::config {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

[[noreturn]] void fail_line(int line, const std::string& msg) {
  throw std::runtime_error("config line " + std::to_string(line) + ": " + msg);
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

data::DataSource source_from_name(const std::string& name) {
  if (name == "mnist") return data::DataSource::kMnist;
  if (name == "fashion-mnist") return data::DataSource::kFashionMnist;
  if (name == "cifar10") return data::DataSource::kCifar10;
  if (name == "cifar100") return data::DataSource::kCifar100;
  if (name == "synthetic") return data::DataSource::kSynthetic;
  if (name == "digits") return data::DataSource::kDigits;
  throw std::runtime_error("config: unknown dataset source '" + name + "'");
}

std::string source_name(data::DataSource source) {
  switch (source) {
    case data::DataSource::kMnist: return "mnist";
    case data::DataSource::kFashionMnist: return "fashion-mnist";
    case data::DataSource::kCifar10: return "cifar10";
    case data::DataSource::kCifar100: return "cifar100";
    case data::DataSource::kSynthetic: return "synthetic";
    case data::DataSource::kDigits: return "digits";
  }
  return "synthetic";
}

}  // namespace

void KeyValues::set(const std::string& section, const std::string& key,
                    const std::string& value, int line) {
  const std::string full = section + "." + key;
  if (entries_.count(full))
    fail_line(line, "duplicate key '" + full + "'");
  entries_[full] = Entry{value, line, false};
}

bool KeyValues::has(const std::string& section, const std::string& key) const {
  return entries_.count(section + "." + key) > 0;
}

std::string KeyValues::get_string(const std::string& section,
                                  const std::string& key,
                                  const std::string& fallback) const {
  auto it = entries_.find(section + "." + key);
  if (it == entries_.end()) return fallback;
  it->second.used = true;
  return it->second.value;
}

double KeyValues::get_double(const std::string& section, const std::string& key,
                             double fallback) const {
  auto it = entries_.find(section + "." + key);
  if (it == entries_.end()) return fallback;
  it->second.used = true;
  try {
    std::size_t pos = 0;
    const double v = std::stod(it->second.value, &pos);
    if (pos != it->second.value.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    fail_line(it->second.line, "expected a number for '" + section + "." + key +
                                   "', got '" + it->second.value + "'");
  }
}

long long KeyValues::get_int(const std::string& section, const std::string& key,
                             long long fallback) const {
  auto it = entries_.find(section + "." + key);
  if (it == entries_.end()) return fallback;
  it->second.used = true;
  long long v = 0;
  const std::string& s = it->second.value;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    fail_line(it->second.line, "expected an integer for '" + section + "." + key +
                                   "', got '" + s + "'");
  return v;
}

bool KeyValues::get_bool(const std::string& section, const std::string& key,
                         bool fallback) const {
  auto it = entries_.find(section + "." + key);
  if (it == entries_.end()) return fallback;
  it->second.used = true;
  const std::string& s = it->second.value;
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  fail_line(it->second.line,
            "expected true/false for '" + section + "." + key + "'");
}

std::vector<int> KeyValues::get_int_list(const std::string& section,
                                         const std::string& key) const {
  auto it = entries_.find(section + "." + key);
  std::vector<int> out;
  if (it == entries_.end()) return out;
  it->second.used = true;
  std::stringstream ss(it->second.value);
  std::string token;
  while (std::getline(ss, token, ',')) {
    token = trim(token);
    if (token.empty()) continue;
    try {
      out.push_back(std::stoi(token));
    } catch (...) {
      fail_line(it->second.line, "expected a comma-separated integer list for '" +
                                     section + "." + key + "'");
    }
  }
  return out;
}

std::vector<std::string> KeyValues::unused_keys() const {
  std::vector<std::string> out;
  for (const auto& [key, entry] : entries_)
    if (!entry.used) out.push_back(key + " (line " + std::to_string(entry.line) + ")");
  return out;
}

KeyValues parse_config_text(const std::string& text) {
  KeyValues kv;
  std::stringstream ss(text);
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        fail_line(line_no, "unterminated section header '" + t + "'");
      section = trim(t.substr(1, t.size() - 2));
      if (section.empty()) fail_line(line_no, "empty section name");
      continue;
    }
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos)
      fail_line(line_no, "expected 'key = value', got '" + t + "'");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty()) fail_line(line_no, "empty key");
    if (section.empty()) fail_line(line_no, "key '" + key + "' outside a section");
    kv.set(section, key, value, line_no);
  }
  return kv;
}

KeyValues parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str());
}

ExperimentConfig experiment_from_keyvalues(const KeyValues& kv) {
  ExperimentConfig cfg;
  cfg.seed = std::uint64_t(kv.get_int("experiment", "seed", 0));
  cfg.output_dir = kv.get_string("output", "dir", "runs");
  cfg.run_name = kv.get_string("output", "run_name", "");

  auto& ds = cfg.dataset;
  ds.source = source_from_name(kv.get_string("dataset", "source", "synthetic"));
  ds.path = kv.get_string("dataset", "path", "");
  ds.class_subset = kv.get_int_list("dataset", "classes");
  ds.train_cap = Index(kv.get_int("dataset", "train_cap", 0));
  ds.test_cap = Index(kv.get_int("dataset", "test_cap", 0));
  ds.seed = std::uint64_t(kv.get_int("dataset", "seed", static_cast<long long>(cfg.seed ^ 0x01)));
  ds.classes_total = int(kv.get_int("dataset", "classes_total", 10));
  ds.per_class = Index(kv.get_int("dataset", "per_class", 200));
  ds.dim = Index(kv.get_int("dataset", "dim", 16));
  ds.separation = kv.get_double("dataset", "separation", 3.0);

  auto& m = cfg.model;
  m.width = Index(kv.get_int("model", "width", 128));
  m.blocks = Index(kv.get_int("model", "blocks", 8));
  m.skip_enabled = kv.get_bool("model", "skip", true);
  const std::string act = kv.get_string("model", "activation", "post");
  if (act == "post") {
    m.activation = resnet::Activation::kPost;
  } else if (act == "pre") {
    m.activation = resnet::Activation::kPre;
  } else {
    throw std::runtime_error("config: activation must be 'pre' or 'post', got '" +
                             act + "'");
  }
  m.seed = std::uint64_t(kv.get_int("model", "seed", static_cast<long long>(cfg.seed ^ 0x02)));
  // input_dim and classes are resolved from the dataset at run time

  auto& t = cfg.train;
  t.epochs = int(kv.get_int("train", "epochs", 100));
  t.batch_size = Index(kv.get_int("train", "batch_size", 128));
  t.lr0 = kv.get_double("train", "lr0", 0.1);
  t.momentum = kv.get_double("train", "momentum", 0.0);
  t.weight_decay = kv.get_double("train", "weight_decay", 5e-2);
  t.stochastic_depth_p = kv.get_double("train", "stochastic_depth", 0.0);
  t.seed = std::uint64_t(kv.get_int("train", "seed", static_cast<long long>(cfg.seed ^ 0x03)));
  m.weight_decay = t.weight_decay;
  m.stochastic_depth_p = t.stochastic_depth_p;

  auto& mo = cfg.metrics;
  mo.k = Index(kv.get_int("metrics", "k", 10));
  mo.i0 = Index(kv.get_int("metrics", "i0", 0));
  mo.inputs = int(kv.get_int("metrics", "inputs", 1));
  mo.svd_iters = int(kv.get_int("metrics", "svd_iters", 20));
  mo.oversample = Index(kv.get_int("metrics", "oversample", 8));
  mo.nc_batch = Index(kv.get_int("metrics", "nc_batch", 256));
  mo.seed = std::uint64_t(kv.get_int("metrics", "seed", static_cast<long long>(cfg.seed ^ 0x04)));

  const auto unused = kv.unused_keys();
  if (!unused.empty()) {
    std::string msg = "config: unknown keys:";
    for (const auto& k : unused) msg += " " + k;
    throw std::runtime_error(msg);
  }
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  return experiment_from_keyvalues(parse_config_file(path));
}

std::string resolve_text(const ExperimentConfig& cfg) {
  std::ostringstream out;
  out << "[experiment]\n";
  out << "seed = " << cfg.seed << "\n";
  out << "[dataset]\n";
  out << "source = " << source_name(cfg.dataset.source) << "\n";
  out << "path = " << cfg.dataset.path << "\n";
  out << "classes = ";
  for (std::size_t i = 0; i < cfg.dataset.class_subset.size(); ++i)
    out << (i ? "," : "") << cfg.dataset.class_subset[i];
  out << "\n";
  out << "train_cap = " << cfg.dataset.train_cap << "\n";
  out << "test_cap = " << cfg.dataset.test_cap << "\n";
  out << "seed = " << cfg.dataset.seed << "\n";
  out << "classes_total = " << cfg.dataset.classes_total << "\n";
  out << "per_class = " << cfg.dataset.per_class << "\n";
  out << "dim = " << cfg.dataset.dim << "\n";
  out << "separation = " << format_double(cfg.dataset.separation) << "\n";
  out << "[model]\n";
  out << "width = " << cfg.model.width << "\n";
  out << "blocks = " << cfg.model.blocks << "\n";
  out << "skip = " << (cfg.model.skip_enabled ? "true" : "false") << "\n";
  out << "activation = "
      << (cfg.model.activation == resnet::Activation::kPre ? "pre" : "post")
      << "\n";
  out << "seed = " << cfg.model.seed << "\n";
  out << "[train]\n";
  out << "epochs = " << cfg.train.epochs << "\n";
  out << "batch_size = " << cfg.train.batch_size << "\n";
  out << "lr0 = " << format_double(cfg.train.lr0) << "\n";
  out << "momentum = " << format_double(cfg.train.momentum) << "\n";
  out << "weight_decay = " << format_double(cfg.train.weight_decay) << "\n";
  out << "stochastic_depth = " << format_double(cfg.train.stochastic_depth_p)
      << "\n";
  out << "seed = " << cfg.train.seed << "\n";
  out << "[metrics]\n";
  out << "k = " << cfg.metrics.k << "\n";
  out << "i0 = " << cfg.metrics.i0 << "\n";
  out << "inputs = " << cfg.metrics.inputs << "\n";
  out << "svd_iters = " << cfg.metrics.svd_iters << "\n";
  out << "oversample = " << cfg.metrics.oversample << "\n";
  out << "nc_batch = " << cfg.metrics.nc_batch << "\n";
  out << "seed = " << cfg.metrics.seed << "\n";
  out << "[output]\n";
  out << "dir = " << cfg.output_dir << "\n";
  out << "run_name = " << cfg.run_name << "\n";
  return out.str();
}

std::uint64_t fnv1a_hash(const std::string& text) {
  std::uint64_t hash = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 0x100000001b3ull;
  }
  return hash;
}

}  // namespace ra::config
