#pragma once

// Run configuration: every hyperparameter of a training run, serialized as
// flat key=value text (diff-able provenance). A config file may set any key;
// command-line flags override it. The canonical serialization feeds the FNV
// hash embedded in every artifact.

#include <cstdio>
#include <fstream>
#include <map>

#include <json.hpp>

#include "core.hpp"
#include "data.hpp"

namespace itsc {

struct RunConfig {
  std::string train_path;
  std::string test_path;
  double missing_ratio = 0.0;  // 0 = keep the file's natural masks
  std::uint64_t seed = 0;
  std::uint64_t mask_seed = 0;  // 0 = derive from seed; test split uses mask_seed+1
  int hidden_size = 128;
  int num_layers = 2;
  int scales = 6;
  int branch_channels = 32;
  int dilation = 2;
  double alpha = 1.0;
  double beta = 1.0;
  double learning_rate = 3e-4;
  int batch_size = 0;  // 0 = auto: 64, or 16 when the train split has < 100 samples
  int epochs = 100;
  std::string out_dir;
  bool zero_fill = false;
  bool linear_head = false;
  int threads = 0;  // 0 = hardware concurrency

  void validate() const {
    require(!train_path.empty(), "config: train_path is required");
    require(missing_ratio == 0.0 || (missing_ratio > 0.0 && missing_ratio < 1.0),
            "config: missing_ratio must lie in (0,1)");
    require(hidden_size >= 1, "config: hidden_size must be positive");
    require(num_layers >= 1, "config: num_layers must be positive");
    require(scales >= 1, "config: scales must be positive");
    require(branch_channels >= 1, "config: branch_channels must be positive");
    require(dilation >= 1, "config: dilation must be positive");
    require(alpha >= 0 && beta >= 0 && (alpha > 0 || beta > 0),
            "config: alpha/beta must be non-negative and not both zero");
    require(learning_rate > 0, "config: learning_rate must be positive");
    require(batch_size >= 0, "config: batch_size must be >= 0");
    require(epochs >= 1, "config: epochs must be positive");
    require(!(zero_fill && linear_head), "config: zero_fill and linear_head are exclusive");
  }

  std::uint64_t resolved_mask_seed() const { return mask_seed != 0 ? mask_seed : seed; }

  int resolved_batch_size(int train_samples) const {
    if (batch_size > 0) return batch_size;
    return train_samples < 100 ? 16 : 64;
  }

  // Canonical key=value text: fixed key order, %.17g doubles. Dataset paths
  // are included so a hash pins the exact run inputs.
  std::string canonical() const {
    auto g = [](double v) {
      char buf[40];
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      return std::string(buf);
    };
    std::string s;
    s += "alpha=" + g(alpha) + "\n";
    s += "batch_size=" + std::to_string(batch_size) + "\n";
    s += "beta=" + g(beta) + "\n";
    s += "branch_channels=" + std::to_string(branch_channels) + "\n";
    s += "dilation=" + std::to_string(dilation) + "\n";
    s += "epochs=" + std::to_string(epochs) + "\n";
    s += "hidden_size=" + std::to_string(hidden_size) + "\n";
    s += "learning_rate=" + g(learning_rate) + "\n";
    s += "linear_head=" + std::to_string(linear_head ? 1 : 0) + "\n";
    s += "mask_seed=" + std::to_string(resolved_mask_seed()) + "\n";
    s += "missing_ratio=" + g(missing_ratio) + "\n";
    s += "num_layers=" + std::to_string(num_layers) + "\n";
    s += "scales=" + std::to_string(scales) + "\n";
    s += "seed=" + std::to_string(seed) + "\n";
    s += "test_path=" + test_path + "\n";
    s += "train_path=" + train_path + "\n";
    s += "zero_fill=" + std::to_string(zero_fill ? 1 : 0) + "\n";
    return s;
  }

  std::string hash() const {
    const std::string c = canonical();
    const std::uint64_t h = detail::fnv1a(c.data(), c.size());
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
  }

  nlohmann::json to_json() const {
    return {{"train_path", train_path},
            {"test_path", test_path},
            {"missing_ratio", missing_ratio},
            {"seed", seed},
            {"mask_seed", resolved_mask_seed()},
            {"hidden_size", hidden_size},
            {"num_layers", num_layers},
            {"scales", scales},
            {"branch_channels", branch_channels},
            {"dilation", dilation},
            {"alpha", alpha},
            {"beta", beta},
            {"learning_rate", learning_rate},
            {"batch_size", batch_size},
            {"epochs", epochs},
            {"zero_fill", zero_fill},
            {"linear_head", linear_head},
            {"threads", threads}};
  }
};

// key=value parser; '#' starts a comment, blank lines ignored, unknown keys
// rejected.
inline void apply_config_line(RunConfig& cfg, const std::string& key, const std::string& value,
                              const std::string& where) {
  auto as_int = [&] {
    try {
      return std::stoi(value);
    } catch (...) {
      throw io_error(where + ": bad integer for " + key + ": '" + value + "'");
    }
  };
  auto as_u64 = [&]() -> std::uint64_t {
    try {
      return std::stoull(value);
    } catch (...) {
      throw io_error(where + ": bad integer for " + key + ": '" + value + "'");
    }
  };
  auto as_double = [&] {
    try {
      return std::stod(value);
    } catch (...) {
      throw io_error(where + ": bad number for " + key + ": '" + value + "'");
    }
  };
  auto as_bool = [&] {
    if (value == "1" || value == "true") return true;
    if (value == "0" || value == "false") return false;
    throw io_error(where + ": bad boolean for " + key + ": '" + value + "'");
  };
  if (key == "train_path") cfg.train_path = value;
  else if (key == "test_path") cfg.test_path = value;
  else if (key == "missing_ratio") cfg.missing_ratio = as_double();
  else if (key == "seed") cfg.seed = as_u64();
  else if (key == "mask_seed") cfg.mask_seed = as_u64();
  else if (key == "hidden_size") cfg.hidden_size = as_int();
  else if (key == "num_layers") cfg.num_layers = as_int();
  else if (key == "scales") cfg.scales = as_int();
  else if (key == "branch_channels") cfg.branch_channels = as_int();
  else if (key == "dilation") cfg.dilation = as_int();
  else if (key == "alpha") cfg.alpha = as_double();
  else if (key == "beta") cfg.beta = as_double();
  else if (key == "learning_rate") cfg.learning_rate = as_double();
  else if (key == "batch_size") cfg.batch_size = as_int();
  else if (key == "epochs") cfg.epochs = as_int();
  else if (key == "out_dir") cfg.out_dir = value;
  else if (key == "zero_fill") cfg.zero_fill = as_bool();
  else if (key == "linear_head") cfg.linear_head = as_bool();
  else if (key == "threads") cfg.threads = as_int();
  else throw io_error(where + ": unknown config key '" + key + "'");
}

inline RunConfig load_config_file(const std::string& path, RunConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open config file: " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash_pos = line.find('#');
    if (hash_pos != std::string::npos) line.resize(hash_pos);
    // trim
    auto issp = [](char c) { return c == ' ' || c == '\t' || c == '\r'; };
    std::size_t b = 0, e = line.size();
    while (b < e && issp(line[b])) ++b;
    while (e > b && issp(line[e - 1])) --e;
    if (b == e) continue;
    const std::string trimmed = line.substr(b, e - b);
    const auto eq = trimmed.find('=');
    if (eq == std::string::npos)
      throw io_error(path + ":" + std::to_string(lineno) + ": expected key=value");
    std::string key = trimmed.substr(0, eq), value = trimmed.substr(eq + 1);
    while (!key.empty() && issp(key.back())) key.pop_back();
    std::size_t vb = 0;
    while (vb < value.size() && issp(value[vb])) ++vb;
    value = value.substr(vb);
    apply_config_line(base, key, value, path + ":" + std::to_string(lineno));
  }
  return base;
}

inline void save_config_file(const RunConfig& cfg, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write config file: " + path);
  out << cfg.canonical();
  out << "out_dir=" << cfg.out_dir << "\n";
  out << "threads=" << cfg.threads << "\n";
}

}  // namespace itsc
