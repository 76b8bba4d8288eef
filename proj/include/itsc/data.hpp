#pragma once

// Dataset ingestion and masking. Input files are UCR-style delimited text:
// one sample per row, class label first, then T values; "NaN" (any case)
// marks a naturally missing observation. The mask is authoritative: a stored
// value at a masked-out position is never read by any downstream computation.

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "core.hpp"
#include "random.hpp"

namespace itsc {

struct TimeSeriesSample {
  Matrix<double> values;  // T x n; NaN replaced by 0 at ingestion
  Matrix<double> mask;    // T x n in {0,1}; 1 = observed
  int label = 0;          // remapped to 0..C-1
  int id = 0;             // row index in the source file
};

struct DatasetBundle {
  std::vector<TimeSeriesSample> samples;
  int num_classes = 0;
  int length = 0;  // T
  int dims = 0;    // n
  std::string source_path;
  std::uint64_t checksum = 0;          // FNV-1a of the raw file bytes
  std::vector<double> label_values;    // original labels, sorted; index = remapped class
  double mcar_ratio = 0;               // provenance of synthetic masking (0 = none)
  std::uint64_t mcar_seed = 0;
  long long mcar_retries = 0;
  bool normalized = false;

  bool masks_all_ones() const {
    for (const auto& s : samples)
      for (double v : s.mask.data)
        if (v != 1.0) return false;
    return true;
  }
};

namespace detail {

inline std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline bool is_nan_token(std::string_view tok) {
  if (tok.size() != 3) return false;
  auto lower = [](char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); };
  return lower(tok[0]) == 'n' && lower(tok[1]) == 'a' && lower(tok[2]) == 'n';
}

inline std::vector<std::string_view> split_row(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ',' || line[i] == '\t' || line[i] == ' ' || line[i] == '\r'))
      ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ',' && line[j] != '\t' && line[j] != ' ' && line[j] != '\r')
      ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

inline double parse_value(std::string_view tok, int row, int col) {
  double v = 0;
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size())
    throw io_error("unparseable token '" + std::string(tok) + "' at row " + std::to_string(row) +
                   " column " + std::to_string(col));
  if (!std::isfinite(v))
    throw io_error("non-finite value at row " + std::to_string(row) + " column " +
                   std::to_string(col));
  return v;
}

}  // namespace detail

// Loads a label-first delimited file (tab, comma or space separated).
// Univariate rows: each sample becomes a T x 1 series.
inline DatasetBundle load_ucr(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open dataset file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string content = ss.str();

  DatasetBundle bundle;
  bundle.source_path = path;
  bundle.checksum = detail::fnv1a(content.data(), content.size());

  std::vector<double> raw_labels;
  int row = 0;
  std::size_t pos = 0;
  while (pos < content.size()) {
    std::size_t eol = content.find('\n', pos);
    if (eol == std::string::npos) eol = content.size();
    const std::string_view line(content.data() + pos, eol - pos);
    pos = eol + 1;
    const auto toks = detail::split_row(line);
    if (toks.empty()) {
      ++row;
      continue;  // blank line
    }
    if (detail::is_nan_token(toks[0]))
      throw io_error("missing label at row " + std::to_string(row));
    const double label = detail::parse_value(toks[0], row, 0);
    const int t_len = static_cast<int>(toks.size()) - 1;
    if (t_len < 1) throw io_error("row " + std::to_string(row) + " has no values");
    if (bundle.length == 0) {
      bundle.length = t_len;
    } else if (t_len != bundle.length) {
      throw io_error("ragged row " + std::to_string(row) + ": expected " +
                     std::to_string(bundle.length) + " values, got " + std::to_string(t_len));
    }
    TimeSeriesSample s;
    s.values = Matrix<double>(t_len, 1);
    s.mask = Matrix<double>(t_len, 1, 1.0);
    for (int t = 0; t < t_len; ++t) {
      const auto tok = toks[t + 1];
      if (detail::is_nan_token(tok)) {
        s.values[t][0] = 0.0;
        s.mask[t][0] = 0.0;
      } else {
        s.values[t][0] = detail::parse_value(tok, row, t + 1);
      }
    }
    s.id = static_cast<int>(bundle.samples.size());
    raw_labels.push_back(label);
    bundle.samples.push_back(std::move(s));
    ++row;
  }
  if (bundle.samples.empty()) throw io_error("empty dataset file: " + path);
  bundle.dims = 1;

  // remap labels to 0..C-1 preserving sorted original order
  bundle.label_values = raw_labels;
  std::sort(bundle.label_values.begin(), bundle.label_values.end());
  bundle.label_values.erase(
      std::unique(bundle.label_values.begin(), bundle.label_values.end()),
      bundle.label_values.end());
  bundle.num_classes = static_cast<int>(bundle.label_values.size());
  for (std::size_t i = 0; i < bundle.samples.size(); ++i) {
    const auto it =
        std::lower_bound(bundle.label_values.begin(), bundle.label_values.end(), raw_labels[i]);
    bundle.samples[i].label = static_cast<int>(it - bundle.label_values.begin());
  }
  return bundle;
}

namespace detail {

inline double unit_double(Rng& rng) { return (rng() >> 11) * 0x1.0p-53; }

}  // namespace detail

// Independent Bernoulli(ratio) drop per position. A sample whose mask comes
// out all-zero is redrawn (retries counted) so every series keeps at least
// one observation.
inline DatasetBundle apply_mcar(DatasetBundle bundle, double ratio, std::uint64_t seed) {
  require(ratio > 0.0 && ratio < 1.0,
          "mcar ratio must lie in (0,1), got " + std::to_string(ratio));
  require(bundle.masks_all_ones(), "apply_mcar: bundle already carries a mask");
  Rng rng(mix_seed(seed, 0x6d636172ULL));
  long long retries = 0;
  for (auto& s : bundle.samples) {
    for (;;) {
      bool any = false;
      for (auto& v : s.mask.data) {
        v = detail::unit_double(rng) < ratio ? 0.0 : 1.0;
        any = any || v == 1.0;
      }
      if (any) break;
      ++retries;
    }
  }
  bundle.mcar_ratio = ratio;
  bundle.mcar_seed = seed;
  bundle.mcar_retries = retries;
  return bundle;
}

// Per-series, per-dimension z-normalization using observed positions only.
// Constant series (std < 1e-8) are centered but not scaled. Masked-out
// storage is set to 0 afterwards, so the result carries no trace of the
// unobserved values.
inline DatasetBundle znormalize(DatasetBundle bundle) {
  for (auto& s : bundle.samples) {
    for (int j = 0; j < s.values.cols; ++j) {
      double sum = 0, sq = 0;
      long long cnt = 0;
      for (int t = 0; t < s.values.rows; ++t)
        if (s.mask[t][j] == 1.0) {
          sum += s.values[t][j];
          sq += s.values[t][j] * s.values[t][j];
          ++cnt;
        }
      const double mean = cnt > 0 ? sum / cnt : 0.0;
      double var = cnt > 0 ? sq / cnt - mean * mean : 0.0;
      if (var < 0) var = 0;
      double std_dev = std::sqrt(var);
      if (std_dev < 1e-8) std_dev = 1.0;
      for (int t = 0; t < s.values.rows; ++t)
        s.values[t][j] = s.mask[t][j] == 1.0 ? (s.values[t][j] - mean) / std_dev : 0.0;
    }
  }
  bundle.normalized = true;
  return bundle;
}

// Seeded per-epoch shuffle into batches; the last partial batch is kept.
// Fisher-Yates with an explicit generator keeps the order reproducible.
inline std::vector<std::vector<int>> batch_iter(int num_samples, int batch_size,
                                                std::uint64_t seed, int epoch) {
  require(num_samples >= 1, "batch_iter: empty dataset");
  require(batch_size >= 1, "batch_iter: batch_size must be >= 1");
  std::vector<int> order(num_samples);
  for (int i = 0; i < num_samples; ++i) order[i] = i;
  Rng rng(mix_seed(seed, 0x65706f6368ULL ^ static_cast<std::uint64_t>(epoch)));
  for (int i = num_samples - 1; i > 0; --i) {
    const int j = static_cast<int>(rng() % static_cast<std::uint64_t>(i + 1));
    std::swap(order[i], order[j]);
  }
  std::vector<std::vector<int>> batches;
  for (int start = 0; start < num_samples; start += batch_size) {
    const int end = std::min(num_samples, start + batch_size);
    batches.emplace_back(order.begin() + start, order.begin() + end);
  }
  return batches;
}

// ---- mask cache -----------------------------------------------------------
//
// One file per (dataset, ratio, seed). Byte-exact layout:
//   line 1: dataset,ratio,seed,T,n,N      (ratio via %.17g, the rest decimal)
//   then one line per sample: T*n characters '0'/'1', dimension-major
//   (character index = j*T + t), '\n' terminated.

inline std::string render_mask_cache(const DatasetBundle& bundle, const std::string& dataset_name,
                                     double ratio, std::uint64_t seed) {
  std::string out;
  char head[256];
  std::snprintf(head, sizeof(head), "%s,%.17g,%llu,%d,%d,%zu\n", dataset_name.c_str(), ratio,
                static_cast<unsigned long long>(seed), bundle.length, bundle.dims,
                bundle.samples.size());
  out += head;
  for (const auto& s : bundle.samples) {
    for (int j = 0; j < s.mask.cols; ++j)
      for (int t = 0; t < s.mask.rows; ++t) out += s.mask[t][j] == 1.0 ? '1' : '0';
    out += '\n';
  }
  return out;
}

inline void save_mask_cache(const DatasetBundle& bundle, const std::string& path,
                            const std::string& dataset_name, double ratio, std::uint64_t seed) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write mask cache: " + path);
  out << render_mask_cache(bundle, dataset_name, ratio, seed);
}

struct MaskCacheHeader {
  std::string dataset;
  double ratio = 0;
  std::uint64_t seed = 0;
  int length = 0, dims = 0;
  long long num_samples = 0;
};

inline DatasetBundle apply_mask_cache(DatasetBundle bundle, const std::string& path,
                                      MaskCacheHeader* header_out = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open mask cache: " + path);
  require(bundle.masks_all_ones(), "apply_mask_cache: bundle already carries a mask");
  std::string head;
  if (!std::getline(in, head)) throw io_error("mask cache missing header: " + path);
  MaskCacheHeader h;
  {
    std::istringstream hs(head);
    std::string tok;
    std::vector<std::string> cols;
    while (std::getline(hs, tok, ',')) cols.push_back(tok);
    if (cols.size() != 6) throw io_error("malformed mask cache header: " + path);
    h.dataset = cols[0];
    h.ratio = std::stod(cols[1]);
    h.seed = std::stoull(cols[2]);
    h.length = std::stoi(cols[3]);
    h.dims = std::stoi(cols[4]);
    h.num_samples = std::stoll(cols[5]);
  }
  if (h.length != bundle.length || h.dims != bundle.dims ||
      h.num_samples != static_cast<long long>(bundle.samples.size()))
    throw io_error("mask cache " + path + " does not match dataset: cache " +
                   std::to_string(h.num_samples) + "x" + std::to_string(h.length) + "x" +
                   std::to_string(h.dims) + ", dataset " + std::to_string(bundle.samples.size()) +
                   "x" + std::to_string(bundle.length) + "x" + std::to_string(bundle.dims));
  std::string line;
  for (auto& s : bundle.samples) {
    if (!std::getline(in, line)) throw io_error("mask cache truncated: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (static_cast<int>(line.size()) != bundle.length * bundle.dims)
      throw io_error("mask cache row length mismatch in " + path);
    for (int j = 0; j < s.mask.cols; ++j)
      for (int t = 0; t < s.mask.rows; ++t) {
        const char c = line[static_cast<std::size_t>(j) * bundle.length + t];
        if (c != '0' && c != '1') throw io_error("mask cache contains non-binary byte in " + path);
        s.mask[t][j] = c == '1' ? 1.0 : 0.0;
      }
  }
  bundle.mcar_ratio = h.ratio;
  bundle.mcar_seed = h.seed;
  if (header_out) *header_out = h;
  return bundle;
}

inline std::string default_mask_path(const std::string& data_path, double ratio,
                                     std::uint64_t seed) {
  char suffix[128];
  std::snprintf(suffix, sizeof(suffix), ".r%.17g.s%llu.mask", ratio,
                static_cast<unsigned long long>(seed));
  return data_path + suffix;
}

}  // namespace itsc
