#pragma once

// Checkpoint file: 8-byte magic "ITSCKPT1", a little-endian uint64 JSON
// header length, the JSON header, then one little-endian float32 blob holding
// every trainable tensor followed by every buffer (BN running stats), in the
// model's declared registry order. The header records the architecture,
// tensor shapes, seed and config hash.

#include <bit>
#include <fstream>

#include <json.hpp>

#include "model.hpp"

namespace itsc {

static_assert(std::endian::native == std::endian::little,
              "checkpoint blobs are little-endian; big-endian hosts unsupported");

inline constexpr char kCkptMagic[8] = {'I', 'T', 'S', 'C', 'K', 'P', 'T', '1'};

struct CheckpointMeta {
  std::uint64_t seed = 0;
  std::string config_hash;
  int series_length = 0;       // T the model was trained on (informational)
  nlohmann::json config;       // full run config echo (may be null)
};

template <class Real>
void save_checkpoint(Model<Real>& model, const CheckpointMeta& meta, const std::string& path) {
  nlohmann::json j;
  j["format"] = 1;
  j["variant"] = variant_name(model.variant);
  j["input_dims"] = model.input_dims;
  j["num_classes"] = model.num_classes;
  j["hidden_size"] = model.hidden_size;
  if (model.has_msfl())
    j["msfl"] = {{"num_layers", model.msfl_spec.num_layers},
                 {"scales_per_layer", model.msfl_spec.scales_per_layer},
                 {"dilation", model.msfl_spec.dilation},
                 {"branch_channels", model.msfl_spec.branch_channels}};
  j["seed"] = meta.seed;
  j["config_hash"] = meta.config_hash;
  j["series_length"] = meta.series_length;
  if (!meta.config.is_null()) j["config"] = meta.config;

  std::vector<float> blob;
  auto append = [&blob](nlohmann::json& list, const std::string& name, const Matrix<Real>& m) {
    list.push_back({{"name", name}, {"rows", m.rows}, {"cols", m.cols}});
    for (const Real v : m.data) blob.push_back(static_cast<float>(v));
  };
  nlohmann::json params = nlohmann::json::array();
  for (auto& p : model.params()) append(params, p.name, *p.value);
  nlohmann::json buffers = nlohmann::json::array();
  for (auto& b : model.buffers()) append(buffers, b.name, *b.value);
  j["params"] = params;
  j["buffers"] = buffers;

  const std::string header = j.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write checkpoint: " + path);
  out.write(kCkptMagic, 8);
  const std::uint64_t len = header.size();
  out.write(reinterpret_cast<const char*>(&len), 8);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(reinterpret_cast<const char*>(blob.data()),
            static_cast<std::streamsize>(blob.size() * sizeof(float)));
  if (!out) throw io_error("short write on checkpoint: " + path);
}

template <class Real>
struct LoadedCheckpoint {
  Model<Real> model;
  CheckpointMeta meta;
  nlohmann::json header;
};

template <class Real>
LoadedCheckpoint<Real> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open checkpoint: " + path);
  char magic[8];
  std::uint64_t len = 0;
  in.read(magic, 8);
  in.read(reinterpret_cast<char*>(&len), 8);
  if (!in || !std::equal(magic, magic + 8, kCkptMagic))
    throw io_error("corrupted checkpoint header: " + path);
  if (len == 0 || len > (1ull << 30)) throw io_error("corrupted checkpoint header: " + path);
  std::string header(len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(len));
  if (!in) throw io_error("corrupted checkpoint header: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    throw io_error("corrupted checkpoint header: " + path + " (" + e.what() + ")");
  }
  if (j.value("format", 0) != 1) throw io_error("unsupported checkpoint format in " + path);

  MsflSpec spec;
  if (j.contains("msfl")) {
    spec.num_layers = j["msfl"]["num_layers"];
    spec.scales_per_layer = j["msfl"]["scales_per_layer"];
    spec.dilation = j["msfl"]["dilation"];
    spec.branch_channels = j["msfl"]["branch_channels"];
  }
  LoadedCheckpoint<Real> lc;
  lc.model = Model<Real>::make(variant_from_name(j["variant"]), j["input_dims"],
                               j["num_classes"], j["hidden_size"], spec, /*seed=*/0);
  lc.meta.seed = j.value("seed", std::uint64_t{0});
  lc.meta.config_hash = j.value("config_hash", std::string{});
  lc.meta.series_length = j.value("series_length", 0);
  if (j.contains("config")) lc.meta.config = j["config"];
  lc.header = j;

  auto read_tensors = [&](const nlohmann::json& list, auto refs_begin, auto refs_end,
                          const char* kind) {
    auto it = refs_begin;
    for (const auto& entry : list) {
      if (it == refs_end) throw io_error("checkpoint has extra " + std::string(kind) + " tensors");
      Matrix<Real>& m = *it->value;
      if (entry["name"] != it->name || entry["rows"] != m.rows || entry["cols"] != m.cols)
        throw io_error("checkpoint tensor mismatch at '" + std::string(entry["name"]) +
                       "': model expects " + it->name + " " + shape_str(m.rows, m.cols));
      std::vector<float> buf(m.size());
      in.read(reinterpret_cast<char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
      if (!in) throw io_error("checkpoint blob truncated: " + path);
      for (std::size_t i = 0; i < buf.size(); ++i) m.data[i] = static_cast<Real>(buf[i]);
      ++it;
    }
    if (it != refs_end) throw io_error("checkpoint missing " + std::string(kind) + " tensors");
  };
  auto params = lc.model.params();
  auto buffers = lc.model.buffers();
  read_tensors(j["params"], params.begin(), params.end(), "parameter");
  read_tensors(j["buffers"], buffers.begin(), buffers.end(), "buffer");
  return lc;
}

}  // namespace itsc
