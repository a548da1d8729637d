#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <nlohmann/json.hpp>
#include <ostream>
#include <stdexcept>

#include "andikit/network.hpp"

namespace andikit::net {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

using nlohmann::json;

json config_to_json(const ModelConfig& c) {
  return json{{"input_len", c.input_len},         {"channels", c.channels},
              {"stem_kernel", c.stem_kernel},     {"stem_stride", c.stem_stride},
              {"stem_padding", c.stem_padding},   {"pool_kernel", c.pool_kernel},
              {"pool_stride", c.pool_stride},     {"pool_padding", c.pool_padding},
              {"block_kernel", c.block_kernel},   {"blocks_per_stage", c.blocks_per_stage},
              {"num_classes", c.num_classes},     {"scale", c.scale}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.input_len = j.at("input_len").get<std::size_t>();
  c.channels = j.at("channels").get<std::array<std::size_t, 4>>();
  c.stem_kernel = j.at("stem_kernel").get<std::size_t>();
  c.stem_stride = j.at("stem_stride").get<std::size_t>();
  c.stem_padding = j.at("stem_padding").get<std::size_t>();
  c.pool_kernel = j.at("pool_kernel").get<std::size_t>();
  c.pool_stride = j.at("pool_stride").get<std::size_t>();
  c.pool_padding = j.at("pool_padding").get<std::size_t>();
  c.block_kernel = j.at("block_kernel").get<std::size_t>();
  c.blocks_per_stage = j.at("blocks_per_stage").get<std::size_t>();
  c.num_classes = j.at("num_classes").get<std::size_t>();
  c.scale = j.at("scale").get<double>();
  return c;
}

void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  out.write(b, 4);
}

std::uint32_t get_u32(std::istream& in) {
  char b[4];
  if (!in.read(b, 4)) throw std::runtime_error("checkpoint truncated");
  std::uint32_t v;
  std::memcpy(&v, b, 4);
  return v;
}

}  // namespace

void write_checkpoint(std::ostream& out, ResAnDi<float>& model, const CheckpointMeta& meta) {
  auto arrays = model.state();
  json manifest = json::array();
  std::size_t offset = 0;
  for (const auto& a : arrays) {
    manifest.push_back(json{{"name", a.name}, {"shape", a.shape}, {"offset", offset}});
    offset += a.data->size() * sizeof(float);
  }
  const json header{{"config", config_to_json(model.config())},
                    {"meta",
                     {{"seed", meta.seed},
                      {"epochs_run", meta.epochs_run},
                      {"best_epoch", meta.best_epoch},
                      {"best_val_loss", meta.best_val_loss},
                      {"final_val_loss", meta.final_val_loss}}},
                    {"dtype", "float32"},
                    {"data_bytes", offset},
                    {"tensors", manifest}};
  const std::string text = header.dump();
  out.write(kCheckpointMagic.data(), static_cast<std::streamsize>(kCheckpointMagic.size()));
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& a : arrays) {
    out.write(reinterpret_cast<const char*>(a.data->data()),
              static_cast<std::streamsize>(a.data->size() * sizeof(float)));
  }
}

Checkpoint read_checkpoint(std::istream& in) {
  char magic[8];
  if (!in.read(magic, 8) || std::string_view(magic, 8) != kCheckpointMagic) {
    throw std::runtime_error("not an andikit checkpoint (bad magic)");
  }
  const auto version = get_u32(in);
  if (version != kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  }
  const auto header_len = get_u32(in);
  std::string text(header_len, '\0');
  if (!in.read(text.data(), header_len)) throw std::runtime_error("checkpoint truncated");
  json header;
  try {
    header = json::parse(text);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("checkpoint header is not valid JSON: ") + e.what());
  }
  if (header.value("dtype", "") != "float32") throw std::runtime_error("checkpoint dtype must be float32");

  Checkpoint ck{ResAnDi<float>(config_from_json(header.at("config")), 0), {}};
  const auto& m = header.at("meta");
  ck.meta.seed = m.at("seed").get<std::uint64_t>();
  ck.meta.epochs_run = m.at("epochs_run").get<std::size_t>();
  ck.meta.best_epoch = m.at("best_epoch").get<std::size_t>();
  ck.meta.best_val_loss = m.at("best_val_loss").get<double>();
  ck.meta.final_val_loss = m.at("final_val_loss").get<double>();

  auto arrays = ck.model.state();
  const auto& tensors = header.at("tensors");
  if (tensors.size() != arrays.size()) throw std::runtime_error("checkpoint tensor count does not match its config");
  std::size_t offset = 0;
  for (std::size_t i = 0; i < arrays.size(); ++i) {
    const auto& t = tensors[i];
    if (t.at("name").get<std::string>() != arrays[i].name || t.at("shape").get<ad::Shape>() != arrays[i].shape ||
        t.at("offset").get<std::size_t>() != offset) {
      throw std::runtime_error("checkpoint manifest mismatch at '" + arrays[i].name + "'");
    }
    const auto bytes = static_cast<std::streamsize>(arrays[i].data->size() * sizeof(float));
    if (!in.read(reinterpret_cast<char*>(arrays[i].data->data()), bytes)) {
      throw std::runtime_error("checkpoint truncated in '" + arrays[i].name + "'");
    }
    offset += static_cast<std::size_t>(bytes);
  }
  return ck;
}

void save_checkpoint(const std::string& path, ResAnDi<float>& model, const CheckpointMeta& meta) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_checkpoint(out, model, meta);
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint '" + path + "'");
  return read_checkpoint(in);
}

}  // namespace andikit::net
