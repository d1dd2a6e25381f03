#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "npi/model.hpp"
#include "npi/seq2seq.hpp"

namespace npi {

// Binary checkpoint layout:
//   8 bytes   magic "NPICKPT\n"
//   4 bytes   format version (uint32, little-endian)
//   8 bytes   header length H (uint64)
//   H bytes   JSON header: kind ("npi" or "s2s"), model config, block table,
//             plus the program registry (npi) or sequence format (s2s)
//   payload   every block's values as raw little-endian doubles, row-major,
//             in block-table order
//   8 bytes   FNV-1a checksum of everything above
inline constexpr char kCheckpointMagic[8] = {'N', 'P', 'I', 'C', 'K', 'P', 'T', '\n'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline nlohmann::json config_to_json(const ModelConfig& c) {
  return {{"layers", c.layers},         {"hidden", c.hidden},       {"program_dim", c.program_dim},
          {"key_dim", c.key_dim},       {"state_dim", c.state_dim}, {"mlp_hidden", c.mlp_hidden},
          {"core_input", c.core_input}, {"init_gain", c.init_gain}, {"seed", c.seed}};
}

inline ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.layers = j.value("layers", c.layers);
  c.hidden = j.value("hidden", c.hidden);
  c.program_dim = j.value("program_dim", c.program_dim);
  c.key_dim = j.value("key_dim", c.key_dim);
  c.state_dim = j.value("state_dim", c.state_dim);
  c.mlp_hidden = j.value("mlp_hidden", c.mlp_hidden);
  c.core_input = j.value("core_input", c.core_input);
  c.init_gain = j.value("init_gain", c.init_gain);
  c.seed = j.value("seed", c.seed);
  return c;
}

namespace detail {

inline std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 1099511628211ull;
  }
  return h;
}

template <class T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <class T>
T get(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw CheckpointError("checkpoint is truncated");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace detail

namespace detail {

inline std::string pack(const nlohmann::json& header, const ParamList& params) {
  const std::string h = header.dump();
  std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, h.size());
  out += h;
  for (const auto* p : params)
    out.append(reinterpret_cast<const char*>(p->value.data()), static_cast<std::size_t>(p->size()) * sizeof(double));
  put<std::uint64_t>(out, fnv1a(out));
  return out;
}

inline nlohmann::json block_table(const ParamList& params) {
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto* p : params) blocks.push_back({{"name", p->name}, {"rows", p->rows()}, {"cols", p->cols()}});
  return blocks;
}

// A checked container: header parsed, payload not yet consumed.
struct Unpacked {
  nlohmann::json header;
  std::string body;
  std::size_t pos = 0;
};

inline Unpacked unpack(const std::string& bytes, const std::string& kind) {
  if (bytes.size() < sizeof(kCheckpointMagic) + 12 + 8 ||
      std::memcmp(bytes.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0)
    throw CheckpointError("not a checkpoint file (bad magic or too short)");
  Unpacked u;
  u.pos = sizeof(kCheckpointMagic);
  const auto version = get<std::uint32_t>(bytes, u.pos);
  if (version != kCheckpointVersion)
    throw CheckpointError("checkpoint format version " + std::to_string(version) + " is not supported (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  u.body = bytes.substr(0, bytes.size() - 8);
  std::size_t tail = bytes.size() - 8;
  if (get<std::uint64_t>(bytes, tail) != fnv1a(u.body))
    throw CheckpointError("checkpoint checksum mismatch (file corrupt or truncated)");

  const auto hlen = get<std::uint64_t>(u.body, u.pos);
  if (u.pos + hlen > u.body.size()) throw CheckpointError("checkpoint header is truncated");
  try {
    u.header = nlohmann::json::parse(u.body.substr(u.pos, hlen));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }
  u.pos += hlen;
  const std::string found = u.header.value("kind", "npi");
  if (found != kind) throw CheckpointError("checkpoint holds a " + found + " model, expected " + kind);
  return u;
}

inline void fill_blocks(Unpacked& u, const ParamList& params) {
  const auto& blocks = u.header.at("blocks");
  if (blocks.size() != params.size()) throw CheckpointError("checkpoint block count does not match the model");
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    const auto& b = blocks[k];
    if (b.at("name") != p.name || b.at("rows") != p.rows() || b.at("cols") != p.cols())
      throw CheckpointError("checkpoint block '" + b.at("name").get<std::string>() + "' does not match model block '" +
                            p.name + "'");
    const std::size_t len = static_cast<std::size_t>(p.size()) * sizeof(double);
    if (u.pos + len > u.body.size()) throw CheckpointError("checkpoint payload is truncated");
    std::memcpy(p.value.data(), u.body.data() + u.pos, len);
    u.pos += len;
  }
  if (u.pos != u.body.size()) throw CheckpointError("checkpoint has trailing bytes");
}

inline void write_file(const std::string& bytes, const std::string& path) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw CheckpointError("cannot write checkpoint " + path);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw CheckpointError("failed writing checkpoint " + path);
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot open checkpoint " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace detail

inline std::string serialize_checkpoint(Npi& model) {
  nlohmann::json header;
  header["kind"] = "npi";
  header["config"] = config_to_json(model.config());
  nlohmann::json reg = nlohmann::json::array();
  for (const auto& p : model.memory().registry())
    reg.push_back({{"name", p.name}, {"env", to_string(p.env)}, {"generation", p.generation}});
  header["registry"] = reg;
  const ParamList params = model.parameters();
  header["blocks"] = detail::block_table(params);
  return detail::pack(header, params);
}

inline Npi deserialize_checkpoint(const std::string& bytes) {
  detail::Unpacked u = detail::unpack(bytes, "npi");
  Npi model(config_from_json(u.header.at("config")));
  std::vector<ProgramInfo> registry;
  for (const auto& r : u.header.at("registry"))
    registry.push_back(ProgramInfo{r.at("name"), env_kind_from_string(r.at("env").get<std::string>()), r.at("generation")});
  const auto n = static_cast<Eigen::Index>(registry.size());
  model.memory().restore(registry, Tensor2::Zero(n, model.config().key_dim), Tensor2::Zero(n, model.config().program_dim));
  detail::fill_blocks(u, model.parameters());
  return model;
}

inline std::string serialize_s2s(Seq2SeqModel& model) {
  const Seq2SeqConfig& c = model.config();
  nlohmann::json header;
  header["kind"] = "s2s";
  header["format"] = model.format();
  header["config"] = {{"layers", c.layers}, {"hidden", c.hidden}, {"embed_dim", c.embed_dim}, {"seed", c.seed}};
  const ParamList params = model.parameters();
  header["blocks"] = detail::block_table(params);
  return detail::pack(header, params);
}

inline Seq2SeqModel deserialize_s2s(const std::string& bytes) {
  detail::Unpacked u = detail::unpack(bytes, "s2s");
  Seq2SeqConfig c;
  const auto& j = u.header.at("config");
  c.layers = j.at("layers");
  c.hidden = j.at("hidden");
  c.embed_dim = j.at("embed_dim");
  c.seed = j.at("seed");
  Seq2SeqModel model(c, u.header.at("format").get<std::string>());
  detail::fill_blocks(u, model.parameters());
  return model;
}

inline void save_checkpoint(Npi& model, const std::string& path) {
  detail::write_file(serialize_checkpoint(model), path);
}

inline Npi load_checkpoint(const std::string& path) {
  const std::string bytes = detail::read_file(path);
  try {
    return deserialize_checkpoint(bytes);
  } catch (const CheckpointError& e) {
    throw CheckpointError(path + ": " + e.what());
  }
}

inline void save_s2s(Seq2SeqModel& model, const std::string& path) { detail::write_file(serialize_s2s(model), path); }

inline Seq2SeqModel load_s2s(const std::string& path) {
  const std::string bytes = detail::read_file(path);
  try {
    return deserialize_s2s(bytes);
  } catch (const CheckpointError& e) {
    throw CheckpointError(path + ": " + e.what());
  }
}

}  // namespace npi
