#include "fadv/checkpoint.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <stdexcept>

#include "fadv/io.hpp"

namespace fadv::nn {

namespace {

constexpr char kMagic[4] = {'F', 'A', 'D', 'V'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const std::string& in, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[offset + i])) << (8 * i);
  return v;
}

void put_f64(std::string& out, double d) {
  std::uint64_t bits = 0;
  std::memcpy(&bits, &d, sizeof(bits));
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

double get_f64(const std::string& in, std::size_t offset) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[offset + i])) << (8 * i);
  double d = 0.0;
  std::memcpy(&d, &bits, sizeof(d));
  return d;
}

std::runtime_error corrupt(const std::filesystem::path& path, const std::string& why) {
  return std::runtime_error("corrupt checkpoint " + path.string() + ": " + why);
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  ckpt.config.validate();
  const Model probe = Model::build(ckpt.config);
  if (probe.param_count() != ckpt.params.size()) {
    throw std::invalid_argument("checkpoint: parameter count does not match config");
  }
  const std::string descriptor =
      ckpt.config.to_string() + "\nepochs=" + std::to_string(ckpt.epochs) + " seed=" + std::to_string(ckpt.seed);
  std::string bytes(kMagic, sizeof(kMagic));
  put_u32(bytes, kCheckpointVersion);
  put_u32(bytes, static_cast<std::uint32_t>(descriptor.size()));
  bytes += descriptor;
  for (double p : ckpt.params) put_f64(bytes, p);
  io::write_file_atomic(path, bytes);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw std::runtime_error("missing checkpoint " + path.string());
  const std::string bytes = io::read_file(path);
  if (bytes.size() < 12) throw corrupt(path, "truncated header");
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) throw corrupt(path, "bad magic");
  const std::uint32_t version = get_u32(bytes, 4);
  if (version != kCheckpointVersion) {
    throw corrupt(path, "unsupported format version " + std::to_string(version));
  }
  const std::uint32_t desc_len = get_u32(bytes, 8);
  if (bytes.size() < 12 + static_cast<std::size_t>(desc_len)) throw corrupt(path, "truncated descriptor");
  const std::string descriptor = bytes.substr(12, desc_len);
  const auto newline = descriptor.find('\n');
  if (newline == std::string::npos) throw corrupt(path, "descriptor missing metadata line");
  Checkpoint ckpt;
  try {
    ckpt.config = ModelConfig::from_string(descriptor.substr(0, newline));
  } catch (const std::exception& e) {
    throw corrupt(path, e.what());
  }
  const std::string meta = descriptor.substr(newline + 1);
  unsigned long long epochs = 0, seed = 0;
  if (std::sscanf(meta.c_str(), "epochs=%llu seed=%llu", &epochs, &seed) != 2) {
    throw corrupt(path, "bad metadata line '" + meta + "'");
  }
  ckpt.epochs = static_cast<std::uint32_t>(epochs);
  ckpt.seed = seed;
  const std::size_t payload = bytes.size() - 12 - desc_len;
  const std::size_t expected = Model::build(ckpt.config).param_count();
  if (payload % 8 != 0 || payload / 8 != expected) {
    throw corrupt(path, "parameter stream holds " + std::to_string(payload) + " bytes, expected " +
                            std::to_string(expected * 8));
  }
  ckpt.params.resize(expected);
  for (std::size_t i = 0; i < expected; ++i) ckpt.params[i] = get_f64(bytes, 12 + desc_len + i * 8);
  for (double p : ckpt.params) {
    if (!std::isfinite(p)) throw corrupt(path, "non-finite parameter");
  }
  return ckpt;
}

Checkpoint make_checkpoint(const Model& model, std::uint32_t epochs, std::uint64_t seed) {
  Checkpoint ckpt;
  ckpt.config = model.config();
  ckpt.params.assign(model.params().begin(), model.params().end());
  ckpt.epochs = epochs;
  ckpt.seed = seed;
  return ckpt;
}

Model model_from_checkpoint(const Checkpoint& ckpt) {
  Model model = Model::build(ckpt.config);
  if (model.param_count() != ckpt.params.size()) {
    throw std::invalid_argument("checkpoint: parameter count does not match config");
  }
  std::copy(ckpt.params.begin(), ckpt.params.end(), model.params().begin());
  return model;
}

}  // namespace fadv::nn
