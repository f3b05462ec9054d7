// Copyright 2026 The nist-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "nist/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>

namespace nist {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

class Writer {
public:
  explicit Writer(std::ofstream& out) : out_(out) {}
  template <typename V> void put(V v) { out_.write(reinterpret_cast<const char*>(&v), sizeof v); }
  void bytes(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }

private:
  std::ofstream& out_;
};

class Reader {
public:
  Reader(std::ifstream& in, std::filesystem::path path) : in_(in), path_(std::move(path)) {}
  template <typename V> V get() {
    V v{};
    bytes(&v, sizeof v);
    return v;
  }
  void bytes(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (!in_) throw std::runtime_error(path_.string() + ": truncated checkpoint");
  }
  const std::filesystem::path& path() const { return path_; }

private:
  std::ifstream& in_;
  std::filesystem::path path_;
};

void write_config(Writer& w, const ModelConfig& c) {
  w.put<std::int32_t>(c.scales);
  w.put<std::int32_t>(c.working_levels);
  w.put<std::int32_t>(c.guidance_channels);
  w.put<std::int32_t>(c.deform_channels);
  w.put<std::int32_t>(c.color_channels);
  w.put<double>(c.flow_scale);
  w.put<double>(c.leaky_slope);
  w.put<std::uint8_t>(c.compose_flow ? 1 : 0);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(c.variant));
}

ModelConfig read_config(Reader& r) {
  ModelConfig c;
  c.scales = r.get<std::int32_t>();
  c.working_levels = r.get<std::int32_t>();
  c.guidance_channels = r.get<std::int32_t>();
  c.deform_channels = r.get<std::int32_t>();
  c.color_channels = r.get<std::int32_t>();
  c.flow_scale = r.get<double>();
  c.leaky_slope = r.get<double>();
  c.compose_flow = r.get<std::uint8_t>() != 0;
  const auto variant = r.get<std::uint8_t>();
  if (variant > static_cast<std::uint8_t>(Variant::no_warp)) {
    throw std::runtime_error(r.path().string() + ": unknown model variant code " + std::to_string(variant));
  }
  c.variant = static_cast<Variant>(variant);
  return c;
}

ModelConfig read_header(Reader& r) {
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, "NIST", 4) != 0) throw std::runtime_error(r.path().string() + ": not a NIST checkpoint");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw std::runtime_error(r.path().string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  return read_config(r);
}

std::string describe(const ModelConfig& c) {
  return "scales=" + std::to_string(c.scales) + " working_levels=" + std::to_string(c.working_levels) +
         " channels=" + std::to_string(c.guidance_channels) + "/" + std::to_string(c.deform_channels) + "/" +
         std::to_string(c.color_channels) + " flow_scale=" + std::to_string(c.flow_scale) +
         " compose_flow=" + std::to_string(c.compose_flow) + " variant=" + variant_name(c.variant);
}

} // namespace

void save_checkpoint(const std::filesystem::path& path, const Network<float>& net) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    Writer w(out);
    w.bytes("NIST", 4);
    w.put<std::uint32_t>(kCheckpointVersion);
    write_config(w, net.config());
    w.put<std::uint64_t>(net.parameters().size());
    for (const auto& [name, t] : net.parameters()) {
      w.put<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
      w.bytes(name.data(), name.size());
      w.put<std::uint32_t>(static_cast<std::uint32_t>(t.shape().size()));
      for (int d : t.shape()) w.put<std::int32_t>(d);
      w.bytes(t.data().data(), t.numel() * sizeof(float));
    }
    out.flush();
    if (!out) throw std::runtime_error("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

ModelConfig read_checkpoint_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  Reader r(in, path);
  return read_header(r);
}

void load_checkpoint(const std::filesystem::path& path, Network<float>& net) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  Reader r(in, path);
  const ModelConfig stored = read_header(r);
  if (!(stored == net.config())) {
    throw std::runtime_error(path.string() + ": checkpoint config (" + describe(stored) +
                             ") does not match the model (" + describe(net.config()) + ")");
  }
  const auto count = r.get<std::uint64_t>();
  if (count != net.parameters().size()) {
    throw std::runtime_error(path.string() + ": checkpoint holds " + std::to_string(count) + " tensors, model has " +
                             std::to_string(net.parameters().size()));
  }
  std::map<std::string, std::vector<float>> loaded;
  for (std::uint64_t k = 0; k < count; ++k) {
    const auto len = r.get<std::uint32_t>();
    if (len > 4096) throw std::runtime_error(path.string() + ": corrupt tensor name length");
    std::string name(len, '\0');
    r.bytes(name.data(), len);
    const auto rank = r.get<std::uint32_t>();
    if (rank > 8) throw std::runtime_error(path.string() + ": corrupt rank for '" + name + "'");
    ad::Shape shape(rank);
    for (auto& d : shape) d = r.get<std::int32_t>();
    const ad::Tensor<float>& target = net.parameter(name);
    if (target.shape() != shape) {
      throw std::runtime_error(path.string() + ": tensor '" + name + "' has shape " + ad::to_string(shape) +
                               ", model expects " + ad::to_string(target.shape()));
    }
    std::vector<float> values(target.numel());
    r.bytes(values.data(), values.size() * sizeof(float));
    loaded.emplace(name, std::move(values));
  }
  for (auto& [name, values] : loaded) net.assign(name, std::move(values));
}

Network<float> load_network(const std::filesystem::path& path) {
  Network<float> net(read_checkpoint_config(path), 0);
  load_checkpoint(path, net);
  return net;
}

} // namespace nist
