#include "hindsight/checkpoint.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>

namespace hindsight {
namespace {

constexpr std::array<char, 8> kMagic = {'H', 'S', 'C', 'K', 'P', 'T', '\0', '\1'};

template <class T>
void put(std::ostream& out, T v) {
  std::array<char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.write(bytes.data(), bytes.size());
}

template <class T>
T get(std::istream& in) {
  std::array<char, sizeof(T)> bytes;
  if (!in.read(bytes.data(), bytes.size())) throw CheckpointError("truncated checkpoint");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T v;
  std::memcpy(&v, bytes.data(), sizeof(T));
  return v;
}

void put_string(std::ostream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
  const auto n = get<std::uint32_t>(in);
  if (n > (1u << 20)) throw CheckpointError("implausible string length in checkpoint");
  std::string s(n, '\0');
  if (n && !in.read(s.data(), n)) throw CheckpointError("truncated checkpoint");
  return s;
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open " + path.string() + " for writing");
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.metadata.size()));
  for (const auto& [k, v] : ckpt.metadata) {
    put_string(out, k);
    put_string(out, v);
  }
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.params.size()));
  for (const auto& p : ckpt.params) {
    put_string(out, p.name);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.value.rank()));
    for (auto d : p.value.shape()) put<std::uint64_t>(out, d);
  }
  for (const auto& p : ckpt.params)
    for (double v : p.value.values()) put<double>(out, v);
  if (!out) throw CheckpointError("write failed for " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path.string());
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) throw CheckpointError("not a checkpoint file");
  const auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  const auto nmeta = get<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < nmeta; ++i) {
    auto k = get_string(in);
    ckpt.metadata[k] = get_string(in);
  }
  const auto nparams = get<std::uint32_t>(in);
  std::vector<std::pair<std::string, Shape>> table;
  for (std::uint32_t i = 0; i < nparams; ++i) {
    auto name = get_string(in);
    const auto rank = get<std::uint32_t>(in);
    if (rank == 0 || rank > 8) throw CheckpointError("bad rank for " + name);
    Shape shape;
    for (std::uint32_t r = 0; r < rank; ++r) shape.push_back(static_cast<std::size_t>(get<std::uint64_t>(in)));
    table.emplace_back(std::move(name), std::move(shape));
  }
  for (auto& [name, shape] : table) {
    std::vector<double> data(shape_product(shape));
    for (auto& v : data) v = get<double>(in);
    ckpt.params.add(name, Tensor(shape, std::move(data)));
  }
  return ckpt;
}

void load_parameters(ParameterSet& dst, const ParameterSet& src, const std::string& prefix) {
  for (auto& p : dst) {
    const auto name = prefix + p.name;
    if (!src.contains(name)) throw CheckpointError("checkpoint lacks parameter " + name);
    const auto& s = src.at(name);
    if (!s.value.same_shape(p.value)) {
      throw CheckpointError("shape mismatch for " + name + ": " + shape_string(s.value.shape()) + " vs " +
                            shape_string(p.value.shape()));
    }
    p.value = s.value;
  }
}

void append_parameters(ParameterSet& dst, const ParameterSet& src, const std::string& prefix) {
  for (const auto& p : src) dst.add(prefix + p.name, p.value);
}

}  // namespace hindsight
