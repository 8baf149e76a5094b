#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "hindsight/graph.hpp"

namespace hindsight {

// Binary parameter file, all integers and doubles little-endian:
//
//   char[8]  magic "HSCKPT\0\1"
//   u32      format version (1)
//   u32      metadata entry count, then per entry: str key, str value
//   u32      parameter count, then per parameter: str name, u32 rank, u64 dims[rank]
//   f64[]    parameter values, in name-table order
//
// where str is a u32 byte length followed by the bytes.
struct Checkpoint {
  std::map<std::string, std::string> metadata;
  ParameterSet params;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

// Copies values for every parameter of `dst` from `src` entries named
// prefix + name. Shapes must match exactly.
void load_parameters(ParameterSet& dst, const ParameterSet& src, const std::string& prefix);
// Appends every parameter of `src` to `dst` under prefix + name.
void append_parameters(ParameterSet& dst, const ParameterSet& src, const std::string& prefix);

}  // namespace hindsight
