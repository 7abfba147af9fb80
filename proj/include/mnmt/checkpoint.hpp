#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mnmt/tape.hpp"

namespace mnmt::num {

// Binary layout (little-endian):
//   "MNMT1" | u32 count | count x { u32 name_len | name | u32 rank | rank x u64 dim | values f64 }
// A text manifest "<path>.manifest" lists one "name<TAB>shape" line per tensor
// after the artifact header line.
struct NamedTensor {
  std::string name;
  Tensor value;
};

void save_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors,
                     const std::string& header_line);
std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path);

// Copies the parameters of `set` (optionally under a name prefix).
std::vector<NamedTensor> to_named(const ParameterSet& set, const std::string& prefix = "");
// Builds a ParameterSet from every tensor whose name starts with prefix (prefix stripped).
ParameterSet from_named(const std::vector<NamedTensor>& tensors, const std::string& prefix = "");

}  // namespace mnmt::num
