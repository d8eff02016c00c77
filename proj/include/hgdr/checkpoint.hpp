#pragma once

#include <filesystem>
#include <iosfwd>

#include "hgdr/model.hpp"

namespace hgdr {

// Checkpoint layout (all integers little-endian u32, all values little-endian f64):
//   "HGDR1"
//   |D|, U, I_0 .. I_{D-1}, K, L, mode, flags (bit 0 tie_relation_weights, bit 1 mean_aggregation)
//   matrix count
//   per matrix in ModelParams::for_each order: rows, cols, rows*cols values
void save_checkpoint(const ModelParams& params, const std::filesystem::path& path);
void write_checkpoint(const ModelParams& params, std::ostream& out);

// Throws std::runtime_error on a bad magic, unsupported version, shape
// disagreement, truncation, or trailing bytes.
ModelParams load_checkpoint(const std::filesystem::path& path);
ModelParams read_checkpoint(std::istream& in);

}  // namespace hgdr
