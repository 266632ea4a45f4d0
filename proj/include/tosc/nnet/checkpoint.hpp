#pragma once

#include <filesystem>
#include <string>

#include "tosc/nnet/tensor.hpp"

namespace tosc::nn {

/// File layout: 8 magic bytes "TOSCNN01", u64 little-endian header length,
/// UTF-8 JSON header {format, version, step, seed, meta, tensors:[{name,
/// shape, dtype, offset}]}, then the raw little-endian float64 payload in
/// header order. Written to a temp file and renamed into place.
void save_checkpoint(const std::filesystem::path& path, const ParamSet& params,
                     const std::string& meta_json = "{}");

/// Loads values into an already-constructed ParamSet; names and shapes must
/// match exactly. Returns the meta JSON string.
std::string load_checkpoint(const std::filesystem::path& path, ParamSet& params);

/// Reads only the meta JSON string (for rebuilding a model before loading).
std::string read_checkpoint_meta(const std::filesystem::path& path);

}  // namespace tosc::nn
