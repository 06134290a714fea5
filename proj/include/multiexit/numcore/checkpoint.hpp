#pragma once

#include <string>
#include <utility>
#include <vector>

#include "multiexit/numcore/tensor.hpp"

namespace multiexit::numcore {

using NamedParams = std::vector<std::pair<std::string, TensorPtr>>;

// Versioned self-describing weight file: a JSON document listing every
// tensor by name and shape, with the raw values base64-encoded as
// little-endian 64-bit floats. Round-trips are bit-exact.
void save_checkpoint(const std::string& path, const NamedParams& params);

NamedParams load_checkpoint(const std::string& path);

// Restores values into existing tensors, matched by name; shapes must
// agree and every destination name must be present.
void load_checkpoint_into(const std::string& path, const NamedParams& dst);

std::uint64_t params_fingerprint(const NamedParams& params);

}  // namespace multiexit::numcore
