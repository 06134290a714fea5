#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace multiexit {

std::string base64_encode(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> base64_decode(const std::string& text);

// Checkpoint payload helpers: doubles travel as little-endian 64-bit words
// regardless of host order.
std::string encode_f64_le(const std::vector<double>& values);
std::vector<double> decode_f64_le(const std::string& text);

}  // namespace multiexit
