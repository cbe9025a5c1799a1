#pragma once

#include <filesystem>
#include <string>

#include "artdet/network.hpp"

namespace artdet {

// Checkpoint container, version 1:
//
//   offset 0   8 bytes   magic "ARTDETCK"
//   offset 8   uint32    format version (little-endian)
//   offset 12  uint32    header length L in bytes (little-endian)
//   offset 16  L bytes   UTF-8 JSON header: network spec, rng state and a
//                        parameter table [{layer, weight_shape, bias_shape}]
//   then                 parameters as little-endian float32, for each table
//                        entry the weights followed by the biases
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const Network<float>& net,
                     const std::filesystem::path& path);
// Throws DataError on a missing, truncated or inconsistent file.
Network<float> load_checkpoint(const std::filesystem::path& path);

// JSON forms of the network spec, shared with experiment reports.
std::string network_spec_to_json(const NetworkSpec& spec);
NetworkSpec network_spec_from_json(const std::string& json);

}  // namespace artdet
