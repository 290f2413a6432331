#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "weedctx/net.hpp"

namespace weedctx {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint8_t kCheckpointVersion = 1;

// Layout (little-endian):
//   "WDCX" | u8 version | u32 height | u32 width | u32 channels
//   | u32 n_conv | n_conv x u32 filters | u32 n_dense | n_dense x u32 units
//   | f32 parameters in layer order, weights then bias per layer
std::size_t checkpoint_header_size(const NetworkSpec& spec);

std::vector<std::uint8_t> save_checkpoint(const ModelParams<float>& params);
ModelParams<float> load_checkpoint(std::span<const std::uint8_t> bytes);

void write_checkpoint(const std::string& path, const ModelParams<float>& params);
ModelParams<float> read_checkpoint(const std::string& path);

}  // namespace weedctx
