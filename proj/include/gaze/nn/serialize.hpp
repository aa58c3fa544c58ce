#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "gaze/nn/gazenet.hpp"

namespace gaze::nn {

inline constexpr char kParamMagic[4] = {'G', 'Z', 'N', 'T'};
inline constexpr std::uint16_t kParamFormatVersion = 1;

struct SavedModel {
  GazeNetConfig config;
  GazeNetParams<float> params;
};

// Layout (little-endian):
//   "GZNT" | u16 version | f64 width_multiplier | u32 input_size |
//   u32 bbox_feature_count | u32 output_dim | u8 bbox_mode | u32 tensor count |
//   per tensor: u16 name length, name, u8 rank, u32 extents..., f32 values.
std::string encode_params(const GazeNetParams<float>& params, const GazeNetConfig& config);
SavedModel decode_params(std::string_view bytes, const std::optional<GazeNetConfig>& expected = std::nullopt);

void save_params(const std::filesystem::path& path, const GazeNetParams<float>& params, const GazeNetConfig& config);
SavedModel load_params(const std::filesystem::path& path, const std::optional<GazeNetConfig>& expected = std::nullopt);

}  // namespace gaze::nn
