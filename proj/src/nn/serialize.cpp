#include "gaze/nn/serialize.hpp"

#include <algorithm>
#include <bit>
#include <cstring>

#include "gaze/kvfile.hpp"

namespace gaze::nn {

namespace {

template <typename U>
void put(std::string& out, U value) {
  static_assert(std::is_integral_v<U>);
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) { put(out, std::bit_cast<std::uint64_t>(v)); }
void put_f32(std::string& out, float v) { put(out, std::bit_cast<std::uint32_t>(v)); }

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename U>
  U get() {
    need(sizeof(U));
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(U);
    return static_cast<U>(v);
  }
  double get_f64() { return std::bit_cast<double>(get<std::uint64_t>()); }
  float get_f32() { return std::bit_cast<float>(get<std::uint32_t>()); }
  std::string get_string(std::size_t n) {
    need(n);
    std::string s(bytes_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw Error(ErrorCode::TruncatedData, "parameter file ends early");
  }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_params(const GazeNetParams<float>& params, const GazeNetConfig& config) {
  check_params(params, config);
  std::string out(kParamMagic, 4);
  put<std::uint16_t>(out, kParamFormatVersion);
  put_f64(out, config.width_multiplier);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(config.input_size));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(config.bbox_feature_count));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(config.output_dim));
  put<std::uint8_t>(out, config.bbox_mode == BBoxFeatureMode::RawPixels ? 1 : 0);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(kParamCount));
  for (std::size_t i = 0; i < kParamCount; ++i) {
    const auto name = param_name(i);
    const auto& t = params[i];
    put<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    out.append(name);
    put<std::uint8_t>(out, static_cast<std::uint8_t>(t.rank()));
    for (auto e : t.shape()) put<std::uint32_t>(out, static_cast<std::uint32_t>(e));
    for (float v : t.values()) put_f32(out, v);
  }
  return out;
}

SavedModel decode_params(std::string_view bytes, const std::optional<GazeNetConfig>& expected) {
  const std::size_t head = std::min<std::size_t>(bytes.size(), 4);
  if (std::memcmp(bytes.data(), kParamMagic, head) != 0) {
    throw Error(ErrorCode::BadMagic, "not a GZNT parameter file");
  }
  if (head < 4) throw Error(ErrorCode::TruncatedData, "parameter file ends inside the header");
  Reader r(bytes.substr(4));
  const auto version = r.get<std::uint16_t>();
  if (version != kParamFormatVersion) {
    throw Error(ErrorCode::VersionMismatch, "parameter format version " + std::to_string(version) + ", expected " +
                                                std::to_string(kParamFormatVersion));
  }
  SavedModel model;
  model.config.width_multiplier = r.get_f64();
  model.config.input_size = static_cast<int>(r.get<std::uint32_t>());
  model.config.bbox_feature_count = static_cast<int>(r.get<std::uint32_t>());
  model.config.output_dim = static_cast<int>(r.get<std::uint32_t>());
  model.config.bbox_mode = r.get<std::uint8_t>() == 1 ? BBoxFeatureMode::RawPixels : BBoxFeatureMode::Normalized;
  if (expected && !(*expected == model.config)) {
    throw Error(ErrorCode::ShapeMismatch, "stored network config differs from the requested one");
  }
  const auto count = r.get<std::uint32_t>();
  if (count != kParamCount) throw Error(ErrorCode::ShapeMismatch, "unexpected tensor count " + std::to_string(count));
  for (std::size_t i = 0; i < kParamCount; ++i) {
    const auto name = r.get_string(r.get<std::uint16_t>());
    if (name != param_name(i)) {
      throw Error(ErrorCode::ShapeMismatch, "tensor " + std::to_string(i) + " is `" + name + "`, expected `" +
                                                std::string(param_name(i)) + "`");
    }
    Shape shape(r.get<std::uint8_t>());
    for (auto& e : shape) e = r.get<std::uint32_t>();
    const auto n = element_count(shape);
    r.need(n * 4);
    std::vector<float> values(n);
    for (auto& v : values) v = r.get_f32();
    model.params[i] = Tensor<float>(std::move(shape), std::move(values));
  }
  check_params(model.params, model.config);
  return model;
}

void save_params(const std::filesystem::path& path, const GazeNetParams<float>& params, const GazeNetConfig& config) {
  write_text_file(path, encode_params(params, config));
}

SavedModel load_params(const std::filesystem::path& path, const std::optional<GazeNetConfig>& expected) {
  return decode_params(read_text_file(path), expected);
}

}  // namespace gaze::nn
