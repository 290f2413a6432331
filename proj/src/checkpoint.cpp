#include "weedctx/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace weedctx {

namespace {

constexpr char kMagic[4] = {'W', 'D', 'C', 'X'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }
  std::span<const std::uint8_t> take(std::size_t n) {
    need(n);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw CheckpointError("checkpoint truncated");
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::size_t checkpoint_header_size(const NetworkSpec& spec) {
  return 4 + 1 + 4 * (3 + 1 + spec.conv_filters.size() + 1 + spec.dense_units.size());
}

std::vector<std::uint8_t> save_checkpoint(const ModelParams<float>& params) {
  const NetworkSpec& spec = params.spec;
  if (params.values.size() != param_count(spec)) {
    throw CheckpointError("parameter count does not match spec");
  }
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  out.push_back(kCheckpointVersion);
  put_u32(out, spec.height);
  put_u32(out, spec.width);
  put_u32(out, spec.channels);
  put_u32(out, static_cast<std::uint32_t>(spec.conv_filters.size()));
  for (int f : spec.conv_filters) put_u32(out, f);
  put_u32(out, static_cast<std::uint32_t>(spec.dense_units.size()));
  for (int u : spec.dense_units) put_u32(out, u);
  out.reserve(out.size() + 4 * params.values.size());
  for (float v : params.values) put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

ModelParams<float> load_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  const auto magic = r.take(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0) {
    throw CheckpointError("bad checkpoint magic");
  }
  const std::uint8_t version = r.u8();
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  constexpr std::uint32_t kMaxDim = 1u << 16;
  auto bounded = [&](std::uint32_t v, const char* what) {
    if (v == 0 || v > kMaxDim) throw CheckpointError(std::string("implausible ") + what + " in checkpoint");
    return static_cast<int>(v);
  };
  NetworkSpec spec;
  spec.height = bounded(r.u32(), "height");
  spec.width = bounded(r.u32(), "width");
  spec.channels = bounded(r.u32(), "channel count");
  spec.conv_filters.resize(bounded(r.u32(), "conv layer count"));
  for (int& f : spec.conv_filters) f = bounded(r.u32(), "filter count");
  spec.dense_units.resize(bounded(r.u32(), "dense layer count"));
  for (int& u : spec.dense_units) u = bounded(r.u32(), "dense width");
  try {
    spec.validate();
  } catch (const ShapeError& e) {
    throw CheckpointError(std::string("inconsistent network shape: ") + e.what());
  }
  const std::size_t count = param_count(spec);
  if (r.remaining() != 4 * count) {
    throw CheckpointError(r.remaining() < 4 * count ? "checkpoint truncated"
                                                    : "checkpoint has trailing bytes after parameters");
  }
  ModelParams<float> params{spec, std::vector<float>(count)};
  for (float& v : params.values) v = std::bit_cast<float>(r.u32());
  return params;
}

void write_checkpoint(const std::string& path, const ModelParams<float>& params) {
  const auto bytes = save_checkpoint(params);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("failed writing checkpoint: " + path);
}

ModelParams<float> read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint: " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return load_checkpoint(bytes);
}

}  // namespace weedctx
