// Copyright (c) 2026 The CDS Authors
// SPDX-License-Identifier: Apache-2.0

#include "cds/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "cds/errors.hpp"

namespace cds {
namespace {

constexpr std::size_t kMagicLen = sizeof(kCheckpointMagic) - 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
 public:
  Reader(std::vector<unsigned char> buf, std::string path) : buf_(std::move(buf)), path_(std::move(path)) {}

  const unsigned char* take(std::size_t n) {
    if (buf_.size() - pos_ < n) throw DataError(path_ + ": truncated checkpoint");
    const unsigned char* p = buf_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::uint32_t u32() {
    const unsigned char* p = take(4);
    return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
           static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
  }
  bool done() const { return pos_ == buf_.size(); }
  const std::string& path() const { return path_; }

 private:
  std::vector<unsigned char> buf_;
  std::size_t pos_ = 0;
  std::string path_;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, ModelParams<float>& params) {
  const auto refs = named_tensors(params);
  std::string out(kCheckpointMagic, kMagicLen);
  put_u32(out, static_cast<std::uint32_t>(params.config.channels));
  put_u32(out, static_cast<std::uint32_t>(params.config.gate_reduction));
  put_u32(out, static_cast<std::uint32_t>(params.config.d));
  put_u32(out, static_cast<std::uint32_t>(refs.size()));
  for (const auto& r : refs) {
    put_u32(out, static_cast<std::uint32_t>(r.name.size()));
    out += r.name;
    out.push_back(0);  // f32
    put_u32(out, static_cast<std::uint32_t>(r.tensor->rank()));
    for (std::size_t d : r.tensor->shape) put_u32(out, static_cast<std::uint32_t>(d));
    for (float v : r.tensor->data) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write checkpoint " + tmp.string());
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw DataError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

ModelParams<float> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open checkpoint " + path.string());
  Reader in(std::vector<unsigned char>(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()),
            path.string());
  if (std::memcmp(in.take(kMagicLen), kCheckpointMagic, kMagicLen) != 0) {
    throw DataError(path.string() + ": not a CDS checkpoint (bad magic)");
  }
  ModelConfig cfg;
  cfg.channels = static_cast<int>(in.u32());
  cfg.gate_reduction = static_cast<int>(in.u32());
  cfg.d = static_cast<int>(in.u32());
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw DataError(path.string() + ": invalid architecture header: " + e.what());
  }
  if (cfg.channels > 4096) throw DataError(path.string() + ": implausible channel count");
  ModelParams<float> params = init_params<float>(0, cfg);
  const auto refs = named_tensors(params);
  const std::uint32_t count = in.u32();
  if (count != refs.size()) {
    throw DataError(path.string() + ": expected " + std::to_string(refs.size()) + " arrays, found " +
                    std::to_string(count));
  }
  for (const auto& r : refs) {
    const std::uint32_t len = in.u32();
    const unsigned char* name = in.take(len);
    if (std::string(reinterpret_cast<const char*>(name), len) != r.name) {
      throw DataError(path.string() + ": expected array '" + r.name + "', found '" +
                      std::string(reinterpret_cast<const char*>(name), len) + "'");
    }
    if (*in.take(1) != 0) throw DataError(path.string() + ": unsupported dtype for '" + r.name + "'");
    const std::uint32_t rank = in.u32();
    Shape shape(rank);
    for (auto& d : shape) d = in.u32();
    if (shape != r.tensor->shape) {
      throw DataError(path.string() + ": array '" + r.name + "' has shape " + shape_str(shape) + ", expected " +
                      shape_str(r.tensor->shape));
    }
    for (float& v : r.tensor->data) v = std::bit_cast<float>(in.u32());
  }
  if (!in.done()) throw DataError(path.string() + ": trailing bytes after the last array");
  return params;
}

}  // namespace cds
