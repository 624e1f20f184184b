// Copyright 2026 The DASM Authors
// SPDX-License-Identifier: Apache-2.0

#include "dasm/numerics/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

#include "dasm/core/errors.hpp"

DASM_BEGIN_NAMESPACE
namespace num {

namespace {

constexpr char kMagic[8] = {'D', 'A', 'S', 'M', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kFormat = 1;

template <typename U>
void put_le(std::vector<char>& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_string(std::vector<char>& out, const std::string& s) {
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.insert(out.end(), s.begin(), s.end());
}

class Reader {
 public:
  explicit Reader(const std::vector<char>& bytes) : bytes_(bytes) {}

  template <typename U>
  U le() {
    need(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      v |= static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(U);
    return v;
  }

  std::string str() {
    const auto n = le<std::uint32_t>();
    need(n);
    std::string s(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_),
                  bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return s;
  }

  void raw(void* dst, std::size_t n) {
    need(n);
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw ValidationError("checkpoint: truncated archive");
  }
  const std::vector<char>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

Checkpoint capture(const ParameterList& params, std::string metadata) {
  Checkpoint ckpt{kCheckpointVersion, std::move(metadata), {}};
  for (const auto& p : params) {
    CheckpointEntry e{p.name, p.value.shape(), {}};
    e.values.reserve(p.value.size());
    for (Real v : p.value.data()) e.values.push_back(static_cast<float>(v));
    ckpt.entries.push_back(std::move(e));
  }
  return ckpt;
}

void restore(const Checkpoint& ckpt, const ParameterList& params) {
  std::map<std::string, const CheckpointEntry*> by_name;
  for (const auto& e : ckpt.entries) by_name[e.name] = &e;
  for (const auto& p : params) {
    auto it = by_name.find(p.name);
    if (it == by_name.end()) throw CompatibilityError("checkpoint lacks parameter '" + p.name + "'");
    if (it->second->shape != p.value.shape()) {
      throw CompatibilityError("checkpoint parameter '" + p.name + "' has shape " + shape_string(it->second->shape) +
                               ", model expects " + shape_string(p.value.shape()));
    }
    Tensor t = p.value;
    auto dst = t.mutable_data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<Real>(it->second->values[i]);
  }
}

std::vector<char> encode_checkpoint(const Checkpoint& ckpt) {
  std::vector<char> out(std::begin(kMagic), std::end(kMagic));
  put_le<std::uint32_t>(out, kFormat);
  put_string(out, ckpt.version);
  put_string(out, ckpt.metadata);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.entries.size()));
  for (const auto& e : ckpt.entries) {
    if (shape_size(e.shape) != e.values.size()) throw DimensionError("checkpoint entry '" + e.name + "' inconsistent");
    put_string(out, e.name);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(e.shape.size()));
    for (auto d : e.shape) put_le<std::uint64_t>(out, d);
    for (float v : e.values) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

Checkpoint decode_checkpoint(const std::vector<char>& bytes) {
  if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw ValidationError("checkpoint: bad magic");
  }
  std::vector<char> body(bytes.begin() + sizeof kMagic, bytes.end());
  Reader r(body);
  if (r.le<std::uint32_t>() != kFormat) throw ValidationError("checkpoint: unsupported format");
  Checkpoint ckpt;
  ckpt.version = r.str();
  ckpt.metadata = r.str();
  const auto count = r.le<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    CheckpointEntry e;
    e.name = r.str();
    const auto rank = r.le<std::uint32_t>();
    for (std::uint32_t d = 0; d < rank; ++d) e.shape.push_back(static_cast<std::size_t>(r.le<std::uint64_t>()));
    e.values.resize(shape_size(e.shape));
    for (auto& v : e.values) v = std::bit_cast<float>(r.le<std::uint32_t>());
    ckpt.entries.push_back(std::move(e));
  }
  if (!r.done()) throw ValidationError("checkpoint: trailing bytes");
  return ckpt;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto bytes = encode_checkpoint(ckpt);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("cannot write checkpoint " + path.string());
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot read checkpoint " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace num
DASM_END_NAMESPACE
