// SPDX-FileCopyrightText: 2026 uvqa contributors
// SPDX-License-Identifier: Apache-2.0

#include "uvqa/archive.hpp"

#include <cstring>

#include "uvqa/media.hpp"

namespace uvqa {

namespace {

constexpr char kMagic[4] = {'U', 'V', 'Q', 'A'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f32(std::vector<std::uint8_t>& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t pos() const { return pos_; }

  void need(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n)
      fail(ErrorCode::format, std::string("truncated archive: ") + what +
                                  " at byte offset " + std::to_string(pos_));
  }

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }

  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }

  std::uint8_t u8(const char* what) {
    need(1, what);
    return bytes_[pos_++];
  }

  std::string str(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  float f32(const char* what) {
    std::uint32_t bits = u32(what);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void TensorArchive::add(std::string name, std::vector<std::uint64_t> shape,
                        std::vector<float> data) {
  require(find(name) == nullptr, ErrorCode::invalid_arg,
          "duplicate archive entry '" + name + "'");
  TensorEntry e{std::move(name), std::move(shape), std::move(data)};
  require(e.element_count() == e.data.size(), ErrorCode::invalid_arg,
          "payload length does not match shape for '" + e.name + "'");
  entries.push_back(std::move(e));
}

const TensorEntry* TensorArchive::find(const std::string& name) const {
  for (const auto& e : entries)
    if (e.name == name) return &e;
  return nullptr;
}

const TensorEntry& TensorArchive::get(const std::string& name) const {
  const TensorEntry* e = find(name);
  require(e != nullptr, ErrorCode::state, "archive entry '" + name + "' not found");
  return *e;
}

std::vector<std::uint8_t> write_archive(const TensorArchive& archive) {
  std::vector<std::uint8_t> out;
  out.insert(out.end(), kMagic, kMagic + 4);
  out.push_back(TensorArchive::kVersion);
  put_u64(out, archive.entries.size());
  for (const auto& e : archive.entries) {
    require(e.element_count() == e.data.size(), ErrorCode::invalid_arg,
            "payload length does not match shape for '" + e.name + "'");
    put_u32(out, static_cast<std::uint32_t>(e.name.size()));
    out.insert(out.end(), e.name.begin(), e.name.end());
    put_u32(out, static_cast<std::uint32_t>(e.shape.size()));
    for (auto d : e.shape) put_u64(out, d);
    for (float v : e.data) put_f32(out, v);
  }
  return out;
}

TensorArchive parse_archive(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  r.need(4, "magic");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0)
    fail(ErrorCode::format, "bad magic: expected 'UVQA'");
  std::string magic = r.str(4, "magic");
  std::uint8_t version = r.u8("version");
  if (version != TensorArchive::kVersion)
    fail(ErrorCode::format, "version mismatch: found " + std::to_string(version) +
                                ", expected " + std::to_string(TensorArchive::kVersion));
  std::uint64_t count = r.u64("entry count");

  TensorArchive archive;
  archive.entries.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    TensorEntry e;
    std::uint32_t name_len = r.u32("name length");
    e.name = r.str(name_len, "name");
    std::uint32_t rank = r.u32("rank");
    e.shape.resize(rank);
    for (std::uint32_t d = 0; d < rank; ++d) e.shape[d] = r.u64("dims");
    std::uint64_t n = e.element_count();
    r.need(n * 4, "payload");
    e.data.resize(n);
    for (std::uint64_t k = 0; k < n; ++k) e.data[k] = r.f32("payload");
    if (archive.find(e.name) != nullptr)
      fail(ErrorCode::format, "duplicate archive entry '" + e.name + "'");
    archive.entries.push_back(std::move(e));
  }
  if (!r.done())
    fail(ErrorCode::format, "payload length mismatch: " +
                                std::to_string(bytes.size() - r.pos()) +
                                " trailing bytes");
  return archive;
}

TensorArchive load_archive(const std::string& path) {
  return parse_archive(read_file(path));
}

void save_archive(const TensorArchive& archive, const std::string& path) {
  auto bytes = write_archive(archive);
  write_file(path, bytes);
}

}  // namespace uvqa
