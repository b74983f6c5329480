// SPDX-FileCopyrightText: 2026 uvqa contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "uvqa/common.hpp"

namespace uvqa {

// Named float tensors with a fixed little-endian byte layout:
//
//   magic "UVQA" | version u8 | entry count u64
//   per entry: name length u32 | UTF-8 name | rank u32 | dims u64[rank] | f32 payload
//
// An empty archive is exactly the 13-byte header.
struct TensorEntry {
  std::string name;
  std::vector<std::uint64_t> shape;
  std::vector<float> data;

  std::uint64_t element_count() const {
    std::uint64_t n = 1;
    for (auto d : shape) n *= d;
    return n;
  }
};

struct TensorArchive {
  std::vector<TensorEntry> entries;

  static constexpr std::uint8_t kVersion = 1;

  void add(std::string name, std::vector<std::uint64_t> shape, std::vector<float> data);
  const TensorEntry* find(const std::string& name) const;
  const TensorEntry& get(const std::string& name) const;
};

std::vector<std::uint8_t> write_archive(const TensorArchive& archive);
TensorArchive parse_archive(std::span<const std::uint8_t> bytes);
TensorArchive load_archive(const std::string& path);
void save_archive(const TensorArchive& archive, const std::string& path);

}  // namespace uvqa
