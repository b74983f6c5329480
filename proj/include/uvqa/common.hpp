// SPDX-FileCopyrightText: 2026 uvqa contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace uvqa {

// Error categories, kept numerically in sync with uvqa_status in the C header.
enum class ErrorCode : int {
  invalid_arg = 1,
  io = 2,
  format = 3,
  dimension = 4,
  budget_exceeded = 5,
  state = 6,
  internal = 7,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool cond, ErrorCode code, const std::string& message) {
  if (!cond) fail(code, message);
}

// Runs fn(i) for i in [0, count). Each index must write only its own output
// slot; chunks are static so results do not depend on the thread count.
inline void parallel_for(std::size_t count, int threads,
                         const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::size_t n_threads = std::min<std::size_t>(threads, count);
  std::vector<std::thread> pool;
  pool.reserve(n_threads);
  for (std::size_t t = 0; t < n_threads; ++t) {
    pool.emplace_back([&, t]() {
      for (std::size_t i = t; i < count; i += n_threads) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace uvqa
