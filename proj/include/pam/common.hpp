#pragma once

#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace pam {

inline constexpr const char* kVersion = "1.0.0";

// Exit codes used by the CLI: 0 success, 2 config error, 3 numerical failure.
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

class NumericError : public std::runtime_error {
public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

class IoError : public std::runtime_error {
public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// ---------------------------------------------------------------------------
// Thread pool knob. Kernels partition work by output row, each row is reduced
// in a fixed serial order, so results are bit-identical for any thread count.
// ---------------------------------------------------------------------------

namespace detail {
inline std::atomic<int>& thread_count_slot() {
  static std::atomic<int> n{0};
  return n;
}
}  // namespace detail

inline int default_threads_from_env() {
  if (const char* env = std::getenv("PAM_THREADS")) {
    int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return 1;
}

inline void set_threads(int n) { detail::thread_count_slot().store(n < 1 ? 1 : n); }

inline int threads() {
  int n = detail::thread_count_slot().load();
  if (n == 0) {
    n = default_threads_from_env();
    detail::thread_count_slot().store(n);
  }
  return n;
}

// Runs fn(begin, end) over [0, count) split into contiguous chunks.
// Chunk boundaries depend only on count and the thread count, never on timing.
inline void parallel_for(std::int64_t count, const std::function<void(std::int64_t, std::int64_t)>& fn) {
  const int nthreads = threads();
  if (nthreads <= 1 || count < 2) {
    fn(0, count);
    return;
  }
  const std::int64_t chunk = (count + nthreads - 1) / nthreads;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(nthreads));
  for (std::int64_t begin = 0; begin < count; begin += chunk) {
    const std::int64_t end = begin + chunk < count ? begin + chunk : count;
    pool.emplace_back(fn, begin, end);
  }
  for (auto& t : pool) t.join();
}

// ---------------------------------------------------------------------------
// FNV-1a 64-bit content hashing, used for run manifests and audit trails.
// ---------------------------------------------------------------------------

inline std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t seed = 0xcbf29ce484222325ull) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t fnv1a64_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file for hashing: " + path);
  std::uint64_t h = 0xcbf29ce484222325ull;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    const std::streamsize got = in.gcount();
    if (got > 0) h = fnv1a64(buf, static_cast<std::size_t>(got), h);
  }
  return h;
}

inline std::string hex64(std::uint64_t h) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = digits[h & 0xf];
    h >>= 4;
  }
  return s;
}

}  // namespace pam
