#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <random>
#include <string>

namespace chart_refinery {

// Milliseconds since the Unix epoch, UTC. Persisted as RFC 3339.
struct Timestamp {
  std::int64_t unix_ms = 0;
  friend auto operator<=>(const Timestamp&, const Timestamp&) = default;
};

std::string format_rfc3339(Timestamp ts);
// Accepts the format produced by format_rfc3339 (Z suffix, optional millis).
Timestamp parse_rfc3339(const std::string& text);

// Injectable time sources. Wall time stamps records; the monotonic source
// measures durations that end up persisted, so tests can pin both.
struct Clock {
  std::function<Timestamp()> wall;
  std::function<std::int64_t()> monotonic_ms;

  static Clock system();
  static Clock fixed(Timestamp at);
};

// Source of opaque identifiers (128-bit hex).
class IdSource {
 public:
  virtual ~IdSource() = default;
  virtual std::string next() = 0;
};

class RandomIdSource final : public IdSource {
 public:
  RandomIdSource();
  std::string next() override;

 private:
  std::mutex mu_;
  std::mt19937_64 rng_;
};

// Reproducible ids for tests and byte-identical runs.
class SeededIdSource final : public IdSource {
 public:
  explicit SeededIdSource(std::uint64_t seed) : rng_(seed) {}
  std::string next() override;

 private:
  std::mutex mu_;
  std::mt19937_64 rng_;
};

std::string hex128(std::uint64_t hi, std::uint64_t lo);

}  // namespace chart_refinery
