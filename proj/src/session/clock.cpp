#include "chart_refinery/session/clock.hpp"

#include <cstdio>
#include <ctime>

#include "chart_refinery/error.hpp"

namespace chart_refinery {

std::string format_rfc3339(Timestamp ts) {
  std::int64_t secs = ts.unix_ms / 1000;
  std::int64_t millis = ts.unix_ms % 1000;
  if (millis < 0) {
    millis += 1000;
    --secs;
  }
  std::time_t t = static_cast<std::time_t>(secs);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ",
                tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday, tm.tm_hour,
                tm.tm_min, tm.tm_sec, static_cast<int>(millis));
  return buf;
}

Timestamp parse_rfc3339(const std::string& text) {
  std::tm tm{};
  int millis = 0;
  char tail[8] = {};
  int n = std::sscanf(text.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d.%3d%7s",
                      &tm.tm_year, &tm.tm_mon, &tm.tm_mday, &tm.tm_hour,
                      &tm.tm_min, &tm.tm_sec, &millis, tail);
  if (n != 8) {
    millis = 0;
    n = std::sscanf(text.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d%7s", &tm.tm_year,
                    &tm.tm_mon, &tm.tm_mday, &tm.tm_hour, &tm.tm_min,
                    &tm.tm_sec, tail);
    if (n != 7) {
      throw Error(ErrorCode::kCorruptRecord, "bad timestamp: " + text);
    }
  }
  if (std::string(tail) != "Z") {
    throw Error(ErrorCode::kCorruptRecord, "timestamp must be UTC: " + text);
  }
  tm.tm_year -= 1900;
  tm.tm_mon -= 1;
  std::int64_t secs = static_cast<std::int64_t>(timegm(&tm));
  return Timestamp{secs * 1000 + millis};
}

Clock Clock::system() {
  return Clock{
      [] {
        auto now = std::chrono::system_clock::now().time_since_epoch();
        return Timestamp{
            std::chrono::duration_cast<std::chrono::milliseconds>(now).count()};
      },
      [] {
        auto now = std::chrono::steady_clock::now().time_since_epoch();
        return static_cast<std::int64_t>(
            std::chrono::duration_cast<std::chrono::milliseconds>(now).count());
      }};
}

Clock Clock::fixed(Timestamp at) {
  return Clock{[at] { return at; }, [] { return std::int64_t{0}; }};
}

std::string hex128(std::uint64_t hi, std::uint64_t lo) {
  char buf[33];
  std::snprintf(buf, sizeof(buf), "%016llx%016llx",
                static_cast<unsigned long long>(hi),
                static_cast<unsigned long long>(lo));
  return buf;
}

RandomIdSource::RandomIdSource() {
  std::random_device rd;
  std::seed_seq seq{rd(), rd(), rd(), rd(), rd(), rd(), rd(), rd()};
  rng_.seed(seq);
}

std::string RandomIdSource::next() {
  std::lock_guard lock(mu_);
  auto hi = rng_();
  auto lo = rng_();
  return hex128(hi, lo);
}

std::string SeededIdSource::next() {
  std::lock_guard lock(mu_);
  auto hi = rng_();
  auto lo = rng_();
  return hex128(hi, lo);
}

}  // namespace chart_refinery
