#pragma once

#include <chrono>
#include <thread>
#include <utility>

#include "chart_refinery/error.hpp"

namespace chart_refinery {

// Exponential backoff (base, base*2, base*4, ...) on retryable errors only.
struct RetryPolicy {
  int max_retries = 0;
  int base_ms = 500;
  double factor = 2.0;

  std::chrono::milliseconds delay_before(int retry_number) const {
    double d = base_ms;
    for (int i = 1; i < retry_number; ++i) d *= factor;
    return std::chrono::milliseconds(static_cast<long long>(d));
  }
};

// Calls fn until it succeeds, a non-retryable error escapes, or retries are
// exhausted. `attempts` receives the number of calls made.
template <typename Fn>
auto call_with_retries(const RetryPolicy& policy, Fn&& fn, int& attempts) {
  attempts = 0;
  for (;;) {
    ++attempts;
    try {
      return fn();
    } catch (const Error& e) {
      if (!e.retryable() || attempts > policy.max_retries) throw;
    }
    std::this_thread::sleep_for(policy.delay_before(attempts));
  }
}

}  // namespace chart_refinery
