#pragma once

#include <filesystem>
#include <memory>
#include <semaphore>
#include <string>
#include <string_view>

#include "chart_refinery/config.hpp"
#include "chart_refinery/session/clock.hpp"
#include "chart_refinery/session/session.hpp"

namespace chart_refinery {

inline constexpr std::string_view kCaptureFile = "__output__.png";
inline constexpr std::string_view kCaptureVectorFile = "__output__.svg";
inline constexpr std::size_t kStderrExcerptBytes = 4096;
inline constexpr int kCaptureDpi = 150;

// preamble + source + postamble. The preamble pins the non-interactive Agg
// backend and turns plt.show() into a capture; the postamble saves the
// current figure (if any) to __output__.png at 150 DPI.
std::string instrument_script(std::string_view source,
                              CaptureFormat format = CaptureFormat::kPng);

// Runs plotting scripts in a child interpreter: fresh temp directory under
// workdir_root, scrubbed environment, process-group kill on timeout, and a
// fixed number of concurrent processes. Failures are encoded in the result
// status; only an unusable interpreter path throws (SandboxMisconfigured).
class RenderSandbox {
 public:
  explicit RenderSandbox(SandboxConfig cfg, Clock clock = Clock::system());

  RenderResult render(const ChartSpec& spec) const;
  RenderResult render_source(std::string_view source) const;

  const SandboxConfig& config() const { return cfg_; }
  // Working directory of the most recent render (for isolation checks).
  static std::filesystem::path last_workdir_for_testing();

 private:
  SandboxConfig cfg_;
  Clock clock_;
  std::unique_ptr<std::counting_semaphore<256>> slots_;
};

}  // namespace chart_refinery
