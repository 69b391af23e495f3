#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "chart_refinery/backend/backends.hpp"
#include "chart_refinery/config.hpp"
#include "chart_refinery/error.hpp"
#include "chart_refinery/session/clock.hpp"

namespace chart_refinery::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitBackend = 3;

int exit_code_for(ErrorCode code);

// Seams for running the CLI in-process (tests, embedding).
struct Hooks {
  std::function<void(AppConfig&)> adjust_config;
  std::optional<Backends> backends;  // replaces make_backends(cfg)
  std::shared_ptr<IdSource> ids;
  std::optional<Clock> clock;
};

// args excludes the program name. Returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        const Hooks& hooks = {});

}  // namespace chart_refinery::cli
