#include "chart_refinery/sandbox/sandbox.hpp"

#include <fcntl.h>
#include <poll.h>
#include <sched.h>
#include <signal.h>
#include <sys/resource.h>
#include <sys/stat.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <mutex>
#include <thread>
#include <vector>

#include "chart_refinery/error.hpp"
#include "chart_refinery/session/hashing.hpp"
#include "chart_refinery/text.hpp"

namespace chart_refinery {
namespace fs = std::filesystem;

namespace {

std::mutex g_last_mu;
fs::path g_last_workdir;

constexpr const char* kPreamble =
    "import matplotlib\n"
    "matplotlib.use(\"Agg\")\n"
    "import matplotlib.pyplot as __cr_plt\n"
    "def __cr_capture(*_args, **_kwargs):\n"
    "    if __cr_plt.get_fignums():\n"
    "        __cr_plt.gcf().savefig(\"__output__.png\", dpi=150)\n"
    "__cr_plt.show = __cr_capture\n"
    "# ---- begin user script ----\n";

constexpr const char* kPostamble =
    "\n# ---- end user script ----\n"
    "import matplotlib.pyplot as __cr_plt\n"
    "if __cr_plt.get_fignums():\n"
    "    __cr_plt.gcf().savefig(\"__output__.png\", dpi=150)\n";

constexpr const char* kVectorPostamble =
    "if __cr_plt.get_fignums():\n"
    "    __cr_plt.gcf().savefig(\"__output__.svg\")\n";

struct ScopedDir {
  fs::path path;
  ~ScopedDir() {
    std::error_code ec;
    if (!path.empty()) fs::remove_all(path, ec);
  }
};

struct SlotGuard {
  std::counting_semaphore<256>& sem;
  explicit SlotGuard(std::counting_semaphore<256>& s) : sem(s) { sem.acquire(); }
  ~SlotGuard() { sem.release(); }
};

std::vector<std::uint8_t> read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void check_interpreter(const fs::path& interpreter) {
  if (interpreter.empty() || !interpreter.is_absolute() ||
      ::access(interpreter.c_str(), X_OK) != 0 || fs::is_directory(interpreter)) {
    throw Error(ErrorCode::kSandboxMisconfigured,
                "interpreter_path is not an executable absolute path: " + interpreter.string(),
                {{"interpreter_path", interpreter.string()}});
  }
}

}  // namespace

std::string instrument_script(std::string_view source, CaptureFormat format) {
  std::string out = kPreamble;
  out.append(source);
  out += kPostamble;
  if (format == CaptureFormat::kSvg) out += kVectorPostamble;
  return out;
}

RenderSandbox::RenderSandbox(SandboxConfig cfg, Clock clock)
    : cfg_(std::move(cfg)),
      clock_(std::move(clock)),
      slots_(std::make_unique<std::counting_semaphore<256>>(
          static_cast<std::ptrdiff_t>(std::clamp<std::size_t>(cfg_.pool_size, 1, 256)))) {
  cfg_.validate();
}

fs::path RenderSandbox::last_workdir_for_testing() {
  std::lock_guard lock(g_last_mu);
  return g_last_workdir;
}

RenderResult RenderSandbox::render(const ChartSpec& spec) const {
  if (spec.source.empty()) {
    throw Error(ErrorCode::kPreconditionViolated, "cannot render an empty spec");
  }
  return render_source(spec.source);
}

RenderResult RenderSandbox::render_source(std::string_view source) const {
  check_interpreter(cfg_.interpreter_path);
  SlotGuard slot(*slots_);
  const auto started_ms = clock_.monotonic_ms();
  const auto deadline = std::chrono::steady_clock::now() +
                        std::chrono::milliseconds(static_cast<long long>(cfg_.timeout_s * 1000));

  std::string tmpl = (cfg_.workdir_root / "crsbx-XXXXXX").string();
  std::vector<char> tmpl_buf(tmpl.begin(), tmpl.end());
  tmpl_buf.push_back('\0');
  if (!::mkdtemp(tmpl_buf.data())) {
    throw Error(ErrorCode::kSandboxMisconfigured,
                "cannot create working directory under " + cfg_.workdir_root.string());
  }
  ScopedDir workdir{fs::path(tmpl_buf.data())};
  {
    std::lock_guard lock(g_last_mu);
    g_last_workdir = workdir.path;
  }
  const fs::path script = workdir.path / "chart_script.py";
  {
    std::ofstream out(script, std::ios::binary);
    out << instrument_script(source, cfg_.capture_format);
  }
  // Font cache shared across renders; it lives outside the per-render dirs.
  const fs::path mpl_cache = cfg_.workdir_root / ".chart-refinery-mplconfig";
  std::error_code ec;
  fs::create_directories(mpl_cache, ec);

  // Everything the child needs is prepared before fork().
  const std::string interp = cfg_.interpreter_path.string();
  const std::string script_str = script.string();
  const std::string workdir_str = workdir.path.string();
  std::vector<std::string> env_strings = {
      "PATH=/usr/local/bin:/usr/bin:/bin",
      "HOME=" + workdir_str,
      "TMPDIR=" + workdir_str,
      "MPLBACKEND=Agg",
      "MPLCONFIGDIR=" + mpl_cache.string(),
      "LANG=C.UTF-8",
      "PYTHONDONTWRITEBYTECODE=1",
      "PYTHONUNBUFFERED=1",
      "OPENBLAS_NUM_THREADS=1",
  };
  std::vector<char*> envp;
  for (auto& e : env_strings) envp.push_back(e.data());
  envp.push_back(nullptr);
  std::vector<char*> argv = {const_cast<char*>(interp.c_str()),
                             const_cast<char*>(script_str.c_str()), nullptr};
  const rlim_t cpu_limit = static_cast<rlim_t>(std::ceil(cfg_.timeout_s)) + 1;
  const rlim_t fsize_limit = static_cast<rlim_t>(cfg_.max_output_bytes);
  const bool isolate_net = !cfg_.allow_network;

  int err_pipe[2];
  if (::pipe2(err_pipe, O_CLOEXEC) != 0) {
    throw Error(ErrorCode::kInternal, "pipe2 failed");
  }

  const pid_t pid = ::fork();
  if (pid < 0) {
    ::close(err_pipe[0]);
    ::close(err_pipe[1]);
    throw Error(ErrorCode::kInternal, "fork failed");
  }
  if (pid == 0) {
    ::setpgid(0, 0);
    if (isolate_net) {
      // Best effort: needs unprivileged user namespaces.
      if (::unshare(CLONE_NEWUSER | CLONE_NEWNET) != 0) (void)::unshare(CLONE_NEWNET);
    }
    struct rlimit cpu{cpu_limit, cpu_limit};
    ::setrlimit(RLIMIT_CPU, &cpu);
    struct rlimit fsz{fsize_limit, fsize_limit};
    ::setrlimit(RLIMIT_FSIZE, &fsz);
    struct rlimit core{0, 0};
    ::setrlimit(RLIMIT_CORE, &core);
    if (::chdir(workdir_str.c_str()) != 0) ::_exit(126);
    int devnull = ::open("/dev/null", O_RDWR);
    ::dup2(devnull, STDIN_FILENO);
    ::dup2(devnull, STDOUT_FILENO);
    ::dup2(err_pipe[1], STDERR_FILENO);
    ::execve(argv[0], argv.data(), envp.data());
    ::_exit(127);
  }
  ::close(err_pipe[1]);
  ::setpgid(pid, pid);
  ::fcntl(err_pipe[0], F_SETFL, O_NONBLOCK);

  std::string stderr_buf;
  bool timed_out = false;
  int status = 0;
  bool exited = false;
  bool pipe_open = true;
  char chunk[4096];
  while (!exited) {
    if (pipe_open) {
      struct pollfd pfd{err_pipe[0], POLLIN, 0};
      ::poll(&pfd, 1, 10);
      for (;;) {
        ssize_t n = ::read(err_pipe[0], chunk, sizeof(chunk));
        if (n > 0) {
          if (stderr_buf.size() < kStderrExcerptBytes) {
            stderr_buf.append(chunk, static_cast<std::size_t>(
                                         std::min<ssize_t>(n, kStderrExcerptBytes - stderr_buf.size())));
          }
          continue;
        }
        if (n == 0) pipe_open = false;
        break;
      }
    } else {
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    pid_t w = ::waitpid(pid, &status, WNOHANG);
    if (w == pid) {
      exited = true;
      break;
    }
    if (std::chrono::steady_clock::now() >= deadline) {
      ::kill(-pid, SIGKILL);
      ::kill(pid, SIGKILL);
      ::waitpid(pid, &status, 0);
      timed_out = true;
      exited = true;
    }
  }
  // Drain what is left without blocking.
  for (;;) {
    ssize_t n = ::read(err_pipe[0], chunk, sizeof(chunk));
    if (n <= 0) break;
    if (stderr_buf.size() < kStderrExcerptBytes) {
      stderr_buf.append(chunk, static_cast<std::size_t>(
                                   std::min<ssize_t>(n, kStderrExcerptBytes - stderr_buf.size())));
    }
  }
  ::close(err_pipe[0]);
  // Stray grandchildren die with the group.
  ::kill(-pid, SIGKILL);

  RenderResult result;
  result.stderr_excerpt = sanitize_utf8(stderr_buf);
  if (timed_out) {
    result.status = RenderStatus::kTimeout;
    if (result.stderr_excerpt.empty()) {
      result.stderr_excerpt = "render exceeded timeout of " + std::to_string(cfg_.timeout_s) + " s";
    }
  } else if (WIFEXITED(status) && WEXITSTATUS(status) == 0) {
    const fs::path capture = workdir.path / std::string(kCaptureFile);
    std::error_code fec;
    const auto size = fs::file_size(capture, fec);
    if (fec || size == 0) {
      result.status = RenderStatus::kOutputMissing;
    } else if (size > cfg_.max_output_bytes) {
      result.status = RenderStatus::kOutputMissing;
      result.stderr_excerpt += "\ncaptured image exceeds max_output_bytes";
    } else {
      try {
        auto bytes = read_bytes(capture);
        std::string sha = sha256_hex(bytes);
        result.image = make_chart_image("render-" + sha.substr(0, 16), std::move(bytes),
                                        ImageFormat::kPng, cfg_.max_output_bytes);
        result.status = RenderStatus::kSuccess;
        if (cfg_.capture_format == CaptureFormat::kSvg) {
          auto svg = read_bytes(workdir.path / std::string(kCaptureVectorFile));
          if (!svg.empty()) result.svg = std::string(svg.begin(), svg.end());
        }
      } catch (const Error& e) {
        result.status = RenderStatus::kOutputMissing;
        result.stderr_excerpt += std::string("\ncaptured image rejected: ") + e.what();
      }
    }
  } else {
    result.status = RenderStatus::kCodeError;
    if (WIFSIGNALED(status)) {
      result.stderr_excerpt += "\nterminated by signal " + std::to_string(WTERMSIG(status));
    } else if (WIFEXITED(status) && WEXITSTATUS(status) == 127) {
      result.stderr_excerpt += "\ninterpreter could not be executed";
    }
    if (result.stderr_excerpt.empty()) result.stderr_excerpt = "interpreter exited with an error";
  }
  if (result.stderr_excerpt.size() > kStderrExcerptBytes) {
    result.stderr_excerpt.resize(kStderrExcerptBytes);
  }
  result.duration_ms = clock_.monotonic_ms() - started_ms;
  return result;
}

}  // namespace chart_refinery
