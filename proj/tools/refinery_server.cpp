#include <CLI11.hpp>

#include <csignal>
#include <iostream>

#include "chart_refinery/backend/backends.hpp"
#include "chart_refinery/config.hpp"
#include "chart_refinery/pipeline.hpp"
#include "chart_refinery/service/service.hpp"

namespace {
chart_refinery::Service* g_service = nullptr;

void handle_signal(int) {
  if (g_service) g_service->stop();
}
}  // namespace

int main(int argc, char** argv) {
  using namespace chart_refinery;
  CLI::App app{"Chart refinery HTTP service", "refinery-server"};
  std::string config_path, host, store, ui_dir;
  int port = -1;
  app.add_option("--config", config_path, "JSON config file (default: $CHART_REFINERY_CONFIG)");
  app.add_option("--host", host, "Bind address (default from config)");
  app.add_option("--port", port, "Port, 0 for any free port (default from config)");
  app.add_option("--store", store, "Session store directory");
  app.add_option("--ui-dir", ui_dir, "Built web UI assets served under /ui/");
  CLI11_PARSE(app, argc, argv);

  try {
    AppConfig cfg = resolve_config(config_path.empty() ? std::nullopt
                                                       : std::optional<std::filesystem::path>(config_path));
    if (!host.empty()) cfg.service.host = host;
    if (port >= 0) cfg.service.port = port;
    if (!store.empty()) cfg.store_root = store;
    if (!ui_dir.empty()) cfg.service.ui_dir = ui_dir;

    Pipeline pipeline(cfg, make_backends(cfg));
    Service service(pipeline);
    const int bound = service.bind(cfg.service.host, cfg.service.port);
    if (bound < 0) {
      std::cerr << "error: cannot bind " << cfg.service.host << '\n';
      return 1;
    }
    g_service = &service;
    std::signal(SIGINT, handle_signal);
    std::signal(SIGTERM, handle_signal);
    std::cout << "listening on http://" << cfg.service.host << ':' << bound << std::endl;
    service.listen_after_bind();
    g_service = nullptr;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << " [" << to_string(e.code()) << "]\n";
    return 1;
  }
  return 0;
}
