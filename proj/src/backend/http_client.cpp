#include "chart_refinery/backend/http_client.hpp"

#include <httplib.h>

#include <cmath>
#include <cstdlib>
#include <regex>

#include "chart_refinery/error.hpp"

namespace chart_refinery {
namespace {

void set_timeouts(httplib::Client& cli, double timeout_s) {
  const auto secs = static_cast<time_t>(std::floor(timeout_s));
  const auto usecs = static_cast<time_t>((timeout_s - std::floor(timeout_s)) * 1e6);
  cli.set_connection_timeout(secs, usecs);
  cli.set_read_timeout(secs, usecs);
  cli.set_write_timeout(secs, usecs);
}

}  // namespace

std::string Endpoint::origin() const {
  return scheme + "://" + host + ":" + std::to_string(port);
}

Endpoint parse_endpoint(const std::string& url) {
  static const std::regex kUrl(R"(^(https?)://([A-Za-z0-9._\-]+|\[[0-9A-Fa-f:.]+\])(?::(\d{1,5}))?(/[^\s]*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, kUrl)) {
    throw Error(ErrorCode::kInvalidConfig, "invalid endpoint URL: " + url);
  }
  Endpoint ep;
  ep.scheme = m[1];
  ep.host = m[2];
  ep.port = m[3].matched ? std::stoi(m[3]) : (ep.scheme == "https" ? 443 : 80);
  ep.path = m[4].matched ? std::string(m[4]) : "/";
  if (ep.port <= 0 || ep.port > 65535) {
    throw Error(ErrorCode::kInvalidConfig, "invalid port in endpoint URL: " + url);
  }
  return ep;
}

HttpJsonClient::HttpJsonClient(const std::string& url, double timeout_s,
                               std::map<std::string, std::string> headers)
    : endpoint_(parse_endpoint(url)), timeout_s_(timeout_s), headers_(std::move(headers)) {}

nlohmann::json HttpJsonClient::post(const nlohmann::json& body) const {
  httplib::Client cli(endpoint_.origin());
  set_timeouts(cli, timeout_s_);
  httplib::Headers headers;
  for (const auto& [k, v] : headers_) headers.emplace(k, v);
  auto res = cli.Post(endpoint_.path, headers, body.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace), "application/json");
  if (!res) {
    const auto err = res.error();
    const std::string where = endpoint_.origin() + endpoint_.path;
    if (err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout) {
      throw Error(ErrorCode::kBackendTimeout, "backend timed out: " + where,
                  {{"endpoint", where}, {"transport_error", httplib::to_string(err)}});
    }
    throw Error(ErrorCode::kBackendUnreachable, "backend unreachable: " + where,
                {{"endpoint", where}, {"transport_error", httplib::to_string(err)}});
  }
  if (res->status < 200 || res->status >= 300) {
    throw Error(ErrorCode::kBackendFailure,
                "backend returned HTTP " + std::to_string(res->status),
                {{"status", res->status}, {"body", res->body.substr(0, 512)}}, res->status);
  }
  auto parsed = nlohmann::json::parse(res->body, nullptr, false);
  if (parsed.is_discarded()) {
    throw Error(ErrorCode::kBackendFailure, "backend response is not JSON",
                {{"body", res->body.substr(0, 512)}}, res->status);
  }
  return parsed;
}

bool probe_reachable(const std::string& url, double timeout_s) {
  try {
    Endpoint ep = parse_endpoint(url);
    httplib::Client cli(ep.origin());
    set_timeouts(cli, timeout_s);
    return static_cast<bool>(cli.Get("/"));
  } catch (...) {
    return false;
  }
}

std::map<std::string, std::string> auth_headers_from_env(const std::string* env_name) {
  std::map<std::string, std::string> h;
  if (env_name) {
    if (const char* v = std::getenv(env_name->c_str()); v && *v) {
      h["Authorization"] = std::string("Bearer ") + v;
    }
  }
  return h;
}

}  // namespace chart_refinery
