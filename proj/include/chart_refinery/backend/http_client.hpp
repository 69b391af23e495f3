#pragma once

#include <map>
#include <string>

#include <json.hpp>

namespace chart_refinery {

struct Endpoint {
  std::string scheme;  // http | https
  std::string host;
  int port = 0;
  std::string path;  // includes query, starts with '/'

  std::string origin() const;
};

// Throws InvalidConfig on anything that is not an absolute http(s) URL.
Endpoint parse_endpoint(const std::string& url);

// One POST of a JSON body, one attempt. Transport and status failures map to
// BackendUnreachable / BackendTimeout / BackendFailure (with http_status).
class HttpJsonClient {
 public:
  HttpJsonClient(const std::string& url, double timeout_s,
                 std::map<std::string, std::string> headers = {});

  nlohmann::json post(const nlohmann::json& body) const;

  const Endpoint& endpoint() const { return endpoint_; }

 private:
  Endpoint endpoint_;
  double timeout_s_;
  std::map<std::string, std::string> headers_;
};

// Best-effort reachability probe: true if anything answers at the origin.
bool probe_reachable(const std::string& url, double timeout_s);

// Adds "Authorization: Bearer $<env_name>" when that variable is set.
std::map<std::string, std::string> auth_headers_from_env(const std::string* env_name);

}  // namespace chart_refinery
