#pragma once

#include <chrono>
#include <string>

namespace mags {

// "http://host:port/some/path" split into the part cpp-httplib's Client
// takes and the request path.
struct Endpoint {
  std::string base;  // scheme://host[:port]
  std::string path;  // always starts with '/'
};

// Throws ConfigError for anything that is not an http(s) URL.
Endpoint parse_endpoint(const std::string& url);

struct WireOptions {
  std::chrono::milliseconds timeout{30000};
  // Sent as "Authorization: Bearer <key>" when non-empty.
  std::string api_key;
};

}  // namespace mags
