#include "mags/core/endpoint.hpp"

#include "mags/core/errors.hpp"

namespace mags {

Endpoint parse_endpoint(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("endpoint is not a URL: \"" + url + "\"", "endpoint");
  const auto scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw ConfigError("unsupported endpoint scheme \"" + scheme + "\"", "endpoint");
  }
  const auto path_start = url.find('/', scheme_end + 3);
  Endpoint e;
  if (path_start == std::string::npos) {
    e.base = url;
    e.path = "/";
  } else {
    e.base = url.substr(0, path_start);
    e.path = url.substr(path_start);
  }
  if (e.base.size() <= scheme_end + 3) throw ConfigError("endpoint has no host: \"" + url + "\"", "endpoint");
  return e;
}

}  // namespace mags
