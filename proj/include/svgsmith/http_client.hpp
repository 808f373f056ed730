#pragma once

#include <map>
#include <string>

namespace svgsmith::util {

struct HttpPolicy {
  double timeout_s = 120.0;
  int max_retries = 2;   ///< extra attempts after the first
  int backoff_ms = 500;  ///< doubled after each failed attempt
};

struct HttpResponse {
  int status = 0;
  std::string body;
  std::string content_type;
};

/// POST with bounded retries on connection failures, 429 and 5xx. Other
/// statuses are returned to the caller; exhausting the retries throws
/// TransportError.
HttpResponse http_post(const std::string& url, const std::string& body, const std::string& content_type,
                       const std::map<std::string, std::string>& headers = {}, const HttpPolicy& policy = {});

/// Reads an environment variable; empty when unset.
std::string env_or_empty(const char* name);

}  // namespace svgsmith::util
