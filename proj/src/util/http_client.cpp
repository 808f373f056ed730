#include <httplib.h>

#include <chrono>
#include <cstdlib>
#include <thread>

#include "svgsmith/error.hpp"
#include "svgsmith/http_client.hpp"

namespace svgsmith::util {
namespace {

struct Url {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Url split_url(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos || (url.compare(0, scheme, "http") != 0 && url.compare(0, scheme, "https") != 0))
    throw ConfigError("endpoint URL must start with http:// or https:// (got \"" + url + "\")");
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

}  // namespace

HttpResponse http_post(const std::string& url, const std::string& body, const std::string& content_type,
                       const std::map<std::string, std::string>& headers, const HttpPolicy& policy) {
  const Url u = split_url(url);
  httplib::Client client(u.origin);
  const auto secs = std::chrono::duration<double>(policy.timeout_s);
  const auto us = std::chrono::duration_cast<std::chrono::microseconds>(secs).count();
  client.set_connection_timeout(us / 1000000, us % 1000000);
  client.set_read_timeout(us / 1000000, us % 1000000);
  client.set_write_timeout(us / 1000000, us % 1000000);
  httplib::Headers h;
  for (const auto& [k, v] : headers) h.emplace(k, v);

  std::string last_error;
  int delay = policy.backoff_ms;
  for (int attempt = 0; attempt <= policy.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(delay));
      delay *= 2;
    }
    auto res = client.Post(u.path, h, body, content_type);
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    return {res->status, res->body, res->get_header_value("Content-Type")};
  }
  throw TransportError("request to " + url + " failed after " + std::to_string(policy.max_retries + 1) +
                       " attempts: " + last_error);
}

std::string env_or_empty(const char* name) {
  const char* v = std::getenv(name);
  return v ? std::string(v) : std::string();
}

}  // namespace svgsmith::util
