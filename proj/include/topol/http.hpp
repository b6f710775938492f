#pragma once

#include <chrono>
#include <map>
#include <string>
#include <string_view>

namespace topol::http {

struct Url {
  std::string scheme;  // "http" or "https"
  std::string host;
  int port = 0;
  std::string path;  // includes leading '/'
};

Url parse_url(std::string_view url);

struct Response {
  int status = 0;       // 0 when the request never completed
  std::string body;
  std::string error;    // transport error text when status == 0
  bool ok() const noexcept { return status >= 200 && status < 300; }
};

/// POST a JSON body. Never throws on transport failure; inspect the response.
Response post_json(const Url& url, const std::string& body, const std::map<std::string, std::string>& headers,
                   std::chrono::milliseconds timeout);

/// Whether a failed response is worth retrying (transport errors, 408, 429, 5xx).
bool retryable(const Response& r) noexcept;

/// Bearer header from the named environment variable; empty map when unset or name empty.
std::map<std::string, std::string> bearer_from_env(const std::string& env_var);

}  // namespace topol::http
