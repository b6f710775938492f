#include "topol/http.hpp"

#include <httplib.h>

#include <cstdlib>

#include "topol/matrix.hpp"

namespace topol::http {

Url parse_url(std::string_view url) {
  Url out;
  auto sep = url.find("://");
  if (sep == std::string_view::npos) throw InvalidArgument("URL lacks a scheme: " + std::string(url));
  out.scheme = std::string(url.substr(0, sep));
  if (out.scheme != "http" && out.scheme != "https")
    throw InvalidArgument("unsupported URL scheme: " + out.scheme);
  auto rest = url.substr(sep + 3);
  auto slash = rest.find('/');
  auto authority = rest.substr(0, slash);
  out.path = slash == std::string_view::npos ? "/" : std::string(rest.substr(slash));
  auto colon = authority.rfind(':');
  if (colon != std::string_view::npos) {
    out.host = std::string(authority.substr(0, colon));
    out.port = std::stoi(std::string(authority.substr(colon + 1)));
  } else {
    out.host = std::string(authority);
    out.port = out.scheme == "https" ? 443 : 80;
  }
  if (out.host.empty()) throw InvalidArgument("URL lacks a host: " + std::string(url));
  return out;
}

Response post_json(const Url& url, const std::string& body, const std::map<std::string, std::string>& headers,
                   std::chrono::milliseconds timeout) {
  httplib::Headers h;
  for (const auto& [k, v] : headers) h.emplace(k, v);
  auto run = [&](auto& client) {
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    Response out;
    if (auto res = client.Post(url.path, h, body, "application/json")) {
      out.status = res->status;
      out.body = res->body;
    } else {
      out.error = httplib::to_string(res.error());
    }
    return out;
  };
  if (url.scheme == "https") {
    httplib::SSLClient client(url.host, url.port);
    return run(client);
  }
  httplib::Client client(url.host, url.port);
  return run(client);
}

bool retryable(const Response& r) noexcept {
  return r.status == 0 || r.status == 408 || r.status == 429 || r.status >= 500;
}

std::map<std::string, std::string> bearer_from_env(const std::string& env_var) {
  if (env_var.empty()) return {};
  const char* token = std::getenv(env_var.c_str());
  if (!token || !*token) return {};
  return {{"Authorization", std::string("Bearer ") + token}};
}

}  // namespace topol::http
