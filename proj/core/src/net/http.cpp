#include "critter/net/http.hpp"

#include <httplib.h>

#include "critter/util/error.hpp"

namespace critter::net {

ParsedUrl parse_url(std::string_view url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos) throw InvalidArgument("URL has no scheme: " + std::string(url));
  const std::string_view scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") throw InvalidArgument("unsupported URL scheme: " + std::string(url));
  const auto path_start = url.find('/', scheme_end + 3);
  ParsedUrl out;
  if (path_start == std::string_view::npos) {
    out.scheme_host_port = std::string(url);
    out.path = "/";
  } else {
    out.scheme_host_port = std::string(url.substr(0, path_start));
    out.path = std::string(url.substr(path_start));
  }
  if (out.scheme_host_port.size() <= scheme_end + 3) throw InvalidArgument("URL has no host: " + std::string(url));
  return out;
}

HttpResponse http_post(const ServiceEndpoint& endpoint, std::string_view body, std::string_view content_type) {
  const ParsedUrl url = parse_url(endpoint.url);
  httplib::Client client(url.scheme_host_port);
  const auto seconds = static_cast<time_t>(endpoint.timeout_seconds);
  const auto micros = static_cast<time_t>((endpoint.timeout_seconds - static_cast<double>(seconds)) * 1e6);
  client.set_connection_timeout(seconds, micros);
  client.set_read_timeout(seconds, micros);
  client.set_write_timeout(seconds, micros);
  if (!endpoint.auth_token.empty()) client.set_bearer_token_auth(endpoint.auth_token);

  auto result = client.Post(url.path, std::string(body), std::string(content_type));
  if (!result) {
    throw TransportError("POST " + endpoint.url + " failed: " + httplib::to_string(result.error()));
  }
  HttpResponse response{result->status, result->get_header_value("Content-Type"), result->body};
  if (response.status < 200 || response.status >= 300) {
    throw TransportError("POST " + endpoint.url + " returned HTTP " + std::to_string(response.status) + ": " +
                         response.body.substr(0, 200));
  }
  return response;
}

}  // namespace critter::net
