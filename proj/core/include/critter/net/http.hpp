#pragma once

#include <string>
#include <string_view>

namespace critter::net {

/// Where and how to reach an external service.
struct ServiceEndpoint {
  std::string url;         // full URL including path, http:// or https://
  std::string model;       // model name forwarded in request bodies
  std::string auth_token;  // bearer token, empty for none
  double timeout_seconds = 60.0;
};

struct HttpResponse {
  int status = 0;
  std::string content_type;
  std::string body;
};

struct ParsedUrl {
  std::string scheme_host_port;  // e.g. "https://api.example.com:8443"
  std::string path;              // at least "/"
};

/// Splits a URL into origin and path. Throws InvalidArgument for anything
/// other than http(s).
ParsedUrl parse_url(std::string_view url);

/// POSTs `body` and returns the response. Throws TransportError when the
/// connection fails or the status is not 2xx.
HttpResponse http_post(const ServiceEndpoint& endpoint, std::string_view body, std::string_view content_type);

}  // namespace critter::net

#include <condition_variable>
#include <cstddef>
#include <mutex>

namespace critter::net {

/// Caps the number of concurrent requests a client issues. Callers hold a
/// Permit for the duration of one request.
class RequestGate {
 public:
  explicit RequestGate(std::size_t max_in_flight) : cap_(max_in_flight == 0 ? 1 : max_in_flight) {}

  class Permit {
   public:
    explicit Permit(RequestGate& gate) : gate_(gate) { gate_.acquire(); }
    ~Permit() { gate_.release(); }
    Permit(const Permit&) = delete;
    Permit& operator=(const Permit&) = delete;

   private:
    RequestGate& gate_;
  };

  std::size_t capacity() const { return cap_; }

 private:
  void acquire() {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [&] { return used_ < cap_; });
    ++used_;
  }
  void release() {
    {
      std::lock_guard lock(mutex_);
      --used_;
    }
    cv_.notify_one();
  }

  std::size_t cap_;
  std::size_t used_ = 0;
  std::mutex mutex_;
  std::condition_variable cv_;
};

}  // namespace critter::net
