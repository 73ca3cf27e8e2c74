#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <string>

#include <json.hpp>

#include "lect/common.hpp"

namespace lect {

struct HttpResponse {
  int status = 0;  // 0 means the request never got a response
  std::string body;
  std::string error;
};

/// Minimal POST-JSON transport so the remote clients can be driven by a
/// real socket or by an in-process fake.
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse post(const std::string& url, const std::string& body,
                            const std::map<std::string, std::string>& headers) = 0;
};

struct Timeouts {
  std::chrono::milliseconds connect{2000};
  std::chrono::milliseconds read{60000};
};

/// cpp-httplib backed transport. Supports http:// and, when built with
/// OpenSSL, https:// URLs.
std::unique_ptr<HttpTransport> make_http_transport(Timeouts timeouts = {});

struct RetryPolicy {
  int max_retries = 3;
  std::chrono::milliseconds base_delay{200};
  std::chrono::milliseconds max_delay{5000};

  /// base_delay * 2^attempt, clamped to max_delay.
  std::chrono::milliseconds delay_for(int attempt) const;
};

/// Raised when a request still fails after all retries.
class HttpError : public Error {
 public:
  HttpError(const std::string& what, int status) : Error(what), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

/// Status codes that are worth retrying (network failure, 408, 429, 5xx).
bool is_transient(int status);

/// POSTs JSON with retry and exponential backoff. Non-transient statuses
/// fail immediately.
class JsonPostClient {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  JsonPostClient(std::shared_ptr<HttpTransport> transport, std::string url,
                 std::string bearer_token = {}, RetryPolicy policy = {},
                 Sleeper sleeper = {});

  nlohmann::json post(const nlohmann::json& payload) const;

  const std::string& url() const { return url_; }

 private:
  std::shared_ptr<HttpTransport> transport_;
  std::string url_;
  std::string token_;
  RetryPolicy policy_;
  Sleeper sleeper_;
};

}  // namespace lect
