#include "lect/http_client.hpp"

#include <algorithm>
#include <thread>

#include <httplib.h>

namespace lect {

namespace {

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

ParsedUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw Error("malformed URL (no scheme): " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

class HttplibTransport final : public HttpTransport {
 public:
  explicit HttplibTransport(Timeouts timeouts) : timeouts_(timeouts) {}

  HttpResponse post(const std::string& url, const std::string& body,
                    const std::map<std::string, std::string>& headers) override {
    const ParsedUrl parsed = split_url(url);
    httplib::Client client(parsed.origin);
    if (!client.is_valid()) return {0, {}, "unsupported URL " + url};
    client.set_connection_timeout(timeouts_.connect);
    client.set_read_timeout(timeouts_.read);
    client.set_write_timeout(timeouts_.read);
    httplib::Headers hdrs;
    for (const auto& [k, v] : headers) hdrs.emplace(k, v);
    auto result = client.Post(parsed.path, hdrs, body, "application/json");
    if (!result) return {0, {}, httplib::to_string(result.error())};
    return {result->status, result->body, {}};
  }

 private:
  Timeouts timeouts_;
};

}  // namespace

std::unique_ptr<HttpTransport> make_http_transport(Timeouts timeouts) {
  return std::make_unique<HttplibTransport>(timeouts);
}

std::chrono::milliseconds RetryPolicy::delay_for(int attempt) const {
  auto delay = base_delay;
  for (int i = 0; i < attempt && delay < max_delay; ++i) delay *= 2;
  return std::min(delay, max_delay);
}

bool is_transient(int status) {
  return status == 0 || status == 408 || status == 429 || status >= 500;
}

JsonPostClient::JsonPostClient(std::shared_ptr<HttpTransport> transport, std::string url,
                               std::string bearer_token, RetryPolicy policy, Sleeper sleeper)
    : transport_(std::move(transport)),
      url_(std::move(url)),
      token_(std::move(bearer_token)),
      policy_(policy),
      sleeper_(std::move(sleeper)) {
  if (!transport_) throw Error("JsonPostClient: null transport");
  if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

nlohmann::json JsonPostClient::post(const nlohmann::json& payload) const {
  std::map<std::string, std::string> headers;
  if (!token_.empty()) headers["Authorization"] = "Bearer " + token_;
  const std::string body = payload.dump();

  HttpResponse last;
  for (int attempt = 0;; ++attempt) {
    last = transport_->post(url_, body, headers);
    if (last.status >= 200 && last.status < 300) break;
    if (!is_transient(last.status) || attempt >= policy_.max_retries) {
      std::string msg = "POST " + url_ + " failed";
      msg += last.status == 0 ? " (" + last.error + ")" : " with HTTP " + std::to_string(last.status);
      msg += " after " + std::to_string(attempt + 1) + " attempt(s)";
      throw HttpError(msg, last.status);
    }
    sleeper_(policy_.delay_for(attempt));
  }
  try {
    return nlohmann::json::parse(last.body);
  } catch (const nlohmann::json::parse_error& e) {
    throw HttpError("POST " + url_ + ": response is not JSON: " + e.what(), last.status);
  }
}

}  // namespace lect
