#pragma once

// HTTP client for an out-of-process encoding service. One JSON request per
// call; see BackendRequest/BackendReply for the wire schema.

#include <memory>
#include <string>
#include <utility>

#include "httplib.h"
#include "json.hpp"
#include "t1/protocol.hpp"

namespace t1 {

struct Endpoint {
  std::string base;  // scheme://host[:port]
  std::string path;  // "/" when absent
};

inline Endpoint parse_endpoint(const std::string& url) {
  const auto scheme = url.find("://");
  require(scheme != std::string::npos, Errc::kInvalidInput,
          "endpoint '" + url + "' must look like http://host:port/path");
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

class RemoteBackend final : public Backend {
 public:
  explicit RemoteBackend(std::string endpoint, int timeout_seconds = 60)
      : endpoint_(parse_endpoint(endpoint)), timeout_seconds_(timeout_seconds) {}

  BackendReply complete(const BackendRequest& request) const override {
    // httplib::Client is not thread-safe; one per call keeps this const method reentrant.
    httplib::Client client(endpoint_.base);
    client.set_connection_timeout(timeout_seconds_);
    client.set_read_timeout(timeout_seconds_);
    auto res = client.Post(endpoint_.path, to_json(request).dump(), "application/json");
    if (!res) {
      fail(Errc::kTransport, "request to " + endpoint_.base + endpoint_.path + " failed: " +
                                 httplib::to_string(res.error()));
    }
    if (res->status != 200) {
      fail(Errc::kTransport, "backend answered HTTP " + std::to_string(res->status));
    }
    try {
      return reply_from_json(nlohmann::json::parse(res->body));
    } catch (const nlohmann::json::exception& e) {
      fail(Errc::kTransport, std::string("malformed backend reply: ") + e.what());
    }
  }

 private:
  Endpoint endpoint_;
  int timeout_seconds_;
};

inline std::unique_ptr<Backend> make_backend(const BackendDescriptor& desc) {
  require(desc.max_reasoning_tokens > 0, Errc::kInvalidInput, "max_reasoning_tokens must be positive");
  if (desc.kind == BackendKind::kRemoteService) {
    require(!desc.endpoint.empty(), Errc::kInvalidInput, "remote backend needs an endpoint");
    return std::make_unique<RemoteBackend>(desc.endpoint);
  }
  return std::make_unique<MockBackend>(desc.seed, desc.dim);
}

}  // namespace t1
