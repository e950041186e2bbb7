#pragma once

#include <chrono>
#include <mutex>
#include <string>

#include <nlohmann/json.hpp>

#include "kcmp/backends.hpp"

namespace kcmp {

struct HttpEndpoint {
  std::string base_url;  // scheme://host[:port][/prefix]
  std::string api_key;
  std::string model;
  int requests_per_minute = 0;  // 0 disables throttling
  int timeout_seconds = 120;
};

/// Reads KCMP_API_BASE, KCMP_API_KEY and KCMP_<ROLE>_MODEL.
HttpEndpoint endpoint_from_env(Role role);

/// Body for POST {base}/v1/chat/completions.
nlohmann::json chat_completion_body(const BackendRequest& request, const std::string& model);
/// Body for POST {base}/v1/embeddings. Image inputs are sent as a PNG data URL.
nlohmann::json embedding_body(const BackendRequest& request, const std::string& model);
/// Body for POST {base}/v1/segment.
nlohmann::json segment_body(const BackendRequest& request, const std::string& model);

/// Extracts the payload a role needs from the provider's JSON reply.
BackendResponse parse_http_reply(Role role, const nlohmann::json& reply);

/// Chat-completions style HTTP(S) client. Segmenter requests go to
/// `/v1/segment` and expect `{"masks":[{"width","height","rle",["label"]}]}`.
class HttpBackend final : public ModelBackend {
 public:
  explicit HttpBackend(HttpEndpoint endpoint);

  BackendResponse invoke(const BackendRequest& request) override;
  std::string backend_id() const override;

 private:
  void throttle();

  HttpEndpoint endpoint_;
  std::string scheme_host_port_;
  std::string path_prefix_;
  std::mutex throttle_mutex_;
  std::chrono::steady_clock::time_point next_slot_{};
};

}  // namespace kcmp
