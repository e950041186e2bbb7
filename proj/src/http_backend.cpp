#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "kcmp/http_backend.hpp"

#include <cstdlib>
#include <thread>

#include "kcmp/encoding.hpp"
#include "kcmp/error.hpp"

namespace kcmp {

using nlohmann::json;

namespace {

std::string env_or(const char* name, const std::string& fallback) {
  const char* v = std::getenv(name);
  return (v && *v) ? std::string(v) : fallback;
}

std::string upper(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

std::string png_data_url(const std::string& png) { return "data:image/png;base64," + base64_encode(png); }

}  // namespace

HttpEndpoint endpoint_from_env(Role role) {
  HttpEndpoint ep;
  ep.base_url = env_or("KCMP_API_BASE", "https://api.openai.com");
  ep.api_key = env_or("KCMP_API_KEY", "");
  const std::string model_var = "KCMP_" + upper(role_name(role)) + "_MODEL";
  ep.model = env_or(model_var.c_str(), role == Role::embedder ? "text-embedding-3-small" : "gpt-4o");
  return ep;
}

json chat_completion_body(const BackendRequest& request, const std::string& model) {
  json content = json::array();
  content.push_back({{"type", "text"}, {"text", request.instruction}});
  if (!request.image_png.empty())
    content.push_back({{"type", "image_url"}, {"image_url", {{"url", png_data_url(request.image_png)}}}});
  return json{{"model", model},
              {"temperature", request.temperature},
              {"max_tokens", request.max_tokens},
              {"messages", json::array({{{"role", "user"}, {"content", std::move(content)}}})}};
}

json embedding_body(const BackendRequest& request, const std::string& model) {
  json body{{"model", model}};
  if (request.image_png.empty())
    body["input"] = request.instruction;
  else
    body["input"] = json::array({{{"type", "image_url"}, {"image_url", {{"url", png_data_url(request.image_png)}}}}});
  return body;
}

json segment_body(const BackendRequest& request, const std::string& model) {
  return json{{"model", model}, {"image", png_data_url(request.image_png)}};
}

BackendResponse parse_http_reply(Role role, const json& reply) {
  BackendResponse out;
  try {
    switch (role) {
      case Role::embedder:
        out.vector = reply.at("data").at(0).at("embedding").get<std::vector<double>>();
        break;
      case Role::segmenter: {
        out.masks.emplace();
        for (const auto& m : reply.at("masks")) {
          MaskPayload mask;
          mask.width = m.at("width").get<int>();
          mask.height = m.at("height").get<int>();
          mask.rle = m.at("rle").get<std::vector<std::uint32_t>>();
          if (m.contains("label") && m["label"].is_string()) mask.label = m["label"].get<std::string>();
          out.masks->push_back(std::move(mask));
        }
        break;
      }
      default: {
        const auto& content = reply.at("choices").at(0).at("message").at("content");
        if (content.is_string()) {
          out.text = content.get<std::string>();
        } else {
          std::string text;
          for (const auto& part : content)
            if (part.value("type", "") == "text") text += part.value("text", "");
          out.text = text;
        }
      }
    }
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("unexpected reply shape: ") + e.what());
  }
  if (reply.contains("usage")) {
    out.usage.prompt_tokens = reply["usage"].value("prompt_tokens", 0);
    out.usage.completion_tokens = reply["usage"].value("completion_tokens", 0);
  }
  return out;
}

HttpBackend::HttpBackend(HttpEndpoint endpoint) : endpoint_(std::move(endpoint)) {
  const auto& url = endpoint_.base_url;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw InvalidInput("base URL needs a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  scheme_host_port_ = url.substr(0, path_start);
  path_prefix_ = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
}

std::string HttpBackend::backend_id() const { return "http:" + endpoint_.model; }

void HttpBackend::throttle() {
  if (endpoint_.requests_per_minute <= 0) return;
  std::chrono::steady_clock::time_point slot;
  {
    std::lock_guard lock(throttle_mutex_);
    const auto now = std::chrono::steady_clock::now();
    slot = std::max(now, next_slot_);
    next_slot_ = slot + std::chrono::microseconds(60'000'000 / endpoint_.requests_per_minute);
  }
  std::this_thread::sleep_until(slot);
}

BackendResponse HttpBackend::invoke(const BackendRequest& request) {
  throttle();
  std::string path;
  json body;
  switch (request.role) {
    case Role::embedder:
      path = "/v1/embeddings";
      body = embedding_body(request, endpoint_.model);
      break;
    case Role::segmenter:
      path = "/v1/segment";
      body = segment_body(request, endpoint_.model);
      break;
    default:
      path = "/v1/chat/completions";
      body = chat_completion_body(request, endpoint_.model);
  }

  httplib::Client client(scheme_host_port_);
  client.set_connection_timeout(endpoint_.timeout_seconds);
  client.set_read_timeout(endpoint_.timeout_seconds);
  httplib::Headers headers;
  if (!endpoint_.api_key.empty()) headers.emplace("Authorization", "Bearer " + endpoint_.api_key);

  auto res = client.Post(path_prefix_ + path, headers, body.dump(), "application/json");
  if (!res) throw TransientBackendError("transport error: " + httplib::to_string(res.error()));
  if (res->status == 429 || res->status >= 500)
    throw TransientBackendError("HTTP " + std::to_string(res->status), res->status);
  if (res->status < 200 || res->status >= 300)
    throw BackendError("HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200), res->status);

  json reply;
  try {
    reply = json::parse(res->body);
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("reply is not JSON: ") + e.what());
  }
  return parse_http_reply(request.role, reply);
}

}  // namespace kcmp
