#include "kcmp/backends.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <thread>

#include "kcmp/encoding.hpp"
#include "kcmp/error.hpp"

namespace kcmp {

using nlohmann::json;

std::string_view role_name(Role role) {
  switch (role) {
    case Role::segmenter: return "segmenter";
    case Role::captioner: return "captioner";
    case Role::generator: return "generator";
    case Role::reasoner: return "reasoner";
    case Role::embedder: return "embedder";
    case Role::target: return "target";
  }
  return "unknown";
}

Role parse_role(std::string_view name) {
  for (Role r : {Role::segmenter, Role::captioner, Role::generator, Role::reasoner, Role::embedder,
                 Role::target})
    if (role_name(r) == name) return r;
  throw InvalidInput("unknown backend role '" + std::string(name) + "'");
}

// ---- requests --------------------------------------------------------------

json BackendRequest::canonical_json() const {
  json j;  // nlohmann::json objects keep keys sorted
  j["role"] = role_name(role);
  j["model"] = model;
  j["instruction"] = instruction;
  j["image_sha256"] = image_png.empty() ? "" : sha256_hex(image_png);
  j["temperature"] = temperature;
  j["max_tokens"] = max_tokens;
  j["nonce"] = nonce;
  return j;
}

std::string BackendRequest::canonical() const { return canonical_json().dump(); }

std::string BackendRequest::cache_key() const { return sha256_hex(canonical()); }

BackendRequest BackendRequest::from_json(const json& j) {
  BackendRequest r;
  r.role = parse_role(j.at("role").get<std::string>());
  r.model = j.value("model", "");
  r.instruction = j.value("instruction", "");
  if (j.contains("image_base64")) r.image_png = base64_decode(j.at("image_base64").get<std::string>());
  r.temperature = j.value("temperature", 0.0);
  r.max_tokens = j.value("max_tokens", 256);
  r.nonce = j.value("nonce", 0u);
  return r;
}

// ---- responses -------------------------------------------------------------

void BackendResponse::validate_for(Role role) const {
  const int populated = int(text.has_value()) + int(vector.has_value()) + int(masks.has_value());
  if (populated != 1)
    throw ProtocolError("response must carry exactly one of text/vector/masks for role " +
                        std::string(role_name(role)));
  switch (role) {
    case Role::segmenter:
      if (!masks) throw ProtocolError("segmenter response carries no masks");
      for (const auto& m : *masks)
        if (m.width <= 0 || m.height <= 0) throw ProtocolError("segmenter mask has no dimensions");
      break;
    case Role::embedder:
      if (!vector || vector->empty()) throw ProtocolError("embedder response carries no vector");
      break;
    default:
      if (!text) throw ProtocolError(std::string(role_name(role)) + " response carries no text");
  }
}

json BackendResponse::to_json() const {
  json j;
  if (text) j["text"] = *text;
  if (vector) j["vector"] = *vector;
  if (masks) {
    json arr = json::array();
    for (const auto& m : *masks) {
      json mj{{"width", m.width}, {"height", m.height}, {"rle", m.rle}};
      if (m.label) mj["label"] = *m.label;
      arr.push_back(std::move(mj));
    }
    j["masks"] = std::move(arr);
  }
  j["usage"] = {{"prompt_tokens", usage.prompt_tokens}, {"completion_tokens", usage.completion_tokens}};
  j["latency_ms"] = latency_ms;
  return j;
}

BackendResponse BackendResponse::from_json(const json& j) {
  BackendResponse r;
  if (j.contains("text")) r.text = j.at("text").get<std::string>();
  if (j.contains("vector")) r.vector = j.at("vector").get<std::vector<double>>();
  if (j.contains("masks")) {
    r.masks.emplace();
    for (const auto& mj : j.at("masks")) {
      MaskPayload m;
      m.width = mj.at("width").get<int>();
      m.height = mj.at("height").get<int>();
      m.rle = mj.at("rle").get<std::vector<std::uint32_t>>();
      if (mj.contains("label")) m.label = mj.at("label").get<std::string>();
      r.masks->push_back(std::move(m));
    }
  }
  if (j.contains("usage")) {
    r.usage.prompt_tokens = j["usage"].value("prompt_tokens", 0);
    r.usage.completion_tokens = j["usage"].value("completion_tokens", 0);
  }
  r.latency_ms = j.value("latency_ms", 0.0);
  return r;
}

// ---- cache -----------------------------------------------------------------

ResponseCache::ResponseCache(std::optional<std::filesystem::path> dir) : dir_(std::move(dir)) {
  if (dir_) std::filesystem::create_directories(*dir_);
}

std::optional<BackendResponse> ResponseCache::get(const std::string& key) const {
  {
    std::shared_lock lock(mutex_);
    if (auto it = memory_.find(key); it != memory_.end()) return it->second;
  }
  if (!dir_) return std::nullopt;
  const auto path = *dir_ / (key + ".json");
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) return std::nullopt;
  const auto entry = json::parse(read_file(path));
  auto response = BackendResponse::from_json(entry.at("response"));
  std::unique_lock lock(mutex_);
  memory_.emplace(key, response);
  return response;
}

void ResponseCache::put(const std::string& key, const BackendResponse& response,
                        const std::string& backend_id) {
  {
    std::unique_lock lock(mutex_);
    if (!memory_.emplace(key, response).second) return;
  }
  if (!dir_) return;
  const auto path = *dir_ / (key + ".json");
  std::error_code ec;
  if (std::filesystem::exists(path, ec)) return;
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  json entry{{"key", key}, {"backend_id", backend_id}, {"created_at", stamp},
             {"response", response.to_json()}};
  write_file_atomic(path, entry.dump());
  std::lock_guard lock(index_mutex_);
  std::ofstream index(*dir_ / "index.jsonl", std::ios::app);
  index << json{{"key", key}, {"backend_id", backend_id}, {"created_at", stamp}}.dump() << '\n';
}

std::size_t ResponseCache::size() const {
  std::shared_lock lock(mutex_);
  return memory_.size();
}

// ---- client ----------------------------------------------------------------

ModelClient::ModelClient(std::shared_ptr<ModelBackend> backend, std::shared_ptr<ResponseCache> cache,
                         RetryPolicy retry)
    : backend_(std::move(backend)),
      cache_(cache ? std::move(cache) : std::make_shared<ResponseCache>()),
      retry_(retry) {
  if (!backend_) throw InvalidInput("ModelClient needs a backend");
  backend_id_ = backend_->backend_id();
}

BackendResponse ModelClient::query(BackendRequest request) {
  if (request.model.empty()) request.model = backend_id_;
  const auto key = request.cache_key();
  if (auto hit = cache_->get(key)) {
    cache_hits_.fetch_add(1);
    return *hit;
  }

  std::promise<BackendResponse> promise;
  std::shared_future<BackendResponse> future;
  bool leader = false;
  {
    std::lock_guard lock(inflight_mutex_);
    if (auto it = inflight_.find(key); it != inflight_.end()) {
      future = it->second;
    } else {
      // Re-check under the lock: a leader may have finished between our cache
      // miss and here.
      if (auto hit = cache_->get(key)) {
        cache_hits_.fetch_add(1);
        return *hit;
      }
      future = promise.get_future().share();
      inflight_.emplace(key, future);
      leader = true;
    }
  }
  if (!leader) {
    cache_hits_.fetch_add(1);
    return future.get();
  }

  try {
    auto response = fetch(request, key);
    cache_->put(key, response, backend_id_);
    promise.set_value(response);
    std::lock_guard lock(inflight_mutex_);
    inflight_.erase(key);
    return response;
  } catch (...) {
    promise.set_exception(std::current_exception());
    std::lock_guard lock(inflight_mutex_);
    inflight_.erase(key);
    throw;
  }
}

BackendResponse ModelClient::fetch(const BackendRequest& request, const std::string& key) {
  auto delay = retry_.base_delay;
  for (int attempt = 1;; ++attempt) {
    try {
      upstream_calls_.fetch_add(1);
      const auto start = std::chrono::steady_clock::now();
      auto response = backend_->invoke(request);
      if (response.latency_ms == 0.0)
        response.latency_ms = std::chrono::duration<double, std::milli>(
                                  std::chrono::steady_clock::now() - start)
                                  .count();
      response.validate_for(request.role);
      return response;
    } catch (const TransientBackendError& e) {
      if (attempt >= retry_.max_attempts)
        throw BackendError(std::string("retries exhausted: ") + e.what(), e.status(), key);
      std::this_thread::sleep_for(delay);
      delay *= 2;
    } catch (const BackendError& e) {
      if (e.request_key().empty()) throw BackendError(e.what(), e.status(), key);
      throw;
    }
  }
}

ModelClient& Backends::for_role(Role role) const {
  const std::shared_ptr<ModelClient>* slot = nullptr;
  switch (role) {
    case Role::segmenter: slot = &segmenter; break;
    case Role::captioner: slot = &captioner; break;
    case Role::generator: slot = &generator; break;
    case Role::reasoner: slot = &reasoner; break;
    case Role::embedder: slot = &embedder; break;
    case Role::target: slot = &target; break;
  }
  if (!slot || !*slot) throw InvalidInput("no backend configured for role " + std::string(role_name(role)));
  return **slot;
}

}  // namespace kcmp
