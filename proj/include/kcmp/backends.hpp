#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

namespace kcmp {

enum class Role { segmenter, captioner, generator, reasoner, embedder, target };

std::string_view role_name(Role role);
Role parse_role(std::string_view name);

/// One call to an external model. Everything that can change the answer is
/// part of the canonical form, including `nonce`, which distinguishes
/// intentionally repeated queries (repeats, rationality trials, refills).
struct BackendRequest {
  Role role = Role::target;
  std::string model;        // backend/model identifier; filled by ModelClient when empty
  std::string instruction;  // textual instruction Z (or the text to embed)
  std::string image_png;    // raw PNG bytes, empty when the request is text-only
  double temperature = 0.0;
  int max_tokens = 256;
  std::uint32_t nonce = 0;

  /// Sorted keys, shortest round-trip floats, image replaced by its SHA-256.
  nlohmann::json canonical_json() const;
  std::string canonical() const;
  /// SHA-256 of canonical().
  std::string cache_key() const;

  /// Accepts the canonical layout plus `image_base64` for inline images.
  static BackendRequest from_json(const nlohmann::json& j);
};

struct MaskPayload {
  int width = 0;
  int height = 0;
  std::vector<std::uint32_t> rle;
  std::optional<std::string> label;
};

struct Usage {
  int prompt_tokens = 0;
  int completion_tokens = 0;
};

struct BackendResponse {
  std::optional<std::string> text;
  std::optional<std::vector<double>> vector;
  std::optional<std::vector<MaskPayload>> masks;
  Usage usage;
  double latency_ms = 0.0;

  /// Exactly one payload kind, and the one the role calls for.
  void validate_for(Role role) const;

  nlohmann::json to_json() const;
  static BackendResponse from_json(const nlohmann::json& j);
};

/// Something that can answer requests: HTTP endpoint, simulator, test double.
class ModelBackend {
 public:
  virtual ~ModelBackend() = default;
  virtual BackendResponse invoke(const BackendRequest& request) = 0;
  virtual std::string backend_id() const = 0;
};

/// Content-addressed response store. Memory-only when constructed without a
/// directory; otherwise `{dir}/{key}.json` plus an append-only `index.jsonl`.
/// Entries are immutable: a second put for a key is ignored.
class ResponseCache {
 public:
  explicit ResponseCache(std::optional<std::filesystem::path> dir = std::nullopt);

  std::optional<BackendResponse> get(const std::string& key) const;
  void put(const std::string& key, const BackendResponse& response, const std::string& backend_id);
  std::size_t size() const;

 private:
  std::optional<std::filesystem::path> dir_;
  mutable std::shared_mutex mutex_;
  mutable std::unordered_map<std::string, BackendResponse> memory_;
  std::mutex index_mutex_;
};

struct RetryPolicy {
  int max_attempts = 4;
  std::chrono::milliseconds base_delay{250};
};

/// Cached, retrying, single-flight front for one backend. Shareable across
/// threads: concurrent misses on the same key wait for one upstream call.
class ModelClient {
 public:
  ModelClient(std::shared_ptr<ModelBackend> backend, std::shared_ptr<ResponseCache> cache,
              RetryPolicy retry = {});

  BackendResponse query(BackendRequest request);

  std::uint64_t upstream_calls() const noexcept { return upstream_calls_.load(); }
  std::uint64_t cache_hits() const noexcept { return cache_hits_.load(); }
  const std::string& backend_id() const noexcept { return backend_id_; }
  ModelBackend& backend() noexcept { return *backend_; }

 private:
  BackendResponse fetch(const BackendRequest& request, const std::string& key);

  std::shared_ptr<ModelBackend> backend_;
  std::shared_ptr<ResponseCache> cache_;
  RetryPolicy retry_;
  std::string backend_id_;
  std::mutex inflight_mutex_;
  std::map<std::string, std::shared_future<BackendResponse>> inflight_;
  std::atomic<std::uint64_t> upstream_calls_{0};
  std::atomic<std::uint64_t> cache_hits_{0};
};

/// One client per model role. Roles may share a client.
struct Backends {
  std::shared_ptr<ModelClient> segmenter;
  std::shared_ptr<ModelClient> captioner;
  std::shared_ptr<ModelClient> generator;
  std::shared_ptr<ModelClient> reasoner;
  std::shared_ptr<ModelClient> embedder;
  std::shared_ptr<ModelClient> target;

  ModelClient& for_role(Role role) const;
};

}  // namespace kcmp
