#pragma once

#include <atomic>
#include <chrono>
#include <deque>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "kcmp/backends.hpp"
#include "kcmp/error.hpp"

namespace fakes {

/// Counts invocations and answers through a user-supplied function.
class CountingBackend : public kcmp::ModelBackend {
 public:
  using Handler = std::function<kcmp::BackendResponse(const kcmp::BackendRequest&)>;
  explicit CountingBackend(Handler handler, std::chrono::milliseconds delay = std::chrono::milliseconds(0))
      : handler_(std::move(handler)), delay_(delay) {}

  kcmp::BackendResponse invoke(const kcmp::BackendRequest& request) override {
    calls_.fetch_add(1);
    {
      std::lock_guard lock(mutex_);
      requests_.push_back(request);
    }
    if (delay_.count() > 0) std::this_thread::sleep_for(delay_);
    return handler_(request);
  }
  std::string backend_id() const override { return "counting"; }

  int calls() const { return calls_.load(); }
  std::vector<kcmp::BackendRequest> requests() const {
    std::lock_guard lock(mutex_);
    return requests_;
  }

 private:
  Handler handler_;
  std::chrono::milliseconds delay_;
  std::atomic<int> calls_{0};
  mutable std::mutex mutex_;
  std::vector<kcmp::BackendRequest> requests_;
};

inline kcmp::BackendResponse text(std::string t) {
  kcmp::BackendResponse r;
  r.text = std::move(t);
  return r;
}

inline kcmp::BackendResponse vec(std::vector<double> v) {
  kcmp::BackendResponse r;
  r.vector = std::move(v);
  return r;
}

/// Replies from a fixed script, one entry per call, repeating the last.
inline CountingBackend::Handler scripted(std::vector<std::string> replies) {
  auto state = std::make_shared<std::pair<std::mutex, std::deque<std::string>>>();
  state->second.assign(replies.begin(), replies.end());
  return [state](const kcmp::BackendRequest&) {
    std::lock_guard lock(state->first);
    auto t = state->second.front();
    if (state->second.size() > 1) state->second.pop_front();
    return text(t);
  };
}

inline std::shared_ptr<kcmp::ModelClient> client(std::shared_ptr<kcmp::ModelBackend> backend) {
  return std::make_shared<kcmp::ModelClient>(std::move(backend), std::make_shared<kcmp::ResponseCache>(),
                                             kcmp::RetryPolicy{3, std::chrono::milliseconds(1)});
}

}  // namespace fakes
