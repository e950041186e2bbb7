#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <gtest/gtest.h>

#include <atomic>
#include <thread>

#include "kcmp/backends.hpp"
#include "kcmp/encoding.hpp"
#include "kcmp/error.hpp"
#include "kcmp/http_backend.hpp"

using namespace kcmp;
using nlohmann::json;

namespace {

// Local stand-in for a chat-completions provider.
class FakeProvider {
 public:
  FakeProvider() {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      calls_.fetch_add(1);
      last_body_ = req.body;
      last_auth_ = req.get_header_value("Authorization");
      if (fail_first_.exchange(0) > 0) {
        res.status = 503;
        return;
      }
      if (status_ != 200) {
        res.status = status_;
        res.set_content("{\"error\":\"nope\"}", "application/json");
        return;
      }
      res.set_content(R"({"choices":[{"message":{"role":"assistant","content":"B. plate"}}],
                          "usage":{"prompt_tokens":11,"completion_tokens":2}})",
                      "application/json");
    });
    server_.Post("/v1/embeddings", [this](const httplib::Request& req, httplib::Response& res) {
      last_body_ = req.body;
      res.set_content(R"({"data":[{"embedding":[0.5,0.25,-1]}]})", "application/json");
    });
    server_.Post("/v1/segment", [this](const httplib::Request& req, httplib::Response& res) {
      last_body_ = req.body;
      res.set_content(R"({"masks":[{"width":2,"height":2,"rle":[1,2,1],"label":"cup"}]})", "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeProvider() {
    server_.stop();
    thread_.join();
  }

  HttpEndpoint endpoint() const {
    return HttpEndpoint{"http://127.0.0.1:" + std::to_string(port_), "test-key", "fake-model", 0, 10};
  }

  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
  std::atomic<int> calls_{0};
  std::atomic<int> fail_first_{0};
  int status_ = 200;
  std::string last_body_;
  std::string last_auth_;
};

BackendRequest target_request() {
  BackendRequest r;
  r.role = Role::target;
  r.instruction = "Which option?";
  r.image_png = "PNGDATA";
  r.temperature = 0.3;
  return r;
}

}  // namespace

TEST(HttpWire, ChatCompletionBodyShape) {
  const auto body = chat_completion_body(target_request(), "m");
  EXPECT_EQ(body["model"], "m");
  EXPECT_EQ(body["temperature"], 0.3);
  const auto& content = body["messages"][0]["content"];
  EXPECT_EQ(body["messages"][0]["role"], "user");
  EXPECT_EQ(content[0]["type"], "text");
  EXPECT_EQ(content[0]["text"], "Which option?");
  EXPECT_EQ(content[1]["type"], "image_url");
  EXPECT_EQ(content[1]["image_url"]["url"], "data:image/png;base64," + base64_encode("PNGDATA"));
}

TEST(HttpWire, RoundTripAgainstLocalServer) {
  FakeProvider provider;
  HttpBackend backend(provider.endpoint());
  const auto r = backend.invoke(target_request());
  EXPECT_EQ(*r.text, "B. plate");
  EXPECT_EQ(r.usage.prompt_tokens, 11);
  EXPECT_EQ(provider.last_auth_, "Bearer test-key");
  const auto sent = json::parse(provider.last_body_);
  EXPECT_EQ(sent["model"], "fake-model");
  EXPECT_EQ(sent["messages"][0]["content"][1]["image_url"]["url"],
            "data:image/png;base64," + base64_encode("PNGDATA"));
}

TEST(HttpWire, TrueIndexNeverSent) {
  FakeProvider provider;
  HttpBackend backend(provider.endpoint());
  backend.invoke(target_request());
  EXPECT_EQ(provider.last_body_.find("true_index"), std::string::npos);
}

TEST(HttpWire, EmbeddingsAndSegment) {
  FakeProvider provider;
  HttpBackend backend(provider.endpoint());
  BackendRequest e;
  e.role = Role::embedder;
  e.instruction = "a red cup";
  EXPECT_EQ(*backend.invoke(e).vector, (std::vector<double>{0.5, 0.25, -1}));
  EXPECT_EQ(json::parse(provider.last_body_)["input"], "a red cup");

  BackendRequest s;
  s.role = Role::segmenter;
  s.image_png = "IMG";
  const auto masks = backend.invoke(s).masks;
  ASSERT_TRUE(masks);
  EXPECT_EQ((*masks)[0].rle, (std::vector<std::uint32_t>{1, 2, 1}));
  EXPECT_EQ(*(*masks)[0].label, "cup");
}

TEST(HttpWire, TransientThenSuccessThroughClient) {
  FakeProvider provider;
  provider.fail_first_ = 1;
  ModelClient client(std::make_shared<HttpBackend>(provider.endpoint()), std::make_shared<ResponseCache>(),
                     RetryPolicy{3, std::chrono::milliseconds(1)});
  EXPECT_EQ(*client.query(target_request()).text, "B. plate");
  EXPECT_EQ(provider.calls_.load(), 2);
}

TEST(HttpWire, PermanentErrorCarriesStatus) {
  FakeProvider provider;
  provider.status_ = 401;
  ModelClient client(std::make_shared<HttpBackend>(provider.endpoint()), std::make_shared<ResponseCache>(),
                     RetryPolicy{3, std::chrono::milliseconds(1)});
  try {
    client.query(target_request());
    FAIL();
  } catch (const BackendError& e) {
    EXPECT_EQ(e.status(), 401);
    EXPECT_EQ(e.request_key().size(), 64u);
  }
  EXPECT_EQ(provider.calls_.load(), 1);
}

TEST(HttpWire, ConnectionRefusedIsTransient) {
  HttpBackend backend(HttpEndpoint{"http://127.0.0.1:1", "", "m", 0, 1});
  EXPECT_THROW(backend.invoke(target_request()), TransientBackendError);
}

TEST(HttpWire, EnvironmentEndpoint) {
  ::setenv("KCMP_API_BASE", "http://example.invalid:9", 1);
  ::setenv("KCMP_API_KEY", "k", 1);
  ::setenv("KCMP_CAPTIONER_MODEL", "cap-model", 1);
  const auto ep = endpoint_from_env(Role::captioner);
  EXPECT_EQ(ep.base_url, "http://example.invalid:9");
  EXPECT_EQ(ep.api_key, "k");
  EXPECT_EQ(ep.model, "cap-model");
  ::unsetenv("KCMP_API_BASE");
  ::unsetenv("KCMP_API_KEY");
  ::unsetenv("KCMP_CAPTIONER_MODEL");
}

TEST(HttpWire, MalformedReplyIsProtocolError) {
  EXPECT_THROW(parse_http_reply(Role::target, json{{"oops", 1}}), ProtocolError);
}
