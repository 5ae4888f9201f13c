#include <gtest/gtest.h>

#include <atomic>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "commrl/remote_scorer.hpp"

namespace commrl {
namespace {

// In-process scoring service on an ephemeral port.
class FakeService {
 public:
  using Handler = std::function<void(const nlohmann::json&, httplib::Response&)>;

  explicit FakeService(Handler handler) : handler_(std::move(handler)) {
    server_.Post("/score", [this](const httplib::Request& req, httplib::Response& res) {
      ++hits_;
      last_request_ = nlohmann::json::parse(req.body, nullptr, false);
      handler_(last_request_, res);
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~FakeService() {
    server_.stop();
    thread_.join();
  }

  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_) + "/score"; }
  int hits() const { return hits_; }
  const nlohmann::json& last_request() const { return last_request_; }

 private:
  Handler handler_;
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
  std::atomic<int> hits_{0};
  nlohmann::json last_request_;
};

RemoteScorerOptions fast(const std::string& endpoint) {
  return {endpoint, /*timeout_ms=*/2000, /*attempts=*/3, /*backoff_ms=*/5};
}

TEST(RemoteScorer, PassesScoreThroughAndSendsProtocolFields) {
  FakeService svc([](const nlohmann::json&, httplib::Response& res) {
    res.set_content(R"({"score": 0.83})", "application/json");
  });
  const RemoteScorer scorer(fast(svc.endpoint()));
  EXPECT_EQ(scorer.score(ScorerTask::consistency(), "q text", "c text").value(), 0.83);
  const auto& req = svc.last_request();
  EXPECT_EQ(req.at("task"), "consistency");
  EXPECT_EQ(req.at("instruction"), ScorerTask::consistency().instruction);
  EXPECT_EQ(req.at("query"), "q text");
  EXPECT_EQ(req.at("content"), "c text");

  scorer.score(ScorerTask::coherence(), "a", "b");
  EXPECT_EQ(svc.last_request().at("task"), "coherence");
}

TEST(RemoteScorer, ClampsOutOfRangeScores) {
  FakeService svc([](const nlohmann::json&, httplib::Response& res) {
    res.set_content(R"({"score": 1.7})", "application/json");
  });
  EXPECT_EQ(RemoteScorer(fast(svc.endpoint())).score(ScorerTask::coherence(), "a", "b").value(), 1.0);
}

TEST(RemoteScorer, RetriesServerErrorsThenSucceeds) {
  std::atomic<int> calls{0};
  FakeService svc([&](const nlohmann::json&, httplib::Response& res) {
    if (++calls < 3) {
      res.status = 503;
      return;
    }
    res.set_content(R"({"score": 0.25})", "application/json");
  });
  EXPECT_EQ(RemoteScorer(fast(svc.endpoint())).score(ScorerTask::coherence(), "a", "b").value(), 0.25);
  EXPECT_EQ(svc.hits(), 3);
}

TEST(RemoteScorer, PersistentServerErrorIsBackendUnavailableAfterThreeAttempts) {
  FakeService svc([](const nlohmann::json&, httplib::Response& res) { res.status = 500; });
  try {
    RemoteScorer(fast(svc.endpoint())).score(ScorerTask::coherence(), "a", "b");
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::backend_unavailable);
  }
  EXPECT_EQ(svc.hits(), 3);
}

TEST(RemoteScorer, UnreachableServiceIsBackendUnavailable) {
  const RemoteScorer scorer(fast("http://127.0.0.1:1/score"));  // nothing listens on port 1
  try {
    scorer.score(ScorerTask::consistency(), "a", "b");
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::backend_unavailable);
    EXPECT_NE(std::string(e.what()).find("3 attempts"), std::string::npos);
  }
}

TEST(RemoteScorer, SchemaViolationsAreMalformedReplies) {
  for (const char* body : {R"({"value": 0.5})", R"({"score": "high"})", "not json", "[0.5]"}) {
    FakeService svc([body](const nlohmann::json&, httplib::Response& res) { res.set_content(body, "application/json"); });
    try {
      RemoteScorer(fast(svc.endpoint())).score(ScorerTask::consistency(), "a", "b");
      FAIL() << "expected an error for " << body;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::malformed_reply) << body;
    }
    EXPECT_EQ(svc.hits(), 1) << body;
  }
}

TEST(RemoteScorer, EndpointParsing) {
  EXPECT_EQ(split_endpoint("http://h:9/x/y").base, "http://h:9");
  EXPECT_EQ(split_endpoint("http://h:9/x/y").path, "/x/y");
  EXPECT_EQ(split_endpoint("http://h:9").path, "/");
  EXPECT_THROW(split_endpoint("h:9/x"), Error);
}

}  // namespace
}  // namespace commrl
