#pragma once

// HTTP client for an external embedding service.
//
// Wire protocol (POST, JSON):
//   request  {"task": "consistency"|"coherence", "instruction": str, "query": str, "content": str}
//   response {"score": number}
// Network failures and 5xx replies are retried with exponential backoff; the
// reply score is clamped into [0, 1].

#include <chrono>
#include <string>
#include <string_view>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "commrl/error.hpp"
#include "commrl/similarity.hpp"

namespace commrl {

struct RemoteScorerOptions {
  std::string endpoint;  // e.g. http://127.0.0.1:8080/score
  int timeout_ms = 10000;
  int attempts = 3;
  int backoff_ms = 200;  // delay before the 2nd attempt; doubles afterwards
};

struct Endpoint {
  std::string base;  // scheme://host[:port]
  std::string path;
};

inline Endpoint split_endpoint(std::string_view url) {
  const auto scheme = url.find("://");
  if (scheme == std::string_view::npos) {
    throw Error(ErrorCode::invalid_config, "endpoint needs a scheme: " + std::string(url));
  }
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string_view::npos) return {std::string(url), "/"};
  return {std::string(url.substr(0, slash)), std::string(url.substr(slash))};
}

class RemoteScorer final : public Scorer {
 public:
  explicit RemoteScorer(RemoteScorerOptions options)
      : options_(std::move(options)), endpoint_(split_endpoint(options_.endpoint)) {
    if (options_.attempts < 1) throw Error(ErrorCode::invalid_config, "attempts must be >= 1");
  }

  SimilarityScore score(const ScorerTask& task, std::string_view query,
                        std::string_view content) const override {
    const nlohmann::json request = {
        {"task", to_string(task.kind)},
        {"instruction", task.instruction},
        {"query", query},
        {"content", content},
    };
    const std::string body = request.dump();

    std::string last_failure = "no attempt made";
    int delay_ms = options_.backoff_ms;
    for (int attempt = 1; attempt <= options_.attempts; ++attempt) {
      if (attempt > 1) {
        std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
        delay_ms *= 2;
      }
      httplib::Client client(endpoint_.base);
      const auto timeout = std::chrono::milliseconds(options_.timeout_ms);
      client.set_connection_timeout(timeout);
      client.set_read_timeout(timeout);
      client.set_write_timeout(timeout);

      const auto result = client.Post(endpoint_.path, body, "application/json");
      if (!result) {
        last_failure = "transport error: " + httplib::to_string(result.error());
        continue;
      }
      if (result->status >= 500) {
        last_failure = "server returned " + std::to_string(result->status);
        continue;
      }
      if (result->status != 200) {
        throw Error(ErrorCode::backend_unavailable,
                    "scorer returned status " + std::to_string(result->status));
      }
      return parse_reply(result->body);
    }
    throw Error(ErrorCode::backend_unavailable, options_.endpoint + " after " +
                                                    std::to_string(options_.attempts) +
                                                    " attempts (" + last_failure + ")");
  }

  static SimilarityScore parse_reply(std::string_view body) {
    const auto reply = nlohmann::json::parse(body, nullptr, /*allow_exceptions=*/false);
    if (reply.is_discarded() || !reply.is_object()) {
      throw Error(ErrorCode::malformed_reply, "reply is not a JSON object");
    }
    const auto it = reply.find("score");
    if (it == reply.end() || !it->is_number()) {
      throw Error(ErrorCode::malformed_reply, "reply lacks numeric \"score\"");
    }
    return SimilarityScore(it->get<double>());
  }

  const RemoteScorerOptions& options() const { return options_; }

 private:
  RemoteScorerOptions options_;
  Endpoint endpoint_;
};

}  // namespace commrl
