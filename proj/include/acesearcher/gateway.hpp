#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "acesearcher/common.hpp"
#include "acesearcher/domain.hpp"

namespace acesearcher {

struct GenerationParams {
  double temperature = 0.0;
  int max_tokens = 256;
  int num_samples = 1;
  std::optional<std::int64_t> seed;

  /// num_samples >= 1, temperature >= 0, greedy decoding implies one sample.
  void validate() const;
};

struct HttpRequest {
  std::string url;
  std::vector<std::pair<std::string, std::string>> headers;
  std::string body;
  std::chrono::milliseconds timeout{120000};
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

/// Thrown by transports when no HTTP response was obtained (connect failure,
/// timeout). Always retried.
class TransportError : public Error {
 public:
  explicit TransportError(const std::string& message) : Error(ErrorCode::request, message) {}
};

/// The seam between the gateway and the wire. Implementations must be safe to
/// call from several threads at once.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpResponse post(const HttpRequest& request) = 0;
};

/// Real HTTP(S) via cpp-httplib.
class HttpTransport final : public Transport {
 public:
  HttpResponse post(const HttpRequest& request) override;
};

/// Scripted responses for tests and offline runs. Each rule matches when the
/// last message content contains `needle`; the first matching rule answers,
/// handing out its responses in order and repeating the last one once
/// exhausted. Unmatched requests get HTTP 400.
class MockTransport final : public Transport {
 public:
  using Responder = std::function<HttpResponse(const nlohmann::json& request)>;

  MockTransport& on(std::string needle, std::vector<std::string> completions);
  /// Full control: the responder sees the parsed request body.
  MockTransport& respond_with(Responder responder);

  HttpResponse post(const HttpRequest& request) override;

  std::vector<HttpRequest> requests() const;
  std::size_t request_count() const;

 private:
  struct Rule {
    std::string needle;
    std::vector<std::string> completions;
    std::size_t next = 0;
  };
  mutable std::mutex mutex_;
  std::vector<Rule> rules_;
  Responder responder_;
  std::vector<HttpRequest> log_;
};

/// Builds a chat-completion response body holding `completions` as choices.
std::string make_completion_body(const std::vector<std::string>& completions);

/// Appends one `{request, response}` line per exchange to a transcript file.
class RecordingTransport final : public Transport {
 public:
  RecordingTransport(std::shared_ptr<Transport> inner, const std::filesystem::path& transcript);
  HttpResponse post(const HttpRequest& request) override;

 private:
  std::shared_ptr<Transport> inner_;
  std::mutex mutex_;
  std::ofstream out_;
};

/// Serves responses from a transcript. Requests are matched on their
/// canonical JSON body; identical bodies are served in recorded order.
/// A request absent from the transcript yields HTTP 404.
class ReplayTransport final : public Transport {
 public:
  explicit ReplayTransport(const std::filesystem::path& transcript);
  HttpResponse post(const HttpRequest& request) override;

 private:
  std::mutex mutex_;
  std::map<std::string, std::vector<HttpResponse>> responses_;
  std::map<std::string, std::size_t> cursor_;
};

struct GatewayOptions {
  std::string endpoint_url = "http://127.0.0.1:8000/v1";
  std::string model_name = "acesearcher";
  std::string api_key;  // empty: no Authorization header
  int max_retries = 3;
  std::chrono::milliseconds backoff_base{500};
  std::chrono::milliseconds timeout{120000};
  int max_concurrency = 8;

  /// Reads the key from the environment variable named by api_key_env.
  static GatewayOptions from_config(const RunConfig& config);
};

/// Chat-completion client. Retries transport failures, HTTP 429 and 5xx with
/// exponential backoff (base, 2*base, 4*base, ...). 401/403 fail immediately.
/// At most `max_concurrency` requests are in flight; extra callers block.
class Gateway {
 public:
  Gateway(GatewayOptions options, std::shared_ptr<Transport> transport);

  std::vector<std::string> complete(const std::string& prompt, const GenerationParams& params);

  const GatewayOptions& options() const noexcept { return options_; }

  /// URL requests are posted to: the endpoint itself when it already ends in
  /// /chat/completions, otherwise the endpoint with that suffix appended.
  std::string completions_url() const;

  /// The JSON body sent for `prompt`; exposed for replay tooling and tests.
  nlohmann::json request_body(const std::string& prompt, const GenerationParams& params) const;

 private:
  class Slot;
  void acquire();
  void release();

  GatewayOptions options_;
  std::shared_ptr<Transport> transport_;
  std::mutex mutex_;
  std::condition_variable cv_;
  int in_flight_ = 0;
};

}  // namespace acesearcher
