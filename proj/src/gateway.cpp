#include "acesearcher/gateway.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "acesearcher/common.hpp"

namespace acesearcher {

using nlohmann::json;

void GenerationParams::validate() const {
  if (num_samples < 1) throw Error(ErrorCode::invalid_argument, "num_samples must be at least 1");
  if (temperature < 0.0) throw Error(ErrorCode::invalid_argument, "temperature must be non-negative");
  if (temperature == 0.0 && num_samples != 1)
    throw Error(ErrorCode::invalid_argument, "greedy decoding (temperature 0) allows one sample only");
  if (max_tokens < 1) throw Error(ErrorCode::invalid_argument, "max_tokens must be positive");
}

// ---------------------------------------------------------------------------
// HttpTransport

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

SplitUrl split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos)
    throw Error(ErrorCode::invalid_argument, "endpoint URL lacks a scheme: " + url);
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

HttpResponse HttpTransport::post(const HttpRequest& request) {
  auto [origin, path] = split_url(request.url);
  httplib::Client client(origin);
  if (!client.is_valid()) throw Error(ErrorCode::invalid_argument, "unsupported endpoint: " + origin);
  const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(request.timeout);
  const auto micros = std::chrono::duration_cast<std::chrono::microseconds>(request.timeout - seconds);
  client.set_connection_timeout(seconds.count(), micros.count());
  client.set_read_timeout(seconds.count(), micros.count());
  client.set_write_timeout(seconds.count(), micros.count());

  httplib::Headers headers;
  std::string content_type = "application/json";
  for (const auto& [name, value] : request.headers) {
    if (name == "Content-Type")
      content_type = value;
    else
      headers.emplace(name, value);
  }
  auto result = client.Post(path, headers, request.body, content_type);
  if (!result) throw TransportError("request to " + request.url + " failed: " + httplib::to_string(result.error()));
  return HttpResponse{result->status, result->body};
}

// ---------------------------------------------------------------------------
// MockTransport

std::string make_completion_body(const std::vector<std::string>& completions) {
  json choices = json::array();
  for (std::size_t i = 0; i < completions.size(); ++i) {
    choices.push_back({{"index", i},
                       {"message", {{"role", "assistant"}, {"content", completions[i]}}},
                       {"finish_reason", "stop"}});
  }
  return json{{"object", "chat.completion"}, {"choices", std::move(choices)}}.dump();
}

MockTransport& MockTransport::on(std::string needle, std::vector<std::string> completions) {
  std::lock_guard lock(mutex_);
  rules_.push_back(Rule{std::move(needle), std::move(completions), 0});
  return *this;
}

MockTransport& MockTransport::respond_with(Responder responder) {
  std::lock_guard lock(mutex_);
  responder_ = std::move(responder);
  return *this;
}

HttpResponse MockTransport::post(const HttpRequest& request) {
  std::lock_guard lock(mutex_);
  log_.push_back(request);
  json body = json::parse(request.body, nullptr, false);
  if (body.is_discarded()) return {400, R"({"error":"malformed request"})"};
  std::string content;
  if (body.contains("messages") && !body["messages"].empty())
    content = body["messages"].back().value("content", "");
  const int n = body.value("n", 1);

  for (auto& rule : rules_) {
    if (content.find(rule.needle) == std::string::npos || rule.completions.empty()) continue;
    std::vector<std::string> out;
    for (int i = 0; i < n; ++i) {
      std::size_t at = std::min(rule.next, rule.completions.size() - 1);
      out.push_back(rule.completions[at]);
      if (rule.next < rule.completions.size()) ++rule.next;
    }
    return {200, make_completion_body(out)};
  }
  if (responder_) return responder_(body);
  return {400, R"({"error":"no scripted response"})"};
}

std::vector<HttpRequest> MockTransport::requests() const {
  std::lock_guard lock(mutex_);
  return log_;
}

std::size_t MockTransport::request_count() const {
  std::lock_guard lock(mutex_);
  return log_.size();
}

// ---------------------------------------------------------------------------
// Record / replay

namespace {
std::string canonical_body(const std::string& body) {
  json parsed = json::parse(body, nullptr, false);
  return parsed.is_discarded() ? body : parsed.dump();
}
}  // namespace

RecordingTransport::RecordingTransport(std::shared_ptr<Transport> inner,
                                       const std::filesystem::path& transcript)
    : inner_(std::move(inner)), out_(transcript, std::ios::app) {
  if (!out_) throw Error(ErrorCode::io, "cannot write transcript '" + transcript.string() + "'");
}

HttpResponse RecordingTransport::post(const HttpRequest& request) {
  HttpResponse response = inner_->post(request);
  json record{{"request", json::parse(request.body, nullptr, false)},
              {"response", {{"status", response.status}, {"body", response.body}}}};
  std::lock_guard lock(mutex_);
  out_ << record.dump() << '\n';
  out_.flush();
  return response;
}

ReplayTransport::ReplayTransport(const std::filesystem::path& transcript) {
  std::ifstream in(transcript);
  if (!in) throw Error(ErrorCode::io, "cannot open transcript '" + transcript.string() + "'");
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    json record = json::parse(line, nullptr, false);
    if (record.is_discarded() || !record.contains("request") || !record.contains("response"))
      throw Error(ErrorCode::parse, transcript.string() + ":" + std::to_string(lineno) +
                                        ": malformed transcript record");
    const auto& resp = record["response"];
    responses_[record["request"].dump()].push_back(
        HttpResponse{resp.value("status", 0), resp.value("body", std::string{})});
  }
}

HttpResponse ReplayTransport::post(const HttpRequest& request) {
  std::lock_guard lock(mutex_);
  const std::string key = canonical_body(request.body);
  auto it = responses_.find(key);
  if (it == responses_.end()) return {404, R"({"error":"request not in transcript"})"};
  std::size_t& at = cursor_[key];
  const HttpResponse& response = it->second[std::min(at, it->second.size() - 1)];
  if (at < it->second.size()) ++at;
  return response;
}

// ---------------------------------------------------------------------------
// Gateway

GatewayOptions GatewayOptions::from_config(const RunConfig& config) {
  GatewayOptions options;
  options.endpoint_url = config.endpoint_url;
  options.model_name = config.model_name;
  if (const char* key = std::getenv(config.api_key_env.c_str())) options.api_key = key;
  options.max_retries = config.max_retries;
  options.timeout = std::chrono::milliseconds(static_cast<long long>(config.request_timeout_s * 1000.0));
  options.max_concurrency = config.max_concurrency;
  return options;
}

Gateway::Gateway(GatewayOptions options, std::shared_ptr<Transport> transport)
    : options_(std::move(options)), transport_(std::move(transport)) {
  if (!transport_) throw Error(ErrorCode::invalid_argument, "gateway needs a transport");
  if (options_.max_concurrency < 1) options_.max_concurrency = 1;
  if (options_.max_retries < 0) options_.max_retries = 0;
}

void Gateway::acquire() {
  std::unique_lock lock(mutex_);
  cv_.wait(lock, [this] { return in_flight_ < options_.max_concurrency; });
  ++in_flight_;
}

void Gateway::release() {
  {
    std::lock_guard lock(mutex_);
    --in_flight_;
  }
  cv_.notify_one();
}

class Gateway::Slot {
 public:
  explicit Slot(Gateway& gateway) : gateway_(gateway) { gateway_.acquire(); }
  ~Slot() { gateway_.release(); }
  Slot(const Slot&) = delete;
  Slot& operator=(const Slot&) = delete;

 private:
  Gateway& gateway_;
};

std::string Gateway::completions_url() const {
  constexpr std::string_view suffix = "/chat/completions";
  std::string url = options_.endpoint_url;
  if (url.size() >= suffix.size() && url.compare(url.size() - suffix.size(), suffix.size(), suffix) == 0)
    return url;
  while (!url.empty() && url.back() == '/') url.pop_back();
  return url + std::string(suffix);
}

json Gateway::request_body(const std::string& prompt, const GenerationParams& params) const {
  json body{{"model", options_.model_name},
            {"messages", json::array({json{{"role", "user"}, {"content", prompt}}})},
            {"temperature", params.temperature},
            {"n", params.num_samples},
            {"max_tokens", params.max_tokens}};
  if (params.seed) body["seed"] = *params.seed;
  return body;
}

namespace {

std::vector<std::string> parse_choices(const std::string& body, int expected) {
  json parsed = json::parse(body, nullptr, false);
  if (parsed.is_discarded() || !parsed.is_object())
    throw Error(ErrorCode::schema, "completion response is not a JSON object");
  auto choices = parsed.find("choices");
  if (choices == parsed.end() || !choices->is_array())
    throw Error(ErrorCode::schema, "completion response has no 'choices' array");

  std::vector<std::pair<std::int64_t, std::string>> indexed;
  std::int64_t position = 0;
  for (const auto& choice : *choices) {
    const json* content = nullptr;
    if (choice.contains("message") && choice["message"].contains("content"))
      content = &choice["message"]["content"];
    else if (choice.contains("text"))
      content = &choice["text"];
    if (!content || !content->is_string())
      throw Error(ErrorCode::schema, "completion choice has no text content");
    std::int64_t index = choice.contains("index") && choice["index"].is_number_integer()
                             ? choice["index"].get<std::int64_t>()
                             : position;
    indexed.emplace_back(index, content->get<std::string>());
    ++position;
  }
  std::stable_sort(indexed.begin(), indexed.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  if (static_cast<int>(indexed.size()) < expected)
    throw Error(ErrorCode::schema, "expected " + std::to_string(expected) + " choices, got " +
                                       std::to_string(indexed.size()));
  std::vector<std::string> out;
  for (int i = 0; i < expected; ++i) out.push_back(std::move(indexed[static_cast<std::size_t>(i)].second));
  return out;
}

}  // namespace

std::vector<std::string> Gateway::complete(const std::string& prompt, const GenerationParams& params) {
  params.validate();
  HttpRequest request;
  request.url = completions_url();
  request.headers.emplace_back("Content-Type", "application/json");
  if (!options_.api_key.empty()) request.headers.emplace_back("Authorization", "Bearer " + options_.api_key);
  request.body = request_body(prompt, params).dump();
  request.timeout = options_.timeout;

  Slot slot(*this);
  std::string last_failure;
  for (int attempt = 0; attempt <= options_.max_retries; ++attempt) {
    if (attempt > 0 && options_.backoff_base.count() > 0)
      std::this_thread::sleep_for(options_.backoff_base * (1LL << std::min(attempt - 1, 16)));
    HttpResponse response;
    try {
      response = transport_->post(request);
    } catch (const TransportError& e) {
      last_failure = e.what();
      continue;
    }
    if (response.status >= 200 && response.status < 300)
      return parse_choices(response.body, params.num_samples);
    if (response.status == 401 || response.status == 403)
      throw Error(ErrorCode::auth, "endpoint rejected credentials (HTTP " +
                                       std::to_string(response.status) + ")");
    if (response.status == 429 || response.status >= 500) {
      last_failure = "HTTP " + std::to_string(response.status);
      continue;
    }
    throw Error(ErrorCode::request, "endpoint returned HTTP " + std::to_string(response.status) +
                                        ": " + response.body.substr(0, 200));
  }
  throw Error(ErrorCode::retries_exhausted,
              "gave up after " + std::to_string(options_.max_retries) + " retries: " + last_failure);
}

}  // namespace acesearcher
