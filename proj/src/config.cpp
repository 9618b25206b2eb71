#include "acesearcher/config.hpp"

#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "acesearcher/common.hpp"

namespace acesearcher {

using nlohmann::json;

namespace {

using Setter = std::function<void(RunConfig&, const json&)>;

[[noreturn]] void wrong_type(std::string_view key, std::string_view expected) {
  throw Error(ErrorCode::invalid_argument, "config key '" + std::string(key) + "' expects " + std::string(expected));
}

Setter int_field(std::string_view key, int RunConfig::*member) {
  return [key = std::string(key), member](RunConfig& c, const json& v) {
    if (!v.is_number_integer()) wrong_type(key, "an integer");
    const auto x = v.get<long long>();
    if (x < INT32_MIN || x > INT32_MAX) wrong_type(key, "a 32-bit integer");
    c.*member = static_cast<int>(x);
  };
}

Setter double_field(std::string_view key, double RunConfig::*member) {
  return [key = std::string(key), member](RunConfig& c, const json& v) {
    if (!v.is_number()) wrong_type(key, "a number");
    c.*member = v.get<double>();
  };
}

Setter string_field(std::string_view key, std::string RunConfig::*member) {
  return [key = std::string(key), member](RunConfig& c, const json& v) {
    if (!v.is_string()) wrong_type(key, "a string");
    c.*member = v.get<std::string>();
  };
}

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = [] {
    std::map<std::string, Setter, std::less<>> t;
    t["endpoint_url"] = string_field("endpoint_url", &RunConfig::endpoint_url);
    t["model_name"] = string_field("model_name", &RunConfig::model_name);
    t["api_key_env"] = string_field("api_key_env", &RunConfig::api_key_env);
    t["k"] = int_field("k", &RunConfig::k);
    t["doc_budget_N"] = int_field("doc_budget_N", &RunConfig::doc_budget_N);
    t["m"] = int_field("m", &RunConfig::m);
    t["m_prime"] = int_field("m_prime", &RunConfig::m_prime);
    t["temperature_infer"] = double_field("temperature_infer", &RunConfig::temperature_infer);
    t["temperature_rollout"] = double_field("temperature_rollout", &RunConfig::temperature_rollout);
    t["max_subquestions"] = int_field("max_subquestions", &RunConfig::max_subquestions);
    t["beta"] = double_field("beta", &RunConfig::beta);
    t["seed"] = [](RunConfig& c, const json& v) {
      if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
        wrong_type("seed", "a non-negative integer");
      c.seed = v.get<std::uint64_t>();
    };
    t["max_tokens_subq"] = int_field("max_tokens_subq", &RunConfig::max_tokens_subq);
    t["max_tokens_final"] = int_field("max_tokens_final", &RunConfig::max_tokens_final);
    t["request_timeout_s"] = double_field("request_timeout_s", &RunConfig::request_timeout_s);
    t["max_concurrency"] = int_field("max_concurrency", &RunConfig::max_concurrency);
    t["max_retries"] = int_field("max_retries", &RunConfig::max_retries);
    t["bm25_k1"] = double_field("bm25_k1", &RunConfig::bm25_k1);
    t["bm25_b"] = double_field("bm25_b", &RunConfig::bm25_b);
    t["numeric_rel_tol"] = double_field("numeric_rel_tol", &RunConfig::numeric_rel_tol);
    t["reasoning_style"] = [](RunConfig& c, const json& v) {
      if (!v.is_string()) wrong_type("reasoning_style", "one of auto, pot, cot");
      try {
        c.reasoning_style = parse_reasoning_style(v.get<std::string>());
      } catch (const Error& e) {
        throw Error(ErrorCode::invalid_argument, e.what());
      }
    };
    return t;
  }();
  return table;
}

}  // namespace

void apply_config_value(RunConfig& config, std::string_view key, const json& value) {
  const auto& table = setters();
  auto it = table.find(key);
  if (it == table.end()) throw Error(ErrorCode::invalid_argument, "unknown config key '" + std::string(key) + "'");
  it->second(config, value);
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [key, _] : setters()) keys.push_back(key);
  return keys;
}

RunConfig parse_config(const std::optional<std::filesystem::path>& path, std::span<const std::string> overrides) {
  RunConfig config;
  if (path) {
    std::ifstream in(*path, std::ios::binary);
    if (!in) throw Error(ErrorCode::io, "cannot open config '" + path->string() + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    json doc = json::parse(buffer.str(), nullptr, false);
    if (doc.is_discarded() || !doc.is_object())
      throw Error(ErrorCode::parse, "config '" + path->string() + "' is not a JSON object");
    for (const auto& [key, value] : doc.items()) apply_config_value(config, key, value);
  }
  for (const auto& item : overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0)
      throw Error(ErrorCode::invalid_argument, "override '" + item + "' is not key=value");
    const std::string key = trim_copy(std::string_view(item).substr(0, eq));
    const std::string text = item.substr(eq + 1);
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded() || value.is_string()) {
      apply_config_value(config, key, json(text));
      continue;
    }
    try {
      apply_config_value(config, key, value);
    } catch (const Error&) {
      // model_name=123 and the like: fall back to the literal text
      apply_config_value(config, key, json(text));
    }
  }
  config.validate();
  return config;
}

json config_to_json(const RunConfig& c) {
  return json{{"endpoint_url", c.endpoint_url},
              {"model_name", c.model_name},
              {"api_key_env", c.api_key_env},
              {"k", c.k},
              {"doc_budget_N", c.doc_budget_N},
              {"m", c.m},
              {"m_prime", c.m_prime},
              {"temperature_infer", c.temperature_infer},
              {"temperature_rollout", c.temperature_rollout},
              {"max_subquestions", c.max_subquestions},
              {"beta", c.beta},
              {"seed", c.seed},
              {"max_tokens_subq", c.max_tokens_subq},
              {"max_tokens_final", c.max_tokens_final},
              {"request_timeout_s", c.request_timeout_s},
              {"max_concurrency", c.max_concurrency},
              {"max_retries", c.max_retries},
              {"bm25_k1", c.bm25_k1},
              {"bm25_b", c.bm25_b},
              {"numeric_rel_tol", c.numeric_rel_tol},
              {"reasoning_style", to_string(c.reasoning_style)}};
}

}  // namespace acesearcher
