#include "pairscale/llm_judge.hpp"

#include <httplib.h>

#include <algorithm>
#include <cstdlib>
#include <thread>

#include <json.hpp>

#include "pairscale/errors.hpp"
#include "pairscale/io.hpp"

namespace pairscale {

void LlmJudgeConfig::validate() const {
  if (!(temperature >= 0.0)) throw ConfigError("temperature must be >= 0");
  if (!(requests_per_minute > 0.0)) throw ConfigError("requests_per_minute must be > 0");
  if (max_retries < 0) throw ConfigError("max_retries must be >= 0");
  if (api_key_env.empty()) throw ConfigError("api_key_env must name an environment variable");
  if (endpoint.rfind("http://", 0) != 0 && endpoint.rfind("https://", 0) != 0)
    throw ConfigError("endpoint must be an http(s) URL: " + endpoint);
}

TokenBucket::TokenBucket(double per_minute, double capacity)
    : rate_per_sec_(per_minute / 60.0),
      capacity_(std::max(1.0, capacity)),
      tokens_(capacity_),
      last_(Clock::now()) {}

void TokenBucket::acquire() {
  std::unique_lock lock(mutex_);
  for (;;) {
    const auto now = Clock::now();
    const double elapsed = std::chrono::duration<double>(now - last_).count();
    tokens_ = std::min(capacity_, tokens_ + elapsed * rate_per_sec_);
    last_ = now;
    if (tokens_ >= 1.0) {
      tokens_ -= 1.0;
      return;
    }
    const double wait = (1.0 - tokens_) / rate_per_sec_;
    // Sleeping under the lock keeps waiters in line.
    std::this_thread::sleep_for(std::chrono::duration<double>(wait));
  }
}

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  if (!dir_.empty()) std::filesystem::create_directories(dir_);
}

std::filesystem::path ResponseCache::file_for(const std::string& key) const {
  return dir_ / (io::sha256_hex(key) + ".json");
}

std::optional<std::string> ResponseCache::get(const std::string& key) {
  std::lock_guard lock(mutex_);
  if (auto it = memory_.find(key); it != memory_.end()) return it->second;
  if (dir_.empty()) return std::nullopt;
  const auto file = file_for(key);
  if (!std::filesystem::exists(file)) return std::nullopt;
  try {
    const auto j = nlohmann::json::parse(io::read_file(file));
    if (j.at("key").get<std::string>() != key) return std::nullopt;
    auto response = j.at("response").get<std::string>();
    memory_.emplace(key, response);
    return response;
  } catch (const std::exception&) {
    return std::nullopt;  // unreadable entry: treat as a miss
  }
}

void ResponseCache::put(const std::string& key, const std::string& prompt,
                        const std::string& response) {
  std::lock_guard lock(mutex_);
  memory_.insert_or_assign(key, response);
  if (dir_.empty()) return;
  nlohmann::ordered_json j;
  j["key"] = key;
  j["prompt"] = prompt;
  j["response"] = response;
  io::write_file_atomic(file_for(key), j.dump(2) + "\n");
}

namespace {

std::pair<std::string, std::string> split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

LlmJudge::LlmJudge(LlmJudgeConfig config)
    : config_(std::move(config)),
      bucket_(config_.requests_per_minute, config_.requests_per_minute / 60.0),
      cache_(config_.cache_dir) {
  config_.validate();
  const char* key = std::getenv(config_.api_key_env.c_str());
  if (!key || !*key)
    throw ConfigError("environment variable " + config_.api_key_env +
                      " is not set; the LLM judge needs an API key");
  api_key_ = key;
  std::tie(base_url_, path_) = split_url(config_.endpoint);
}

std::string LlmJudge::request_body(const std::string& prompt) const {
  nlohmann::ordered_json j;
  j["model"] = config_.model;
  j["temperature"] = config_.temperature;
  j["messages"] = nlohmann::ordered_json::array({{{"role", "user"}, {"content", prompt}}});
  return j.dump();
}

std::string LlmJudge::post_once(const std::string& body, bool& retryable, std::string& error) {
  httplib::Client client(base_url_);
  client.set_connection_timeout(config_.timeout_seconds);
  client.set_read_timeout(config_.timeout_seconds);
  client.set_write_timeout(config_.timeout_seconds);
  const httplib::Headers headers{{"Authorization", "Bearer " + api_key_}};
  ++network_calls_;
  auto res = client.Post(path_, headers, body, "application/json");
  if (!res) {
    retryable = true;
    error = "transport error: " + httplib::to_string(res.error());
    return {};
  }
  if (res->status == 429 || res->status >= 500) {
    retryable = true;
    error = "HTTP " + std::to_string(res->status);
    return {};
  }
  if (res->status != 200) {
    retryable = false;
    error = "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200);
    return {};
  }
  try {
    const auto j = nlohmann::json::parse(res->body);
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const std::exception& err) {
    retryable = false;
    error = std::string("malformed completion: ") + err.what();
    return {};
  }
}

std::string LlmJudge::query(const std::string& cache_key, const std::string& prompt,
                            const std::string& error_key) {
  if (auto hit = cache_.get(cache_key)) return *hit;
  const std::string body = request_body(prompt);
  std::string last_error;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      const auto delay = std::min<long long>(
          static_cast<long long>(config_.initial_backoff_ms) << std::min(attempt - 1, 16), 30000);
      std::this_thread::sleep_for(std::chrono::milliseconds(delay));
    }
    bucket_.acquire();
    bool retryable = false;
    std::string error;
    auto text = post_once(body, retryable, error);
    if (error.empty()) {
      cache_.put(cache_key, prompt, text);
      return text;
    }
    last_error = std::move(error);
    if (!retryable) break;
  }
  throw TransportError("LLM request failed: " + last_error, error_key);
}

std::string LlmJudge::categorize(const CategoryQuery& q) {
  return query(config_.model + "|categorize|" + q.key() + "|" + io::sha256_hex(q.prompt), q.prompt,
               q.key());
}

std::string LlmJudge::compare(const JudgeRequest& r) {
  return query(config_.model + "|compare|" + r.key.str() + "|" + io::sha256_hex(r.prompt), r.prompt,
               r.key.str());
}

std::optional<std::string> LlmJudge::extract(const JudgeRequest& r, const std::string& prompt) {
  return query(config_.model + "|extract|" + r.key.str() + "|" + io::sha256_hex(prompt), prompt,
               r.key.str());
}

}  // namespace pairscale
