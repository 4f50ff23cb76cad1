#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>

#include "pairscale/judge.hpp"

namespace pairscale {

struct LlmJudgeConfig {
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string model = "gpt-3.5-turbo";
  double temperature = 0.0;
  int max_retries = 5;
  double requests_per_minute = 60.0;
  std::filesystem::path cache_dir;  // empty disables the on-disk cache
  std::string api_key_env = "PAIRSCALE_API_KEY";
  int initial_backoff_ms = 500;
  int timeout_seconds = 60;

  void validate() const;
};

// Token bucket refilled at requests_per_minute / 60 tokens per second.
class TokenBucket {
 public:
  TokenBucket(double per_minute, double capacity);
  void acquire();

 private:
  using Clock = std::chrono::steady_clock;
  double rate_per_sec_;
  double capacity_;
  double tokens_;
  Clock::time_point last_;
  std::mutex mutex_;
};

// Write-through response cache: memory plus one JSON file per key.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);

  std::optional<std::string> get(const std::string& key);
  void put(const std::string& key, const std::string& prompt, const std::string& response);

 private:
  std::filesystem::path file_for(const std::string& key) const;

  std::filesystem::path dir_;
  std::mutex mutex_;
  std::map<std::string, std::string> memory_;
};

// Chat-completion judge. The API key is read from the configured environment
// variable at construction; a missing key is a ConfigError.
class LlmJudge final : public Judge {
 public:
  explicit LlmJudge(LlmJudgeConfig config);

  std::string id() const override { return "llm:" + config_.model; }
  Source source() const override { return Source::LlmDirect; }
  std::string categorize(const CategoryQuery& query) override;
  std::string compare(const JudgeRequest& request) override;
  std::optional<std::string> extract(const JudgeRequest& request,
                                     const std::string& extraction_prompt) override;

  std::size_t network_calls() const { return network_calls_.load(); }

  // {model, temperature, messages:[{role:"user", content:prompt}]}
  std::string request_body(const std::string& prompt) const;

 private:
  std::string query(const std::string& cache_key, const std::string& prompt,
                    const std::string& error_key);
  std::string post_once(const std::string& body, bool& retryable, std::string& error);

  LlmJudgeConfig config_;
  std::string api_key_;
  std::string base_url_;
  std::string path_;
  TokenBucket bucket_;
  ResponseCache cache_;
  std::atomic<std::size_t> network_calls_{0};
};

}  // namespace pairscale
