#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "afr/prompt.hpp"

namespace afr {

enum class ProviderKind { openai_compatible, anthropic_compatible, mock };

std::string_view to_string(ProviderKind k);
ProviderKind parse_provider_kind(std::string_view s);

struct ProviderConfig {
  ProviderKind kind = ProviderKind::mock;
  std::string base_url;
  std::string model_id = "mock";
  std::string api_key_env;  // name of the variable, never the key itself
  double temperature = 0.0;
  int max_output_tokens = 4096;
  double timeout_s = 120.0;
  int max_retries = 3;
  double requests_per_minute = 0.0;  // 0 = unlimited

  nlohmann::json to_json() const;
  static ProviderConfig from_json(const nlohmann::json& j);
};

ProviderConfig load_provider_config(const std::filesystem::path& path);

struct TokenUsage {
  std::int64_t input_tokens = 0;
  std::int64_t output_tokens = 0;
};

struct RawResponse {
  std::string text;  // verbatim
  std::string model_id;
  double latency_s = 0;
  std::optional<TokenUsage> usage;
  bool from_cache = false;
  std::string request_digest;
};

// SHA-256 over provider kind, model, temperature, delivery mode and every
// segment in order (text bytes, image content hash and role).
std::string request_digest(const ProviderConfig& cfg, const PromptBundle& p);

// ---- transport ----

struct HttpRequest {
  std::string url;
  std::vector<std::pair<std::string, std::string>> headers;
  std::string body;
  double timeout_s = 120;
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

// Throws Error(transport_error) when no HTTP response was obtained
// (connection failure, timeout).
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse post(const HttpRequest& req) = 0;
};

std::shared_ptr<HttpTransport> make_default_transport();

// ---- wire dialects ----

nlohmann::json build_openai_request(const ProviderConfig& cfg, const PromptBundle& p);
nlohmann::json build_anthropic_request(const ProviderConfig& cfg, const PromptBundle& p);
// Returns text and usage; throws Error(malformed_provider_reply).
std::pair<std::string, std::optional<TokenUsage>> parse_openai_reply(std::string_view body);
std::pair<std::string, std::optional<TokenUsage>> parse_anthropic_reply(std::string_view body);
std::string endpoint_url(const ProviderConfig& cfg);

// ---- mock provider ----

enum class MockFallback { error, empty };

inline constexpr std::string_view kEmptyFeaturesReply = "{\"identified_features\": []}";

// Replies are looked up in order: <digest>.txt, <design>.<experiment>.txt
// (e.g. part_001.E3.txt), <design>.txt.
class MockProvider {
 public:
  explicit MockProvider(std::filesystem::path script_dir, MockFallback fallback = MockFallback::error);

  // Throws Error(script_not_found) when nothing matches and fallback is error.
  std::string reply(const PromptBundle& p, std::string_view digest) const;

 private:
  std::filesystem::path dir_;
  MockFallback fallback_;
};

MockProvider mock_provider(const std::filesystem::path& script_dir, MockFallback fallback = MockFallback::error);

// ---- client ----

// Admits at most `rpm` requests per minute across all threads.
class RateLimiter {
 public:
  explicit RateLimiter(double rpm) : rpm_(rpm) {}
  void acquire();

 private:
  double rpm_;
  std::mutex mu_;
  std::chrono::steady_clock::time_point next_{};
};

// 1 s * 2^attempt with +/-20% jitter, capped at 30 s.
std::chrono::milliseconds backoff_delay(int attempt, std::mt19937_64& rng);

class VlmClient {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;
  using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

  VlmClient(ProviderConfig cfg, std::filesystem::path cache_dir,
            std::shared_ptr<HttpTransport> transport = nullptr,
            std::optional<MockProvider> mock = std::nullopt);

  // Cache first, then the provider with retries; the reply is cached before
  // it is returned. Thread-safe.
  RawResponse send(const PromptBundle& p);

  std::filesystem::path cache_path(std::string_view digest) const;
  bool is_cached(std::string_view digest) const;
  bool has_credentials() const;

  const ProviderConfig& config() const { return cfg_; }
  std::size_t provider_calls() const { return provider_calls_.load(); }
  std::size_t http_attempts() const { return http_attempts_.load(); }
  std::size_t cache_hits() const { return cache_hits_.load(); }
  std::size_t cache_lookups() const { return cache_lookups_.load(); }

  void set_sleeper(Sleeper s) { sleeper_ = std::move(s); }
  void set_env_lookup(EnvLookup e) { env_ = std::move(e); }

 private:
  std::optional<RawResponse> load_cached(const std::string& digest);
  void store(const PromptBundle& p, const RawResponse& r);
  std::pair<std::string, std::optional<TokenUsage>> call_http(const PromptBundle& p, const std::string& digest);

  ProviderConfig cfg_;
  std::filesystem::path cache_dir_;
  std::shared_ptr<HttpTransport> transport_;
  std::optional<MockProvider> mock_;
  RateLimiter limiter_;
  Sleeper sleeper_;
  EnvLookup env_;
  std::atomic<std::size_t> provider_calls_{0};
  std::atomic<std::size_t> http_attempts_{0};
  std::atomic<std::size_t> cache_hits_{0};
  std::atomic<std::size_t> cache_lookups_{0};
};

}  // namespace afr
