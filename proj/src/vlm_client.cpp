#include "afr/vlm_client.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <thread>

#include "afr/error.hpp"
#include "afr/util.hpp"

namespace afr {

using nlohmann::json;

namespace {

constexpr std::string_view kDefaultOpenAiBase = "https://api.openai.com/v1";
constexpr std::string_view kDefaultAnthropicBase = "https://api.anthropic.com";
constexpr std::string_view kAnthropicVersion = "2023-06-01";

std::string strip_trailing_slash(std::string s) {
  while (!s.empty() && s.back() == '/') s.pop_back();
  return s;
}

std::string data_uri(const PromptSegment& s) { return "data:" + s.media_type + ";base64," + base64_encode(s.text); }

json parse_reply_body(std::string_view body) {
  json j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(Errc::malformed_provider_reply, "reply body is not a JSON object");
  if (j.contains("error") && !j["error"].is_null())
    throw Error(Errc::malformed_provider_reply, "provider returned an error object: " + j["error"].dump());
  return j;
}

std::int64_t int_or_zero(const json& j, const char* key) {
  return j.contains(key) && j[key].is_number_integer() ? j[key].get<std::int64_t>() : 0;
}

std::string snippet(std::string_view body) {
  std::string s(body.substr(0, 200));
  return s;
}

}  // namespace

std::string_view to_string(ProviderKind k) {
  switch (k) {
    case ProviderKind::openai_compatible:
      return "openai_compatible";
    case ProviderKind::anthropic_compatible:
      return "anthropic_compatible";
    case ProviderKind::mock:
      return "mock";
  }
  return "mock";
}

ProviderKind parse_provider_kind(std::string_view s) {
  if (s == "openai_compatible" || s == "openai") return ProviderKind::openai_compatible;
  if (s == "anthropic_compatible" || s == "anthropic") return ProviderKind::anthropic_compatible;
  if (s == "mock") return ProviderKind::mock;
  throw Error(Errc::invalid_argument, "unknown provider kind \"" + std::string(s) + "\"");
}

json ProviderConfig::to_json() const {
  return {{"kind", to_string(kind)},
          {"base_url", base_url},
          {"model_id", model_id},
          {"api_key_env", api_key_env},
          {"temperature", temperature},
          {"max_output_tokens", max_output_tokens},
          {"timeout_s", timeout_s},
          {"max_retries", max_retries},
          {"requests_per_minute", requests_per_minute}};
}

ProviderConfig ProviderConfig::from_json(const json& j) {
  if (!j.is_object()) throw Error(Errc::invalid_argument, "provider config must be a JSON object");
  for (const char* forbidden : {"api_key", "key", "token", "secret"}) {
    if (j.contains(forbidden))
      throw Error(Errc::invalid_argument,
                  std::string("provider config must not hold secrets (\"") + forbidden + "\"); use api_key_env");
  }
  ProviderConfig c;
  try {
    if (j.contains("kind")) c.kind = parse_provider_kind(j.at("kind").get<std::string>());
    c.base_url = j.value("base_url", c.base_url);
    c.model_id = j.value("model_id", c.model_id);
    c.api_key_env = j.value("api_key_env", c.api_key_env);
    c.temperature = j.value("temperature", c.temperature);
    c.max_output_tokens = j.value("max_output_tokens", c.max_output_tokens);
    c.timeout_s = j.value("timeout_s", c.timeout_s);
    c.max_retries = j.value("max_retries", c.max_retries);
    c.requests_per_minute = j.value("requests_per_minute", c.requests_per_minute);
  } catch (const json::exception& e) {
    throw Error(Errc::invalid_argument, std::string("provider config: ") + e.what());
  }
  if (c.model_id.empty()) throw Error(Errc::invalid_argument, "provider config: model_id is empty");
  if (c.max_retries < 0) throw Error(Errc::invalid_argument, "provider config: max_retries must be >= 0");
  if (c.max_output_tokens < 1) throw Error(Errc::invalid_argument, "provider config: max_output_tokens must be >= 1");
  if (!(c.timeout_s > 0)) throw Error(Errc::invalid_argument, "provider config: timeout_s must be > 0");
  if (c.requests_per_minute < 0) throw Error(Errc::invalid_argument, "provider config: requests_per_minute must be >= 0");
  if (c.kind != ProviderKind::mock && c.api_key_env.empty())
    throw Error(Errc::invalid_argument, "provider config: api_key_env is required for network providers");
  return c;
}

ProviderConfig load_provider_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error& e) {
    throw Error(Errc::invalid_argument, "cannot read provider config " + path.string());
  }
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw Error(Errc::invalid_argument, "provider config " + path.string() + " is not valid JSON");
  return ProviderConfig::from_json(j);
}

std::string request_digest(const ProviderConfig& cfg, const PromptBundle& p) {
  Sha256 h;
  char temp[64];
  std::snprintf(temp, sizeof temp, "%.17g", cfg.temperature);
  h.add_field("afr-request-v1");
  h.add_field(to_string(cfg.kind));
  h.add_field(cfg.model_id);
  h.add_field(temp);
  h.add_field(to_string(p.delivery));
  for (const auto& s : p.segments) {
    if (s.kind == PromptSegment::Kind::text) {
      h.add_field("text");
      h.add_field(s.text);
    } else {
      h.add_field(s.role == ImageRole::query ? "image:query" : "image:example");
      h.add_field(s.media_type);
      h.add_field(sha256_hex(s.text));
    }
  }
  return h.hex_digest();
}

// ---- wire dialects ----

std::string endpoint_url(const ProviderConfig& cfg) {
  switch (cfg.kind) {
    case ProviderKind::openai_compatible:
      return strip_trailing_slash(cfg.base_url.empty() ? std::string(kDefaultOpenAiBase) : cfg.base_url) +
             "/chat/completions";
    case ProviderKind::anthropic_compatible:
      return strip_trailing_slash(cfg.base_url.empty() ? std::string(kDefaultAnthropicBase) : cfg.base_url) +
             "/v1/messages";
    case ProviderKind::mock:
      break;
  }
  return "";
}

json build_openai_request(const ProviderConfig& cfg, const PromptBundle& p) {
  json content = json::array();
  for (const auto& s : p.segments) {
    if (s.kind == PromptSegment::Kind::text) {
      content.push_back({{"type", "text"}, {"text", s.text}});
    } else {
      content.push_back({{"type", "image_url"}, {"image_url", {{"url", data_uri(s)}}}});
    }
  }
  return {{"model", cfg.model_id},
          {"temperature", cfg.temperature},
          {"max_tokens", cfg.max_output_tokens},
          {"messages", json::array({{{"role", "user"}, {"content", std::move(content)}}})}};
}

json build_anthropic_request(const ProviderConfig& cfg, const PromptBundle& p) {
  json content = json::array();
  for (const auto& s : p.segments) {
    if (s.kind == PromptSegment::Kind::text) {
      content.push_back({{"type", "text"}, {"text", s.text}});
    } else {
      content.push_back(
          {{"type", "image"},
           {"source", {{"type", "base64"}, {"media_type", s.media_type}, {"data", base64_encode(s.text)}}}});
    }
  }
  return {{"model", cfg.model_id},
          {"max_tokens", cfg.max_output_tokens},
          {"temperature", cfg.temperature},
          {"messages", json::array({{{"role", "user"}, {"content", std::move(content)}}})}};
}

std::pair<std::string, std::optional<TokenUsage>> parse_openai_reply(std::string_view body) {
  json j = parse_reply_body(body);
  if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty())
    throw Error(Errc::malformed_provider_reply, "reply has no choices");
  const json& choice = j["choices"][0];
  if (!choice.is_object() || !choice.contains("message") || !choice["message"].is_object())
    throw Error(Errc::malformed_provider_reply, "choice has no message");
  const json& content = choice["message"].value("content", json());
  std::string text;
  if (content.is_string()) {
    text = content.get<std::string>();
  } else if (content.is_array()) {
    for (const auto& part : content)
      if (part.is_object() && part.value("type", "") == "text" && part.contains("text") && part["text"].is_string())
        text += part["text"].get<std::string>();
  } else {
    throw Error(Errc::malformed_provider_reply, "message content is missing");
  }
  std::optional<TokenUsage> usage;
  if (j.contains("usage") && j["usage"].is_object())
    usage = TokenUsage{int_or_zero(j["usage"], "prompt_tokens"), int_or_zero(j["usage"], "completion_tokens")};
  return {std::move(text), usage};
}

std::pair<std::string, std::optional<TokenUsage>> parse_anthropic_reply(std::string_view body) {
  json j = parse_reply_body(body);
  if (!j.contains("content") || !j["content"].is_array())
    throw Error(Errc::malformed_provider_reply, "reply has no content array");
  std::string text;
  bool any = false;
  for (const auto& block : j["content"]) {
    if (block.is_object() && block.value("type", "") == "text" && block.contains("text") && block["text"].is_string()) {
      text += block["text"].get<std::string>();
      any = true;
    }
  }
  if (!any) throw Error(Errc::malformed_provider_reply, "reply has no text block");
  std::optional<TokenUsage> usage;
  if (j.contains("usage") && j["usage"].is_object())
    usage = TokenUsage{int_or_zero(j["usage"], "input_tokens"), int_or_zero(j["usage"], "output_tokens")};
  return {std::move(text), usage};
}

// ---- mock provider ----

MockProvider::MockProvider(std::filesystem::path script_dir, MockFallback fallback)
    : dir_(std::move(script_dir)), fallback_(fallback) {}

std::string MockProvider::reply(const PromptBundle& p, std::string_view digest) const {
  std::vector<std::filesystem::path> candidates{dir_ / (std::string(digest) + ".txt")};
  if (!p.design_id.empty()) {
    candidates.push_back(dir_ / (p.design_id + "." + to_string(p.experiment) + ".txt"));
    candidates.push_back(dir_ / (p.design_id + ".txt"));
  }
  for (const auto& c : candidates) {
    std::error_code ec;
    if (std::filesystem::is_regular_file(c, ec)) return read_file(c);
  }
  if (fallback_ == MockFallback::empty) return std::string(kEmptyFeaturesReply);
  throw Error(Errc::script_not_found, "no scripted reply for " +
                                          (p.design_id.empty() ? std::string(digest) : p.design_id) + " " +
                                          to_string(p.experiment) + " in " + dir_.string());
}

MockProvider mock_provider(const std::filesystem::path& script_dir, MockFallback fallback) {
  return MockProvider(script_dir, fallback);
}

// ---- client ----

void RateLimiter::acquire() {
  if (rpm_ <= 0) return;
  const auto interval = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
      std::chrono::duration<double>(60.0 / rpm_));
  std::lock_guard lock(mu_);
  auto now = std::chrono::steady_clock::now();
  if (next_ > now) {
    std::this_thread::sleep_until(next_);
    now = next_;
  }
  next_ = now + interval;
}

std::chrono::milliseconds backoff_delay(int attempt, std::mt19937_64& rng) {
  constexpr double kCapMs = 30000.0;
  double base = std::min(1000.0 * std::ldexp(1.0, std::clamp(attempt, 0, 30)), kCapMs);
  std::uniform_real_distribution<double> jitter(0.8, 1.2);
  double ms = std::min(base * jitter(rng), kCapMs);
  return std::chrono::milliseconds(static_cast<std::int64_t>(std::llround(ms)));
}

VlmClient::VlmClient(ProviderConfig cfg, std::filesystem::path cache_dir, std::shared_ptr<HttpTransport> transport,
                     std::optional<MockProvider> mock)
    : cfg_(std::move(cfg)),
      cache_dir_(std::move(cache_dir)),
      transport_(std::move(transport)),
      mock_(std::move(mock)),
      limiter_(cfg_.requests_per_minute),
      sleeper_([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }),
      env_([](const std::string& name) -> std::optional<std::string> {
        const char* v = std::getenv(name.c_str());
        if (v == nullptr) return std::nullopt;
        return std::string(v);
      }) {}

std::filesystem::path VlmClient::cache_path(std::string_view digest) const {
  return cache_dir_ / sanitize_path_component(cfg_.model_id) / (std::string(digest) + ".json");
}

bool VlmClient::is_cached(std::string_view digest) const {
  std::error_code ec;
  return std::filesystem::is_regular_file(cache_path(digest), ec);
}

bool VlmClient::has_credentials() const {
  if (mock_) return true;
  if (cfg_.kind == ProviderKind::mock || cfg_.api_key_env.empty()) return false;
  auto key = env_(cfg_.api_key_env);
  return key && !key->empty();
}

std::optional<RawResponse> VlmClient::load_cached(const std::string& digest) {
  auto path = cache_path(digest);
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) return std::nullopt;
  json j = json::parse(read_file(path), nullptr, false);
  // An unreadable or mismatched entry is a miss; it is overwritten below.
  if (j.is_discarded() || !j.is_object() || j.value("request_digest", "") != digest || !j.contains("text") ||
      !j["text"].is_string())
    return std::nullopt;
  RawResponse r;
  r.text = j["text"].get<std::string>();
  r.model_id = j.value("model_id", cfg_.model_id);
  r.latency_s = j.value("latency_s", 0.0);
  if (j.contains("usage") && j["usage"].is_object())
    r.usage = TokenUsage{int_or_zero(j["usage"], "input_tokens"), int_or_zero(j["usage"], "output_tokens")};
  r.from_cache = true;
  r.request_digest = digest;
  return r;
}

void VlmClient::store(const PromptBundle& p, const RawResponse& r) {
  json images = json::array();
  for (const auto& s : p.segments)
    if (s.kind == PromptSegment::Kind::image)
      images.push_back({{"role", s.role == ImageRole::query ? "query" : "example"},
                        {"media_type", s.media_type},
                        {"sha256", sha256_hex(s.text)}});
  json j = {{"request_digest", r.request_digest},
            {"provider_kind", to_string(cfg_.kind)},
            {"model_id", r.model_id},
            {"temperature", cfg_.temperature},
            {"experiment", to_string(p.experiment)},
            {"delivery", to_string(p.delivery)},
            {"prompt_sha256", sha256_hex(p.full_text())},
            {"images", std::move(images)},
            {"latency_s", r.latency_s},
            {"text", r.text}};
  if (r.usage) j["usage"] = {{"input_tokens", r.usage->input_tokens}, {"output_tokens", r.usage->output_tokens}};
  write_file_atomic(cache_path(r.request_digest), j.dump(2) + "\n");
}

std::pair<std::string, std::optional<TokenUsage>> VlmClient::call_http(const PromptBundle& p,
                                                                       const std::string& digest) {
  auto key = env_(cfg_.api_key_env);
  if (!key || key->empty())
    throw Error(Errc::auth_error, "environment variable " + cfg_.api_key_env + " is not set");
  if (!transport_) transport_ = make_default_transport();

  HttpRequest req;
  req.url = endpoint_url(cfg_);
  req.timeout_s = cfg_.timeout_s;
  req.headers.push_back({"Content-Type", "application/json"});
  bool anthropic = cfg_.kind == ProviderKind::anthropic_compatible;
  if (anthropic) {
    req.headers.push_back({"x-api-key", *key});
    req.headers.push_back({"anthropic-version", std::string(kAnthropicVersion)});
    req.body = build_anthropic_request(cfg_, p).dump();
  } else {
    req.headers.push_back({"Authorization", "Bearer " + *key});
    req.body = build_openai_request(cfg_, p).dump();
  }

  thread_local std::mt19937_64 rng{std::random_device{}()};
  Errc last = Errc::transport_error;
  std::string last_msg;
  for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
    if (attempt > 0) sleeper_(backoff_delay(attempt - 1, rng));
    limiter_.acquire();
    ++http_attempts_;
    HttpResponse resp;
    try {
      resp = transport_->post(req);
    } catch (const Error& e) {
      last = e.code();
      last_msg = e.what();
      continue;
    }
    if (resp.status >= 200 && resp.status < 300)
      return anthropic ? parse_anthropic_reply(resp.body) : parse_openai_reply(resp.body);
    if (resp.status == 401 || resp.status == 403)
      throw Error(Errc::auth_error, "HTTP " + std::to_string(resp.status) + " from " + req.url);
    if (resp.status == 429) {
      last = Errc::rate_limited;
      last_msg = "HTTP 429 from " + req.url;
    } else if (resp.status >= 500 || resp.status == 408) {
      last = Errc::transport_error;
      last_msg = "HTTP " + std::to_string(resp.status) + " from " + req.url + ": " + snippet(resp.body);
    } else {
      throw Error(Errc::malformed_provider_reply,
                  "HTTP " + std::to_string(resp.status) + " from " + req.url + ": " + snippet(resp.body));
    }
  }
  throw Error(last, last_msg + " (after " + std::to_string(cfg_.max_retries + 1) + " attempts, request " +
                        digest.substr(0, 12) + ")");
}

RawResponse VlmClient::send(const PromptBundle& p) {
  const std::string digest = request_digest(cfg_, p);
  ++cache_lookups_;
  if (auto cached = load_cached(digest)) {
    ++cache_hits_;
    return *cached;
  }
  RawResponse r;
  r.model_id = cfg_.model_id;
  r.request_digest = digest;
  auto start = std::chrono::steady_clock::now();
  if (mock_) {
    ++provider_calls_;
    r.text = mock_->reply(p, digest);
  } else if (cfg_.kind == ProviderKind::mock) {
    throw Error(Errc::provider_unavailable, "mock provider configured without a script directory");
  } else {
    ++provider_calls_;
    auto [text, usage] = call_http(p, digest);
    r.text = std::move(text);
    r.usage = usage;
  }
  r.latency_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  store(p, r);
  return r;
}

}  // namespace afr
