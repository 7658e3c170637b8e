#pragma once
// LLM access: request/response types, token ledger, the provider interface,
// a scripted mock, an on-disk response cache and an OpenAI-compatible client.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace camp {

using json = nlohmann::json;

struct ChatMessage {
    std::string role;  // system | user | assistant
    std::string content;

    friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

// Routing metadata for a call. Not part of the cache key; used by the mock
// script and the ledger.
struct CallTag {
    std::string stage;
    std::string case_id;
    std::string role;
    int slot = 0;     // specialist / sample / agent / diagnosis position
    int attempt = 0;  // 0 = first try, 1 = schema repair
};

struct ChatRequest {
    std::string model;
    std::vector<ChatMessage> messages;
    double temperature = 0.0;
    std::optional<int> max_tokens;
    std::optional<std::int64_t> seed;  // sampling seed; part of the cache key only when set
    std::optional<std::string> response_format_hint;  // "json"
    CallTag tag;
};

struct ChatResponse {
    std::string content;
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
    std::string provider_id;
    bool cached = false;
};

// Canonical serialization over (model, messages, temperature, max_tokens, seed if set).
// nlohmann::json objects keep keys sorted, so the dump is order-independent.
json canonical_request(const ChatRequest& req);
std::string cache_key(const ChatRequest& req);

// Rough token estimate (ceil(chars / 4)) for providers that report no usage.
std::int64_t estimate_tokens(const std::string& text);
std::int64_t estimate_prompt_tokens(const ChatRequest& req);

struct TokenCount {
    std::int64_t prompt = 0;
    std::int64_t completion = 0;

    std::int64_t total() const { return prompt + completion; }
    TokenCount& operator+=(const TokenCount& o) {
        prompt += o.prompt;
        completion += o.completion;
        return *this;
    }
    friend bool operator==(const TokenCount&, const TokenCount&) = default;
};

void to_json(json& j, const TokenCount& t);
void from_json(const json& j, TokenCount& t);

struct LedgerEntry {
    std::string stage;
    std::string case_id;
    std::string role;
    int slot = 0;
    int attempt = 0;
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
    bool cached = false;

    friend bool operator==(const LedgerEntry&, const LedgerEntry&) = default;
};

void to_json(json& j, const LedgerEntry& e);
void from_json(const json& j, LedgerEntry& e);

// Thread-safe append-only record of provider calls.
class TokenLedger {
public:
    TokenLedger() = default;
    TokenLedger(const TokenLedger& other);
    TokenLedger& operator=(const TokenLedger& other);

    void append(LedgerEntry entry);
    void merge(const TokenLedger& other);
    // Commit order.
    std::vector<LedgerEntry> entries() const;
    std::size_t size() const;
    TokenCount total() const;
    std::map<std::string, TokenCount> by_stage() const;

private:
    mutable std::mutex mutex_;
    std::vector<LedgerEntry> entries_;
};

class Provider {
public:
    virtual ~Provider() = default;
    virtual ChatResponse complete(const ChatRequest& req) = 0;
    virtual std::string id() const = 0;
};

// Script-driven provider for deterministic runs.
//
// Script format: JSON list of
//   {"match": {"stage": s, "case_id": c, "role": r} | {"key": k},
//    "response": "...", "prompt_tokens": n, "completion_tokens": m}
// Omitted match fields are wildcards; the most specific matching rule wins
// (a key match beats any triple). Several entries with the same match form a
// queue: each call consumes the next reply and the last one repeats.
// Omitted token counts are estimated from the text.
class MockProvider : public Provider {
public:
    explicit MockProvider(const json& script, std::string id = "mock");
    static std::unique_ptr<MockProvider> from_file(const std::filesystem::path& path);

    ChatResponse complete(const ChatRequest& req) override;
    std::string id() const override { return id_; }

    std::size_t calls() const;

private:
    struct Reply {
        std::string content;
        std::optional<std::int64_t> prompt_tokens;
        std::optional<std::int64_t> completion_tokens;
    };
    struct Rule {
        std::optional<std::string> key;
        std::optional<std::string> stage;
        std::optional<std::string> case_id;
        std::optional<std::string> role;
        std::vector<Reply> replies;
        std::size_t next = 0;
    };

    std::string id_;
    std::vector<Rule> rules_;
    mutable std::mutex mutex_;
    std::size_t calls_ = 0;
};

// Write-once on-disk cache: {dir}/{key[0..2]}/{key}.json holding request and response.
class CachingProvider : public Provider {
public:
    CachingProvider(Provider& inner, std::filesystem::path dir);

    ChatResponse complete(const ChatRequest& req) override;
    std::string id() const override { return inner_.id(); }

    std::filesystem::path path_for(const std::string& key) const;

private:
    Provider& inner_;
    std::filesystem::path dir_;
};

struct HttpResult {
    int status = 0;  // 0 when the transport itself failed
    std::string body;
    std::string error;
};

class HttpTransport {
public:
    virtual ~HttpTransport() = default;
    virtual HttpResult post(const std::string& url, const std::string& body,
                            const std::vector<std::pair<std::string, std::string>>& headers) = 0;
};

// cpp-httplib backed transport (http:// and https://).
class HttplibTransport : public HttpTransport {
public:
    explicit HttplibTransport(std::chrono::seconds timeout = std::chrono::seconds(120)) : timeout_(timeout) {}
    HttpResult post(const std::string& url, const std::string& body,
                    const std::vector<std::pair<std::string, std::string>>& headers) override;

private:
    std::chrono::seconds timeout_;
};

struct RetryPolicy {
    int max_attempts = 5;  // total attempts including the first
    std::chrono::milliseconds initial_backoff{500};
    double multiplier = 2.0;
    std::chrono::milliseconds max_backoff{30000};
    // Injected so tests don't sleep.
    std::function<void(std::chrono::milliseconds)> sleep;

    std::chrono::milliseconds backoff_for(int retry) const;
};

struct OpenAIConfig {
    std::string base_url;  // POST {base_url}/v1/chat/completions
    std::string api_key;
    std::string provider_id = "openai-compatible";
};

class OpenAICompatibleProvider : public Provider {
public:
    OpenAICompatibleProvider(OpenAIConfig config, std::shared_ptr<HttpTransport> transport, RetryPolicy retry = {});

    ChatResponse complete(const ChatRequest& req) override;
    std::string id() const override { return config_.provider_id; }

    std::string endpoint() const;
    static json request_body(const ChatRequest& req);
    // Throws MalformedProviderResponse when content or shape is missing.
    static ChatResponse parse_response(const std::string& body, const ChatRequest& req, const std::string& provider_id);

private:
    OpenAIConfig config_;
    std::shared_ptr<HttpTransport> transport_;
    RetryPolicy retry_;
};

// Entry point used by agents: fills model/temperature defaults, bounds the
// number of in-flight requests and records every call in a ledger.
class LlmGateway {
public:
    LlmGateway(Provider& provider, std::string model, int in_flight_limit = 8);

    ChatResponse complete(ChatRequest req, TokenLedger& ledger);

    const std::string& model() const { return model_; }
    Provider& provider() { return provider_; }

private:
    Provider& provider_;
    std::string model_;
    std::counting_semaphore<1024> in_flight_;
};

}  // namespace camp
