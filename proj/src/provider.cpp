#include "camp/provider.hpp"

#include <algorithm>
#include <thread>

#include "camp/error.hpp"
#include "camp/log.hpp"
#include "camp/util.hpp"

namespace camp {

json canonical_request(const ChatRequest& req) {
    json messages = json::array();
    for (const auto& m : req.messages) messages.push_back(json{{"role", m.role}, {"content", m.content}});
    json j{{"model", req.model}, {"messages", messages}, {"temperature", req.temperature}};
    j["max_tokens"] = req.max_tokens ? json(*req.max_tokens) : json(nullptr);
    if (req.seed) j["seed"] = *req.seed;
    return j;
}

std::string cache_key(const ChatRequest& req) { return util::sha256_hex(canonical_request(req).dump()); }

std::int64_t estimate_tokens(const std::string& text) { return static_cast<std::int64_t>((text.size() + 3) / 4); }

std::int64_t estimate_prompt_tokens(const ChatRequest& req) {
    std::int64_t total = 0;
    for (const auto& m : req.messages) total += estimate_tokens(m.content) + 4;
    return total;
}

void to_json(json& j, const TokenCount& t) {
    j = json{{"prompt", t.prompt}, {"completion", t.completion}, {"total", t.total()}};
}
void from_json(const json& j, TokenCount& t) {
    t.prompt = j.at("prompt").get<std::int64_t>();
    t.completion = j.at("completion").get<std::int64_t>();
}

void to_json(json& j, const LedgerEntry& e) {
    j = json{{"stage", e.stage},       {"case_id", e.case_id},
             {"role", e.role},         {"slot", e.slot},
             {"attempt", e.attempt},   {"prompt_tokens", e.prompt_tokens},
             {"completion_tokens", e.completion_tokens}, {"cached", e.cached}};
}

void from_json(const json& j, LedgerEntry& e) {
    e.stage = j.at("stage").get<std::string>();
    e.case_id = j.value("case_id", "");
    e.role = j.value("role", "");
    e.slot = j.value("slot", 0);
    e.attempt = j.value("attempt", 0);
    e.prompt_tokens = j.at("prompt_tokens").get<std::int64_t>();
    e.completion_tokens = j.at("completion_tokens").get<std::int64_t>();
    e.cached = j.value("cached", false);
}

// --- TokenLedger --------------------------------------------------------

TokenLedger::TokenLedger(const TokenLedger& other) {
    std::lock_guard lock(other.mutex_);
    entries_ = other.entries_;
}

TokenLedger& TokenLedger::operator=(const TokenLedger& other) {
    if (this == &other) return *this;
    auto copy = other.entries();
    std::lock_guard lock(mutex_);
    entries_ = std::move(copy);
    return *this;
}

void TokenLedger::append(LedgerEntry entry) {
    std::lock_guard lock(mutex_);
    entries_.push_back(std::move(entry));
}

void TokenLedger::merge(const TokenLedger& other) {
    auto incoming = other.entries();
    std::lock_guard lock(mutex_);
    entries_.insert(entries_.end(), incoming.begin(), incoming.end());
}

std::vector<LedgerEntry> TokenLedger::entries() const {
    std::lock_guard lock(mutex_);
    return entries_;
}

std::size_t TokenLedger::size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
}

TokenCount TokenLedger::total() const {
    std::lock_guard lock(mutex_);
    TokenCount t;
    for (const auto& e : entries_) t += TokenCount{e.prompt_tokens, e.completion_tokens};
    return t;
}

std::map<std::string, TokenCount> TokenLedger::by_stage() const {
    std::lock_guard lock(mutex_);
    std::map<std::string, TokenCount> out;
    for (const auto& e : entries_) out[e.stage] += TokenCount{e.prompt_tokens, e.completion_tokens};
    return out;
}

// --- MockProvider -------------------------------------------------------

namespace {

std::optional<std::string> opt_string(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    return it->get<std::string>();
}

std::optional<std::int64_t> opt_int(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    return it->get<std::int64_t>();
}

}  // namespace

MockProvider::MockProvider(const json& script, std::string id) : id_(std::move(id)) {
    if (!script.is_array()) throw SchemaError("mock script must be a JSON list");
    for (const auto& entry : script) {
        const json match = entry.value("match", json::object());
        Rule probe;
        probe.key = opt_string(match, "key");
        probe.stage = opt_string(match, "stage");
        probe.case_id = opt_string(match, "case_id");
        probe.role = opt_string(match, "role");
        Reply reply{entry.at("response").get<std::string>(), opt_int(entry, "prompt_tokens"),
                    opt_int(entry, "completion_tokens")};

        auto same = [&](const Rule& r) {
            return r.key == probe.key && r.stage == probe.stage && r.case_id == probe.case_id && r.role == probe.role;
        };
        auto it = std::find_if(rules_.begin(), rules_.end(), same);
        if (it == rules_.end()) {
            probe.replies.push_back(std::move(reply));
            rules_.push_back(std::move(probe));
        } else {
            it->replies.push_back(std::move(reply));
        }
    }
}

std::unique_ptr<MockProvider> MockProvider::from_file(const std::filesystem::path& path) {
    json script;
    try {
        script = json::parse(util::read_file(path));
    } catch (const json::exception& e) {
        throw SchemaError("mock script " + path.string() + ": " + e.what());
    }
    return std::make_unique<MockProvider>(script, "mock:" + path.filename().string());
}

ChatResponse MockProvider::complete(const ChatRequest& req) {
    const std::string key = cache_key(req);
    std::lock_guard lock(mutex_);
    ++calls_;

    Rule* best = nullptr;
    int best_score = -1;
    for (auto& rule : rules_) {
        int score = 0;
        if (rule.key) {
            if (*rule.key != key) continue;
            score = 100;
        }
        auto field = [&](const std::optional<std::string>& want, const std::string& have) {
            if (!want) return true;
            if (*want != have) return false;
            ++score;
            return true;
        };
        if (!field(rule.stage, req.tag.stage) || !field(rule.case_id, req.tag.case_id) ||
            !field(rule.role, req.tag.role)) {
            continue;
        }
        if (score > best_score) {
            best = &rule;
            best_score = score;
        }
    }
    if (!best) {
        throw MockNoMatch("no mock reply for stage=" + req.tag.stage + " case_id=" + req.tag.case_id +
                          " role=" + req.tag.role);
    }
    const Reply& reply = best->replies[std::min(best->next, best->replies.size() - 1)];
    if (best->next < best->replies.size()) ++best->next;

    ChatResponse resp;
    resp.content = reply.content;
    resp.prompt_tokens = reply.prompt_tokens.value_or(estimate_prompt_tokens(req));
    resp.completion_tokens = reply.completion_tokens.value_or(estimate_tokens(reply.content));
    resp.provider_id = id_;
    return resp;
}

std::size_t MockProvider::calls() const {
    std::lock_guard lock(mutex_);
    return calls_;
}

// --- CachingProvider ----------------------------------------------------

CachingProvider::CachingProvider(Provider& inner, std::filesystem::path dir) : inner_(inner), dir_(std::move(dir)) {}

std::filesystem::path CachingProvider::path_for(const std::string& key) const {
    return dir_ / key.substr(0, 2) / (key + ".json");
}

ChatResponse CachingProvider::complete(const ChatRequest& req) {
    const std::string key = cache_key(req);
    const auto path = path_for(key);
    if (std::filesystem::exists(path)) {
        try {
            const json stored = json::parse(util::read_file(path));
            const json& r = stored.at("response");
            ChatResponse resp;
            resp.content = r.at("content").get<std::string>();
            resp.prompt_tokens = r.at("prompt_tokens").get<std::int64_t>();
            resp.completion_tokens = r.at("completion_tokens").get<std::int64_t>();
            resp.provider_id = r.value("provider_id", inner_.id());
            resp.cached = true;
            return resp;
        } catch (const std::exception& e) {
            logger().warn("ignoring unreadable cache entry {}: {}", path.string(), e.what());
        }
    }
    ChatResponse resp = inner_.complete(req);
    json stored{{"key", key},
                {"request", canonical_request(req)},
                {"response",
                 {{"content", resp.content},
                  {"prompt_tokens", resp.prompt_tokens},
                  {"completion_tokens", resp.completion_tokens},
                  {"provider_id", resp.provider_id}}}};
    if (!std::filesystem::exists(path)) {
        std::filesystem::create_directories(path.parent_path());
        util::write_file_atomic(path, stored.dump(2));
    }
    return resp;
}

// --- OpenAI-compatible client --------------------------------------------

std::chrono::milliseconds RetryPolicy::backoff_for(int retry) const {
    double ms = static_cast<double>(initial_backoff.count());
    for (int i = 0; i < retry; ++i) ms *= multiplier;
    ms = std::min(ms, static_cast<double>(max_backoff.count()));
    return std::chrono::milliseconds(static_cast<std::int64_t>(ms));
}

OpenAICompatibleProvider::OpenAICompatibleProvider(OpenAIConfig config, std::shared_ptr<HttpTransport> transport,
                                                   RetryPolicy retry)
    : config_(std::move(config)), transport_(std::move(transport)), retry_(std::move(retry)) {
    if (!retry_.sleep) retry_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
    if (retry_.max_attempts < 1) retry_.max_attempts = 1;
}

std::string OpenAICompatibleProvider::endpoint() const {
    std::string base = config_.base_url;
    while (!base.empty() && base.back() == '/') base.pop_back();
    return base + "/v1/chat/completions";
}

json OpenAICompatibleProvider::request_body(const ChatRequest& req) {
    json body = canonical_request(req);
    if (!req.max_tokens) body.erase("max_tokens");
    if (req.response_format_hint && *req.response_format_hint == "json") {
        body["response_format"] = json{{"type", "json_object"}};
    }
    return body;
}

ChatResponse OpenAICompatibleProvider::parse_response(const std::string& body, const ChatRequest& req,
                                                      const std::string& provider_id) {
    json j;
    try {
        j = json::parse(body);
    } catch (const json::exception& e) {
        throw MalformedProviderResponse(std::string("response is not JSON: ") + e.what());
    }
    if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty()) {
        throw MalformedProviderResponse("response has no choices");
    }
    const json& msg = j["choices"][0].value("message", json::object());
    if (!msg.contains("content") || !msg["content"].is_string()) {
        throw MalformedProviderResponse("response choice has no string content");
    }
    ChatResponse resp;
    resp.content = msg["content"].get<std::string>();
    resp.provider_id = provider_id;
    const json usage = j.value("usage", json::object());
    if (usage.contains("prompt_tokens") && usage["prompt_tokens"].is_number_integer()) {
        resp.prompt_tokens = usage["prompt_tokens"].get<std::int64_t>();
    } else {
        resp.prompt_tokens = estimate_prompt_tokens(req);
    }
    if (usage.contains("completion_tokens") && usage["completion_tokens"].is_number_integer()) {
        resp.completion_tokens = usage["completion_tokens"].get<std::int64_t>();
    } else {
        resp.completion_tokens = estimate_tokens(resp.content);
    }
    resp.prompt_tokens = std::max<std::int64_t>(resp.prompt_tokens, 0);
    resp.completion_tokens = std::max<std::int64_t>(resp.completion_tokens, 0);
    return resp;
}

ChatResponse OpenAICompatibleProvider::complete(const ChatRequest& req) {
    const std::string body = request_body(req).dump();
    std::vector<std::pair<std::string, std::string>> headers{{"Content-Type", "application/json"}};
    if (!config_.api_key.empty()) headers.emplace_back("Authorization", "Bearer " + config_.api_key);

    std::string last_error;
    for (int attempt = 0; attempt < retry_.max_attempts; ++attempt) {
        if (attempt > 0) retry_.sleep(retry_.backoff_for(attempt - 1));
        HttpResult r = transport_->post(endpoint(), body, headers);
        if (r.status == 200) return parse_response(r.body, req, config_.provider_id);
        if (r.status == 401 || r.status == 403) {
            throw AuthError("provider rejected credentials (HTTP " + std::to_string(r.status) + ")");
        }
        const bool transient = r.status == 0 || r.status == 408 || r.status == 429 || r.status >= 500;
        last_error = r.status == 0 ? "transport: " + r.error : "HTTP " + std::to_string(r.status);
        if (!transient) throw ProviderError("provider request failed: " + last_error + " " + r.body.substr(0, 200));
        logger().warn("transient provider failure ({}), attempt {}/{}", last_error, attempt + 1, retry_.max_attempts);
    }
    throw ProviderExhausted("provider failed after " + std::to_string(retry_.max_attempts) +
                            " attempts: " + last_error);
}

// --- LlmGateway ---------------------------------------------------------

LlmGateway::LlmGateway(Provider& provider, std::string model, int in_flight_limit)
    : provider_(provider), model_(std::move(model)), in_flight_(std::clamp(in_flight_limit, 1, 1024)) {}

ChatResponse LlmGateway::complete(ChatRequest req, TokenLedger& ledger) {
    if (req.model.empty()) req.model = model_;
    ChatResponse resp;
    in_flight_.acquire();
    try {
        resp = provider_.complete(req);
    } catch (...) {
        in_flight_.release();
        throw;
    }
    in_flight_.release();
    ledger.append(LedgerEntry{req.tag.stage, req.tag.case_id, req.tag.role, req.tag.slot, req.tag.attempt,
                              resp.prompt_tokens, resp.completion_tokens, resp.cached});
    return resp;
}

}  // namespace camp
