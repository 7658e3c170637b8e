#include <gtest/gtest.h>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include <atomic>
#include <filesystem>
#include <set>
#include <thread>

#include "camp/error.hpp"
#include "camp/provider.hpp"
#include "camp/util.hpp"

using namespace camp;
namespace fs = std::filesystem;

namespace {

ChatRequest make_request(const std::string& text, double temperature = 0.0) {
    ChatRequest r;
    r.model = "m";
    r.messages = {{"user", text}};
    r.temperature = temperature;
    r.tag = {"specialist", "case-1", "cardiologist", 0, 0};
    return r;
}

std::string ok_body(const std::string& content, int prompt = 11, int completion = 7) {
    return json{{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}},
                {"usage", {{"prompt_tokens", prompt}, {"completion_tokens", completion}}}}
        .dump();
}

class ScriptedTransport : public HttpTransport {
public:
    explicit ScriptedTransport(std::vector<HttpResult> replies) : replies_(std::move(replies)) {}
    HttpResult post(const std::string& url, const std::string& body,
                    const std::vector<std::pair<std::string, std::string>>& headers) override {
        urls.push_back(url);
        bodies.push_back(body);
        last_headers = headers;
        const std::size_t i = std::min(calls++, replies_.size() - 1);
        return replies_[i];
    }
    std::size_t calls = 0;
    std::vector<std::string> urls;
    std::vector<std::string> bodies;
    std::vector<std::pair<std::string, std::string>> last_headers;

private:
    std::vector<HttpResult> replies_;
};

RetryPolicy no_sleep(int attempts, std::vector<std::chrono::milliseconds>* slept = nullptr) {
    RetryPolicy p;
    p.max_attempts = attempts;
    p.sleep = [slept](std::chrono::milliseconds d) {
        if (slept) slept->push_back(d);
    };
    return p;
}

fs::path temp_dir(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / ("camp_test_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

}  // namespace

TEST(CacheKey, CanonicalAndOrderInsensitive) {
    json a = json::parse(R"({"model":"m","temperature":0,"messages":[{"role":"user","content":"x"}]})");
    json b = json::parse(R"({"messages":[{"content":"x","role":"user"}],"temperature":0,"model":"m"})");
    EXPECT_EQ(a.dump(), b.dump());

    ChatRequest r1 = make_request("x");
    ChatRequest r2 = make_request("x");
    r2.tag = {"other", "case-9", "", 3, 1};  // tags never enter the key
    EXPECT_EQ(cache_key(r1), cache_key(r2));
    EXPECT_EQ(cache_key(r1).size(), 64u);
}

TEST(CacheKey, SensitiveToEveryField) {
    const ChatRequest base = make_request("x");
    std::set<std::string> keys{cache_key(base)};
    ChatRequest t = base;
    t.temperature = 0.5;
    keys.insert(cache_key(t));
    ChatRequest m = base;
    m.model = "other";
    keys.insert(cache_key(m));
    ChatRequest mt = base;
    mt.max_tokens = 100;
    keys.insert(cache_key(mt));
    ChatRequest msg = base;
    msg.messages[0].content = "y";
    keys.insert(cache_key(msg));
    ChatRequest role = base;
    role.messages[0].role = "system";
    keys.insert(cache_key(role));
    ChatRequest seeded = base;
    seeded.seed = 1;
    keys.insert(cache_key(seeded));
    EXPECT_EQ(keys.size(), 7u);
}

TEST(CacheKey, NoCollisionsAcrossManyRequests) {
    std::set<std::string> keys;
    for (int i = 0; i < 500; ++i) {
        ChatRequest r = make_request("prompt " + std::to_string(i), (i % 3) * 0.5);
        keys.insert(cache_key(r));
    }
    EXPECT_EQ(keys.size(), 500u);
}

TEST(TokenEstimate, CeilingOfQuarterCharacters) {
    EXPECT_EQ(estimate_tokens(""), 0);
    EXPECT_EQ(estimate_tokens("abc"), 1);
    EXPECT_EQ(estimate_tokens("abcd"), 1);
    EXPECT_EQ(estimate_tokens("abcde"), 2);
}

TEST(TokenLedger, TotalsPartitionByStage) {
    TokenLedger ledger;
    ledger.append({"a", "c", "", 0, 0, 10, 5, false});
    ledger.append({"b", "c", "", 0, 0, 3, 2, false});
    ledger.append({"a", "c", "", 1, 0, 1, 1, true});
    EXPECT_EQ(ledger.total(), (TokenCount{14, 8}));
    TokenCount sum;
    for (const auto& [stage, t] : ledger.by_stage()) sum += t;
    EXPECT_EQ(sum, ledger.total());
    EXPECT_EQ(ledger.by_stage().at("a"), (TokenCount{11, 6}));
}

TEST(TokenLedger, ConcurrentAppends) {
    TokenLedger ledger;
    std::vector<std::thread> threads;
    for (int t = 0; t < 8; ++t) {
        threads.emplace_back([&ledger, t] {
            for (int i = 0; i < 250; ++i) ledger.append({"s" + std::to_string(t % 3), "c", "", i, 0, 1, 2, false});
        });
    }
    for (auto& th : threads) th.join();
    EXPECT_EQ(ledger.size(), 2000u);
    EXPECT_EQ(ledger.total(), (TokenCount{2000, 4000}));
}

TEST(MockProvider, MatchesByTagMostSpecificWins) {
    json script = json::array({
        {{"match", {{"stage", "specialist"}}}, {"response", "any specialist"}},
        {{"match", {{"stage", "specialist"}, {"case_id", "case-1"}, {"role", "cardiologist"}}},
         {"response", "exact"},
         {"prompt_tokens", 100},
         {"completion_tokens", 20}},
    });
    MockProvider mock(script);
    ChatRequest r = make_request("hello there");
    ChatResponse resp = mock.complete(r);
    EXPECT_EQ(resp.content, "exact");
    EXPECT_EQ(resp.prompt_tokens, 100);
    EXPECT_EQ(resp.completion_tokens, 20);
    EXPECT_FALSE(resp.cached);

    r.tag.role = "nephrologist";
    resp = mock.complete(r);
    EXPECT_EQ(resp.content, "any specialist");
    EXPECT_EQ(resp.prompt_tokens, estimate_prompt_tokens(r));
    EXPECT_EQ(resp.completion_tokens, estimate_tokens("any specialist"));

    r.tag.stage = "arbitration";
    EXPECT_THROW(mock.complete(r), MockNoMatch);
    EXPECT_EQ(mock.calls(), 3u);
}

TEST(MockProvider, KeyRulesAndQueues) {
    ChatRequest r = make_request("keyed");
    json script = json::array({
        {{"match", {{"key", cache_key(r)}}}, {"response", "by key"}},
        {{"match", {{"stage", "bhc"}}}, {"response", "first"}},
        {{"match", {{"stage", "bhc"}}}, {"response", "second"}},
    });
    MockProvider mock(script);
    EXPECT_EQ(mock.complete(r).content, "by key");
    ChatRequest b = make_request("narrative");
    b.tag.stage = "bhc";
    EXPECT_EQ(mock.complete(b).content, "first");
    EXPECT_EQ(mock.complete(b).content, "second");
    EXPECT_EQ(mock.complete(b).content, "second");
}

TEST(MockProvider, RejectsMalformedScripts) {
    EXPECT_THROW(MockProvider(json::object()), SchemaError);
    const fs::path dir = temp_dir("mockfile");
    util::write_file(dir / "bad.json", "{not json");
    EXPECT_THROW(MockProvider::from_file(dir / "bad.json"), SchemaError);
}

TEST(CachingProvider, SecondCallIsCachedAndIdentical) {
    const fs::path dir = temp_dir("cache");
    json script = json::array({{{"match", {{"stage", "specialist"}}}, {"response", "one"}},
                               {{"match", {{"stage", "specialist"}}}, {"response", "two"}}});
    MockProvider mock(script);
    CachingProvider cache(mock, dir);
    ChatRequest r = make_request("same");
    const ChatResponse first = cache.complete(r);
    const ChatResponse second = cache.complete(r);
    EXPECT_FALSE(first.cached);
    EXPECT_TRUE(second.cached);
    EXPECT_EQ(first.content, second.content);
    EXPECT_EQ(first.prompt_tokens, second.prompt_tokens);
    EXPECT_EQ(mock.calls(), 1u);

    const std::string key = cache_key(r);
    const fs::path file = dir / key.substr(0, 2) / (key + ".json");
    ASSERT_TRUE(fs::exists(file));
    const json stored = json::parse(util::read_file(file));
    EXPECT_EQ(stored["key"], key);
    EXPECT_EQ(stored["request"], canonical_request(r));
    EXPECT_EQ(stored["response"]["content"], "one");
}

TEST(CachingProvider, UnreadableEntryFallsThrough) {
    const fs::path dir = temp_dir("cache_bad");
    json script = json::array({{{"match", {{"stage", "specialist"}}}, {"response", "fresh"}}});
    MockProvider mock(script);
    CachingProvider cache(mock, dir);
    ChatRequest r = make_request("x");
    const fs::path file = cache.path_for(cache_key(r));
    fs::create_directories(file.parent_path());
    util::write_file(file, "garbage");
    EXPECT_EQ(cache.complete(r).content, "fresh");
}

TEST(OpenAIProvider, RetriesTransientThenSucceeds) {
    auto transport = std::make_shared<ScriptedTransport>(
        std::vector<HttpResult>{{429, "slow down", ""}, {429, "slow down", ""}, {200, ok_body("fine"), ""}});
    std::vector<std::chrono::milliseconds> slept;
    OpenAICompatibleProvider p({"http://host:1/", "secret", "test"}, transport, no_sleep(5, &slept));
    LlmGateway gw(p, "m");
    TokenLedger ledger;
    const ChatResponse resp = gw.complete(make_request("q"), ledger);
    EXPECT_EQ(resp.content, "fine");
    EXPECT_EQ(transport->calls, 3u);
    ASSERT_EQ(slept.size(), 2u);
    EXPECT_LT(slept[0], slept[1]);
    EXPECT_EQ(ledger.size(), 1u);
    EXPECT_EQ(ledger.total(), (TokenCount{11, 7}));
    EXPECT_EQ(transport->urls[0], "http://host:1/v1/chat/completions");
    bool auth = false;
    for (const auto& [k, v] : transport->last_headers) auth |= (k == "Authorization" && v == "Bearer secret");
    EXPECT_TRUE(auth);
}

TEST(OpenAIProvider, ExhaustsAfterCap) {
    auto transport = std::make_shared<ScriptedTransport>(std::vector<HttpResult>{{503, "", ""}});
    OpenAICompatibleProvider p({"http://h", "", "t"}, transport, no_sleep(3));
    EXPECT_THROW(p.complete(make_request("q")), ProviderExhausted);
    EXPECT_EQ(transport->calls, 3u);
}

TEST(OpenAIProvider, TransportFailureIsTransient) {
    auto transport = std::make_shared<ScriptedTransport>(
        std::vector<HttpResult>{{0, "", "connection refused"}, {200, ok_body("ok"), ""}});
    OpenAICompatibleProvider p({"http://h", "", "t"}, transport, no_sleep(5));
    EXPECT_EQ(p.complete(make_request("q")).content, "ok");
}

TEST(OpenAIProvider, AuthAndClientErrorsAreNotRetried) {
    auto t401 = std::make_shared<ScriptedTransport>(std::vector<HttpResult>{{401, "", ""}});
    OpenAICompatibleProvider a({"http://h", "", "t"}, t401, no_sleep(5));
    EXPECT_THROW(a.complete(make_request("q")), AuthError);
    EXPECT_EQ(t401->calls, 1u);

    auto t400 = std::make_shared<ScriptedTransport>(std::vector<HttpResult>{{400, "bad", ""}});
    OpenAICompatibleProvider b({"http://h", "", "t"}, t400, no_sleep(5));
    EXPECT_THROW(b.complete(make_request("q")), ProviderError);
    EXPECT_EQ(t400->calls, 1u);
}

TEST(OpenAIProvider, MalformedBodies) {
    const ChatRequest r = make_request("q");
    EXPECT_THROW(OpenAICompatibleProvider::parse_response("nope", r, "t"), MalformedProviderResponse);
    EXPECT_THROW(OpenAICompatibleProvider::parse_response(R"({"choices":[]})", r, "t"), MalformedProviderResponse);
    EXPECT_THROW(OpenAICompatibleProvider::parse_response(R"({"choices":[{"message":{}}]})", r, "t"),
                 MalformedProviderResponse);
    // usage absent -> estimated
    const auto resp =
        OpenAICompatibleProvider::parse_response(R"({"choices":[{"message":{"content":"abcdefgh"}}]})", r, "t");
    EXPECT_EQ(resp.completion_tokens, 2);
    EXPECT_EQ(resp.prompt_tokens, estimate_prompt_tokens(r));
}

TEST(OpenAIProvider, RequestBody) {
    ChatRequest r = make_request("q", 0.7);
    r.seed = 4;
    r.response_format_hint = "json";
    const json body = OpenAICompatibleProvider::request_body(r);
    EXPECT_EQ(body["model"], "m");
    EXPECT_EQ(body["seed"], 4);
    EXPECT_EQ(body["response_format"]["type"], "json_object");
    EXPECT_FALSE(body.contains("max_tokens"));
    EXPECT_DOUBLE_EQ(body["temperature"].get<double>(), 0.7);
}

TEST(HttplibTransport, LocalServerWith429s) {
    httplib::Server server;
    std::atomic<int> hits{0};
    std::string seen_auth;
    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        const int n = ++hits;
        seen_auth = req.get_header_value("Authorization");
        if (n <= 2) {
            res.status = 429;
            res.set_content("rate limited", "text/plain");
            return;
        }
        const json body = json::parse(req.body);
        res.set_content(ok_body("echo " + body["messages"][0]["content"].get<std::string>(), 5, 3),
                        "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread th([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    auto transport = std::make_shared<HttplibTransport>(std::chrono::seconds(5));
    OpenAICompatibleProvider p({"http://127.0.0.1:" + std::to_string(port), "k", "local"}, transport, no_sleep(5));
    LlmGateway gw(p, "m", 2);
    TokenLedger ledger;
    const ChatResponse resp = gw.complete(make_request("ping"), ledger);
    server.stop();
    th.join();

    EXPECT_EQ(resp.content, "echo ping");
    EXPECT_EQ(hits.load(), 3);
    EXPECT_EQ(seen_auth, "Bearer k");
    EXPECT_EQ(ledger.size(), 1u);
    EXPECT_EQ(ledger.total(), (TokenCount{5, 3}));
}

TEST(LlmGateway, InFlightLimitBoundsConcurrency) {
    class SlowProvider : public Provider {
    public:
        ChatResponse complete(const ChatRequest&) override {
            const int now = ++active;
            int prev = peak.load();
            while (now > prev && !peak.compare_exchange_weak(prev, now)) {
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(20));
            --active;
            return ChatResponse{"x", 1, 1, "slow", false};
        }
        std::string id() const override { return "slow"; }
        std::atomic<int> active{0};
        std::atomic<int> peak{0};
    } slow;
    LlmGateway gw(slow, "m", 2);
    TokenLedger ledger;
    std::vector<std::thread> threads;
    for (int i = 0; i < 8; ++i) threads.emplace_back([&] { gw.complete(make_request("q"), ledger); });
    for (auto& t : threads) t.join();
    EXPECT_LE(slow.peak.load(), 2);
    EXPECT_EQ(ledger.size(), 8u);
}

TEST(LlmGateway, FailedCallsAreNotLedgered) {
    MockProvider mock(json::array());
    LlmGateway gw(mock, "m");
    TokenLedger ledger;
    EXPECT_THROW(gw.complete(make_request("q"), ledger), MockNoMatch);
    EXPECT_EQ(ledger.size(), 0u);
}
