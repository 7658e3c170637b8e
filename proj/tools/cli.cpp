#include "cli.hpp"

#include <glob.h>

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <regex>
#include <set>

#include "camp/baselines.hpp"
#include "camp/dataprep.hpp"
#include "camp/error.hpp"
#include "camp/eval.hpp"
#include "camp/log.hpp"
#include "camp/mockgen.hpp"
#include "camp/pipeline.hpp"
#include "camp/util.hpp"

namespace camp::cli {

namespace fs = std::filesystem;

namespace {

class UsageError : public Error {
public:
    using Error::Error;
};

// --- configuration -----------------------------------------------------------------

json default_config() {
    return json{{"provider",
                 {{"base_url", ""},
                  {"model", ""},
                  {"credential_env", "CAMP_API_KEY"},
                  {"in_flight_limit", 8},
                  {"retry_cap", 5},
                  {"timeout_seconds", 120},
                  {"mock_script", ""}}},
                {"method", "camp"},
                {"params", json::object()},
                {"k", 3},
                {"seed", 0},
                {"cache_dir", ""},
                {"out_dir", "runs/latest"},
                {"bhc_enabled", false},
                {"always_arbitrate", false},
                {"prompt_dir", ""},
                {"case_parallelism", 1},
                {"max_tokens", json::object()}};
}

// Flags shared by every subcommand that talks to a provider.
struct ProviderFlags {
    std::string config_path;
    std::string mock;
    std::string base_url;
    std::string model;
    std::string cache_dir;
    std::string prompt_dir;
    int in_flight = 0;
    int retry_cap = 0;
};

void add_provider_flags(CLI::App* cmd, ProviderFlags& f) {
    cmd->add_option("--config", f.config_path, "JSON run configuration; flags override its values");
    cmd->add_option("--mock", f.mock, "Scripted mock provider (JSON) instead of a live endpoint");
    cmd->add_option("--base-url", f.base_url, "OpenAI-compatible endpoint base URL");
    cmd->add_option("--model", f.model, "Model name sent with every request");
    cmd->add_option("--cache-dir", f.cache_dir, "Response cache directory");
    cmd->add_option("--prompt-dir", f.prompt_dir, "Prompt template directory");
    cmd->add_option("--in-flight", f.in_flight, "Maximum concurrent provider requests");
    cmd->add_option("--retry-cap", f.retry_cap, "Maximum attempts per request");
}

json load_config(const ProviderFlags& f) {
    json cfg = default_config();
    if (!f.config_path.empty()) {
        json file;
        try {
            file = json::parse(util::read_file(f.config_path));
        } catch (const json::exception& e) {
            throw UsageError("config " + f.config_path + ": " + e.what());
        }
        if (!file.is_object()) throw UsageError("config " + f.config_path + " must be a JSON object");
        cfg.merge_patch(file);
    }
    auto& p = cfg["provider"];
    if (!f.mock.empty()) p["mock_script"] = f.mock;
    if (!f.base_url.empty()) p["base_url"] = f.base_url;
    if (!f.model.empty()) p["model"] = f.model;
    if (f.in_flight > 0) p["in_flight_limit"] = f.in_flight;
    if (f.retry_cap > 0) p["retry_cap"] = f.retry_cap;
    if (!f.cache_dir.empty()) cfg["cache_dir"] = f.cache_dir;
    if (!f.prompt_dir.empty()) cfg["prompt_dir"] = f.prompt_dir;
    return cfg;
}

struct Runtime {
    std::unique_ptr<Provider> base;
    std::unique_ptr<CachingProvider> cache;
    std::unique_ptr<LlmGateway> gateway;
    PromptLibrary prompts;
    std::map<std::string, int> max_tokens;

    Provider& top() { return cache ? static_cast<Provider&>(*cache) : *base; }
};

std::unique_ptr<Runtime> make_runtime(const json& cfg) {
    auto rt = std::make_unique<Runtime>();
    const json& p = cfg.at("provider");
    const std::string mock = p.value("mock_script", "");
    std::string model = p.value("model", "");
    if (!mock.empty()) {
        if (!fs::exists(mock)) throw IoError("mock script not found: " + mock);
        rt->base = MockProvider::from_file(mock);
        if (model.empty()) model = "mock";
    } else {
        const std::string base_url = p.value("base_url", "");
        if (base_url.empty()) throw UsageError("no provider configured: pass --mock or --base-url (or set provider.base_url)");
        if (model.empty()) throw UsageError("no model configured: pass --model or set provider.model");
        const std::string env = p.value("credential_env", "CAMP_API_KEY");
        const char* key = std::getenv(env.c_str());
        OpenAIConfig oc{base_url, key ? key : "", "openai-compatible:" + base_url};
        RetryPolicy retry;
        retry.max_attempts = p.value("retry_cap", 5);
        auto transport = std::make_shared<HttplibTransport>(std::chrono::seconds(p.value("timeout_seconds", 120)));
        rt->base = std::make_unique<OpenAICompatibleProvider>(oc, transport, retry);
    }
    const std::string cache_dir = cfg.value("cache_dir", "");
    if (!cache_dir.empty()) rt->cache = std::make_unique<CachingProvider>(*rt->base, cache_dir);
    rt->gateway = std::make_unique<LlmGateway>(rt->top(), model, p.value("in_flight_limit", 8));
    const std::string prompt_dir = cfg.value("prompt_dir", "");
    rt->prompts = prompt_dir.empty() ? PromptLibrary::load_default() : PromptLibrary::load(prompt_dir);
    rt->max_tokens = cfg.value("max_tokens", std::map<std::string, int>{});
    return rt;
}

std::vector<TaskInstance> load_corpus(const std::string& path) {
    if (!fs::exists(path)) throw IoError("corpus not found: " + path);
    return read_instances(path);
}

// Config recorded in manifests: everything except credentials, which never
// enter the document.
json manifest_config(const json& cfg) { return cfg; }

std::vector<int> parse_k_values(const std::string& spec) {
    std::vector<int> out;
    static const std::regex range(R"(^\s*(\d+)\s*\.\.\s*(\d+)\s*$)");
    std::smatch m;
    if (std::regex_match(spec, m, range)) {
        const int lo = std::stoi(m[1].str());
        const int hi = std::stoi(m[2].str());
        if (lo < 1 || hi < lo) throw UsageError("bad k range '" + spec + "'");
        for (int k = lo; k <= hi; ++k) out.push_back(k);
        return out;
    }
    std::string cur;
    for (char c : spec + ",") {
        if (c == ',') {
            const std::string t = util::trim(cur);
            if (!t.empty()) {
                if (t.find_first_not_of("0123456789") != std::string::npos) throw UsageError("bad k value '" + t + "'");
                const int k = std::stoi(t);
                if (k < 1) throw UsageError("k must be at least 1");
                out.push_back(k);
            }
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (out.empty()) throw UsageError("no k values in '" + spec + "'");
    return out;
}

std::vector<fs::path> expand_paths(const std::vector<std::string>& patterns) {
    std::vector<fs::path> out;
    for (const auto& pat : patterns) {
        if (pat.find_first_of("*?[") == std::string::npos) {
            out.emplace_back(pat);
            continue;
        }
        glob_t g{};
        std::vector<fs::path> hits;
        if (::glob(pat.c_str(), 0, nullptr, &g) == 0) {
            for (std::size_t i = 0; i < g.gl_pathc; ++i) hits.emplace_back(g.gl_pathv[i]);
        }
        globfree(&g);
        if (hits.empty()) throw IoError("no files match " + pat);
        out.insert(out.end(), hits.begin(), hits.end());
    }
    return out;
}

// --- subcommands ---------------------------------------------------------------------

struct RunFlags {
    ProviderFlags provider;
    std::string corpus;
    std::string out_dir;
    std::string method;
    std::string params;
    int k = 0;
    long long seed = -1;
    int case_parallelism = 0;
    bool resume = false;
    bool always_arbitrate = false;
    bool bhc = false;
};

json run_config(const RunFlags& f) {
    json cfg = load_config(f.provider);
    if (!f.method.empty()) cfg["method"] = f.method;
    if (!f.out_dir.empty()) cfg["out_dir"] = f.out_dir;
    if (f.k > 0) cfg["k"] = f.k;
    if (f.seed >= 0) cfg["seed"] = f.seed;
    if (f.case_parallelism > 0) cfg["case_parallelism"] = f.case_parallelism;
    if (f.always_arbitrate) cfg["always_arbitrate"] = true;
    if (f.bhc) cfg["bhc_enabled"] = true;
    if (!f.params.empty()) {
        try {
            cfg["params"].merge_patch(json::parse(f.params));
        } catch (const json::exception& e) {
            throw UsageError(std::string("--params: ") + e.what());
        }
    }
    return cfg;
}

json strategy_params(const json& cfg) {
    json params = cfg.value("params", json::object());
    if (cfg.value("method", "camp") == "camp") {
        params["k"] = cfg.value("k", 3);
        params["bhc"] = cfg.value("bhc_enabled", false);
        params["always_arbitrate"] = cfg.value("always_arbitrate", false);
    }
    return params;
}

RunSummary execute_run(const json& cfg, Runtime& rt, const std::vector<TaskInstance>& corpus, bool resume) {
    const std::string method = cfg.value("method", "camp");
    auto strategy = make_strategy(method, strategy_params(cfg));
    StrategyContext sctx{*rt.gateway, rt.prompts, rt.max_tokens};
    RunOptions options;
    options.out_dir = cfg.value("out_dir", "runs/latest");
    options.resume = resume;
    options.case_parallelism = cfg.value("case_parallelism", 1);
    options.method = method;
    options.provider_id = rt.top().id();
    options.prompt_hash = rt.prompts.content_hash();
    options.seed = cfg.value("seed", std::uint64_t{0});
    options.config = manifest_config(cfg);
    options.config["effective_params"] = strategy->params();
    return run_corpus(corpus, [&](const TaskInstance& t) { return strategy->run(t, sctx); }, options);
}

int cmd_run(const RunFlags& f, std::ostream& out) {
    const json cfg = run_config(f);
    auto rt = make_runtime(cfg);
    const auto corpus = load_corpus(f.corpus);
    const RunSummary s = execute_run(cfg, *rt, corpus, f.resume);
    const auto& m = s.manifest;
    out << "method " << m["method"].get<std::string>() << ": " << s.executed << " cases run, " << s.skipped
        << " skipped, " << m["cases_failed"].get<std::size_t>() << " failed; trace in "
        << cfg.value("out_dir", "runs/latest") << "/trace.jsonl\n";
    if (!corpus.empty() && m["cases_ok"].get<std::size_t>() == 0) return kProvider;
    return kOk;
}

struct EvalFlags {
    std::string trace;
    std::string label;
    std::string out;
    bool label_level = false;
};

int cmd_evaluate(const EvalFlags& f, std::ostream& out) {
    const auto results = read_trace(f.trace);
    std::string label = f.label;
    if (label.empty()) label = results.empty() ? "unknown" : results.front().method;
    const DiagnosticScore score = score_corpus(results, f.label_level ? F1Mode::label_level : F1Mode::set_level);
    const std::string table = render_score_table({{label, score}});
    out << table;
    const fs::path report = f.out.empty() ? fs::path(f.trace).parent_path() / "report.json" : fs::path(f.out);
    json j = {{"method", label}, {"trace", f.trace}, {"score", score}};
    util::write_file(report, j.dump(2) + "\n");
    fs::path txt = report;
    txt.replace_extension(".txt");
    util::write_file(txt, table);
    return kOk;
}

struct SweepFlags {
    ProviderFlags provider;
    std::string corpus;
    std::string out_dir;
    std::string k_values = "1..5";
    long long seed = -1;
};

int cmd_sweep(const SweepFlags& f, std::ostream& out) {
    RunFlags rf;
    rf.provider = f.provider;
    rf.out_dir = f.out_dir;
    rf.seed = f.seed;
    json cfg = run_config(rf);
    cfg["method"] = "camp";
    auto rt = make_runtime(cfg);
    const auto corpus = load_corpus(f.corpus);
    const fs::path base = cfg.value("out_dir", "runs/latest");
    const auto rows = panel_size_sweep(parse_k_values(f.k_values), [&](int k) {
        json c = cfg;
        c["k"] = k;
        c["out_dir"] = (base / ("k" + std::to_string(k))).string();
        execute_run(c, *rt, corpus, false);
        return read_trace(fs::path(c["out_dir"].get<std::string>()) / "trace.jsonl");
    });
    util::write_file(base / "sweep.csv", sweep_csv(rows));
    json j = json::array();
    for (const auto& r : rows) j.push_back({{"k", r.k}, {"score", r.score}});
    util::write_file(base / "sweep.json", j.dump(2) + "\n");
    out << render_sweep_table(rows);
    out << "csv: " << (base / "sweep.csv").string() << "\n";
    return kOk;
}

int cmd_tokens(const std::vector<std::string>& traces, const std::string& out_path, std::ostream& out) {
    std::map<std::string, std::vector<CaseResult>> by_method;
    for (const auto& p : expand_paths(traces)) {
        for (auto& r : read_trace(p)) by_method[r.method].push_back(std::move(r));
    }
    const json report = token_report(by_method);
    out << render_token_report(report);
    if (!out_path.empty()) util::write_file(out_path, report.dump(2) + "\n");
    return kOk;
}

int cmd_alignment(const std::string& trace, const std::string& out_path, std::ostream& out) {
    const AlignmentMatrix m = alignment_matrix(read_trace(trace));
    const std::string csv = alignment_csv(m);
    out << csv;
    if (!out_path.empty()) util::write_file(out_path, csv);
    return kOk;
}

int cmd_audit(const std::string& trace, const std::string& case_id, std::ostream& out, std::ostream& err) {
    const auto results = read_trace(trace);
    for (const auto& r : results) {
        if (r.case_id == case_id) {
            out << render_audit(r);
            return kOk;
        }
    }
    std::vector<std::string> ids;
    for (const auto& r : results) ids.push_back(r.case_id);
    err << "error: case '" << case_id << "' not in " << trace << "; available: " << util::join(ids, ", ") << "\n";
    return kUsage;
}

struct PrepareFlags {
    ProviderFlags provider;
    std::string input;
    std::string out;
    std::string pool;
    std::string cache;
    long long seed = 0;
    std::size_t resplit = 120;
    bool llm_steps = false;
    bool no_llm_steps = false;
};

int cmd_prepare(const PrepareFlags& f, std::ostream& out, std::ostream& err) {
    auto records = read_raw_records(f.input);
    PrepOptions opt;
    opt.seed = static_cast<std::uint64_t>(f.seed);
    opt.normalize.resplit_threshold = f.resplit;

    std::map<std::string, std::vector<std::string>> cache;
    const fs::path cache_path = f.cache.empty() ? fs::path(f.out + ".distractors.json") : fs::path(f.cache);
    if (!f.cache.empty() && fs::exists(cache_path)) {
        cache = json::parse(util::read_file(cache_path)).get<std::map<std::string, std::vector<std::string>>>();
    }
    opt.distractor_cache = &cache;

    std::unique_ptr<Runtime> rt;
    TokenLedger ledger;
    if (f.llm_steps && !f.no_llm_steps) {
        rt = make_runtime(load_config(f.provider));
        opt.llm_phrase_mask = opt.llm_distractor_filter = opt.llm_semantic_filter = true;
        opt.agents = [&](const std::string& note_id) {
            return AgentContext{*rt->gateway, rt->prompts, ledger, note_id, rt->max_tokens};
        };
    }
    const PrepResult res = prepare_corpus(std::move(records), opt);
    write_instances(f.out, res.instances);
    const fs::path pool_path = f.pool.empty() ? fs::path(f.out + ".pool.json") : fs::path(f.pool);
    util::write_file(pool_path, json(res.pool.entries()).dump(2) + "\n");
    util::write_file(cache_path, json(cache).dump(2) + "\n");
    for (const auto& r : res.rejected) err << "rejected " << r.note_id << ": " << r.reason << "\n";
    out << res.instances.size() << " instances written to " << f.out << " (" << res.rejected.size()
        << " rejected, pool of " << res.pool.size() << ")\n";
    return kOk;
}

int cmd_convert(const std::string& input, const std::string& output, std::ostream& out) {
    std::string lines;
    std::size_t n = 0;
    for (const auto& line : util::split_lines(util::read_file(input))) {
        if (util::trim(line).empty()) continue;
        const json j = json::parse(line);
        RawRecord r;
        r.note_id = j.at("note_id").get<std::string>();
        const std::string text = j.contains("input") ? j["input"].get<std::string>() : j.at("text").get<std::string>();
        r.sections = split_sections(text);
        for (const auto& [name, body] : r.sections) {
            if (name == "DISCHARGE DIAGNOSIS") r.discharge_diagnosis_text = body;
        }
        if (j.contains("target") && j["target"].is_string()) r.reference_bhc = j["target"].get<std::string>();
        if (j.contains("service") && j["service"].is_string()) r.service_label = j["service"].get<std::string>();
        lines += raw_record_to_json(r) + "\n";
        ++n;
    }
    util::write_file(output, lines);
    out << n << " records converted to " << output << "\n";
    return kOk;
}

int cmd_stats(const std::string& corpus, std::ostream& out) {
    out << corpus_stats(load_corpus(corpus)).dump(2) << "\n";
    return kOk;
}

struct JudgeFlags {
    ProviderFlags provider;
    std::string corpus;
    std::vector<std::string> systems;
    std::string out;
    long long seed = 0;
};

int cmd_judge(const JudgeFlags& f, std::ostream& out, std::ostream& err) {
    std::map<std::string, fs::path> systems;
    for (const auto& s : f.systems) {
        const auto eq = s.find('=');
        if (eq == std::string::npos || eq == 0) throw UsageError("--system expects name=run_dir, got '" + s + "'");
        systems[s.substr(0, eq)] = fs::path(s.substr(eq + 1)) / "bhc";
    }
    if (systems.size() < 2) throw UsageError("judge needs at least two --system entries");
    auto rt = make_runtime(load_config(f.provider));
    std::vector<JudgeResult> judgments;
    TokenLedger ledger;
    for (const auto& inst : load_corpus(f.corpus)) {
        if (!inst.reference_bhc) continue;
        std::map<std::string, std::string> outputs;
        for (const auto& [name, dir] : systems) {
            const fs::path p = dir / (inst.case_id + ".txt");
            if (fs::exists(p)) outputs[name] = util::trim(util::read_file(p));
        }
        if (outputs.size() != systems.size()) {
            err << "skipping " << inst.case_id << ": missing BHC output for some systems\n";
            continue;
        }
        AgentContext ctx{*rt->gateway, rt->prompts, ledger, inst.case_id, rt->max_tokens};
        try {
            judgments.push_back(judge_bhc(ctx, inst.masked_note, *inst.reference_bhc, outputs, bhc_judge_dimensions(),
                                          static_cast<std::uint64_t>(f.seed)));
        } catch (const ProviderError& e) {
            err << "judge failed for " << inst.case_id << ": " << e.what() << "\n";
            judgments.push_back(JudgeResult{});
        }
    }
    const PooledRanks ranks = pooled_rank_report(judgments);
    out << render_pooled_ranks(ranks);
    if (!f.out.empty()) util::write_file(f.out, json(ranks).dump(2) + "\n");
    return kOk;
}

int cmd_mockgen(const std::string& corpus, const std::string& output, long long seed, int judge_systems,
                std::ostream& out) {
    MockGenOptions o;
    o.seed = static_cast<std::uint64_t>(seed);
    o.judge_systems = judge_systems;
    const json script = generate_mock_script(load_corpus(corpus), o);
    util::write_file(output, script.dump(1) + "\n");
    out << script.size() << " mock rules written to " << output << "\n";
    return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"camp: case-adaptive multi-agent panel for diagnosis selection"};
    app.require_subcommand(1);
    std::string log_level = "warn";
    app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off")->capture_default_str();

    PrepareFlags pf;
    auto* prepare = app.add_subcommand("prepare", "Build a task corpus from raw discharge records");
    prepare->add_option("--input", pf.input, "Raw records (JSONL)")->required();
    prepare->add_option("--out", pf.out, "Output corpus (JSONL)")->required();
    prepare->add_option("--pool", pf.pool, "Pool file (default <out>.pool.json)");
    prepare->add_option("--cache", pf.cache, "Distractor cache to reuse and update (default: write <out>.distractors.json)");
    prepare->add_option("--seed", pf.seed, "Base seed")->capture_default_str();
    prepare->add_option("--resplit", pf.resplit, "Re-split threshold in characters")->capture_default_str();
    prepare->add_flag("--llm-steps", pf.llm_steps, "Run the provider-backed masking and filtering steps");
    prepare->add_flag("--no-llm-steps", pf.no_llm_steps, "Skip provider-backed steps (default)");
    add_provider_flags(prepare, pf.provider);

    std::string conv_in, conv_out;
    auto* convert = app.add_subcommand("convert", "Convert plain-text summaries ({note_id, input, target}) to raw records");
    convert->add_option("--input", conv_in)->required();
    convert->add_option("--out", conv_out)->required();

    RunFlags rf;
    auto* runc = app.add_subcommand("run", "Run a method over a corpus");
    runc->add_option("--corpus", rf.corpus, "Task corpus (JSONL)")->required();
    runc->add_option("--out-dir", rf.out_dir, "Output directory");
    runc->add_option("--method", rf.method, "single_agent|cot|self_consistency|majority_voting|medagents|llm_judge|devils_advocate|camp");
    runc->add_option("--params", rf.params, "Method parameters as a JSON object");
    runc->add_option("--k", rf.k, "Panel size");
    runc->add_option("--seed", rf.seed, "Seed recorded in the manifest");
    runc->add_option("--case-parallelism", rf.case_parallelism, "Cases run concurrently");
    runc->add_flag("--resume", rf.resume, "Skip cases already completed in the trace");
    runc->add_flag("--always-arbitrate", rf.always_arbitrate, "Send every diagnosis to arbitration (ablation)");
    runc->add_flag("--bhc", rf.bhc, "Generate a brief hospital course per case");
    add_provider_flags(runc, rf.provider);

    EvalFlags ef;
    auto* evaluate = app.add_subcommand("evaluate", "Score a trace");
    evaluate->add_option("--trace", ef.trace)->required();
    evaluate->add_option("--method-label", ef.label, "Label for the report (default: method in trace)");
    evaluate->add_option("--out", ef.out, "Report JSON path (default: report.json next to the trace)");
    evaluate->add_flag("--label-level", ef.label_level, "Macro-average F1 over labels instead of cases");

    SweepFlags sf;
    auto* sweep = app.add_subcommand("sweep", "Panel-size sweep");
    sweep->add_option("--corpus", sf.corpus)->required();
    sweep->add_option("--k", sf.k_values, "Range a..b or list a,b,c")->capture_default_str();
    sweep->add_option("--out-dir", sf.out_dir, "Output directory");
    sweep->add_option("--seed", sf.seed);
    add_provider_flags(sweep, sf.provider);

    std::vector<std::string> token_traces;
    std::string tokens_out;
    auto* tokens = app.add_subcommand("tokens", "Token usage report");
    tokens->add_option("--traces", token_traces, "Trace files or glob patterns")->required();
    tokens->add_option("--out", tokens_out, "Report JSON path");

    std::string align_trace, align_out;
    auto* alignment = app.add_subcommand("alignment", "Service vs specialist alignment matrix");
    alignment->add_option("--trace", align_trace)->required();
    alignment->add_option("--out", align_out, "CSV path");

    std::string audit_trace, audit_case;
    auto* audit = app.add_subcommand("audit", "Render one case's votes and arbitration");
    audit->add_option("--trace", audit_trace)->required();
    audit->add_option("--case-id", audit_case)->required();

    std::string stats_corpus;
    auto* stats = app.add_subcommand("stats", "Corpus statistics");
    stats->add_option("--corpus", stats_corpus)->required();

    JudgeFlags jf;
    auto* judge = app.add_subcommand("judge", "Pooled-rank BHC judging across runs");
    judge->add_option("--corpus", jf.corpus)->required();
    judge->add_option("--system", jf.systems, "name=run_dir (repeat)")->required();
    judge->add_option("--out", jf.out, "Report JSON path");
    judge->add_option("--seed", jf.seed, "Seed for label anonymization")->capture_default_str();
    add_provider_flags(judge, jf.provider);

    std::string mg_corpus, mg_out;
    long long mg_seed = 7;
    int mg_systems = 2;
    auto* mockgen = app.add_subcommand("mockgen", "Generate a scripted mock for a corpus");
    mockgen->add_option("--corpus", mg_corpus)->required();
    mockgen->add_option("--out", mg_out)->required();
    mockgen->add_option("--seed", mg_seed)->capture_default_str();
    mockgen->add_option("--judge-systems", mg_systems, "Systems ranked by the judge rule")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    const auto level = spdlog::level::from_str(log_level);
    logger().set_level(level);

    try {
        if (*prepare) return cmd_prepare(pf, out, err);
        if (*convert) return cmd_convert(conv_in, conv_out, out);
        if (*runc) {
            if (rf.corpus.empty()) throw UsageError("--corpus is required");
            return cmd_run(rf, out);
        }
        if (*evaluate) return cmd_evaluate(ef, out);
        if (*sweep) return cmd_sweep(sf, out);
        if (*tokens) return cmd_tokens(token_traces, tokens_out, out);
        if (*alignment) return cmd_alignment(align_trace, align_out, out);
        if (*audit) return cmd_audit(audit_trace, audit_case, out, err);
        if (*stats) return cmd_stats(stats_corpus, out);
        if (*judge) return cmd_judge(jf, out, err);
        if (*mockgen) return cmd_mockgen(mg_corpus, mg_out, mg_seed, mg_systems, out);
    } catch (const ProviderError& e) {
        err << "provider error: " << e.what() << "\n";
        return kProvider;
    } catch (const IoError& e) {
        err << "io error: " << e.what() << "\n";
        return kIo;
    } catch (const SchemaError& e) {
        err << "input error: " << e.what() << "\n";
        return kIo;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    }
    return kUsage;
}

}  // namespace camp::cli
