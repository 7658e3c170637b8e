#include "camp/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <future>
#include <set>

#include "camp/error.hpp"
#include "camp/log.hpp"
#include "camp/router.hpp"
#include "camp/util.hpp"

namespace camp {

namespace {

int stage_rank(const std::string& s) {
    static const std::vector<std::string> order = {
        stage::phrase_mask,       stage::distractor_filter,  stage::semantic_filter,
        stage::assessment,        stage::assembly,           stage::specialist,
        stage::arbitration,       stage::bhc,                stage::single_agent,
        stage::cot,               stage::self_consistency,   stage::majority_voting,
        stage::medagents_initial, stage::medagents_revote,   stage::llm_judge_proposal,
        stage::llm_judge,         stage::devils_advocate_proposal, stage::devils_advocate_critic,
        stage::bhc_judge};
    auto it = std::find(order.begin(), order.end(), s);
    return it == order.end() ? static_cast<int>(order.size()) : static_cast<int>(it - order.begin());
}

}  // namespace

TokenCount CaseResult::total_tokens() const {
    TokenCount t;
    for (const auto& [_, c] : tokens_by_stage) t += c;
    return t;
}

void to_json(json& j, const CaseResult& r) {
    j = json{{"schema_version", r.schema_version},
             {"case_id", r.case_id},
             {"method", r.method},
             {"status", r.status},
             {"error", r.error},
             {"candidates", r.candidates},
             {"gold", r.gold},
             {"service_label", r.service_label ? json(*r.service_label) : json(nullptr)},
             {"panel", r.panel},
             {"key_dimensions", r.key_dimensions},
             {"initial_decisions", r.initial_decisions},
             {"matrix", r.matrix},
             {"resolutions", r.resolutions},
             {"accepted", r.accepted},
             {"bhc", r.bhc ? json(*r.bhc) : json(nullptr)},
             {"tokens_by_stage", r.tokens_by_stage},
             {"calls", r.calls},
             {"degraded_flags", r.degraded_flags},
             {"details", r.details}};
}

void from_json(const json& j, CaseResult& r) {
    r.schema_version = j.value("schema_version", kTraceSchemaVersion);
    r.case_id = j.at("case_id").get<std::string>();
    r.method = j.value("method", std::string("camp"));
    r.status = j.value("status", std::string("ok"));
    r.error = j.value("error", std::string());
    r.candidates = j.value("candidates", std::vector<CandidateDiagnosis>{});
    r.gold = j.value("gold", std::vector<int>{});
    r.service_label.reset();
    if (j.contains("service_label") && j["service_label"].is_string()) r.service_label = j["service_label"].get<std::string>();
    r.panel = j.contains("panel") ? j["panel"].get<PanelSpec>() : PanelSpec{};
    r.key_dimensions = j.value("key_dimensions", std::string());
    r.initial_decisions = j.value("initial_decisions", std::vector<Decision>{});
    r.matrix = j.contains("matrix") ? j["matrix"].get<VoteMatrix>() : VoteMatrix{};
    r.resolutions = j.value("resolutions", std::vector<ResolutionRecord>{});
    r.accepted = j.value("accepted", std::vector<int>{});
    r.bhc.reset();
    if (j.contains("bhc") && j["bhc"].is_string()) r.bhc = j["bhc"].get<std::string>();
    r.tokens_by_stage = j.value("tokens_by_stage", std::map<std::string, TokenCount>{});
    r.calls = j.value("calls", std::vector<LedgerEntry>{});
    r.degraded_flags = j.value("degraded_flags", std::vector<std::string>{});
    r.details = j.value("details", json::object());
}

void attach_ledger(CaseResult& result, const TokenLedger& ledger) {
    auto calls = ledger.entries();
    std::stable_sort(calls.begin(), calls.end(), [](const LedgerEntry& a, const LedgerEntry& b) {
        const int ra = stage_rank(a.stage);
        const int rb = stage_rank(b.stage);
        if (ra != rb) return ra < rb;
        if (a.stage != b.stage) return a.stage < b.stage;
        if (a.slot != b.slot) return a.slot < b.slot;
        if (a.role != b.role) return a.role < b.role;
        return a.attempt < b.attempt;
    });
    result.tokens_by_stage.clear();
    for (const auto& c : calls) result.tokens_by_stage[c.stage] += TokenCount{c.prompt_tokens, c.completion_tokens};
    result.calls = std::move(calls);
}

CaseResult make_result(const TaskInstance& instance, const std::string& method) {
    CaseResult r;
    r.case_id = instance.case_id;
    r.method = method;
    r.candidates = instance.candidates;
    r.gold = instance.gold;
    r.service_label = instance.service_label;
    return r;
}

// --- run_case --------------------------------------------------------------------

CaseResult run_case(const TaskInstance& instance, LlmGateway& llm, const PromptLibrary& prompts,
                    const CampConfig& config) {
    if (config.k < 1) throw Error("panel size k must be at least 1");
    CaseResult result = make_result(instance, "camp");
    TokenLedger ledger;
    AgentContext ctx{llm, prompts, ledger, instance.case_id, config.max_tokens};
    const auto& note = instance.masked_note;
    const auto& candidates = instance.candidates;
    auto& flags = result.degraded_flags;

    try {
        // Stage 1
        auto assessment = initial_assessment(ctx, note, candidates);
        if (!assessment.parse_ok) flags.push_back("assessment_unparseable");
        for (int idx : assessment.parsed.dropped_indices) {
            flags.push_back("assessment_dropped_index:" + std::to_string(idx));
        }
        result.initial_decisions = assessment.parsed.decisions;
        result.key_dimensions = assessment.parsed.key_dimensions;

        auto assembly = assemble_panel(ctx, note, candidates, config.k);
        if (!assembly.parse_ok) flags.push_back("panel_unparseable");
        if (assembly.parsed.padded > 0) flags.push_back("panel_padded:" + std::to_string(assembly.parsed.padded));
        // extra recruits are dropped in order; not a degradation
        if (assembly.parsed.truncated > 0) result.details["panel_truncated"] = assembly.parsed.truncated;
        result.panel = assembly.parsed.panel;

        // Stage 2
        const auto& specialists = result.panel.specialists;
        std::vector<StructuredReply<std::vector<SpecialistEvaluation>>> reviews(specialists.size());
        if (config.concurrent && specialists.size() > 1) {
            std::vector<std::future<StructuredReply<std::vector<SpecialistEvaluation>>>> futures;
            for (std::size_t s = 0; s < specialists.size(); ++s) {
                futures.push_back(std::async(std::launch::async, [&, s] {
                    return specialist_review(ctx, note, specialists[s], static_cast<int>(s), candidates);
                }));
            }
            std::exception_ptr first_error;
            for (std::size_t s = 0; s < futures.size(); ++s) {
                try {
                    reviews[s] = futures[s].get();
                } catch (...) {
                    if (!first_error) first_error = std::current_exception();
                }
            }
            if (first_error) std::rethrow_exception(first_error);
        } else {
            for (std::size_t s = 0; s < specialists.size(); ++s) {
                reviews[s] = specialist_review(ctx, note, specialists[s], static_cast<int>(s), candidates);
            }
        }
        std::vector<std::vector<SpecialistEvaluation>> rows;
        for (std::size_t s = 0; s < reviews.size(); ++s) {
            if (!reviews[s].parse_ok) flags.push_back("specialist_unparseable:" + std::to_string(s));
            rows.push_back(std::move(reviews[s].parsed));
        }
        result.matrix = VoteMatrix(std::move(rows));

        // Stage 3
        Arbitrator arbitrator = [&](const ArbitrationRequest& req) {
            std::vector<ArbitrationEvidence> evidence;
            for (std::size_t s = 0; s < req.column.size(); ++s) {
                evidence.push_back({specialists[s].role, req.column[s], false});
            }
            return arbitrate(ctx, note, candidates[static_cast<std::size_t>(req.diagnosis_index - 1)], req.tally,
                             std::move(evidence))
                .parsed;
        };
        ResolveOptions options;
        options.policy = config.always_arbitrate ? RoutingPolicy::always_arbitrate : RoutingPolicy::gated;
        options.concurrent_arbitration = config.concurrent;
        result.resolutions = resolve_case(result.matrix, result.initial_decisions, arbitrator, options);
        for (const auto& rec : result.resolutions) {
            if (rec.arbitration && rec.arbitration->degraded) {
                flags.push_back("arbitration_degraded:" + std::to_string(rec.diagnosis_index));
            }
        }
        result.accepted = accepted_indices(result.resolutions);

        if (config.bhc) {
            std::vector<CandidateDiagnosis> accepted;
            for (int idx : result.accepted) accepted.push_back(candidates[static_cast<std::size_t>(idx - 1)]);
            auto bhc = generate_bhc(ctx, note, accepted);
            if (!bhc.parse_ok) flags.push_back("bhc_empty");
            result.bhc = bhc.parsed;
        }
    } catch (const ProviderError& e) {
        result.status = "failed";
        result.error = e.what();
    } catch (const ArbitrationFailed& e) {
        result.status = "failed";
        result.error = e.what();
    }
    if (!result.ok()) {
        logger().error("case {} failed: {}", instance.case_id, result.error);
        result.accepted.clear();
    }
    attach_ledger(result, ledger);
    return result;
}

// --- trace IO --------------------------------------------------------------------

namespace {

struct TraceScan {
    std::vector<CaseResult> results;
    std::vector<std::string> lines;  // raw text of the valid lines
    bool dropped_tail = false;
};

TraceScan scan_trace(const std::filesystem::path& path) {
    TraceScan scan;
    if (!std::filesystem::exists(path)) return scan;
    const auto lines = util::split_lines(util::read_file(path));
    std::vector<std::string> nonblank;
    for (const auto& l : lines) {
        if (!util::trim(l).empty()) nonblank.push_back(l);
    }
    for (std::size_t i = 0; i < nonblank.size(); ++i) {
        try {
            scan.results.push_back(json::parse(nonblank[i]).get<CaseResult>());
            scan.lines.push_back(nonblank[i]);
        } catch (const json::exception& e) {
            if (i + 1 == nonblank.size()) {
                logger().warn("{}: dropping malformed final line ({})", path.string(), e.what());
                scan.dropped_tail = true;
            } else {
                throw SchemaError(path.string() + " line " + std::to_string(i + 1) + ": " + e.what());
            }
        }
    }
    return scan;
}

}  // namespace

std::vector<CaseResult> read_trace(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw IoError("trace not found: " + path.string());
    return scan_trace(path).results;
}

json build_manifest(const std::vector<CaseResult>& results, const RunOptions& options, std::size_t input_cases) {
    std::map<std::string, int> paths = {{"strong_consensus", 0}, {"weak_consensus", 0}, {"conflict", 0}};
    std::size_t ok = 0;
    std::size_t failed = 0;
    std::size_t provider_calls = 0;
    std::size_t arbitration_calls = 0;
    std::size_t repair_calls = 0;
    std::map<std::string, TokenCount> by_stage;
    TokenCount total;
    std::vector<std::string> failed_ids;
    for (const auto& r : results) {
        if (r.ok()) {
            ++ok;
        } else {
            ++failed;
            failed_ids.push_back(r.case_id);
        }
        for (const auto& rec : r.resolutions) ++paths[std::string(to_string(rec.path))];
        for (const auto& c : r.calls) {
            ++provider_calls;
            if (c.attempt > 0) ++repair_calls;
            if (c.stage == stage::arbitration && c.attempt == 0) ++arbitration_calls;
        }
        for (const auto& [s, t] : r.tokens_by_stage) {
            by_stage[s] += t;
            total += t;
        }
    }
    return json{{"schema_version", kTraceSchemaVersion},
                {"method", options.method},
                {"provider", options.provider_id},
                {"seed", options.seed},
                {"config", options.config},
                {"config_hash", util::sha256_hex(options.config.dump())},
                {"prompt_hash", options.prompt_hash},
                {"cases_input", input_cases},
                {"cases_in_trace", results.size()},
                {"cases_ok", ok},
                {"cases_failed", failed},
                {"failed_case_ids", failed_ids},
                {"path_counts", paths},
                {"arbitration_calls", arbitration_calls},
                {"repair_calls", repair_calls},
                {"provider_calls", provider_calls},
                {"tokens", total},
                {"tokens_by_stage", by_stage}};
}

RunSummary run_corpus(const std::vector<TaskInstance>& instances, const CaseRunner& runner,
                      const RunOptions& options) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(options.out_dir, ec);
    if (ec) throw IoError("cannot create output directory " + options.out_dir.string() + ": " + ec.message());
    const fs::path trace_path = options.out_dir / "trace.jsonl";

    RunSummary summary;
    std::vector<CaseResult> results;
    std::set<std::string> done;
    if (options.resume) {
        // keep completed cases; failed ones are retried
        TraceScan scan = scan_trace(trace_path);
        std::string kept;
        for (std::size_t i = 0; i < scan.results.size(); ++i) {
            if (!scan.results[i].ok()) continue;
            if (!done.insert(scan.results[i].case_id).second) continue;
            kept += scan.lines[i] + "\n";
            results.push_back(std::move(scan.results[i]));
        }
        util::write_file_atomic(trace_path, kept);
    } else {
        util::write_file(trace_path, "");
    }

    std::vector<const TaskInstance*> todo;
    for (const auto& inst : instances) {
        if (done.count(inst.case_id)) {
            ++summary.skipped;
        } else {
            todo.push_back(&inst);
        }
    }

    std::ofstream trace(trace_path, std::ios::app | std::ios::binary);
    if (!trace) throw IoError("cannot open " + trace_path.string());
    const std::size_t batch = static_cast<std::size_t>(std::max(1, options.case_parallelism));
    for (std::size_t start = 0; start < todo.size(); start += batch) {
        const std::size_t end = std::min(todo.size(), start + batch);
        std::vector<CaseResult> chunk(end - start);
        if (end - start == 1) {
            chunk[0] = runner(*todo[start]);
        } else {
            std::vector<std::future<CaseResult>> futures;
            for (std::size_t i = start; i < end; ++i) {
                futures.push_back(std::async(std::launch::async, [&, i] { return runner(*todo[i]); }));
            }
            std::exception_ptr first_error;
            for (std::size_t i = 0; i < futures.size(); ++i) {
                try {
                    chunk[i] = futures[i].get();
                } catch (...) {
                    if (!first_error) first_error = std::current_exception();
                }
            }
            if (first_error) std::rethrow_exception(first_error);
        }
        for (auto& r : chunk) {
            trace << json(r).dump() << '\n';
            trace.flush();
            if (!trace) throw IoError("write failed: " + trace_path.string());
            if (r.bhc) util::write_file(options.out_dir / "bhc" / (r.case_id + ".txt"), *r.bhc + "\n");
            ++summary.executed;
            results.push_back(std::move(r));
        }
    }
    trace.close();

    if (options.resume && summary.skipped > 0) {
        // restore input order so a resumed trace matches an uninterrupted one
        std::map<std::string, std::size_t> position;
        for (std::size_t i = 0; i < instances.size(); ++i) position.emplace(instances[i].case_id, i);
        std::stable_sort(results.begin(), results.end(), [&](const CaseResult& a, const CaseResult& b) {
            auto pa = position.find(a.case_id);
            auto pb = position.find(b.case_id);
            const std::size_t ia = pa == position.end() ? instances.size() : pa->second;
            const std::size_t ib = pb == position.end() ? instances.size() : pb->second;
            return ia < ib;
        });
        std::string ordered;
        for (const auto& r : results) ordered += json(r).dump() + "\n";
        util::write_file_atomic(trace_path, ordered);
    }

    summary.manifest = build_manifest(results, options, instances.size());
    util::write_file_atomic(options.out_dir / "manifest.json", summary.manifest.dump(2) + "\n");
    return summary;
}

}  // namespace camp
