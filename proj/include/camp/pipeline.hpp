#pragma once
// Per-case execution of the panel workflow and corpus runs with a JSONL trace.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "camp/agents.hpp"
#include "camp/core.hpp"
#include "camp/prompts.hpp"
#include "camp/provider.hpp"

namespace camp {

inline constexpr int kTraceSchemaVersion = 1;

// One trace line. Baselines fill the subset of fields they produce and put
// method-specific intermediate output under `details`.
struct CaseResult {
    int schema_version = kTraceSchemaVersion;
    std::string case_id;
    std::string method;
    std::string status = "ok";  // ok | failed
    std::string error;

    std::vector<CandidateDiagnosis> candidates;
    std::vector<int> gold;
    std::optional<std::string> service_label;

    PanelSpec panel;
    std::string key_dimensions;
    std::vector<Decision> initial_decisions;
    VoteMatrix matrix;
    std::vector<ResolutionRecord> resolutions;
    std::vector<int> accepted;  // sorted
    std::optional<std::string> bhc;

    std::map<std::string, TokenCount> tokens_by_stage;
    std::vector<LedgerEntry> calls;
    std::vector<std::string> degraded_flags;
    json details = json::object();

    bool ok() const { return status == "ok"; }
    TokenCount total_tokens() const;
};

void to_json(json& j, const CaseResult& r);
void from_json(const json& j, CaseResult& r);

// Sorts calls into a stable order (stage, slot, role, attempt) and derives
// tokens_by_stage from them.
void attach_ledger(CaseResult& result, const TokenLedger& ledger);

// Copies identifying fields of the instance into a fresh result.
CaseResult make_result(const TaskInstance& instance, const std::string& method);

struct CampConfig {
    int k = 3;
    bool bhc = false;
    bool always_arbitrate = false;
    bool concurrent = true;  // specialists and arbitrations in parallel
    std::map<std::string, int> max_tokens;
};

// Stage 1 (assessment, panel assembly), Stage 2 (k specialist reviews),
// Stage 3 (routing with arbitration), then the optional BHC. Provider errors
// mark the case failed; parse problems are recorded in degraded_flags.
CaseResult run_case(const TaskInstance& instance, LlmGateway& llm, const PromptLibrary& prompts,
                    const CampConfig& config);

using CaseRunner = std::function<CaseResult(const TaskInstance&)>;

struct RunOptions {
    std::filesystem::path out_dir;
    bool resume = false;
    int case_parallelism = 1;
    std::string method = "camp";
    std::string provider_id;
    std::string prompt_hash;
    std::uint64_t seed = 0;
    json config = json::object();  // hashed into the manifest
};

struct RunSummary {
    json manifest;
    std::size_t executed = 0;  // cases run in this invocation
    std::size_t skipped = 0;   // already complete in the trace (resume)
};

// Writes {out}/trace.jsonl (one flushed line per case, input order),
// {out}/bhc/{case_id}.txt and {out}/manifest.json.
RunSummary run_corpus(const std::vector<TaskInstance>& instances, const CaseRunner& runner,
                      const RunOptions& options);

// Reads a trace; a malformed final line (interrupted write) is dropped with a
// warning, a malformed line elsewhere throws SchemaError.
std::vector<CaseResult> read_trace(const std::filesystem::path& path);

// Human-readable rendering of one case: per-diagnosis votes with quotes and
// confidences, the route taken and any arbitration reasoning.
std::string render_audit(const CaseResult& result);

// Manifest content derived from trace lines.
json build_manifest(const std::vector<CaseResult>& results, const RunOptions& options, std::size_t input_cases);

}  // namespace camp
