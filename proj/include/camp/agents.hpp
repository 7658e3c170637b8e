#pragma once
// Prompt construction and reply parsing for every agent role.
//
// Every structured reply is requested as a JSON object. When a reply cannot be
// parsed, one repair round re-sends it with the parse error; if that also
// fails the role-specific degradation rule applies (see docs/schemas.md):
//
//   initial assessment  -> all REJECT
//   panel assembly      -> pad with "general internist"
//   specialist review   -> all NEUTRAL, confidence 0
//   arbitration         -> REJECT, marked degraded
//   BHC judge           -> case excluded from rank averaging
//
// Provider errors are never swallowed here; they propagate to the caller.

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "camp/core.hpp"
#include "camp/error.hpp"
#include "camp/prompts.hpp"
#include "camp/provider.hpp"

namespace camp {

namespace stage {
inline constexpr const char* assessment = "assessment";
inline constexpr const char* assembly = "assembly";
inline constexpr const char* specialist = "specialist";
inline constexpr const char* arbitration = "arbitration";
inline constexpr const char* bhc = "bhc";
inline constexpr const char* bhc_judge = "bhc_judge";
inline constexpr const char* single_agent = "single_agent";
inline constexpr const char* cot = "cot";
inline constexpr const char* self_consistency = "self_consistency";
inline constexpr const char* majority_voting = "majority_voting";
inline constexpr const char* medagents_initial = "medagents_initial";
inline constexpr const char* medagents_revote = "medagents_revote";
inline constexpr const char* llm_judge_proposal = "llm_judge_proposal";
inline constexpr const char* llm_judge = "llm_judge";
inline constexpr const char* devils_advocate_proposal = "devils_advocate_proposal";
inline constexpr const char* devils_advocate_critic = "devils_advocate_critic";
inline constexpr const char* phrase_mask = "phrase_mask";
inline constexpr const char* distractor_filter = "distractor_filter";
inline constexpr const char* semantic_filter = "semantic_filter";
}  // namespace stage

inline constexpr const char* kDefaultSpecialistRole = "general internist";
inline constexpr const char* kDefaultSpecialistFocus =
    "Weigh every candidate diagnosis against the overall inpatient course.";

struct AgentContext {
    LlmGateway& llm;
    const PromptLibrary& prompts;
    TokenLedger& ledger;
    std::string case_id;
    std::map<std::string, int> max_tokens;  // per stage; absent = provider default
};

template <typename T>
struct StructuredReply {
    T parsed{};
    std::string raw;
    int repair_attempts = 0;  // 0 or 1
    bool parse_ok = true;
};

// Finds the JSON object in a model reply: the whole text, a fenced ```json
// block, or the first balanced {...}. Throws ParseFailure.
json extract_json_object(std::string_view text);

// Sends one request through the gateway with stage/case tagging.
ChatResponse send_messages(AgentContext& ctx, std::vector<ChatMessage> messages, CallTag tag,
                           std::optional<double> temperature = std::nullopt, bool expect_json = true);

// Issues `prompt`, parses with `parse`, and runs at most one repair round.
template <typename Parser>
auto ask_structured(AgentContext& ctx, const std::string& prompt, CallTag tag, Parser&& parse,
                    std::optional<double> temperature = std::nullopt)
    -> StructuredReply<std::decay_t<std::invoke_result_t<Parser, const json&>>> {
    using T = std::decay_t<std::invoke_result_t<Parser, const json&>>;
    StructuredReply<T> reply;
    const ChatResponse first = send_messages(ctx, {{"user", prompt}}, tag, temperature);
    reply.raw = first.content;
    std::string error;
    try {
        reply.parsed = parse(extract_json_object(first.content));
        return reply;
    } catch (const std::exception& e) {
        error = e.what();
    }
    reply.repair_attempts = 1;
    tag.attempt = 1;
    const std::string repair = ctx.prompts.render("repair", {{"error", error}});
    const ChatResponse second =
        send_messages(ctx, {{"user", prompt}, {"assistant", first.content}, {"user", repair}}, tag, temperature);
    reply.raw = second.content;
    try {
        reply.parsed = parse(extract_json_object(second.content));
        return reply;
    } catch (const std::exception&) {
    }
    reply.parse_ok = false;
    return reply;
}

// --- attending: initial assessment ----------------------------------------

struct InitialAssessment {
    std::vector<Decision> decisions;  // one per candidate
    std::string key_dimensions;
    std::vector<int> dropped_indices;  // out-of-range indices the model emitted
};

InitialAssessment parse_initial_assessment(const json& reply, std::size_t n);
StructuredReply<InitialAssessment> initial_assessment(AgentContext& ctx, const std::string& note,
                                                      const std::vector<CandidateDiagnosis>& candidates);

// --- attending: panel assembly --------------------------------------------

PanelSpec parse_panel(const json& reply);
std::string panel_size_word(int k);

struct PanelAssembly {
    PanelSpec panel;     // exactly k specialists
    int truncated = 0;   // extra specialists dropped
    int padded = 0;      // default specialists appended
};

// Truncates to the first k; when fewer than k come back the orchestrator is
// re-prompted once, then the panel is padded with general internists.
StructuredReply<PanelAssembly> assemble_panel(AgentContext& ctx, const std::string& note,
                                          const std::vector<CandidateDiagnosis>& candidates, int k);

// --- specialists ----------------------------------------------------------

// Exactly n evaluations in candidate order; unmatched entries are abstentions.
std::vector<SpecialistEvaluation> parse_specialist_evaluations(const json& reply, std::size_t n);
StructuredReply<std::vector<SpecialistEvaluation>> specialist_review(
    AgentContext& ctx, const std::string& note, const Specialist& specialist, int slot,
    const std::vector<CandidateDiagnosis>& candidates);

// --- attending: arbitration -----------------------------------------------

// True when every fragment of the quote (split on "..." and the ellipsis
// character) occurs case-insensitively in the note. Empty quotes are unverified.
bool verify_quote(const std::string& note, const std::string& quote);

std::string render_contested_evidence(const CandidateDiagnosis& diagnosis, const Tally& tally,
                                      const std::vector<ArbitrationEvidence>& evidence);
// {"decision": "INCLUDE"|"EXCLUDE", "reasoning": ...}
ArbitrationTrace parse_arbitration(const json& reply);
StructuredReply<ArbitrationTrace> arbitrate(AgentContext& ctx, const std::string& note,
                                            const CandidateDiagnosis& diagnosis, const Tally& tally,
                                            std::vector<ArbitrationEvidence> evidence);

// --- BHC ------------------------------------------------------------------

std::string render_diagnosis_list(const std::vector<CandidateDiagnosis>& accepted);
// Returns the narrative; an empty reply is retried once. Provider errors propagate.
StructuredReply<std::string> generate_bhc(AgentContext& ctx, const std::string& note,
                                          const std::vector<CandidateDiagnosis>& accepted);

// Keys of the ten ranking dimensions in the judge prompt.
const std::vector<std::string>& bhc_judge_dimensions();

struct JudgeResult {
    bool judged = false;
    // dimension -> system name -> rank (1 = best)
    std::map<std::string, std::map<std::string, int>> ranks;
    std::vector<std::string> overall;         // system names, best first
    std::map<std::string, std::string> labels;  // anonymous label -> system name
};

// Parses label rankings; throws JudgeParseFailure when any dimension is
// missing, a label is missing, or ranks are not a permutation of 1..m.
std::map<std::string, std::map<std::string, int>> parse_judge_rankings(const json& reply,
                                                                       const std::vector<std::string>& labels,
                                                                       const std::vector<std::string>& dimensions);
JudgeResult judge_bhc(AgentContext& ctx, const std::string& note, const std::string& reference,
                      const std::map<std::string, std::string>& system_outputs,
                      const std::vector<std::string>& dimensions, std::uint64_t seed);

// --- shared selection parsers for baselines ---------------------------------

// {"selected": [1, 2]} or [{"index": 1, ...}]; out-of-range indices dropped.
std::vector<int> parse_selection(const json& reply, std::size_t n);
// {"decisions": [{"index", "decision"}]} -> per-candidate vote; entries that are
// missing or carry an unparseable vote are nullopt.
std::vector<std::optional<Vote>> parse_keep_remove(const json& reply, std::size_t n,
                                                   const char* list_key = "decisions");

// --- data preparation helpers ----------------------------------------------

std::vector<std::string> request_mask_spans(AgentContext& ctx, const std::string& note,
                                            const std::vector<std::string>& diagnoses);
std::vector<std::string> request_distractor_removals(AgentContext& ctx, const std::vector<std::string>& gold,
                                                     const std::vector<std::string>& distractors);
bool request_recoverability(AgentContext& ctx, const std::string& history_text,
                            const std::vector<std::string>& diagnoses);

}  // namespace camp
