#pragma once
// Domain types and the vote/decision algebra shared by every module.
//
// All types are plain values. JSON (de)serialization follows the canonical
// schema in docs/schemas.md: lowercase snake_case field names, enums as
// lowercase strings, candidate indices 1-based.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace camp {

using json = nlohmann::json;

enum class Vote { keep, refuse, neutral };
enum class Decision { accept, reject };
enum class ResolutionPath { strong_consensus, weak_consensus, conflict };

// Case-insensitive; "REFUSE" and "REMOVE" both map to Vote::refuse.
// Surrounding whitespace and punctuation are ignored.
// Throws UnrecognizedVoteToken for anything else.
Vote parse_vote(std::string_view token);

// min(max(raw, 0), 1); NaN and infinities map to 0 with a warning.
double clamp_confidence(double raw);

std::string_view to_string(Vote v);
std::string_view to_string(Decision d);
std::string_view to_string(ResolutionPath p);
// Upper-case surface form used in prompts and audit renderings (KEEP/REMOVE/NEUTRAL).
std::string_view vote_label(Vote v);

Decision decision_from_string(std::string_view s);
ResolutionPath path_from_string(std::string_view s);

struct CandidateDiagnosis {
    int index = 0;  // 1-based
    std::string text;

    friend bool operator==(const CandidateDiagnosis&, const CandidateDiagnosis&) = default;
};

struct TaskInstance {
    std::string case_id;
    std::string masked_note;
    std::vector<CandidateDiagnosis> candidates;
    std::vector<int> gold;  // sorted, unique, 1-based
    std::optional<std::string> service_label;
    std::uint64_t shuffle_seed = 0;
    // Reference brief hospital course, when the source record carried one.
    std::optional<std::string> reference_bhc;

    std::size_t size() const { return candidates.size(); }

    friend bool operator==(const TaskInstance&, const TaskInstance&) = default;
};

// Throws SchemaError when indices are not contiguous from 1, texts are empty,
// or gold references an unknown index.
void validate(const TaskInstance& instance);

struct SpecialistEvaluation {
    Vote vote = Vote::neutral;
    std::string quote;
    double confidence = 0.0;
    std::string rationale;
    bool in_scope = true;
    std::string evidence_level;

    // The abstention recorded for missing or unparseable entries.
    static SpecialistEvaluation abstain(std::string rationale = {});

    friend bool operator==(const SpecialistEvaluation&, const SpecialistEvaluation&) = default;
};

struct Specialist {
    std::string role;
    std::string focus;

    friend bool operator==(const Specialist&, const Specialist&) = default;
};

struct PanelSpec {
    std::vector<Specialist> specialists;
    std::string case_summary;

    std::size_t size() const { return specialists.size(); }

    friend bool operator==(const PanelSpec&, const PanelSpec&) = default;
};

class VoteMatrix {
public:
    VoteMatrix() = default;
    // Throws DimensionMismatch unless every row has the same length.
    explicit VoteMatrix(std::vector<std::vector<SpecialistEvaluation>> rows);

    std::size_t specialists() const { return rows_.size(); }
    std::size_t diagnoses() const { return rows_.empty() ? 0 : rows_.front().size(); }

    const std::vector<std::vector<SpecialistEvaluation>>& rows() const { return rows_; }
    // Column for 0-based diagnosis position j: one evaluation per specialist.
    std::vector<SpecialistEvaluation> column(std::size_t j) const;

    friend bool operator==(const VoteMatrix&, const VoteMatrix&) = default;

private:
    std::vector<std::vector<SpecialistEvaluation>> rows_;
};

struct Tally {
    int keeps = 0;
    int refuses = 0;
    int neutrals = 0;

    int total() const { return keeps + refuses + neutrals; }

    friend bool operator==(const Tally&, const Tally&) = default;
};

// One specialist's contribution as presented to the arbitrator.
struct ArbitrationEvidence {
    std::string role;
    SpecialistEvaluation evaluation;
    // Mechanical check: the quote occurs verbatim (case-insensitive) in the note.
    bool quote_verified = false;

    friend bool operator==(const ArbitrationEvidence&, const ArbitrationEvidence&) = default;
};

struct ArbitrationTrace {
    Decision decision = Decision::reject;
    std::string reasoning;
    std::vector<ArbitrationEvidence> evidence;
    bool degraded = false;

    friend bool operator==(const ArbitrationTrace&, const ArbitrationTrace&) = default;
};

struct ResolutionRecord {
    int diagnosis_index = 0;  // 1-based
    Tally tally;
    ResolutionPath path = ResolutionPath::weak_consensus;
    Decision decision = Decision::reject;
    std::optional<ArbitrationTrace> arbitration;  // present iff path == conflict
    bool fallback_used = false;                   // true iff path == weak_consensus

    friend bool operator==(const ResolutionRecord&, const ResolutionRecord&) = default;
};

// Renders "1. text\n2. text\n..." as used by every selection prompt.
std::string format_options(const std::vector<CandidateDiagnosis>& candidates);

void to_json(json& j, Vote v);
void from_json(const json& j, Vote& v);
void to_json(json& j, Decision d);
void from_json(const json& j, Decision& d);
void to_json(json& j, ResolutionPath p);
void from_json(const json& j, ResolutionPath& p);
void to_json(json& j, const CandidateDiagnosis& c);
void from_json(const json& j, CandidateDiagnosis& c);
void to_json(json& j, const TaskInstance& t);
void from_json(const json& j, TaskInstance& t);
void to_json(json& j, const SpecialistEvaluation& e);
void from_json(const json& j, SpecialistEvaluation& e);
void to_json(json& j, const Specialist& s);
void from_json(const json& j, Specialist& s);
void to_json(json& j, const PanelSpec& p);
void from_json(const json& j, PanelSpec& p);
void to_json(json& j, const VoteMatrix& m);
void from_json(const json& j, VoteMatrix& m);
void to_json(json& j, const Tally& t);
void from_json(const json& j, Tally& t);
void to_json(json& j, const ArbitrationEvidence& e);
void from_json(const json& j, ArbitrationEvidence& e);
void to_json(json& j, const ArbitrationTrace& a);
void from_json(const json& j, ArbitrationTrace& a);
void to_json(json& j, const ResolutionRecord& r);
void from_json(const json& j, ResolutionRecord& r);

// JSONL helpers for corpora of TaskInstance.
std::vector<TaskInstance> read_instances(const std::string& path);
void write_instances(const std::string& path, const std::vector<TaskInstance>& instances);

}  // namespace camp
