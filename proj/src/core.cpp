#include "camp/core.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>

#include "camp/error.hpp"
#include "camp/log.hpp"
#include "camp/util.hpp"

namespace camp {

namespace {

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return fallback;
    return it->get<T>();
}

}  // namespace

Vote parse_vote(std::string_view token) {
    std::size_t b = 0;
    std::size_t e = token.size();
    while (b < e && !is_word_char(token[b])) ++b;
    while (e > b && !is_word_char(token[e - 1])) --e;
    const std::string word = util::to_upper(token.substr(b, e - b));
    if (word == "KEEP") return Vote::keep;
    if (word == "REFUSE" || word == "REMOVE") return Vote::refuse;
    if (word == "NEUTRAL") return Vote::neutral;
    throw UnrecognizedVoteToken(std::string(token));
}

double clamp_confidence(double raw) {
    if (!std::isfinite(raw)) {
        logger().warn("non-finite confidence {} replaced with 0", raw);
        return 0.0;
    }
    return std::min(std::max(raw, 0.0), 1.0);
}

std::string_view to_string(Vote v) {
    switch (v) {
        case Vote::keep: return "keep";
        case Vote::refuse: return "refuse";
        case Vote::neutral: return "neutral";
    }
    return "neutral";
}

std::string_view vote_label(Vote v) {
    switch (v) {
        case Vote::keep: return "KEEP";
        case Vote::refuse: return "REMOVE";
        case Vote::neutral: return "NEUTRAL";
    }
    return "NEUTRAL";
}

std::string_view to_string(Decision d) { return d == Decision::accept ? "accept" : "reject"; }

std::string_view to_string(ResolutionPath p) {
    switch (p) {
        case ResolutionPath::strong_consensus: return "strong_consensus";
        case ResolutionPath::weak_consensus: return "weak_consensus";
        case ResolutionPath::conflict: return "conflict";
    }
    return "conflict";
}

Decision decision_from_string(std::string_view s) {
    const auto lower = util::to_lower(util::trim(s));
    if (lower == "accept") return Decision::accept;
    if (lower == "reject") return Decision::reject;
    throw SchemaError("unknown decision '" + std::string(s) + "'");
}

ResolutionPath path_from_string(std::string_view s) {
    if (s == "strong_consensus") return ResolutionPath::strong_consensus;
    if (s == "weak_consensus") return ResolutionPath::weak_consensus;
    if (s == "conflict") return ResolutionPath::conflict;
    throw SchemaError("unknown resolution path '" + std::string(s) + "'");
}

void validate(const TaskInstance& instance) {
    if (instance.case_id.empty()) throw SchemaError("task instance without case_id");
    for (std::size_t i = 0; i < instance.candidates.size(); ++i) {
        const auto& c = instance.candidates[i];
        if (c.index != static_cast<int>(i) + 1) {
            throw SchemaError(instance.case_id + ": candidate indices must be contiguous from 1");
        }
        if (util::trim(c.text).empty()) throw SchemaError(instance.case_id + ": empty candidate text");
    }
    std::set<int> seen;
    for (int g : instance.gold) {
        if (g < 1 || g > static_cast<int>(instance.candidates.size())) {
            throw SchemaError(instance.case_id + ": gold index " + std::to_string(g) + " out of range");
        }
        if (!seen.insert(g).second) throw SchemaError(instance.case_id + ": duplicate gold index");
    }
}

SpecialistEvaluation SpecialistEvaluation::abstain(std::string rationale) {
    SpecialistEvaluation e;
    e.vote = Vote::neutral;
    e.confidence = 0.0;
    e.rationale = std::move(rationale);
    e.in_scope = false;
    e.evidence_level = "none";
    return e;
}

VoteMatrix::VoteMatrix(std::vector<std::vector<SpecialistEvaluation>> rows) : rows_(std::move(rows)) {
    for (const auto& r : rows_) {
        if (r.size() != rows_.front().size()) throw DimensionMismatch("vote matrix rows differ in length");
    }
}

std::vector<SpecialistEvaluation> VoteMatrix::column(std::size_t j) const {
    std::vector<SpecialistEvaluation> col;
    col.reserve(rows_.size());
    for (const auto& r : rows_) {
        if (j >= r.size()) throw DimensionMismatch("column index out of range");
        col.push_back(r[j]);
    }
    return col;
}

std::string format_options(const std::vector<CandidateDiagnosis>& candidates) {
    std::string out;
    for (const auto& c : candidates) {
        out += std::to_string(c.index) + ". " + c.text + "\n";
    }
    if (!out.empty()) out.pop_back();
    return out;
}

// --- JSON ---------------------------------------------------------------

void to_json(json& j, Vote v) { j = std::string(to_string(v)); }
void from_json(const json& j, Vote& v) { v = parse_vote(j.get<std::string>()); }

void to_json(json& j, Decision d) { j = std::string(to_string(d)); }
void from_json(const json& j, Decision& d) { d = decision_from_string(j.get<std::string>()); }

void to_json(json& j, ResolutionPath p) { j = std::string(to_string(p)); }
void from_json(const json& j, ResolutionPath& p) { p = path_from_string(j.get<std::string>()); }

void to_json(json& j, const CandidateDiagnosis& c) { j = json{{"index", c.index}, {"text", c.text}}; }
void from_json(const json& j, CandidateDiagnosis& c) {
    c.index = j.at("index").get<int>();
    c.text = j.at("text").get<std::string>();
}

void to_json(json& j, const TaskInstance& t) {
    j = json{{"case_id", t.case_id},
             {"masked_note", t.masked_note},
             {"candidates", t.candidates},
             {"gold", t.gold},
             {"shuffle_seed", t.shuffle_seed}};
    j["service_label"] = t.service_label ? json(*t.service_label) : json(nullptr);
    if (t.reference_bhc) j["reference_bhc"] = *t.reference_bhc;
}

void from_json(const json& j, TaskInstance& t) {
    t.case_id = j.at("case_id").get<std::string>();
    t.masked_note = j.at("masked_note").get<std::string>();
    t.candidates = j.at("candidates").get<std::vector<CandidateDiagnosis>>();
    t.gold = get_or<std::vector<int>>(j, "gold", {});
    std::sort(t.gold.begin(), t.gold.end());
    t.shuffle_seed = get_or<std::uint64_t>(j, "shuffle_seed", 0);
    t.service_label.reset();
    if (auto it = j.find("service_label"); it != j.end() && !it->is_null()) t.service_label = it->get<std::string>();
    t.reference_bhc.reset();
    if (auto it = j.find("reference_bhc"); it != j.end() && !it->is_null()) t.reference_bhc = it->get<std::string>();
}

void to_json(json& j, const SpecialistEvaluation& e) {
    j = json{{"vote", e.vote},
             {"quote", e.quote},
             {"confidence", e.confidence},
             {"rationale", e.rationale},
             {"in_scope", e.in_scope},
             {"evidence_level", e.evidence_level}};
}

void from_json(const json& j, SpecialistEvaluation& e) {
    e.vote = j.at("vote").get<Vote>();
    e.quote = get_or<std::string>(j, "quote", "");
    e.confidence = clamp_confidence(get_or<double>(j, "confidence", 0.0));
    e.rationale = get_or<std::string>(j, "rationale", "");
    e.in_scope = get_or<bool>(j, "in_scope", true);
    e.evidence_level = get_or<std::string>(j, "evidence_level", "");
}

void to_json(json& j, const Specialist& s) { j = json{{"role", s.role}, {"focus", s.focus}}; }
void from_json(const json& j, Specialist& s) {
    s.role = j.at("role").get<std::string>();
    s.focus = get_or<std::string>(j, "focus", "");
}

void to_json(json& j, const PanelSpec& p) {
    j = json{{"specialists", p.specialists}, {"case_summary", p.case_summary}};
}
void from_json(const json& j, PanelSpec& p) {
    p.specialists = j.at("specialists").get<std::vector<Specialist>>();
    p.case_summary = get_or<std::string>(j, "case_summary", "");
}

void to_json(json& j, const VoteMatrix& m) { j = json{{"rows", m.rows()}}; }
void from_json(const json& j, VoteMatrix& m) {
    m = VoteMatrix(j.at("rows").get<std::vector<std::vector<SpecialistEvaluation>>>());
}

void to_json(json& j, const Tally& t) {
    j = json{{"keeps", t.keeps}, {"refuses", t.refuses}, {"neutrals", t.neutrals}};
}
void from_json(const json& j, Tally& t) {
    t.keeps = j.at("keeps").get<int>();
    t.refuses = j.at("refuses").get<int>();
    t.neutrals = j.at("neutrals").get<int>();
}

void to_json(json& j, const ArbitrationEvidence& e) {
    j = json{{"role", e.role}, {"evaluation", e.evaluation}, {"quote_verified", e.quote_verified}};
}
void from_json(const json& j, ArbitrationEvidence& e) {
    e.role = j.at("role").get<std::string>();
    e.evaluation = j.at("evaluation").get<SpecialistEvaluation>();
    e.quote_verified = get_or<bool>(j, "quote_verified", false);
}

void to_json(json& j, const ArbitrationTrace& a) {
    j = json{{"decision", a.decision}, {"reasoning", a.reasoning}, {"evidence", a.evidence}, {"degraded", a.degraded}};
}
void from_json(const json& j, ArbitrationTrace& a) {
    a.decision = j.at("decision").get<Decision>();
    a.reasoning = get_or<std::string>(j, "reasoning", "");
    a.evidence = get_or<std::vector<ArbitrationEvidence>>(j, "evidence", {});
    a.degraded = get_or<bool>(j, "degraded", false);
}

void to_json(json& j, const ResolutionRecord& r) {
    j = json{{"diagnosis_index", r.diagnosis_index},
             {"tally", r.tally},
             {"path", r.path},
             {"decision", r.decision},
             {"fallback_used", r.fallback_used}};
    j["arbitration"] = r.arbitration ? json(*r.arbitration) : json(nullptr);
}

void from_json(const json& j, ResolutionRecord& r) {
    r.diagnosis_index = j.at("diagnosis_index").get<int>();
    r.tally = j.at("tally").get<Tally>();
    r.path = j.at("path").get<ResolutionPath>();
    r.decision = j.at("decision").get<Decision>();
    r.fallback_used = get_or<bool>(j, "fallback_used", false);
    r.arbitration.reset();
    if (auto it = j.find("arbitration"); it != j.end() && !it->is_null()) r.arbitration = it->get<ArbitrationTrace>();
}

std::vector<TaskInstance> read_instances(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open corpus " + path);
    std::vector<TaskInstance> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (util::trim(line).empty()) continue;
        try {
            auto t = json::parse(line).get<TaskInstance>();
            validate(t);
            out.push_back(std::move(t));
        } catch (const json::exception& e) {
            throw SchemaError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

void write_instances(const std::string& path, const std::vector<TaskInstance>& instances) {
    std::string out;
    for (const auto& t : instances) out += json(t).dump() + "\n";
    util::write_file(path, out);
}

}  // namespace camp
