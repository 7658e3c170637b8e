#include "camp/agents.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "camp/log.hpp"
#include "camp/util.hpp"

namespace camp {

// --- reply plumbing ------------------------------------------------------

namespace {

std::optional<json> try_parse_object(std::string_view text) {
    try {
        json j = json::parse(text);
        if (j.is_object()) return j;
    } catch (const json::exception&) {
    }
    return std::nullopt;
}

// End of the balanced object starting at text[start] == '{', honouring strings.
std::size_t matching_brace(std::string_view text, std::size_t start) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = start; i < text.size(); ++i) {
        const char c = text[i];
        if (in_string) {
            if (escaped) {
                escaped = false;
            } else if (c == '\\') {
                escaped = true;
            } else if (c == '"') {
                in_string = false;
            }
            continue;
        }
        if (c == '"') {
            in_string = true;
        } else if (c == '{') {
            ++depth;
        } else if (c == '}') {
            if (--depth == 0) return i;
        }
    }
    return std::string_view::npos;
}

std::optional<int> as_index(const json& v) {
    if (v.is_number_integer()) return v.get<int>();
    if (v.is_number_float()) {
        const double d = v.get<double>();
        if (d == static_cast<int>(d)) return static_cast<int>(d);
        return std::nullopt;
    }
    if (v.is_string()) {
        std::string s = util::trim(v.get<std::string>());
        while (!s.empty() && (s.back() == '.' || s.back() == ')')) s.pop_back();
        if (s.empty() || !std::all_of(s.begin(), s.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
            return std::nullopt;
        }
        return std::stoi(s);
    }
    return std::nullopt;
}

std::string string_field(const json& obj, std::initializer_list<const char*> keys) {
    for (const char* k : keys) {
        auto it = obj.find(k);
        if (it != obj.end() && it->is_string()) return it->get<std::string>();
    }
    return {};
}

const json& require_array(const json& reply, const char* key) {
    if (!reply.is_object()) throw ParseFailure("reply is not a JSON object");
    auto it = reply.find(key);
    if (it == reply.end() || !it->is_array()) {
        throw ParseFailure(std::string("reply is missing the \"") + key + "\" list");
    }
    return *it;
}

double confidence_value(const json& obj) {
    auto it = obj.find("confidence");
    if (it == obj.end()) return 0.0;
    if (it->is_number()) return clamp_confidence(it->get<double>());
    if (it->is_string()) {
        try {
            return clamp_confidence(std::stod(it->get<std::string>()));
        } catch (const std::exception&) {
            return 0.0;
        }
    }
    return 0.0;
}

bool bool_field(const json& obj, const char* key, bool fallback) {
    auto it = obj.find(key);
    if (it == obj.end()) return fallback;
    if (it->is_boolean()) return it->get<bool>();
    if (it->is_string()) {
        const auto s = util::to_lower(util::trim(it->get<std::string>()));
        if (s == "yes" || s == "true") return true;
        if (s == "no" || s == "false") return false;
    }
    return fallback;
}

std::string label_for(std::size_t i) {
    std::string s;
    std::size_t x = i;
    do {
        s.insert(s.begin(), static_cast<char>('A' + x % 26));
        x = x / 26;
    } while (x-- > 0);
    return s;
}

CallTag tag_for(const AgentContext& ctx, const char* stage_name, std::string role = {}, int slot = 0) {
    return CallTag{stage_name, ctx.case_id, std::move(role), slot, 0};
}

}  // namespace

json extract_json_object(std::string_view text) {
    const std::string trimmed = util::trim(text);
    if (auto j = try_parse_object(trimmed)) return *j;

    if (auto fence = trimmed.find("```"); fence != std::string::npos) {
        auto body_start = trimmed.find('\n', fence);
        auto close = body_start == std::string::npos ? std::string::npos : trimmed.find("```", body_start);
        if (close != std::string::npos) {
            if (auto j = try_parse_object(trimmed.substr(body_start + 1, close - body_start - 1))) return *j;
        }
    }

    for (std::size_t start = trimmed.find('{'); start != std::string::npos; start = trimmed.find('{', start + 1)) {
        const std::size_t end = matching_brace(trimmed, start);
        if (end == std::string::npos) break;
        if (auto j = try_parse_object(std::string_view(trimmed).substr(start, end - start + 1))) return *j;
    }
    throw ParseFailure("no JSON object found in reply");
}

ChatResponse send_messages(AgentContext& ctx, std::vector<ChatMessage> messages, CallTag tag,
                           std::optional<double> temperature, bool expect_json) {
    ChatRequest req;
    req.messages = std::move(messages);
    req.temperature = temperature.value_or(0.0);
    // sampled calls differ only by slot; the seed keeps them apart on the wire and in the cache
    if (req.temperature > 0.0) req.seed = tag.slot;
    if (auto it = ctx.max_tokens.find(tag.stage); it != ctx.max_tokens.end()) req.max_tokens = it->second;
    if (expect_json) req.response_format_hint = "json";
    if (tag.case_id.empty()) tag.case_id = ctx.case_id;
    req.tag = std::move(tag);
    return ctx.llm.complete(std::move(req), ctx.ledger);
}

// --- initial assessment ------------------------------------------------------

InitialAssessment parse_initial_assessment(const json& reply, std::size_t n) {
    const json& selected = require_array(reply, "selected");
    InitialAssessment out;
    out.decisions.assign(n, Decision::reject);
    out.key_dimensions = string_field(reply, {"key_dimensions"});
    for (const auto& item : selected) {
        std::optional<int> index;
        std::string confidence = "high";
        if (item.is_object()) {
            if (auto it = item.find("index"); it != item.end()) index = as_index(*it);
            if (auto it = item.find("confidence"); it != item.end() && it->is_string()) {
                confidence = util::to_lower(util::trim(it->get<std::string>()));
            }
        } else {
            index = as_index(item);
        }
        if (!index) throw ParseFailure("selected entry without a usable index");
        if (*index < 1 || *index > static_cast<int>(n)) {
            logger().warn("initial assessment: dropping out-of-range index {} (n={})", *index, n);
            out.dropped_indices.push_back(*index);
            continue;
        }
        if (confidence == "low") continue;
        out.decisions[*index - 1] = Decision::accept;
    }
    return out;
}

StructuredReply<InitialAssessment> initial_assessment(AgentContext& ctx, const std::string& note,
                                                      const std::vector<CandidateDiagnosis>& candidates) {
    const std::size_t n = candidates.size();
    const std::string prompt =
        ctx.prompts.render("initial_review", {{"clinical_note", note}, {"options_text", format_options(candidates)}});
    auto reply = ask_structured(ctx, prompt, tag_for(ctx, stage::assessment),
                                [n](const json& j) { return parse_initial_assessment(j, n); });
    if (!reply.parse_ok) {
        logger().warn("case {}: initial assessment unparseable; defaulting to all REJECT", ctx.case_id);
        reply.parsed = InitialAssessment{std::vector<Decision>(n, Decision::reject), {}, {}};
    }
    return reply;
}

// --- panel assembly ----------------------------------------------------------

PanelSpec parse_panel(const json& reply) {
    const json& list = require_array(reply, "specialists");
    PanelSpec panel;
    panel.case_summary = string_field(reply, {"case_summary", "summary"});
    for (const auto& item : list) {
        if (!item.is_object()) continue;
        std::string role = util::collapse_whitespace(string_field(item, {"role", "specialty"}));
        if (role.empty()) continue;
        panel.specialists.push_back({std::move(role), util::trim(string_field(item, {"focus"}))});
    }
    if (panel.specialists.empty()) throw ParseFailure("no specialists with a role");
    return panel;
}

std::string panel_size_word(int k) {
    static const char* words[] = {"zero", "one", "two",   "three", "four", "five",
                                  "six",  "seven", "eight", "nine",  "ten"};
    if (k >= 0 && k <= 10) return words[k];
    return std::to_string(k);
}

StructuredReply<PanelAssembly> assemble_panel(AgentContext& ctx, const std::string& note,
                                              const std::vector<CandidateDiagnosis>& candidates, int k) {
    if (k < 1) throw Error("panel size must be at least 1");
    const std::string prompt = ctx.prompts.render(
        "orchestrator",
        {{"clinical_note", note}, {"options_text", format_options(candidates)}, {"panel_size", panel_size_word(k)}});

    StructuredReply<PanelAssembly> reply;
    CallTag tag = tag_for(ctx, stage::assembly);
    const ChatResponse first = send_messages(ctx, {{"user", prompt}}, tag);
    reply.raw = first.content;

    std::optional<PanelSpec> parsed;
    std::string error;
    try {
        parsed = parse_panel(extract_json_object(first.content));
        if (static_cast<int>(parsed->size()) < k) {
            error = "you recruited " + std::to_string(parsed->size()) + " specialists; exactly " +
                    std::to_string(k) + " are required";
        }
    } catch (const std::exception& e) {
        error = e.what();
    }

    if (!error.empty()) {
        reply.repair_attempts = 1;
        tag.attempt = 1;
        const ChatResponse second = send_messages(
            ctx,
            {{"user", prompt}, {"assistant", first.content}, {"user", ctx.prompts.render("repair", {{"error", error}})}},
            tag);
        reply.raw = second.content;
        try {
            PanelSpec retry = parse_panel(extract_json_object(second.content));
            if (!parsed || retry.size() >= parsed->size()) parsed = std::move(retry);
        } catch (const std::exception&) {
        }
    }

    PanelAssembly& out = reply.parsed;
    if (parsed) {
        out.panel = std::move(*parsed);
    } else {
        reply.parse_ok = false;
        logger().warn("case {}: panel assembly unparseable; using default panel", ctx.case_id);
    }
    if (static_cast<int>(out.panel.size()) > k) {
        out.truncated = static_cast<int>(out.panel.size()) - k;
        out.panel.specialists.resize(static_cast<std::size_t>(k));
    }
    while (static_cast<int>(out.panel.size()) < k) {
        out.panel.specialists.push_back({kDefaultSpecialistRole, kDefaultSpecialistFocus});
        ++out.padded;
    }
    return reply;
}

// --- specialist review -------------------------------------------------------

std::vector<SpecialistEvaluation> parse_specialist_evaluations(const json& reply, std::size_t n) {
    const json& list = require_array(reply, "evaluations");
    std::vector<std::optional<SpecialistEvaluation>> slots(n);
    for (std::size_t pos = 0; pos < list.size(); ++pos) {
        const json& item = list[pos];
        if (!item.is_object()) continue;
        std::optional<int> index;
        if (auto it = item.find("index"); it != item.end()) {
            index = as_index(*it);
        } else {
            index = static_cast<int>(pos) + 1;
        }
        if (!index || *index < 1 || *index > static_cast<int>(n)) {
            logger().warn("specialist reply: ignoring entry with bad index");
            continue;
        }
        if (slots[*index - 1]) continue;  // first entry wins

        SpecialistEvaluation e;
        try {
            e.vote = parse_vote(string_field(item, {"decision", "vote"}));
        } catch (const UnrecognizedVoteToken& ex) {
            logger().warn("specialist reply: {} for index {}; recorded as abstention", ex.what(), *index);
            continue;
        }
        e.confidence = confidence_value(item);
        e.quote = string_field(item, {"quote", "evidence_quote", "evidence"});
        e.rationale = string_field(item, {"reasoning", "rationale"});
        e.in_scope = bool_field(item, "in_scope", true);
        e.evidence_level = string_field(item, {"evidence_level", "evidence_support"});
        slots[*index - 1] = std::move(e);
    }
    std::vector<SpecialistEvaluation> out;
    out.reserve(n);
    for (auto& s : slots) out.push_back(s ? std::move(*s) : SpecialistEvaluation::abstain("no evaluation returned"));
    return out;
}

StructuredReply<std::vector<SpecialistEvaluation>> specialist_review(
    AgentContext& ctx, const std::string& note, const Specialist& specialist, int slot,
    const std::vector<CandidateDiagnosis>& candidates) {
    const std::size_t n = candidates.size();
    const std::string prompt = ctx.prompts.render("specialist_review", {{"role", specialist.role},
                                                                        {"focus", specialist.focus},
                                                                        {"clinical_note", note},
                                                                        {"candidates_text", format_options(candidates)}});
    auto reply = ask_structured(ctx, prompt, tag_for(ctx, stage::specialist, specialist.role, slot),
                                [n](const json& j) { return parse_specialist_evaluations(j, n); });
    if (!reply.parse_ok) {
        logger().warn("case {}: specialist '{}' reply unparseable; row recorded as abstentions", ctx.case_id,
                      specialist.role);
        reply.parsed.assign(n, SpecialistEvaluation::abstain("specialist reply unparseable"));
    }
    return reply;
}

// --- arbitration -------------------------------------------------------------

bool verify_quote(const std::string& note, const std::string& quote) {
    std::string q = quote;
    // unify both ellipsis spellings to one separator
    util::ireplace_all(q, "\xE2\x80\xA6", "...");
    std::vector<std::string> fragments;
    std::size_t pos = 0;
    while (true) {
        const auto hit = q.find("...", pos);
        fragments.push_back(q.substr(pos, hit == std::string::npos ? std::string::npos : hit - pos));
        if (hit == std::string::npos) break;
        pos = hit + 3;
    }
    bool any = false;
    for (auto& f : fragments) {
        std::string t = util::trim(f);
        while (!t.empty() && (t.front() == '"' || t.front() == '\'')) t.erase(t.begin());
        while (!t.empty() && (t.back() == '"' || t.back() == '\'')) t.pop_back();
        t = util::trim(t);
        if (t.empty()) continue;
        any = true;
        if (!util::icontains(note, t)) return false;
    }
    return any;
}

std::string render_contested_evidence(const CandidateDiagnosis& diagnosis, const Tally& tally,
                                      const std::vector<ArbitrationEvidence>& evidence) {
    std::string out = "Diagnosis " + std::to_string(diagnosis.index) + ": " + diagnosis.text + "\n";
    out += "Votes: " + std::to_string(tally.keeps) + " KEEP, " + std::to_string(tally.refuses) + " REMOVE, " +
           std::to_string(tally.neutrals) + " NEUTRAL\n";
    for (const auto& item : evidence) {
        const auto& e = item.evaluation;
        out += "- " + item.role + ": " + std::string(vote_label(e.vote)) + " (confidence " +
               util::fixed(e.confidence, 2) + "; in scope: " + (e.in_scope ? "yes" : "no");
        if (!e.evidence_level.empty()) out += "; evidence: " + e.evidence_level;
        out += ")\n";
        if (e.quote.empty()) {
            out += "  Quote: (none)\n";
        } else {
            out += "  Quote: \"" + e.quote + "\" (verified against note: " + (item.quote_verified ? "yes" : "no") +
                   ")\n";
        }
        out += "  Reasoning: " + (e.rationale.empty() ? std::string("(none)") : e.rationale) + "\n";
    }
    if (!out.empty()) out.pop_back();
    return out;
}

ArbitrationTrace parse_arbitration(const json& reply) {
    if (!reply.is_object()) throw ParseFailure("reply is not a JSON object");
    const std::string raw = string_field(reply, {"decision", "verdict"});
    std::string word = util::to_upper(util::trim(raw));
    while (!word.empty() && !std::isalpha(static_cast<unsigned char>(word.back()))) word.pop_back();
    while (!word.empty() && !std::isalpha(static_cast<unsigned char>(word.front()))) word.erase(word.begin());
    ArbitrationTrace trace;
    if (word == "INCLUDE" || word == "ACCEPT") {
        trace.decision = Decision::accept;
    } else if (word == "EXCLUDE" || word == "REJECT") {
        trace.decision = Decision::reject;
    } else {
        throw ParseFailure("arbitration decision must be INCLUDE or EXCLUDE, got '" + raw + "'");
    }
    trace.reasoning = string_field(reply, {"reasoning", "rationale"});
    return trace;
}

StructuredReply<ArbitrationTrace> arbitrate(AgentContext& ctx, const std::string& note,
                                            const CandidateDiagnosis& diagnosis, const Tally& tally,
                                            std::vector<ArbitrationEvidence> evidence) {
    for (auto& item : evidence) item.quote_verified = verify_quote(note, item.evaluation.quote);
    const std::string prompt = ctx.prompts.render(
        "arbitration",
        {{"clinical_note", note}, {"contested_evidence", render_contested_evidence(diagnosis, tally, evidence)}});
    auto reply = ask_structured(ctx, prompt,
                                tag_for(ctx, stage::arbitration, "diagnosis_" + std::to_string(diagnosis.index),
                                        diagnosis.index),
                                parse_arbitration);
    if (!reply.parse_ok) {
        logger().warn("case {}: arbitration for diagnosis {} unparseable; defaulting to REJECT", ctx.case_id,
                      diagnosis.index);
        reply.parsed = ArbitrationTrace{Decision::reject, "arbitration reply unparseable; conservative default", {}, true};
    }
    reply.parsed.evidence = std::move(evidence);
    return reply;
}

// --- BHC -----------------------------------------------------------------------

std::string render_diagnosis_list(const std::vector<CandidateDiagnosis>& accepted) {
    if (accepted.empty()) return "(none)";
    std::string out;
    for (const auto& d : accepted) out += "- " + d.text + "\n";
    out.pop_back();
    return out;
}

StructuredReply<std::string> generate_bhc(AgentContext& ctx, const std::string& note,
                                          const std::vector<CandidateDiagnosis>& accepted) {
    const std::string prompt = ctx.prompts.render(
        "bhc_generation", {{"clinical_note", note}, {"diagnosis_list", render_diagnosis_list(accepted)}});
    StructuredReply<std::string> reply;
    CallTag tag = tag_for(ctx, stage::bhc);
    reply.raw = send_messages(ctx, {{"user", prompt}}, tag, std::nullopt, false).content;
    reply.parsed = util::trim(reply.raw);
    if (reply.parsed.empty()) {
        reply.repair_attempts = 1;
        tag.attempt = 1;
        reply.raw = send_messages(ctx, {{"user", prompt}}, tag, std::nullopt, false).content;
        reply.parsed = util::trim(reply.raw);
        reply.parse_ok = !reply.parsed.empty();
    }
    return reply;
}

const std::vector<std::string>& bhc_judge_dimensions() {
    static const std::vector<std::string> dims = {"faithfulness",
                                                  "reference_agreement",
                                                  "clinical_prioritization",
                                                  "timeline_coherence",
                                                  "diagnosis_treatment_linkage",
                                                  "complication_outcome_tracking",
                                                  "information_completeness",
                                                  "conciseness_density",
                                                  "clinical_readability",
                                                  "discharge_utility"};
    return dims;
}

std::map<std::string, std::map<std::string, int>> parse_judge_rankings(const json& reply,
                                                                       const std::vector<std::string>& labels,
                                                                       const std::vector<std::string>& dimensions) {
    if (!reply.is_object() || !reply.contains("rankings") || !reply["rankings"].is_object()) {
        throw JudgeParseFailure("reply has no \"rankings\" object");
    }
    const json& rankings = reply["rankings"];
    const int m = static_cast<int>(labels.size());
    std::map<std::string, std::map<std::string, int>> out;
    for (const auto& dim : dimensions) {
        if (!rankings.contains(dim) || !rankings[dim].is_object()) {
            throw JudgeParseFailure("missing ranking for dimension '" + dim + "'");
        }
        std::set<int> used;
        for (const auto& label : labels) {
            auto it = rankings[dim].find(label);
            std::optional<int> rank = it == rankings[dim].end() ? std::nullopt : as_index(*it);
            if (!rank) throw JudgeParseFailure("dimension '" + dim + "' has no rank for system " + label);
            if (*rank < 1 || *rank > m || !used.insert(*rank).second) {
                throw JudgeParseFailure("dimension '" + dim + "' ranks are not a permutation of 1.." +
                                        std::to_string(m));
            }
            out[dim][label] = *rank;
        }
    }
    return out;
}

JudgeResult judge_bhc(AgentContext& ctx, const std::string& note, const std::string& reference,
                      const std::map<std::string, std::string>& system_outputs,
                      const std::vector<std::string>& dimensions, std::uint64_t seed) {
    if (system_outputs.size() < 2) throw Error("BHC judging needs at least two systems");
    std::vector<std::string> systems;
    for (const auto& [name, _] : system_outputs) systems.push_back(name);
    util::SeededRng rng(util::derive_seed(seed, ctx.case_id));
    rng.shuffle(systems);

    JudgeResult result;
    std::vector<std::string> labels;
    std::string systems_text;
    for (std::size_t i = 0; i < systems.size(); ++i) {
        const std::string label = label_for(i);
        labels.push_back(label);
        result.labels[label] = systems[i];
        systems_text += "System " + label + ":\n" + system_outputs.at(systems[i]) + "\n\n";
    }
    while (!systems_text.empty() && systems_text.back() == '\n') systems_text.pop_back();

    const std::string prompt = ctx.prompts.render("bhc_judge", {{"clinical_note", note},
                                                                {"target_bhc", reference},
                                                                {"candidate_systems_text", systems_text},
                                                                {"dimension_keys", util::join(dimensions, ", ")}});
    auto reply = ask_structured(ctx, prompt, tag_for(ctx, stage::bhc_judge), [&](const json& j) {
        auto ranks = parse_judge_rankings(j, labels, dimensions);
        std::vector<std::string> overall;
        if (auto it = j.find("overall"); it != j.end() && it->is_array()) {
            for (const auto& l : *it) {
                if (l.is_string() && result.labels.count(l.get<std::string>())) overall.push_back(l.get<std::string>());
            }
        }
        return std::make_pair(std::move(ranks), std::move(overall));
    });
    if (!reply.parse_ok) {
        logger().warn("case {}: BHC judge reply unusable after repair; case excluded", ctx.case_id);
        return result;
    }
    result.judged = true;
    for (const auto& [dim, by_label] : reply.parsed.first) {
        for (const auto& [label, rank] : by_label) result.ranks[dim][result.labels.at(label)] = rank;
    }
    for (const auto& label : reply.parsed.second) result.overall.push_back(result.labels.at(label));
    return result;
}

// --- selection parsers -------------------------------------------------------

std::vector<int> parse_selection(const json& reply, std::size_t n) {
    const json& list = require_array(reply, "selected");
    std::set<int> picked;
    for (const auto& item : list) {
        std::optional<int> index;
        if (item.is_object()) {
            if (auto it = item.find("index"); it != item.end()) index = as_index(*it);
        } else {
            index = as_index(item);
        }
        if (!index) throw ParseFailure("selected entry without a usable index");
        if (*index < 1 || *index > static_cast<int>(n)) {
            logger().warn("selection: dropping out-of-range index {} (n={})", *index, n);
            continue;
        }
        picked.insert(*index);
    }
    return {picked.begin(), picked.end()};
}

std::vector<std::optional<Vote>> parse_keep_remove(const json& reply, std::size_t n, const char* list_key) {
    const json& list = require_array(reply, list_key);
    std::vector<std::optional<Vote>> out(n);
    for (std::size_t pos = 0; pos < list.size(); ++pos) {
        const json& item = list[pos];
        if (!item.is_object()) continue;
        std::optional<int> index = item.contains("index") ? as_index(item["index"]) : static_cast<int>(pos) + 1;
        if (!index || *index < 1 || *index > static_cast<int>(n) || out[*index - 1]) continue;
        try {
            const Vote v = parse_vote(string_field(item, {"decision", "vote"}));
            if (v != Vote::neutral) out[*index - 1] = v;
        } catch (const UnrecognizedVoteToken&) {
        }
    }
    return out;
}

// --- data preparation helpers --------------------------------------------------

namespace {

std::string bullet_list(const std::vector<std::string>& items) {
    std::string out;
    for (const auto& s : items) out += "- " + s + "\n";
    if (!out.empty()) out.pop_back();
    return out;
}

}  // namespace

std::vector<std::string> request_mask_spans(AgentContext& ctx, const std::string& note,
                                            const std::vector<std::string>& diagnoses) {
    const std::string prompt =
        ctx.prompts.render("phrase_mask", {{"clinical_note", note}, {"diagnosis_list", bullet_list(diagnoses)}});
    auto reply = ask_structured(ctx, prompt, tag_for(ctx, stage::phrase_mask), [](const json& j) {
        std::vector<std::string> spans;
        const json* list = nullptr;
        if (j.contains("mask_phrase") && j["mask_phrase"].is_array()) list = &j["mask_phrase"];
        if (!list && j.contains("spans") && j["spans"].is_array()) list = &j["spans"];
        if (!list) throw ParseFailure("reply has no mask_phrase list");
        for (const auto& item : *list) {
            if (item.is_string()) spans.push_back(item.get<std::string>());
            if (item.is_object() && item.contains("span") && item["span"].is_string()) {
                spans.push_back(item["span"].get<std::string>());
            }
        }
        return spans;
    });
    if (!reply.parse_ok) {
        logger().warn("case {}: phrase-mask reply unusable; no spans masked", ctx.case_id);
        return {};
    }
    return reply.parsed;
}

std::vector<std::string> request_distractor_removals(AgentContext& ctx, const std::vector<std::string>& gold,
                                                     const std::vector<std::string>& distractors) {
    const std::string prompt = ctx.prompts.render(
        "distractor_filter", {{"gold_list", bullet_list(gold)}, {"distractor_list", bullet_list(distractors)}});
    auto reply = ask_structured(ctx, prompt, tag_for(ctx, stage::distractor_filter), [](const json& j) {
        std::vector<std::string> out;
        for (const auto& item : require_array(j, "remove")) {
            if (item.is_string()) out.push_back(item.get<std::string>());
        }
        return out;
    });
    if (!reply.parse_ok) {
        logger().warn("case {}: distractor-filter reply unusable; nothing removed", ctx.case_id);
        return {};
    }
    return reply.parsed;
}

bool request_recoverability(AgentContext& ctx, const std::string& history_text,
                            const std::vector<std::string>& diagnoses) {
    const std::string prompt = ctx.prompts.render(
        "semantic_filter", {{"history_text", history_text}, {"diagnosis_list", bullet_list(diagnoses)}});
    auto reply = ask_structured(ctx, prompt, tag_for(ctx, stage::semantic_filter), [](const json& j) {
        if (!j.contains("recoverable") || !j["recoverable"].is_boolean()) {
            throw ParseFailure("reply has no boolean \"recoverable\"");
        }
        return j["recoverable"].get<bool>();
    });
    if (!reply.parse_ok) {
        logger().warn("case {}: semantic-filter reply unusable; record kept", ctx.case_id);
        return false;
    }
    return reply.parsed;
}

}  // namespace camp
