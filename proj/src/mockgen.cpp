#include "camp/mockgen.hpp"

#include <algorithm>
#include <set>

#include "camp/agents.hpp"
#include "camp/util.hpp"

namespace camp {

namespace {

const std::vector<std::string>& role_pool() {
    static const std::vector<std::string> roles = {
        "neurologist",       "neurosurgeon",   "cardiologist",        "pulmonologist", "nephrologist",
        "gastroenterologist", "hepatologist",   "infectious disease specialist", "hematologist",
        "endocrinologist",   "general surgeon", "intensivist",         "radiologist",   "psychiatrist"};
    return roles;
}

std::string lead_role(const std::optional<std::string>& service) {
    if (!service) return "internist";
    const std::string s = util::to_upper(*service);
    if (s.find("NEUROSURG") != std::string::npos) return "neurosurgeon";
    if (s.find("NEURO") != std::string::npos) return "neurologist";
    if (s.find("CARD") != std::string::npos) return "cardiologist";
    if (s.find("SURG") != std::string::npos) return "general surgeon";
    if (s.find("PSYCH") != std::string::npos) return "psychiatrist";
    if (s.find("OBST") != std::string::npos || s.find("GYN") != std::string::npos) return "obstetrician";
    return "internist";
}

class Draw {
public:
    Draw(std::uint64_t seed, const std::string& label) : rng_(util::derive_seed(seed, label)) {}
    double unit() { return rng_.unit(); }
    bool chance(double p) { return rng_.unit() < p; }
    std::size_t below(std::size_t n) { return static_cast<std::size_t>(rng_.below(n)); }

private:
    util::SeededRng rng_;
};

std::string note_quote(const std::string& note, Draw& draw) {
    std::vector<std::string> lines;
    for (const auto& l : util::split_lines(note)) {
        const std::string t = util::trim(l);
        if (t.size() >= 20 && t.back() != ':') lines.push_back(t);
    }
    if (lines.empty()) return "";
    std::string q = lines[draw.below(lines.size())];
    if (q.size() > 60) {
        const auto cut = q.rfind(' ', 60);
        q = q.substr(0, cut == std::string::npos || cut < 20 ? 60 : cut);
    }
    return q;
}

std::vector<int> noisy_selection(const TaskInstance& t, Draw& draw, double keep_gold, double keep_distractor) {
    const std::set<int> gold(t.gold.begin(), t.gold.end());
    std::vector<int> out;
    for (const auto& c : t.candidates) {
        if (draw.chance(gold.count(c.index) ? keep_gold : keep_distractor)) out.push_back(c.index);
    }
    return out;
}

json rule(const std::string& stage_name, const std::string& case_id, const std::string& role, const json& reply) {
    json match = {{"stage", stage_name}, {"case_id", case_id}};
    if (!role.empty()) match["role"] = role;
    return {{"match", match}, {"response", reply.is_string() ? reply.get<std::string>() : reply.dump()}};
}

json selection_reply(const std::vector<int>& picked, bool with_reasoning) {
    json sel = json::array();
    for (int j : picked) sel.push_back({{"index", j}, {"evidence", "supported by the hospital course"}});
    json r = {{"selected", sel}};
    if (with_reasoning) r["reasoning"] = "reviewed the admission course against each option";
    return r;
}

json keep_remove_reply(const TaskInstance& t, const std::vector<int>& keeps) {
    const std::set<int> k(keeps.begin(), keeps.end());
    json arr = json::array();
    for (const auto& c : t.candidates) {
        arr.push_back({{"index", c.index},
                       {"decision", k.count(c.index) ? "KEEP" : "REMOVE"},
                       {"rationale", k.count(c.index) ? "treated during this admission" : "not supported by the course"}});
    }
    return {{"decisions", arr}};
}

}  // namespace

json generate_mock_script(const std::vector<TaskInstance>& corpus, const MockGenOptions& o) {
    json script = json::array();
    for (const auto& t : corpus) {
        const std::string& id = t.case_id;
        const std::set<int> gold(t.gold.begin(), t.gold.end());
        auto draw_for = [&](const std::string& what) { return Draw(o.seed, id + "/" + what); };

        // attending: initial assessment
        {
            Draw d = draw_for("assessment");
            json sel = json::array();
            for (int j : noisy_selection(t, d, 0.85, 0.12)) {
                sel.push_back({{"index", j}, {"confidence", d.chance(0.8) ? "high" : "medium"}});
            }
            script.push_back(rule(stage::assessment, id, "",
                                  {{"reasoning", "reviewed presentation and course"},
                                   {"key_dimensions", "primary organ systems and uncertain findings"},
                                   {"selected", sel}}));
        }

        // attending: panel
        std::vector<std::string> roles = {lead_role(t.service_label)};
        {
            std::vector<std::string> pool = role_pool();
            util::SeededRng shuffle_rng(util::derive_seed(o.seed, id + "/panel_order"));
            shuffle_rng.shuffle(pool);
            for (const auto& r : pool) {
                if (static_cast<int>(roles.size()) >= o.max_panel) break;
                if (std::find(roles.begin(), roles.end(), r) == roles.end()) roles.push_back(r);
            }
            json specialists = json::array();
            for (const auto& r : roles) {
                specialists.push_back({{"role", r}, {"focus", "weigh the findings most relevant to " + r + " practice"}});
            }
            script.push_back(rule(stage::assembly, id, "",
                                  {{"case_summary", "inpatient admission under review"}, {"specialists", specialists}}));
        }

        // specialists
        for (std::size_t s = 0; s < roles.size(); ++s) {
            Draw d = draw_for("specialist/" + roles[s]);
            json evals = json::array();
            for (const auto& c : t.candidates) {
                const double u = d.unit();
                std::string vote;
                if (gold.count(c.index)) {
                    vote = u < 0.72 ? "KEEP" : (u < 0.88 ? "NEUTRAL" : "REMOVE");
                } else {
                    vote = u < 0.68 ? "REMOVE" : (u < 0.90 ? "NEUTRAL" : "KEEP");
                }
                const bool neutral = vote == "NEUTRAL";
                evals.push_back({{"index", c.index},
                                 {"decision", vote},
                                 {"confidence", neutral ? 0.0 : 0.5 + 0.05 * static_cast<double>(d.below(10))},
                                 {"in_scope", !neutral},
                                 {"evidence_level", neutral ? "none" : (vote == "KEEP" ? "direct" : "absent")},
                                 {"quote", vote == "KEEP" ? note_quote(t.masked_note, d) : ""},
                                 {"reasoning", neutral ? "outside my area" : "based on the documented course"}});
            }
            script.push_back(rule(stage::specialist, id, roles[s], {{"evaluations", evals}}));
        }

        // arbitration for any diagnosis
        for (const auto& c : t.candidates) {
            Draw d = draw_for("arbitration/" + std::to_string(c.index));
            const bool include = gold.count(c.index) ? d.chance(0.85) : d.chance(0.15);
            script.push_back(rule(stage::arbitration, id, "diagnosis_" + std::to_string(c.index),
                                  {{"decision", include ? "INCLUDE" : "EXCLUDE"},
                                   {"reasoning", include ? "the supporting rationale cites direct evidence"
                                                         : "the objection is better grounded in the note"}}));
        }

        // BHC and its judge
        script.push_back(rule(stage::bhc, id, "",
                              json("The patient was admitted and managed for the accepted problems. Course was "
                                   "uncomplicated and the patient was discharged in stable condition.")));
        {
            json rankings = json::object();
            json overall = json::array();
            for (int i = 0; i < o.judge_systems; ++i) overall.push_back(std::string(1, static_cast<char>('A' + i)));
            for (const auto& dim : bhc_judge_dimensions()) {
                json ranks = json::object();
                for (int i = 0; i < o.judge_systems; ++i) ranks[std::string(1, static_cast<char>('A' + i))] = i + 1;
                rankings[dim] = ranks;
            }
            script.push_back(rule(stage::bhc_judge, id, "", {{"rankings", rankings}, {"overall", overall}}));
        }

        // single agent, chain of thought
        {
            Draw d = draw_for("single_agent");
            script.push_back(rule(stage::single_agent, id, "", selection_reply(noisy_selection(t, d, 0.8, 0.2), false)));
            Draw c = draw_for("cot");
            script.push_back(rule(stage::cot, id, "", selection_reply(noisy_selection(t, c, 0.82, 0.17), true)));
        }
        for (int i = 0; i < o.self_consistency_samples; ++i) {
            Draw d = draw_for("sample/" + std::to_string(i));
            script.push_back(rule(stage::self_consistency, id, "sample_" + std::to_string(i),
                                  selection_reply(noisy_selection(t, d, 0.78, 0.2), true)));
        }
        for (int i = 0; i < o.agents; ++i) {
            Draw d = draw_for("agent/" + std::to_string(i));
            script.push_back(rule(stage::majority_voting, id, "agent_" + std::to_string(i),
                                  keep_remove_reply(t, noisy_selection(t, d, 0.8, 0.18))));
            Draw m = draw_for("medagent/" + std::to_string(i));
            script.push_back(rule(stage::medagents_initial, id, "agent_" + std::to_string(i),
                                  keep_remove_reply(t, noisy_selection(t, m, 0.78, 0.2))));
            for (int r = 1; r <= o.medagents_rounds; ++r) {
                Draw v = draw_for("medagent/" + std::to_string(i) + "/round/" + std::to_string(r));
                script.push_back(rule(stage::medagents_revote, id,
                                      "agent_" + std::to_string(i) + "_round_" + std::to_string(r),
                                      keep_remove_reply(t, noisy_selection(t, v, 0.82, 0.15))));
            }
        }
        for (int i = 0; i < o.proposers; ++i) {
            Draw d = draw_for("proposer/" + std::to_string(i));
            script.push_back(rule(stage::llm_judge_proposal, id, "proposer_" + std::to_string(i),
                                  selection_reply(noisy_selection(t, d, 0.8, 0.2), false)));
        }
        {
            Draw d = draw_for("judge");
            json sel = noisy_selection(t, d, 0.83, 0.15);
            script.push_back(rule(stage::llm_judge, id, "judge", {{"reasoning", "compared the predictions"}, {"selected", sel}}));
        }
        {
            Draw d = draw_for("devils_advocate");
            const auto proposal = noisy_selection(t, d, 0.85, 0.25);
            script.push_back(rule(stage::devils_advocate_proposal, id, "proposer", selection_reply(proposal, false)));
            json challenges = json::array();
            for (int j : proposal) {
                const bool remove = gold.count(j) ? d.chance(0.15) : d.chance(0.5);
                challenges.push_back({{"index", j},
                                      {"decision", remove ? "REMOVE" : "KEEP"},
                                      {"counterargument", remove ? "the note does not document active management"
                                                                 : "no counterargument holds"}});
            }
            script.push_back(rule(stage::devils_advocate_critic, id, "critic", {{"challenges", challenges}}));
        }
    }
    return script;
}

}  // namespace camp
