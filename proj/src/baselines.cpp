#include "camp/baselines.hpp"

#include <algorithm>
#include <future>
#include <set>

#include "camp/error.hpp"
#include "camp/log.hpp"
#include "camp/util.hpp"

namespace camp {

std::vector<int> strict_majority(const std::vector<std::vector<int>>& selections, std::size_t n) {
    std::vector<std::size_t> counts(n + 1, 0);
    for (const auto& sel : selections) {
        std::set<int> unique(sel.begin(), sel.end());
        for (int j : unique) {
            if (j >= 1 && static_cast<std::size_t>(j) <= n) ++counts[static_cast<std::size_t>(j)];
        }
    }
    std::vector<int> out;
    for (std::size_t j = 1; j <= n; ++j) {
        if (2 * counts[j] > selections.size()) out.push_back(static_cast<int>(j));
    }
    return out;
}

std::vector<int> majority_keep(const std::vector<std::vector<std::optional<Vote>>>& agent_votes, std::size_t n) {
    std::vector<int> out;
    for (std::size_t j = 0; j < n; ++j) {
        std::size_t keeps = 0;
        for (const auto& votes : agent_votes) {
            if (j < votes.size() && votes[j] == Vote::keep) ++keeps;
        }
        if (2 * keeps > agent_votes.size()) out.push_back(static_cast<int>(j + 1));
    }
    return out;
}

std::vector<int> apply_critique(const std::vector<int>& proposals, const std::vector<std::optional<Vote>>& critic) {
    std::vector<int> out;
    for (int j : proposals) {
        const auto pos = static_cast<std::size_t>(j - 1);
        if (pos < critic.size() && critic[pos] == Vote::refuse) continue;
        out.push_back(j);
    }
    return out;
}

namespace {

struct Decisions {
    std::vector<std::optional<Vote>> votes;
    std::vector<std::string> rationales;
};

Decisions parse_decisions(const json& reply, std::size_t n, const char* list_key, const char* text_key) {
    Decisions d;
    d.votes = parse_keep_remove(reply, n, list_key);
    d.rationales.assign(n, "");
    const json& list = reply.at(list_key);
    for (std::size_t pos = 0; pos < list.size(); ++pos) {
        const json& item = list[pos];
        if (!item.is_object()) continue;
        int idx = static_cast<int>(pos) + 1;
        if (item.contains("index") && item["index"].is_number_integer()) idx = item["index"].get<int>();
        if (idx < 1 || static_cast<std::size_t>(idx) > n) continue;
        for (const char* key : {text_key, "rationale", "reasoning"}) {
            if (item.contains(key) && item[key].is_string()) {
                if (d.rationales[idx - 1].empty()) d.rationales[idx - 1] = item[key].get<std::string>();
                break;
            }
        }
    }
    return d;
}

json votes_json(const std::vector<std::optional<Vote>>& votes) {
    json arr = json::array();
    for (const auto& v : votes) arr.push_back(v ? json(*v) : json(nullptr));
    return arr;
}

PlaceholderMap case_values(const TaskInstance& inst) {
    return {{"clinical_note", inst.masked_note}, {"options_text", format_options(inst.candidates)}};
}

std::string indexed_list(const std::vector<CandidateDiagnosis>& candidates, const std::vector<int>& indices) {
    if (indices.empty()) return "(none)";
    std::vector<std::string> lines;
    for (int j : indices) lines.push_back(std::to_string(j) + ". " + candidates[static_cast<std::size_t>(j - 1)].text);
    return util::join(lines, "\n");
}

// Runs fn(i) for i in [0, count), concurrently when asked; results in index order.
template <typename Fn>
auto fan_out(std::size_t count, bool concurrent, Fn fn) -> std::vector<decltype(fn(std::size_t{}))> {
    using R = decltype(fn(std::size_t{}));
    std::vector<R> out(count);
    if (!concurrent || count < 2) {
        for (std::size_t i = 0; i < count; ++i) out[i] = fn(i);
        return out;
    }
    std::vector<std::future<R>> futures;
    for (std::size_t i = 0; i < count; ++i) futures.push_back(std::async(std::launch::async, fn, i));
    std::exception_ptr first_error;
    for (std::size_t i = 0; i < count; ++i) {
        try {
            out[i] = futures[i].get();
        } catch (...) {
            if (!first_error) first_error = std::current_exception();
        }
    }
    if (first_error) std::rethrow_exception(first_error);
    return out;
}

// Shared scaffolding: ledger, context, provider failure handling.
template <typename Body>
CaseResult run_guarded(const std::string& method, const TaskInstance& inst, StrategyContext& sctx, Body body) {
    CaseResult result = make_result(inst, method);
    TokenLedger ledger;
    AgentContext ctx{sctx.llm, sctx.prompts, ledger, inst.case_id, sctx.max_tokens};
    try {
        body(ctx, result);
    } catch (const ProviderError& e) {
        result.status = "failed";
        result.error = e.what();
        result.accepted.clear();
        logger().error("case {} failed ({}): {}", inst.case_id, method, e.what());
    }
    std::sort(result.accepted.begin(), result.accepted.end());
    attach_ledger(result, ledger);
    return result;
}

int int_param(const json& params, const char* key, int fallback, int min_value) {
    const int v = params.value(key, fallback);
    if (v < min_value) throw Error(std::string("parameter '") + key + "' must be at least " + std::to_string(min_value));
    return v;
}

// --- single call selection --------------------------------------------------------

class SelectionStrategy : public Strategy {
public:
    SelectionStrategy(std::string name, std::string prompt, const char* stage_name)
        : name_(std::move(name)), prompt_(std::move(prompt)), stage_(stage_name) {}
    std::string name() const override { return name_; }
    json params() const override { return json::object(); }

    CaseResult run(const TaskInstance& inst, StrategyContext& sctx) const override {
        return run_guarded(name_, inst, sctx, [&](AgentContext& ctx, CaseResult& result) {
            const std::size_t n = inst.size();
            auto reply = ask_structured(ctx, sctx.prompts.render(prompt_, case_values(inst)),
                                        CallTag{stage_, inst.case_id, "", 0, 0},
                                        [n](const json& j) { return parse_selection(j, n); });
            if (!reply.parse_ok) result.degraded_flags.push_back("selection_unparseable");
            result.accepted = reply.parsed;
        });
    }

private:
    std::string name_;
    std::string prompt_;
    const char* stage_;
};

// --- self-consistency -------------------------------------------------------------

class SelfConsistency : public Strategy {
public:
    explicit SelfConsistency(const json& p)
        : samples_(int_param(p, "samples", 10, 1)),
          temperature_(p.value("temperature", 0.7)),
          concurrent_(p.value("concurrent", true)) {}
    std::string name() const override { return "self_consistency"; }
    json params() const override { return {{"samples", samples_}, {"temperature", temperature_}}; }

    CaseResult run(const TaskInstance& inst, StrategyContext& sctx) const override {
        return run_guarded(name(), inst, sctx, [&](AgentContext& ctx, CaseResult& result) {
            const std::size_t n = inst.size();
            const std::string prompt = sctx.prompts.render("cot", case_values(inst));
            auto replies = fan_out(static_cast<std::size_t>(samples_), concurrent_, [&](std::size_t i) {
                return ask_structured(
                    ctx, prompt,
                    CallTag{stage::self_consistency, inst.case_id, "sample_" + std::to_string(i), static_cast<int>(i), 0},
                    [n](const json& j) { return parse_selection(j, n); }, temperature_);
            });
            std::vector<std::vector<int>> valid;
            json per_sample = json::array();
            for (const auto& r : replies) {
                per_sample.push_back(r.parse_ok ? json(r.parsed) : json(nullptr));
                if (r.parse_ok) valid.push_back(r.parsed);
            }
            const std::size_t failed = replies.size() - valid.size();
            if (2 * failed > replies.size()) result.degraded_flags.push_back("self_consistency_samples_failed");
            result.accepted = strict_majority(valid, n);
            result.details = {{"samples", per_sample}, {"valid_samples", valid.size()}, {"failed_samples", failed}};
        });
    }

private:
    int samples_;
    double temperature_;
    bool concurrent_;
};

// --- majority voting ----------------------------------------------------------------

class MajorityVoting : public Strategy {
public:
    explicit MajorityVoting(const json& p)
        : agents_(int_param(p, "agents", 3, 1)), concurrent_(p.value("concurrent", true)) {}
    std::string name() const override { return "majority_voting"; }
    json params() const override { return {{"agents", agents_}}; }

    CaseResult run(const TaskInstance& inst, StrategyContext& sctx) const override {
        return run_guarded(name(), inst, sctx, [&](AgentContext& ctx, CaseResult& result) {
            const std::size_t n = inst.size();
            auto replies = fan_out(static_cast<std::size_t>(agents_), concurrent_, [&](std::size_t i) {
                auto values = case_values(inst);
                values["agent_id"] = std::to_string(i + 1);
                return ask_structured(
                    ctx, sctx.prompts.render("majority_vote", values),
                    CallTag{stage::majority_voting, inst.case_id, "agent_" + std::to_string(i), static_cast<int>(i), 0},
                    [n](const json& j) { return parse_keep_remove(j, n); });
            });
            std::vector<std::vector<std::optional<Vote>>> votes;
            json per_agent = json::array();
            for (std::size_t i = 0; i < replies.size(); ++i) {
                if (!replies[i].parse_ok) {
                    result.degraded_flags.push_back("agent_unparseable:" + std::to_string(i));
                    replies[i].parsed.assign(n, std::nullopt);
                }
                per_agent.push_back(votes_json(replies[i].parsed));
                votes.push_back(replies[i].parsed);
            }
            result.accepted = majority_keep(votes, n);
            result.details = {{"votes", per_agent}};
        });
    }

private:
    int agents_;
    bool concurrent_;
};

// --- MedAgents-style discussion -------------------------------------------------------

class MedAgents : public Strategy {
public:
    explicit MedAgents(const json& p)
        : roles_(p.value("roles", std::vector<std::string>{"internist", "surgeon", "radiologist"})),
          rounds_(int_param(p, "rounds", 1, 0)),
          concurrent_(p.value("concurrent", true)) {
        if (roles_.empty()) throw Error("medagents needs at least one role");
    }
    std::string name() const override { return "medagents"; }
    json params() const override { return {{"roles", roles_}, {"rounds", rounds_}}; }

    CaseResult run(const TaskInstance& inst, StrategyContext& sctx) const override {
        return run_guarded(name(), inst, sctx, [&](AgentContext& ctx, CaseResult& result) {
            const std::size_t n = inst.size();
            const std::size_t m = roles_.size();
            auto parser = [n](const json& j) { return parse_decisions(j, n, "decisions", "rationale"); };

            auto round0 = fan_out(m, concurrent_, [&](std::size_t i) {
                auto values = case_values(inst);
                values["agent_id"] = std::to_string(i + 1);
                values["specialty"] = roles_[i];
                return ask_structured(ctx, sctx.prompts.render("medagents_initial", values),
                                      CallTag{stage::medagents_initial, inst.case_id, "agent_" + std::to_string(i),
                                              static_cast<int>(i), 0},
                                      parser);
            });
            std::vector<Decisions> current(m);
            for (std::size_t i = 0; i < m; ++i) {
                if (!round0[i].parse_ok) {
                    result.degraded_flags.push_back("agent_unparseable:" + std::to_string(i));
                    current[i] = Decisions{std::vector<std::optional<Vote>>(n), std::vector<std::string>(n)};
                } else {
                    current[i] = round0[i].parsed;
                }
            }
            json rounds = json::array();
            auto snapshot = [&] {
                json r = json::array();
                for (const auto& d : current) r.push_back(votes_json(d.votes));
                rounds.push_back(r);
            };
            snapshot();

            for (int round = 1; round <= rounds_; ++round) {
                auto revised = fan_out(m, concurrent_, [&](std::size_t i) {
                    auto values = case_values(inst);
                    values["agent_id"] = std::to_string(i + 1);
                    values["peer_opinions"] = peer_opinions(inst, current, i);
                    return ask_structured(ctx, sctx.prompts.render("medagents_revote", values),
                                          CallTag{stage::medagents_revote, inst.case_id,
                                                  "agent_" + std::to_string(i) + "_round_" + std::to_string(round),
                                                  static_cast<int>(i), 0},
                                          parser);
                });
                for (std::size_t i = 0; i < m; ++i) {
                    if (revised[i].parse_ok) {
                        current[i] = revised[i].parsed;
                    } else {
                        // keep the previous round's decisions
                        result.degraded_flags.push_back("revote_unparseable:" + std::to_string(i) + ":" +
                                                        std::to_string(round));
                    }
                }
                snapshot();
            }

            std::vector<std::vector<std::optional<Vote>>> final_votes;
            for (const auto& d : current) final_votes.push_back(d.votes);
            result.accepted = majority_keep(final_votes, n);
            result.details = {{"roles", roles_}, {"rounds", rounds}};
        });
    }

    // Every other agent's latest decisions, one block per agent.
    std::string peer_opinions(const TaskInstance& inst, const std::vector<Decisions>& current, std::size_t self) const {
        std::vector<std::string> blocks;
        for (std::size_t p = 0; p < current.size(); ++p) {
            if (p == self) continue;
            std::string block = "Agent " + std::to_string(p + 1) + " (" + roles_[p] + "):";
            for (std::size_t j = 0; j < inst.size(); ++j) {
                const auto& v = current[p].votes[j];
                block += "\n" + std::to_string(j + 1) + ". " + inst.candidates[j].text + ": " +
                         (v ? std::string(vote_label(*v)) : std::string("no decision"));
                if (!current[p].rationales[j].empty()) block += " - " + current[p].rationales[j];
            }
            blocks.push_back(block);
        }
        return blocks.empty() ? "(no other agents)" : util::join(blocks, "\n\n");
    }

private:
    std::vector<std::string> roles_;
    int rounds_;
    bool concurrent_;
};

// --- LLM judge ---------------------------------------------------------------------------

class LlmJudge : public Strategy {
public:
    explicit LlmJudge(const json& p)
        : proposers_(int_param(p, "proposers", 3, 1)),
          temperature_(p.value("proposer_temperature", 0.0)),
          concurrent_(p.value("concurrent", true)) {}
    std::string name() const override { return "llm_judge"; }
    json params() const override { return {{"proposers", proposers_}, {"proposer_temperature", temperature_}}; }

    CaseResult run(const TaskInstance& inst, StrategyContext& sctx) const override {
        return run_guarded(name(), inst, sctx, [&](AgentContext& ctx, CaseResult& result) {
            const std::size_t n = inst.size();
            auto parser = [n](const json& j) { return parse_selection(j, n); };
            const std::string prompt = sctx.prompts.render("single_agent", case_values(inst));
            auto proposals = fan_out(static_cast<std::size_t>(proposers_), concurrent_, [&](std::size_t i) {
                return ask_structured(ctx, prompt,
                                      CallTag{stage::llm_judge_proposal, inst.case_id,
                                              "proposer_" + std::to_string(i), static_cast<int>(i), 0},
                                      parser, temperature_);
            });
            std::vector<std::vector<int>> valid;
            std::vector<std::string> blocks;
            json per_proposer = json::array();
            for (std::size_t i = 0; i < proposals.size(); ++i) {
                if (!proposals[i].parse_ok) {
                    result.degraded_flags.push_back("proposer_unparseable:" + std::to_string(i));
                    per_proposer.push_back(nullptr);
                    continue;
                }
                valid.push_back(proposals[i].parsed);
                per_proposer.push_back(proposals[i].parsed);
                blocks.push_back("Prediction " + std::to_string(i + 1) + ":\n" +
                                 indexed_list(inst.candidates, proposals[i].parsed));
            }

            auto values = case_values(inst);
            values["proposals_text"] = blocks.empty() ? "(no usable predictions)" : util::join(blocks, "\n\n");
            auto verdict = ask_structured(ctx, sctx.prompts.render("llm_judge", values),
                                          CallTag{stage::llm_judge, inst.case_id, "judge", 0, 0}, parser);
            if (verdict.parse_ok) {
                result.accepted = verdict.parsed;
            } else {
                result.degraded_flags.push_back("judge_unparseable");
                result.accepted = strict_majority(valid, n);
            }
            result.details = {{"proposals", per_proposer},
                              {"judge", verdict.parse_ok ? json(verdict.parsed) : json(nullptr)}};
        });
    }

private:
    int proposers_;
    double temperature_;
    bool concurrent_;
};

// --- devil's advocate -------------------------------------------------------------------------

class DevilsAdvocate : public Strategy {
public:
    std::string name() const override { return "devils_advocate"; }
    json params() const override { return json::object(); }

    CaseResult run(const TaskInstance& inst, StrategyContext& sctx) const override {
        return run_guarded(name(), inst, sctx, [&](AgentContext& ctx, CaseResult& result) {
            const std::size_t n = inst.size();
            auto proposal = ask_structured(ctx, sctx.prompts.render("single_agent", case_values(inst)),
                                           CallTag{stage::devils_advocate_proposal, inst.case_id, "proposer", 0, 0},
                                           [n](const json& j) { return parse_selection(j, n); });
            if (!proposal.parse_ok) result.degraded_flags.push_back("proposal_unparseable");
            const std::vector<int>& proposed = proposal.parsed;
            result.details = {{"proposal", proposed}, {"critic", nullptr}};
            if (proposed.empty()) {
                result.accepted.clear();
                return;
            }
            PlaceholderMap values{{"clinical_note", inst.masked_note},
                                  {"pool_text", indexed_list(inst.candidates, proposed)}};
            auto critique = ask_structured(
                ctx, sctx.prompts.render("devils_advocate", values),
                CallTag{stage::devils_advocate_critic, inst.case_id, "critic", 0, 0},
                [n](const json& j) { return parse_decisions(j, n, "challenges", "counterargument"); });
            if (!critique.parse_ok) {
                result.degraded_flags.push_back("critic_unparseable");
                result.accepted = proposed;
                return;
            }
            result.accepted = apply_critique(proposed, critique.parsed.votes);
            json critic = json::array();
            for (int j : proposed) {
                const auto pos = static_cast<std::size_t>(j - 1);
                critic.push_back({{"index", j},
                                  {"vote", critique.parsed.votes[pos] ? json(*critique.parsed.votes[pos]) : json(nullptr)},
                                  {"counterargument", critique.parsed.rationales[pos]}});
            }
            result.details["critic"] = critic;
        });
    }
};

// --- the panel ------------------------------------------------------------------------------

class CampStrategy : public Strategy {
public:
    explicit CampStrategy(const json& p) {
        config_.k = int_param(p, "k", 3, 1);
        config_.bhc = p.value("bhc", false);
        config_.always_arbitrate = p.value("always_arbitrate", false);
        config_.concurrent = p.value("concurrent", true);
    }
    std::string name() const override { return "camp"; }
    json params() const override {
        return {{"k", config_.k}, {"bhc", config_.bhc}, {"always_arbitrate", config_.always_arbitrate}};
    }

    CaseResult run(const TaskInstance& inst, StrategyContext& sctx) const override {
        CampConfig config = config_;
        config.max_tokens = sctx.max_tokens;
        return run_case(inst, sctx.llm, sctx.prompts, config);
    }

private:
    CampConfig config_;
};

}  // namespace

const std::vector<std::string>& strategy_names() {
    static const std::vector<std::string> names = {"single_agent", "cot",       "self_consistency", "majority_voting",
                                                   "medagents",    "llm_judge", "devils_advocate",  "camp"};
    return names;
}

std::unique_ptr<Strategy> make_strategy(const std::string& name, const json& params) {
    const json p = params.is_object() ? params : json::object();
    if (name == "single_agent") return std::make_unique<SelectionStrategy>(name, "single_agent", stage::single_agent);
    if (name == "cot") return std::make_unique<SelectionStrategy>(name, "cot", stage::cot);
    if (name == "self_consistency") return std::make_unique<SelfConsistency>(p);
    if (name == "majority_voting") return std::make_unique<MajorityVoting>(p);
    if (name == "medagents") return std::make_unique<MedAgents>(p);
    if (name == "llm_judge") return std::make_unique<LlmJudge>(p);
    if (name == "devils_advocate") return std::make_unique<DevilsAdvocate>();
    if (name == "camp") return std::make_unique<CampStrategy>(p);
    throw Error("unknown method '" + name + "'; expected one of " + util::join(strategy_names(), ", "));
}

}  // namespace camp
