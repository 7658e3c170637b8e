#pragma once
// Comparison strategies behind one interface. Every strategy maps a task
// instance to a CaseResult whose `accepted` set is a subset of 1..n and whose
// `calls` hold one ledger entry per provider call.

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "camp/pipeline.hpp"

namespace camp {

struct StrategyContext {
    LlmGateway& llm;
    const PromptLibrary& prompts;
    std::map<std::string, int> max_tokens;
};

class Strategy {
public:
    virtual ~Strategy() = default;
    virtual std::string name() const = 0;
    // Effective parameters, defaults filled in (recorded in the manifest).
    virtual json params() const = 0;
    // Provider failures mark the result failed rather than throwing.
    virtual CaseResult run(const TaskInstance& instance, StrategyContext& ctx) const = 0;
};

// single_agent | cot | self_consistency | majority_voting | medagents |
// llm_judge | devils_advocate | camp. Unknown names throw Error.
std::unique_ptr<Strategy> make_strategy(const std::string& name, const json& params = json::object());
const std::vector<std::string>& strategy_names();

// --- aggregation rules (pure) --------------------------------------------------

// Index j is included iff it appears in more than half of `selections`.
std::vector<int> strict_majority(const std::vector<std::vector<int>>& selections, std::size_t n);

// KEEP iff strictly more than half of the agents vote KEEP; a missing vote
// (failed agent or omitted entry) counts as REMOVE.
std::vector<int> majority_keep(const std::vector<std::vector<std::optional<Vote>>>& agent_votes, std::size_t n);

// Proposals minus those the critic explicitly votes REMOVE on.
std::vector<int> apply_critique(const std::vector<int>& proposals, const std::vector<std::optional<Vote>>& critic);

}  // namespace camp
