#pragma once
// Generates a scripted mock (see MockProvider) answering every stage of every
// method for a corpus. Replies are drawn from gold-aware seeded noise so that
// methods disagree in realistic ways while runs stay deterministic.

#include <cstdint>
#include <vector>

#include "camp/core.hpp"

namespace camp {

struct MockGenOptions {
    std::uint64_t seed = 7;
    int max_panel = 7;           // specialists offered by the orchestrator
    int self_consistency_samples = 10;
    int agents = 3;              // majority voting, medagents
    int medagents_rounds = 1;
    int proposers = 3;           // llm_judge
    int judge_systems = 2;       // labels ranked by the BHC judge rule
};

json generate_mock_script(const std::vector<TaskInstance>& corpus, const MockGenOptions& options = {});

}  // namespace camp
