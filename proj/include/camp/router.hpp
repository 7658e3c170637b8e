#pragma once
// Gated hybrid resolution.
//
// Each diagnosis is tallied independently and routed through exactly one of
// three paths:
//   strong consensus  r == 0 && k > n  -> accept
//                     k == 0 && r > n  -> reject
//   weak consensus    k * r == 0 && max(k, r) <= n -> attending's initial call
//   conflict          k > 0 && r > 0   -> arbitration
// The router is pure: all model access arrives through the arbitrator callback.

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "camp/core.hpp"
#include "camp/error.hpp"

namespace camp {

struct RoutedOutcome {
    ResolutionPath path = ResolutionPath::weak_consensus;
    std::optional<Decision> immediate_decision;  // present iff strong consensus

    friend bool operator==(const RoutedOutcome&, const RoutedOutcome&) = default;
};

// Everything the arbitrator sees for one contested diagnosis.
struct ArbitrationRequest {
    int diagnosis_index = 0;  // 1-based
    Tally tally;
    std::span<const SpecialistEvaluation> column;  // one entry per specialist, row order
};

// Returns the arbitrator's decision with its reasoning; may block on IO.
using Arbitrator = std::function<ArbitrationTrace(const ArbitrationRequest&)>;

enum class RoutingPolicy {
    gated,            // the three-path router
    always_arbitrate  // ablation: every diagnosis goes to arbitration
};

class ArbitrationFailed : public Error {
public:
    ArbitrationFailed(ResolutionRecord partial, const std::string& reason)
        : Error("arbitration failed for diagnosis " + std::to_string(partial.diagnosis_index) + ": " + reason),
          partial_(std::move(partial)) {}
    const ResolutionRecord& partial() const noexcept { return partial_; }

private:
    ResolutionRecord partial_;
};

Tally tally(std::span<const Vote> column);
Tally tally(std::span<const SpecialistEvaluation> column);

// Precondition: t.total() >= 1.
RoutedOutcome route(const Tally& t);

ResolutionRecord resolve_diagnosis(int diagnosis_index, std::span<const SpecialistEvaluation> column, Decision initial,
                                   const Arbitrator& arbitrate, RoutingPolicy policy = RoutingPolicy::gated);

struct ResolveOptions {
    RoutingPolicy policy = RoutingPolicy::gated;
    // Run arbitrations for distinct diagnoses on separate threads.
    bool concurrent_arbitration = true;
};

// One record per diagnosis in candidate order. Throws DimensionMismatch when
// initials.size() != matrix.diagnoses() or the matrix has no specialists.
std::vector<ResolutionRecord> resolve_case(const VoteMatrix& matrix, std::span<const Decision> initials,
                                           const Arbitrator& arbitrate, const ResolveOptions& options = {});

// 1-based indices with decision == accept.
std::vector<int> accepted_indices(const std::vector<ResolutionRecord>& records);

}  // namespace camp
