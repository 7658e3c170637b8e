#include "camp/router.hpp"

#include <algorithm>
#include <future>

namespace camp {

Tally tally(std::span<const Vote> column) {
    if (column.empty()) throw EmptyColumn();
    Tally t;
    for (Vote v : column) {
        switch (v) {
            case Vote::keep: ++t.keeps; break;
            case Vote::refuse: ++t.refuses; break;
            case Vote::neutral: ++t.neutrals; break;
        }
    }
    return t;
}

Tally tally(std::span<const SpecialistEvaluation> column) {
    std::vector<Vote> votes;
    votes.reserve(column.size());
    for (const auto& e : column) votes.push_back(e.vote);
    return tally(std::span<const Vote>(votes));
}

RoutedOutcome route(const Tally& t) {
    if (t.total() < 1 || t.keeps < 0 || t.refuses < 0 || t.neutrals < 0) throw EmptyColumn();
    if (t.keeps > 0 && t.refuses > 0) return {ResolutionPath::conflict, std::nullopt};
    // From here at most one non-abstaining vote type is present.
    if (t.refuses == 0 && t.keeps > t.neutrals) return {ResolutionPath::strong_consensus, Decision::accept};
    if (t.keeps == 0 && t.refuses > t.neutrals) return {ResolutionPath::strong_consensus, Decision::reject};
    return {ResolutionPath::weak_consensus, std::nullopt};
}

namespace {

ResolutionRecord run_arbitration(ResolutionRecord record, std::span<const SpecialistEvaluation> column,
                                 const Arbitrator& arbitrate) {
    record.path = ResolutionPath::conflict;
    record.fallback_used = false;
    try {
        ArbitrationTrace trace = arbitrate(ArbitrationRequest{record.diagnosis_index, record.tally, column});
        record.decision = trace.decision;
        record.arbitration = std::move(trace);
    } catch (const std::exception& e) {
        throw ArbitrationFailed(record, e.what());
    }
    return record;
}

}  // namespace

ResolutionRecord resolve_diagnosis(int diagnosis_index, std::span<const SpecialistEvaluation> column, Decision initial,
                                   const Arbitrator& arbitrate, RoutingPolicy policy) {
    ResolutionRecord record;
    record.diagnosis_index = diagnosis_index;
    record.tally = tally(column);

    if (policy == RoutingPolicy::always_arbitrate) return run_arbitration(std::move(record), column, arbitrate);

    const RoutedOutcome outcome = route(record.tally);
    record.path = outcome.path;
    switch (outcome.path) {
        case ResolutionPath::strong_consensus:
            record.decision = *outcome.immediate_decision;
            return record;
        case ResolutionPath::weak_consensus:
            record.decision = initial;
            record.fallback_used = true;
            return record;
        case ResolutionPath::conflict:
            return run_arbitration(std::move(record), column, arbitrate);
    }
    return record;
}

std::vector<ResolutionRecord> resolve_case(const VoteMatrix& matrix, std::span<const Decision> initials,
                                           const Arbitrator& arbitrate, const ResolveOptions& options) {
    const std::size_t n = matrix.diagnoses();
    if (matrix.specialists() == 0) throw DimensionMismatch("vote matrix has no specialists");
    if (initials.size() != n) {
        throw DimensionMismatch("expected " + std::to_string(n) + " initial decisions, got " +
                                std::to_string(initials.size()));
    }

    std::vector<std::vector<SpecialistEvaluation>> columns;
    columns.reserve(n);
    for (std::size_t j = 0; j < n; ++j) columns.push_back(matrix.column(j));

    std::vector<ResolutionRecord> records(n);
    std::vector<std::size_t> contested;
    for (std::size_t j = 0; j < n; ++j) {
        const int index = static_cast<int>(j) + 1;
        const Tally t = tally(std::span<const SpecialistEvaluation>(columns[j]));
        const bool needs_arbitration =
            options.policy == RoutingPolicy::always_arbitrate || route(t).path == ResolutionPath::conflict;
        if (needs_arbitration) {
            contested.push_back(j);
            continue;
        }
        records[j] = resolve_diagnosis(index, columns[j], initials[j], arbitrate, options.policy);
    }

    if (!options.concurrent_arbitration || contested.size() < 2) {
        for (std::size_t j : contested) {
            records[j] =
                resolve_diagnosis(static_cast<int>(j) + 1, columns[j], initials[j], arbitrate, options.policy);
        }
        return records;
    }

    std::vector<std::future<ResolutionRecord>> pending;
    pending.reserve(contested.size());
    for (std::size_t j : contested) {
        pending.push_back(std::async(std::launch::async, [&, j] {
            return resolve_diagnosis(static_cast<int>(j) + 1, columns[j], initials[j], arbitrate, options.policy);
        }));
    }
    // Collect every future before rethrowing so no thread outlives `columns`.
    std::exception_ptr first_error;
    for (std::size_t i = 0; i < contested.size(); ++i) {
        try {
            records[contested[i]] = pending[i].get();
        } catch (...) {
            if (!first_error) first_error = std::current_exception();
        }
    }
    if (first_error) std::rethrow_exception(first_error);
    return records;
}

std::vector<int> accepted_indices(const std::vector<ResolutionRecord>& records) {
    std::vector<int> out;
    for (const auto& r : records) {
        if (r.decision == Decision::accept) out.push_back(r.diagnosis_index);
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace camp
