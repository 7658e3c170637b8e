#pragma once
// Metrics and reports over completed traces.

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "camp/agents.hpp"
#include "camp/pipeline.hpp"

namespace camp {

struct CaseScore {
    double f1 = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    bool perfect = false;
};

// precision = |P∩G|/|P| (1 when both empty, 0 when only P empty),
// recall = |P∩G|/|G| (1 when G empty), f1 = 2PR/(P+R) or 0.
CaseScore score_case(const std::vector<int>& predicted, const std::vector<int>& gold);

enum class F1Mode {
    set_level,   // per-case set F1, macro-averaged over cases (default)
    label_level  // per-label F1 over the global label space, macro-averaged over labels
};

struct DiagnosticScore {
    double macro_f1 = 0.0;
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    double perfect_rate = 0.0;
    std::size_t n_cases = 0;   // scored (non-failed) cases
    std::size_t n_failed = 0;  // excluded
    F1Mode mode = F1Mode::set_level;
};

void to_json(json& j, const DiagnosticScore& s);

DiagnosticScore score_corpus(const std::vector<CaseResult>& results, F1Mode mode = F1Mode::set_level);
// Aligned text table, one row per labelled score, percentages with two decimals.
std::string render_score_table(const std::vector<std::pair<std::string, DiagnosticScore>>& rows);

struct PooledRanks {
    // dimension -> system -> mean rank over judged cases
    std::map<std::string, std::map<std::string, double>> mean_rank;
    // system -> mean position in the overall ordering (1 = best)
    std::map<std::string, double> overall_mean;
    std::size_t judged = 0;
    std::size_t unjudged = 0;
};

void to_json(json& j, const PooledRanks& p);
PooledRanks pooled_rank_report(const std::vector<JudgeResult>& judgments);
std::string render_pooled_ranks(const PooledRanks& p);

struct SweepRow {
    int k = 0;
    DiagnosticScore score;
};

// Runs `run_at_k` for each k and scores the results.
std::vector<SweepRow> panel_size_sweep(const std::vector<int>& k_values,
                                       const std::function<std::vector<CaseResult>(int)>& run_at_k);
// Header: k,macro_f1,macro_precision,macro_recall
std::string sweep_csv(const std::vector<SweepRow>& rows);
std::string render_sweep_table(const std::vector<SweepRow>& rows);

// Per method: mean tokens per case, stage breakdown; for traces carrying
// resolution records additionally a breakdown by resolution path.
json token_report(const std::map<std::string, std::vector<CaseResult>>& by_method);
std::string render_token_report(const json& report);

struct AlignmentMatrix {
    std::vector<std::string> rows;  // service labels, sorted
    std::vector<std::string> cols;  // normalized roles, sorted
    std::vector<std::vector<double>> cells;
    std::vector<std::vector<int>> counts;
};

void to_json(json& j, const AlignmentMatrix& m);
// Cases without a service label or without a panel are skipped.
AlignmentMatrix alignment_matrix(const std::vector<CaseResult>& results);
std::string alignment_csv(const AlignmentMatrix& m);

}  // namespace camp
