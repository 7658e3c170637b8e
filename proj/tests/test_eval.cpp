#include <gtest/gtest.h>

#include <random>
#include <set>

#include "camp/eval.hpp"
#include "camp/util.hpp"

using namespace camp;

namespace {

constexpr double kEps = 1e-9;

CaseResult result(const std::string& id, std::vector<std::string> cands, std::vector<int> predicted,
                  std::vector<int> gold) {
    CaseResult r;
    r.case_id = id;
    r.method = "m";
    for (std::size_t i = 0; i < cands.size(); ++i) r.candidates.push_back({static_cast<int>(i) + 1, cands[i]});
    r.accepted = std::move(predicted);
    r.gold = std::move(gold);
    return r;
}

CaseResult numbered(const std::string& id, std::vector<int> predicted, std::vector<int> gold) {
    return result(id, {"a", "b", "c", "d", "e", "f"}, std::move(predicted), std::move(gold));
}

LedgerEntry call(const std::string& stage_name, std::int64_t p, std::int64_t c, int slot = 0) {
    LedgerEntry e;
    e.stage = stage_name;
    e.prompt_tokens = p;
    e.completion_tokens = c;
    e.slot = slot;
    return e;
}

CaseResult with_panel(const std::optional<std::string>& service, std::vector<std::string> roles) {
    CaseResult r;
    r.service_label = service;
    for (auto& role : roles) r.panel.specialists.push_back({role, ""});
    return r;
}

}  // namespace

TEST(ScoreCase, Examples) {
    auto s = score_case({1, 2}, {1, 2});
    EXPECT_DOUBLE_EQ(s.f1, 1.0);
    EXPECT_DOUBLE_EQ(s.precision, 1.0);
    EXPECT_DOUBLE_EQ(s.recall, 1.0);
    EXPECT_TRUE(s.perfect);
    s = score_case({1}, {1, 2});
    EXPECT_NEAR(s.f1, 2.0 / 3.0, kEps);
    EXPECT_DOUBLE_EQ(s.precision, 1.0);
    EXPECT_DOUBLE_EQ(s.recall, 0.5);
    EXPECT_FALSE(s.perfect);
    s = score_case({}, {3});
    EXPECT_EQ(s.f1, 0.0);
    EXPECT_EQ(s.precision, 0.0);
    EXPECT_EQ(s.recall, 0.0);
    EXPECT_FALSE(s.perfect);
    s = score_case({}, {});
    EXPECT_EQ(s.precision, 1.0);
    EXPECT_EQ(s.recall, 1.0);
    EXPECT_TRUE(s.perfect);
    // order and duplicates do not matter
    EXPECT_TRUE(score_case({2, 1, 1}, {1, 2}).perfect);
}

TEST(ScoreCase, ClosedFormIdentityAndSymmetry) {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = 1 + static_cast<int>(rng() % 12);
        std::set<int> p, g;
        for (int j = 1; j <= n; ++j) {
            if (rng() % 2) p.insert(j);
            if (rng() % 3 == 0) g.insert(j);
        }
        if (p.empty() && g.empty()) g.insert(1);
        std::size_t inter = 0;
        for (int j : p) inter += g.count(j);
        const double closed = 2.0 * static_cast<double>(inter) / static_cast<double>(p.size() + g.size());
        const std::vector<int> pv(p.begin(), p.end()), gv(g.begin(), g.end());
        const CaseScore a = score_case(pv, gv);
        const CaseScore b = score_case(gv, pv);
        EXPECT_NEAR(a.f1, closed, kEps);
        EXPECT_NEAR(a.f1, b.f1, kEps);
        if (!p.empty() && !g.empty()) {
            EXPECT_NEAR(a.precision, b.recall, kEps);
            EXPECT_NEAR(a.recall, b.precision, kEps);
        }
    }
}

TEST(ScoreCorpus, HandComputedFourCases) {
    std::vector<CaseResult> rs = {numbered("A", {1, 2}, {1, 2}), numbered("B", {1}, {1, 2}), numbered("C", {}, {3}),
                                  numbered("D", {1, 2, 3}, {2, 4})};
    CaseResult failed = numbered("E", {1}, {1});
    failed.status = "failed";
    rs.push_back(failed);
    const DiagnosticScore s = score_corpus(rs);
    // f1: 1, 2/3, 0, 2*(1/3)(1/2)/(5/6) = 0.4
    EXPECT_NEAR(s.macro_f1, (1.0 + 2.0 / 3.0 + 0.0 + 0.4) / 4.0, kEps);
    EXPECT_NEAR(s.macro_f1, 31.0 / 60.0, kEps);
    EXPECT_NEAR(s.macro_precision, 7.0 / 12.0, kEps);
    EXPECT_NEAR(s.macro_recall, 0.5, kEps);
    EXPECT_NEAR(s.perfect_rate, 0.25, kEps);
    EXPECT_EQ(s.n_cases, 4u);
    EXPECT_EQ(s.n_failed, 1u);
}

TEST(ScoreCorpus, MeanOfTwoAndEmpty) {
    const DiagnosticScore s = score_corpus({numbered("a", {1}, {1}), numbered("b", {1}, {1, 2})});
    EXPECT_NEAR(s.macro_f1, (1.0 + 2.0 / 3.0) / 2.0, kEps);
    const DiagnosticScore e = score_corpus({});
    EXPECT_EQ(e.n_cases, 0u);
    EXPECT_EQ(e.macro_f1, 0.0);
}

TEST(ScoreCorpus, LabelLevelHandComputed) {
    // labels: alpha tp1 fn1, beta fp1 fn1, gamma untouched, delta fp1
    const std::vector<CaseResult> rs = {result("1", {"Alpha", "Beta", "Gamma"}, {1}, {1, 2}),
                                        result("2", {"beta", "ALPHA", "Delta"}, {1, 3}, {2})};
    const DiagnosticScore s = score_corpus(rs, F1Mode::label_level);
    EXPECT_EQ(s.mode, F1Mode::label_level);
    EXPECT_NEAR(s.macro_f1, (2.0 / 3.0 + 0.0 + 0.0) / 3.0, kEps);
    EXPECT_NEAR(s.macro_precision, (1.0 + 0.0 + 0.0) / 3.0, kEps);
    EXPECT_NEAR(s.macro_recall, (0.5 + 0.0) / 2.0, kEps);
    EXPECT_NEAR(s.perfect_rate, 0.0, kEps);
    const json j = s;
    EXPECT_EQ(j["f1_mode"], "label_level");
}

TEST(ScoreCorpus, TableRendering) {
    const DiagnosticScore s = score_corpus({numbered("a", {1}, {1}), numbered("b", {2}, {1})});
    const std::string t = render_score_table({{"camp", s}});
    EXPECT_NE(t.find("macro_f1"), std::string::npos);
    EXPECT_NE(t.find("50.00"), std::string::npos);
    EXPECT_NE(t.find("camp"), std::string::npos);
}

TEST(PooledRanks, MeansAndExclusion) {
    JudgeResult a{true, {{"coherence", {{"S", 1}, {"T", 2}}}}, {"S", "T"}, {}};
    JudgeResult b{true, {{"coherence", {{"S", 2}, {"T", 1}}}}, {"T", "S"}, {}};
    JudgeResult unjudged;
    const PooledRanks p = pooled_rank_report({a, b, unjudged});
    EXPECT_DOUBLE_EQ(p.mean_rank.at("coherence").at("S"), 1.5);
    EXPECT_DOUBLE_EQ(p.overall_mean.at("T"), 1.5);
    EXPECT_EQ(p.judged, 2u);
    EXPECT_EQ(p.unjudged, 1u);
    const PooledRanks same = pooled_rank_report({a, a, a});
    EXPECT_DOUBLE_EQ(same.mean_rank.at("coherence").at("S"), 1.0);
    EXPECT_DOUBLE_EQ(same.mean_rank.at("coherence").at("T"), 2.0);
    EXPECT_NE(render_pooled_ranks(p).find("coherence"), std::string::npos);
}

TEST(Sweep, RowsAndCsvShape) {
    const auto rows = panel_size_sweep({1, 3}, [](int k) {
        return std::vector<CaseResult>{numbered("a", k == 1 ? std::vector<int>{1} : std::vector<int>{1, 2}, {1, 2})};
    });
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[0].k, 1);
    EXPECT_NEAR(rows[0].score.macro_f1, 2.0 / 3.0, kEps);
    EXPECT_NEAR(rows[1].score.macro_f1, 1.0, kEps);
    const auto lines = util::split_lines(sweep_csv(rows));
    ASSERT_GE(lines.size(), 3u);
    EXPECT_EQ(lines[0], "k,macro_f1,macro_precision,macro_recall");
    EXPECT_EQ(lines[1].substr(0, 2), "1,");
    EXPECT_EQ(lines[2], "3,1.000000,1.000000,1.000000");
    EXPECT_NE(render_sweep_table(rows).find("macro_f1"), std::string::npos);
}

TEST(TokenReport, MeansStageSumAndPaths) {
    CaseResult a = numbered("a", {1}, {1});
    a.calls = {call(stage::assessment, 40, 10), call(stage::specialist, 30, 20)};
    CaseResult b = numbered("b", {1}, {1});
    b.calls = {call(stage::assessment, 100, 50), call(stage::specialist, 60, 40), call(stage::arbitration, 40, 10, 2)};
    ResolutionRecord strong;
    strong.diagnosis_index = 1;
    strong.path = ResolutionPath::strong_consensus;
    ResolutionRecord conflict;
    conflict.diagnosis_index = 2;
    conflict.path = ResolutionPath::conflict;
    a.resolutions = {strong};
    b.resolutions = {strong, conflict};
    const json rep = token_report({{"camp", {a, b}}});
    const json& m = rep.at("camp");
    EXPECT_DOUBLE_EQ(m["mean_tokens_per_case"].get<double>(), 200.0);
    EXPECT_EQ(m["ledger_total"], m["stage_sum"]);
    std::int64_t sum = 0;
    for (const auto& [_, s] : m["by_stage"].items()) sum += s["total"].get<std::int64_t>();
    EXPECT_EQ(sum, 400);
    EXPECT_EQ(m["by_path"]["conflict"]["resolution_calls"], 1);
    EXPECT_EQ(m["by_path"]["conflict"]["tokens"], 50);
    EXPECT_EQ(m["by_path"]["strong_consensus"]["resolution_calls"], 0);
    EXPECT_EQ(m["by_path"]["strong_consensus"]["diagnoses"], 2);
    EXPECT_NE(render_token_report(rep).find("camp"), std::string::npos);
}

TEST(TokenReport, ConsensusOnlyCorpusSpendsNothingOnArbitration) {
    CaseResult a = numbered("a", {1}, {1});
    a.calls = {call(stage::assessment, 10, 10), call(stage::specialist, 10, 10)};
    ResolutionRecord strong;
    strong.diagnosis_index = 1;
    strong.path = ResolutionPath::strong_consensus;
    a.resolutions = {strong};
    const json rep = token_report({{"camp", {a}}});
    EXPECT_FALSE(rep["camp"]["by_stage"].contains(stage::arbitration));
    EXPECT_EQ(rep["camp"]["by_path"]["conflict"]["tokens"], 0);
}

TEST(Alignment, NormalizationAndFiltering) {
    const AlignmentMatrix one = alignment_matrix({with_panel("NEUROLOGY", {"Neurologist", "neurologist "}),
                                                  with_panel("NEUROLOGY", {"NEUROLOGIST"})});
    ASSERT_EQ(one.rows, (std::vector<std::string>{"NEUROLOGY"}));
    ASSERT_EQ(one.cols, (std::vector<std::string>{"neurologist"}));
    EXPECT_DOUBLE_EQ(one.cells[0][0], 1.0);

    const AlignmentMatrix m = alignment_matrix({with_panel("MEDICINE", {"cardiologist", "cardiologist", "nephrologist"}),
                                                with_panel("MEDICINE", {"Cardiologist"}),
                                                with_panel(std::nullopt, {"surgeon"}),
                                                with_panel("SURGERY", {})});
    ASSERT_EQ(m.rows, (std::vector<std::string>{"MEDICINE"}));
    ASSERT_EQ(m.cols, (std::vector<std::string>{"cardiologist", "nephrologist"}));
    EXPECT_NEAR(m.cells[0][0], 0.75, kEps);
    EXPECT_NEAR(m.cells[0][1], 0.25, kEps);
    EXPECT_EQ(m.counts[0], (std::vector<int>{3, 1}));
    EXPECT_EQ(util::split_lines(alignment_csv(m))[0], "service,cardiologist,nephrologist");
}

TEST(Alignment, RowsSumToOne) {
    std::mt19937_64 rng(3);
    const std::vector<std::string> services = {"MED", "SURG", "NEURO", "ORTHO"};
    const std::vector<std::string> roles = {"a", "b", "c", "d", "e", "f", "g"};
    std::vector<CaseResult> rs;
    for (int i = 0; i < 200; ++i) {
        std::vector<std::string> panel;
        for (std::size_t j = 0; j < 1 + rng() % 5; ++j) panel.push_back(roles[rng() % roles.size()]);
        rs.push_back(with_panel(services[rng() % services.size()], panel));
    }
    const AlignmentMatrix m = alignment_matrix(rs);
    for (const auto& row : m.cells) {
        double s = 0;
        for (double v : row) s += v;
        EXPECT_NEAR(s, 1.0, kEps);
    }
}
