#include "camp/eval.hpp"

#include <algorithm>
#include <iomanip>
#include <set>
#include <sstream>

#include "camp/util.hpp"

namespace camp {

CaseScore score_case(const std::vector<int>& predicted, const std::vector<int>& gold) {
    const std::set<int> p(predicted.begin(), predicted.end());
    const std::set<int> g(gold.begin(), gold.end());
    std::size_t inter = 0;
    for (int x : p) inter += g.count(x);

    CaseScore s;
    if (p.empty()) {
        s.precision = g.empty() ? 1.0 : 0.0;
    } else {
        s.precision = static_cast<double>(inter) / static_cast<double>(p.size());
    }
    if (g.empty()) {
        s.recall = p.empty() ? 1.0 : 0.0;
    } else {
        s.recall = static_cast<double>(inter) / static_cast<double>(g.size());
    }
    s.f1 = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    s.perfect = p == g;
    return s;
}

void to_json(json& j, const DiagnosticScore& s) {
    j = json{{"macro_f1", s.macro_f1},
             {"macro_precision", s.macro_precision},
             {"macro_recall", s.macro_recall},
             {"perfect_rate", s.perfect_rate},
             {"n_cases", s.n_cases},
             {"n_failed", s.n_failed},
             {"f1_mode", s.mode == F1Mode::set_level ? "set_level" : "label_level"}};
}

namespace {

struct LabelCounts {
    std::size_t tp = 0, fp = 0, fn = 0;
};

void label_level(const std::vector<const CaseResult*>& cases, DiagnosticScore& out) {
    std::map<std::string, LabelCounts> labels;
    for (const CaseResult* r : cases) {
        const std::set<int> p(r->accepted.begin(), r->accepted.end());
        const std::set<int> g(r->gold.begin(), r->gold.end());
        for (const auto& c : r->candidates) {
            auto& lc = labels[util::to_lower(util::collapse_whitespace(c.text))];
            const bool in_p = p.count(c.index) != 0;
            const bool in_g = g.count(c.index) != 0;
            if (in_p && in_g) ++lc.tp;
            if (in_p && !in_g) ++lc.fp;
            if (!in_p && in_g) ++lc.fn;
        }
    }
    double f1 = 0, prec = 0, rec = 0;
    std::size_t nf = 0, np = 0, nr = 0;
    for (const auto& [_, lc] : labels) {
        if (lc.tp + lc.fp + lc.fn == 0) continue;  // never gold, never predicted
        f1 += 2.0 * static_cast<double>(lc.tp) / static_cast<double>(2 * lc.tp + lc.fp + lc.fn);
        ++nf;
        if (lc.tp + lc.fp > 0) {
            prec += static_cast<double>(lc.tp) / static_cast<double>(lc.tp + lc.fp);
            ++np;
        }
        if (lc.tp + lc.fn > 0) {
            rec += static_cast<double>(lc.tp) / static_cast<double>(lc.tp + lc.fn);
            ++nr;
        }
    }
    out.macro_f1 = nf ? f1 / static_cast<double>(nf) : 0.0;
    out.macro_precision = np ? prec / static_cast<double>(np) : 0.0;
    out.macro_recall = nr ? rec / static_cast<double>(nr) : 0.0;
}

std::string pct(double v) { return util::fixed(100.0 * v, 2); }

std::string pad(const std::string& s, std::size_t width) {
    return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

}  // namespace

DiagnosticScore score_corpus(const std::vector<CaseResult>& results, F1Mode mode) {
    DiagnosticScore out;
    out.mode = mode;
    std::vector<const CaseResult*> scored;
    for (const auto& r : results) {
        if (r.ok()) {
            scored.push_back(&r);
        } else {
            ++out.n_failed;
        }
    }
    out.n_cases = scored.size();
    if (scored.empty()) return out;

    double f1 = 0, prec = 0, rec = 0;
    std::size_t perfect = 0;
    for (const CaseResult* r : scored) {
        const CaseScore s = score_case(r->accepted, r->gold);
        f1 += s.f1;
        prec += s.precision;
        rec += s.recall;
        perfect += s.perfect ? 1 : 0;
    }
    const double n = static_cast<double>(scored.size());
    out.macro_f1 = f1 / n;
    out.macro_precision = prec / n;
    out.macro_recall = rec / n;
    out.perfect_rate = static_cast<double>(perfect) / n;
    if (mode == F1Mode::label_level) label_level(scored, out);
    return out;
}

std::string render_score_table(const std::vector<std::pair<std::string, DiagnosticScore>>& rows) {
    std::size_t width = 6;
    for (const auto& [name, _] : rows) width = std::max(width, name.size());
    std::ostringstream os;
    os << pad("method", width) << "  macro_f1  precision  recall  perfect_rate  cases  failed\n";
    for (const auto& [name, s] : rows) {
        os << pad(name, width) << "  " << std::setw(8) << pct(s.macro_f1) << "  " << std::setw(9)
           << pct(s.macro_precision) << "  " << std::setw(6) << pct(s.macro_recall) << "  " << std::setw(12)
           << pct(s.perfect_rate) << "  " << std::setw(5) << s.n_cases << "  " << std::setw(6) << s.n_failed << "\n";
    }
    return os.str();
}

// --- pooled ranks ----------------------------------------------------------------

void to_json(json& j, const PooledRanks& p) {
    j = json{{"mean_rank", p.mean_rank},
             {"overall_mean", p.overall_mean},
             {"judged", p.judged},
             {"unjudged", p.unjudged}};
}

PooledRanks pooled_rank_report(const std::vector<JudgeResult>& judgments) {
    PooledRanks out;
    std::map<std::string, std::map<std::string, std::pair<double, std::size_t>>> sums;
    std::map<std::string, std::pair<double, std::size_t>> overall;
    for (const auto& jr : judgments) {
        if (!jr.judged) {
            ++out.unjudged;
            continue;
        }
        ++out.judged;
        for (const auto& [dim, by_system] : jr.ranks) {
            for (const auto& [system, rank] : by_system) {
                auto& acc = sums[dim][system];
                acc.first += rank;
                ++acc.second;
            }
        }
        for (std::size_t i = 0; i < jr.overall.size(); ++i) {
            auto& acc = overall[jr.overall[i]];
            acc.first += static_cast<double>(i + 1);
            ++acc.second;
        }
    }
    for (const auto& [dim, by_system] : sums) {
        for (const auto& [system, acc] : by_system) {
            out.mean_rank[dim][system] = acc.first / static_cast<double>(acc.second);
        }
    }
    for (const auto& [system, acc] : overall) out.overall_mean[system] = acc.first / static_cast<double>(acc.second);
    return out;
}

std::string render_pooled_ranks(const PooledRanks& p) {
    std::set<std::string> systems;
    for (const auto& [_, by_system] : p.mean_rank) {
        for (const auto& [s, __] : by_system) systems.insert(s);
    }
    std::size_t width = 9;
    for (const auto& [dim, _] : p.mean_rank) width = std::max(width, dim.size());
    std::ostringstream os;
    os << pad("dimension", width);
    for (const auto& s : systems) os << "  " << std::setw(std::max<int>(6, static_cast<int>(s.size()))) << s;
    os << "\n";
    for (const auto& [dim, by_system] : p.mean_rank) {
        os << pad(dim, width);
        for (const auto& s : systems) {
            auto it = by_system.find(s);
            os << "  " << std::setw(std::max<int>(6, static_cast<int>(s.size())))
               << (it == by_system.end() ? std::string("-") : util::fixed(it->second, 2));
        }
        os << "\n";
    }
    os << "judged cases: " << p.judged << ", unjudged: " << p.unjudged << "\n";
    return os.str();
}

// --- sweep ---------------------------------------------------------------------------

std::vector<SweepRow> panel_size_sweep(const std::vector<int>& k_values,
                                       const std::function<std::vector<CaseResult>(int)>& run_at_k) {
    std::vector<SweepRow> rows;
    for (int k : k_values) rows.push_back({k, score_corpus(run_at_k(k))});
    return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::string out = "k,macro_f1,macro_precision,macro_recall\n";
    for (const auto& r : rows) {
        out += std::to_string(r.k) + "," + util::fixed(r.score.macro_f1, 6) + "," +
               util::fixed(r.score.macro_precision, 6) + "," + util::fixed(r.score.macro_recall, 6) + "\n";
    }
    return out;
}

std::string render_sweep_table(const std::vector<SweepRow>& rows) {
    std::ostringstream os;
    os << "k  macro_f1  macro_precision  macro_recall\n";
    for (const auto& r : rows) {
        os << std::left << std::setw(2) << r.k << std::right << " " << std::setw(9) << pct(r.score.macro_f1) << "  "
           << std::setw(15) << pct(r.score.macro_precision) << "  " << std::setw(12) << pct(r.score.macro_recall)
           << "\n";
    }
    return os.str();
}

// --- tokens ---------------------------------------------------------------------------

json token_report(const std::map<std::string, std::vector<CaseResult>>& by_method) {
    json report = json::object();
    for (const auto& [method, results] : by_method) {
        std::map<std::string, TokenCount> by_stage;
        std::map<std::string, std::size_t> calls_by_stage;
        TokenCount ledger_total;
        std::size_t calls = 0;
        std::size_t failed = 0;
        std::map<std::string, json> by_path;
        bool has_paths = false;
        for (const auto& r : results) {
            if (!r.ok()) ++failed;
            for (const auto& c : r.calls) {
                ledger_total += TokenCount{c.prompt_tokens, c.completion_tokens};
                by_stage[c.stage] += TokenCount{c.prompt_tokens, c.completion_tokens};
                ++calls_by_stage[c.stage];
                ++calls;
            }
            for (const auto& rec : r.resolutions) {
                has_paths = true;
                json& slot = by_path[std::string(to_string(rec.path))];
                if (slot.is_null()) slot = {{"diagnoses", 0}, {"resolution_calls", 0}, {"tokens", 0}};
                slot["diagnoses"] = slot["diagnoses"].get<std::int64_t>() + 1;
                for (const auto& c : r.calls) {
                    if (c.stage != stage::arbitration || c.slot != rec.diagnosis_index) continue;
                    slot["resolution_calls"] = slot["resolution_calls"].get<std::int64_t>() + 1;
                    slot["tokens"] = slot["tokens"].get<std::int64_t>() + c.prompt_tokens + c.completion_tokens;
                }
            }
        }
        TokenCount stage_sum;
        json stages = json::object();
        const double n = results.empty() ? 1.0 : static_cast<double>(results.size());
        for (const auto& [s, t] : by_stage) {
            stage_sum += t;
            stages[s] = {{"prompt", t.prompt},
                         {"completion", t.completion},
                         {"total", t.total()},
                         {"calls", calls_by_stage[s]},
                         {"mean_per_case", static_cast<double>(t.total()) / n}};
        }
        json entry = {{"cases", results.size()},
                      {"failed_cases", failed},
                      {"calls", calls},
                      {"ledger_total", ledger_total},
                      {"stage_sum", stage_sum},
                      {"mean_tokens_per_case", results.empty() ? 0.0 : static_cast<double>(ledger_total.total()) / n},
                      {"mean_calls_per_case", results.empty() ? 0.0 : static_cast<double>(calls) / n},
                      {"by_stage", stages}};
        if (has_paths) {
            for (const char* p : {"strong_consensus", "weak_consensus", "conflict"}) {
                if (!by_path.count(p)) by_path[p] = {{"diagnoses", 0}, {"resolution_calls", 0}, {"tokens", 0}};
            }
            entry["by_path"] = by_path;
        }
        report[method] = entry;
    }
    return report;
}

std::string render_token_report(const json& report) {
    std::ostringstream os;
    for (const auto& [method, e] : report.items()) {
        os << method << ": " << util::fixed(e["mean_tokens_per_case"].get<double>(), 1) << " tokens/case over "
           << e["cases"].get<std::size_t>() << " cases (" << e["calls"].get<std::size_t>() << " calls, total "
           << e["ledger_total"]["total"].get<std::int64_t>() << ")\n";
        for (const auto& [s, t] : e["by_stage"].items()) {
            os << "  " << pad(s, 26) << std::setw(10) << t["total"].get<std::int64_t>() << "  (" << t["calls"].get<std::size_t>()
               << " calls)\n";
        }
        if (e.contains("by_path")) {
            for (const auto& [p, t] : e["by_path"].items()) {
                os << "  path " << pad(p, 21) << std::setw(5) << t["diagnoses"].get<std::int64_t>() << " diagnoses  "
                   << std::setw(5) << t["resolution_calls"].get<std::int64_t>() << " resolution calls  "
                   << t["tokens"].get<std::int64_t>() << " tokens\n";
            }
        }
    }
    return os.str();
}

// --- alignment ------------------------------------------------------------------------

void to_json(json& j, const AlignmentMatrix& m) {
    j = json{{"rows", m.rows}, {"cols", m.cols}, {"cells", m.cells}, {"counts", m.counts}};
}

AlignmentMatrix alignment_matrix(const std::vector<CaseResult>& results) {
    std::map<std::string, std::map<std::string, int>> counts;
    std::set<std::string> roles;
    for (const auto& r : results) {
        if (!r.service_label || r.panel.specialists.empty()) continue;
        const std::string service = util::trim(*r.service_label);
        if (service.empty()) continue;
        for (const auto& s : r.panel.specialists) {
            const std::string role = util::normalize_role(s.role);
            ++counts[service][role];
            roles.insert(role);
        }
    }
    AlignmentMatrix m;
    m.cols.assign(roles.begin(), roles.end());
    for (const auto& [service, by_role] : counts) {
        m.rows.push_back(service);
        int row_total = 0;
        for (const auto& [_, c] : by_role) row_total += c;
        std::vector<int> row_counts;
        std::vector<double> row_cells;
        for (const auto& role : m.cols) {
            auto it = by_role.find(role);
            const int c = it == by_role.end() ? 0 : it->second;
            row_counts.push_back(c);
            row_cells.push_back(row_total ? static_cast<double>(c) / row_total : 0.0);
        }
        m.counts.push_back(std::move(row_counts));
        m.cells.push_back(std::move(row_cells));
    }
    return m;
}

std::string alignment_csv(const AlignmentMatrix& m) {
    auto quote = [](const std::string& s) {
        if (s.find_first_of(",\"\n") == std::string::npos) return s;
        std::string q = "\"";
        for (char c : s) {
            if (c == '"') q += '"';
            q += c;
        }
        return q + "\"";
    };
    std::string out = "service";
    for (const auto& c : m.cols) out += "," + quote(c);
    out += "\n";
    for (std::size_t i = 0; i < m.rows.size(); ++i) {
        out += quote(m.rows[i]);
        for (double v : m.cells[i]) out += "," + util::fixed(v, 6);
        out += "\n";
    }
    return out;
}

}  // namespace camp
