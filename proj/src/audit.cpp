#include <algorithm>
#include <iomanip>
#include <set>
#include <sstream>

#include "camp/pipeline.hpp"
#include "camp/util.hpp"

namespace camp {

namespace {

std::string index_set(const std::vector<int>& xs) {
    std::vector<std::string> parts;
    for (int x : xs) parts.push_back(std::to_string(x));
    return "{" + util::join(parts, ", ") + "}";
}

std::string names_for(const CaseResult& r, const std::vector<int>& xs) {
    std::vector<std::string> parts;
    for (int x : xs) {
        if (x >= 1 && static_cast<std::size_t>(x) <= r.candidates.size()) parts.push_back(r.candidates[x - 1].text);
    }
    return util::join(parts, "; ");
}

std::string cell(const std::string& s, std::size_t width) {
    if (s.size() >= width) return s.substr(0, width - 1) + " ";
    return s + std::string(width - s.size(), ' ');
}

std::string route_line(const ResolutionRecord& rec) {
    switch (rec.path) {
        case ResolutionPath::strong_consensus:
            return "Consensus: " + std::string(rec.decision == Decision::accept ? "ACCEPT" : "REJECT");
        case ResolutionPath::weak_consensus:
            return "Weak consensus, attending's initial call: " +
                   std::string(rec.decision == Decision::accept ? "ACCEPT" : "REJECT");
        case ResolutionPath::conflict:
            return "Conflict, arbitration: " + std::string(rec.decision == Decision::accept ? "INCLUDE" : "EXCLUDE") +
                   (rec.arbitration && rec.arbitration->degraded ? " (degraded default)" : "");
    }
    return "";
}

}  // namespace

std::string render_audit(const CaseResult& r) {
    std::ostringstream os;
    const std::set<int> gold(r.gold.begin(), r.gold.end());
    os << "Case " << r.case_id << "  method: " << r.method << "  status: " << r.status << "\n";
    if (!r.ok()) os << "Error: " << r.error << "\n";
    if (r.service_label) os << "Service: " << *r.service_label << "\n";

    if (!r.panel.specialists.empty()) {
        if (!r.panel.case_summary.empty()) os << "Case summary: " << r.panel.case_summary << "\n";
        os << "Panel (" << r.panel.size() << "):\n";
        for (std::size_t s = 0; s < r.panel.size(); ++s) {
            os << "  [" << s + 1 << "] " << r.panel.specialists[s].role;
            if (!r.panel.specialists[s].focus.empty()) os << ": " << r.panel.specialists[s].focus;
            os << "\n";
        }
    }
    if (!r.key_dimensions.empty()) os << "Key dimensions: " << r.key_dimensions << "\n";
    if (!r.initial_decisions.empty()) {
        std::vector<int> init;
        for (std::size_t j = 0; j < r.initial_decisions.size(); ++j) {
            if (r.initial_decisions[j] == Decision::accept) init.push_back(static_cast<int>(j + 1));
        }
        os << "Initial assessment: " << index_set(init) << "\n";
    }

    if (!r.resolutions.empty()) {
        for (const auto& rec : r.resolutions) {
            const auto pos = static_cast<std::size_t>(rec.diagnosis_index - 1);
            os << "\nDiagnosis " << rec.diagnosis_index << ": "
               << (pos < r.candidates.size() ? r.candidates[pos].text : std::string("?"))
               << (gold.count(rec.diagnosis_index) ? "  (gold)" : "") << "\n";
            os << "  " << cell("Specialist", 30) << cell("Vote", 9) << cell("Conf", 6) << "Quote\n";
            for (std::size_t s = 0; s < r.matrix.specialists(); ++s) {
                const auto& e = r.matrix.rows()[s][pos];
                const std::string role = s < r.panel.size() ? r.panel.specialists[s].role : "specialist " + std::to_string(s + 1);
                os << "  " << cell(role, 30) << cell(std::string(vote_label(e.vote)), 9)
                   << cell(util::fixed(e.confidence, 2), 6) << (e.quote.empty() ? "-" : "\"" + e.quote + "\"") << "\n";
            }
            os << "  Tally " << rec.tally.keeps << " KEEP / " << rec.tally.refuses << " REMOVE / " << rec.tally.neutrals
               << " NEUTRAL -> " << route_line(rec) << "\n";
            if (rec.arbitration) {
                os << "  Rationales weighed:\n";
                for (const auto& ev : rec.arbitration->evidence) {
                    os << "    " << ev.role << " (" << vote_label(ev.evaluation.vote) << ", quote "
                       << (ev.evaluation.quote.empty() ? "absent" : ev.quote_verified ? "verified" : "not found in note")
                       << "): " << (ev.evaluation.rationale.empty() ? "-" : ev.evaluation.rationale) << "\n";
                }
                os << "  Arbitration reasoning: "
                   << (rec.arbitration->reasoning.empty() ? "-" : rec.arbitration->reasoning) << "\n";
            }
        }
        os << "\n";
    } else {
        os << "Candidates:\n";
        for (const auto& c : r.candidates) {
            os << "  " << c.index << ". " << c.text << (gold.count(c.index) ? "  (gold)" : "") << "\n";
        }
        if (!r.details.empty()) os << "Details: " << r.details.dump(2) << "\n";
    }
    if (!r.degraded_flags.empty()) os << "Degraded: " << util::join(r.degraded_flags, ", ") << "\n";
    os << "Final output: " << index_set(r.accepted) << "  " << names_for(r, r.accepted) << "\n";
    os << "Gold: " << index_set(r.gold) << "  " << names_for(r, r.gold) << "\n";
    const TokenCount t = r.total_tokens();
    os << "Tokens: " << t.total() << " (" << t.prompt << " prompt, " << t.completion << " completion) over "
       << r.calls.size() << " calls\n";
    return os.str();
}

}  // namespace camp
