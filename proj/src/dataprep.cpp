#include "camp/dataprep.hpp"

#include <algorithm>
#include <cmath>
#include <regex>
#include <set>
#include <sstream>

#include "camp/error.hpp"
#include "camp/log.hpp"
#include "camp/util.hpp"

namespace camp {

// --- records ------------------------------------------------------------------------

namespace {

using ordered_json = nlohmann::ordered_json;

std::optional<std::string> opt_str(const ordered_json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_string()) return std::nullopt;
    return it->get<std::string>();
}

}  // namespace

const std::vector<std::string>& canonical_sections() {
    static const std::vector<std::string> names = {
        "PREAMBLE",
        "NAME",
        "SEX",
        "DEMOGRAPHICS",
        "SERVICE",
        "ADMISSION DATE",
        "ALLERGIES",
        "ATTENDING",
        "CHIEF COMPLAINT",
        "MAJOR SURGICAL OR INVASIVE PROCEDURE",
        "HISTORY OF PRESENT ILLNESS",
        "REVIEW OF SYSTEMS",
        "PAST MEDICAL HISTORY",
        "PAST SURGICAL HISTORY",
        "SOCIAL HISTORY",
        "FAMILY HISTORY",
        "PHYSICAL EXAM",
        "VITAL SIGNS",
        "PERTINENT RESULTS",
        "LABORATORY RESULTS",
        "IMAGING",
        "MICROBIOLOGY",
        "PROCEDURES",
        "MEDICATIONS ON ADMISSION",
        "MEDICATIONS",
        "CLINICAL NOTES",
        "BRIEF HOSPITAL COURSE",
        "TRANSITIONAL ISSUES",
        "DISCHARGE DIAGNOSIS",
        "DISCHARGE INSTRUCTIONS",
        "DISCHARGE CONDITION",
        "DISCHARGE DISPOSITION",
        "FOLLOWUP INSTRUCTIONS",
        "DISCHARGE MEDICATIONS",
    };
    return names;
}

const std::vector<std::string>& leak_sections() {
    static const std::vector<std::string> names = {"DISCHARGE DIAGNOSIS",   "DISCHARGE INSTRUCTIONS",
                                                   "DISCHARGE CONDITION",   "DISCHARGE DISPOSITION",
                                                   "FOLLOWUP INSTRUCTIONS", "DISCHARGE MEDICATIONS"};
    return names;
}

std::string canonical_section_name(const std::string& name) {
    std::string s = util::to_upper(util::collapse_whitespace(name));
    while (!s.empty() && (s.back() == ':' || s.back() == ' ')) s.pop_back();
    if (s == "FOLLOW-UP INSTRUCTIONS" || s == "FOLLOW UP INSTRUCTIONS") return "FOLLOWUP INSTRUCTIONS";
    if (s == "DISCHARGE DIAGNOSES") return "DISCHARGE DIAGNOSIS";
    return s;
}

RawRecord parse_raw_record(const std::string& json_line) {
    ordered_json j;
    try {
        j = ordered_json::parse(json_line);
    } catch (const ordered_json::exception& e) {
        throw SchemaError(std::string("raw record is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw SchemaError("raw record must be a JSON object");
    RawRecord r;
    auto id = opt_str(j, "note_id");
    if (!id || id->empty()) throw SchemaError("raw record without note_id");
    r.note_id = *id;

    if (auto it = j.find("sections"); it != j.end()) {
        if (it->is_object()) {
            for (const auto& [name, text] : it->items()) {
                if (!text.is_string()) throw SchemaError(r.note_id + ": section '" + name + "' is not a string");
                r.sections.emplace_back(name, text.get<std::string>());
            }
        } else if (it->is_array()) {
            for (const auto& s : *it) {
                auto name = opt_str(s, "name");
                auto text = opt_str(s, "text");
                if (!name || !text) throw SchemaError(r.note_id + ": section entries need name and text");
                r.sections.emplace_back(*name, *text);
            }
        } else {
            throw SchemaError(r.note_id + ": sections must be an object or a list");
        }
    }
    if (auto dx = opt_str(j, "discharge_diagnosis_text")) {
        r.discharge_diagnosis_text = *dx;
    } else {
        for (const auto& [name, text] : r.sections) {
            if (canonical_section_name(name) == "DISCHARGE DIAGNOSIS") r.discharge_diagnosis_text = text;
        }
    }
    r.service_label = opt_str(j, "service_label");
    r.reference_bhc = opt_str(j, "reference_bhc");
    return r;
}

std::vector<RawRecord> read_raw_records(const std::filesystem::path& path) {
    std::vector<RawRecord> out;
    std::size_t line_no = 0;
    for (const auto& line : util::split_lines(util::read_file(path))) {
        ++line_no;
        if (util::trim(line).empty()) continue;
        try {
            out.push_back(parse_raw_record(line));
        } catch (const SchemaError& e) {
            throw SchemaError(path.string() + " line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

std::string raw_record_to_json(const RawRecord& r) {
    ordered_json j;
    j["note_id"] = r.note_id;
    ordered_json sections = ordered_json::array();
    for (const auto& [name, text] : r.sections) sections.push_back({{"name", name}, {"text", text}});
    j["sections"] = sections;
    j["discharge_diagnosis_text"] = r.discharge_diagnosis_text;
    j["service_label"] = r.service_label ? ordered_json(*r.service_label) : ordered_json(nullptr);
    j["reference_bhc"] = r.reference_bhc ? ordered_json(*r.reference_bhc) : ordered_json(nullptr);
    return j.dump();
}

SectionList split_sections(const std::string& text) {
    static const std::regex header(R"(^\s*([A-Za-z][A-Za-z /&\-]{1,60}):\s*(.*)$)");
    const auto& known = canonical_sections();
    SectionList out;
    std::string name = "PREAMBLE";
    std::string body;
    auto flush = [&] {
        const std::string t = util::trim(body);
        if (!t.empty() || name != "PREAMBLE") out.emplace_back(name, t);
        body.clear();
    };
    for (const auto& line : util::split_lines(text)) {
        std::smatch m;
        if (std::regex_match(line, m, header)) {
            const std::string candidate = canonical_section_name(m[1].str());
            const std::string raw = util::trim(m[1].str());
            const bool upper = raw.size() >= 3 && util::to_upper(raw) == raw;
            if (std::find(known.begin(), known.end(), candidate) != known.end() || upper) {
                flush();
                name = candidate;
                body = m[2].str();
                if (!body.empty()) body += "\n";
                continue;
            }
        }
        body += line + "\n";
    }
    flush();
    return out;
}

std::string mask_sections(const RawRecord& record) {
    const auto& known = canonical_sections();
    const auto& leaks = leak_sections();
    std::vector<std::string> blocks;
    for (const auto& [name, text] : record.sections) {
        const std::string canon = canonical_section_name(name);
        if (std::find(leaks.begin(), leaks.end(), canon) != leaks.end()) continue;
        if (std::find(known.begin(), known.end(), canon) == known.end()) {
            logger().warn("{}: unknown section '{}' kept", record.note_id, name);
        }
        blocks.push_back(canon + ":\n" + util::trim(text));
    }
    return util::join(blocks, "\n\n");
}

// --- normalization -----------------------------------------------------------------------

namespace {

const std::regex& re(const char* pattern) {
    // patterns are literals; one compiled regex per call site
    thread_local std::map<const char*, std::regex> cache;
    auto it = cache.find(pattern);
    if (it == cache.end()) {
        it = cache.emplace(pattern, std::regex(pattern, std::regex::ECMAScript | std::regex::icase)).first;
    }
    return it->second;
}

bool starts_with_bullet(const std::string& s, std::size_t& len) {
    static const std::vector<std::string> bullets = {"-", "*", "+", ">", "\xE2\x80\xA2", "\xC2\xB7", "\xE2\x80\x93"};
    for (const auto& b : bullets) {
        if (s.compare(0, b.size(), b) == 0) {
            len = b.size();
            return true;
        }
    }
    return false;
}

// Strips markers, prefixes, placeholders and trailing punctuation until stable.
std::string clean_entry(std::string s) {
    while (true) {
        const std::string before = s;
        s = util::trim(s);
        std::size_t blen = 0;
        while (starts_with_bullet(s, blen)) s = util::trim(s.substr(blen));
        s = std::regex_replace(s, re(R"(^\(?\d{1,2}[.)](?!\d)\s*)"), "", std::regex_constants::format_first_only);
        s = std::regex_replace(
            s,
            re(R"(^(?:(?:primary|secondary|principal|final|discharge|other|additional)\s*)+(?:diagnos[ie]s|dx)?\s*:\s*)"),
            "", std::regex_constants::format_first_only);
        s = std::regex_replace(s, re(R"(^(?:diagnos[ie]s|dx)\s*:\s*)"), "", std::regex_constants::format_first_only);
        s = std::regex_replace(s, re(R"(^axis\s+[ivx]+\b\s*:?\s*)"), "", std::regex_constants::format_first_only);
        s = std::regex_replace(s, re(R"(\bstage\s*_+)"), "");
        s = std::regex_replace(s, re(R"(_{2,})"), "");
        s = util::collapse_whitespace(s);
        while (!s.empty() && (s.back() == '.' || s.back() == ',' || s.back() == ';' || s.back() == ':' || s.back() == ' ')) {
            s.pop_back();
        }
        s = util::trim(s);
        if (s == before) return s;
    }
}

bool qualifier_segment(const std::string& segment) {
    static const std::set<std::string> words = {
        "likely",   "possibly", "probably", "possible",  "probable",   "presumed", "suspected", "due",
        "secondary", "s/p",     "status",   "with",      "without",    "w/",       "w/o",       "resolved",
        "resolving", "improved", "improving", "complicated", "c/b",    "requiring", "related",   "treated",
        "now",      "not",      "on",       "in",        "of",         "from",     "at",        "unclear",
        "and",      "or",       "including", "currently", "previously", "rule",    "r/o",       "versus",
        "vs",       "vs."};
    const std::string t = util::trim(segment);
    if (t.empty() || !(t[0] >= 'a' && t[0] <= 'z')) return false;
    const auto space = t.find(' ');
    return words.count(t.substr(0, space)) != 0;
}

// Splits on commas outside parentheses; qualifier continuations are rejoined.
std::vector<std::string> comma_split(const std::string& s, bool rejoin) {
    std::vector<std::string> parts;
    std::string cur;
    int depth = 0;
    for (char c : s) {
        if (c == '(' || c == '[') ++depth;
        if ((c == ')' || c == ']') && depth > 0) --depth;
        if (c == ',' && depth == 0) {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    parts.push_back(cur);
    if (!rejoin) return parts;
    std::vector<std::string> out;
    for (auto& p : parts) {
        if (!out.empty() && qualifier_segment(p)) {
            out.back() += "," + p;
        } else {
            out.push_back(p);
        }
    }
    return out;
}

std::size_t text_length(const std::string& s) {
    std::size_t n = 0;
    for (unsigned char c : s) n += (c & 0xC0) != 0x80;
    return n;
}

std::vector<std::string> split_on(const std::string& s, const std::string& delim) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (true) {
        const auto hit = s.find(delim, pos);
        out.push_back(s.substr(pos, hit == std::string::npos ? std::string::npos : hit - pos));
        if (hit == std::string::npos) break;
        pos = hit + delim.size();
    }
    return out;
}

void process_line(const std::string& line, const NormalizeOptions& opt, std::vector<std::string>& out, int depth);

void emit(const std::string& entry, const NormalizeOptions& opt, std::vector<std::string>& out, int depth) {
    std::string e = clean_entry(entry);
    if (text_length(e) < opt.min_length) return;
    if (text_length(e) > opt.resplit_threshold && depth < 8) {
        for (const char* delim : {";", " / ", ",", " and "}) {
            std::vector<std::string> parts = std::string(delim) == "," ? comma_split(e, false) : split_on(e, delim);
            std::size_t nonempty = 0;
            for (const auto& p : parts) nonempty += !util::trim(p).empty();
            if (nonempty > 1) {
                for (const auto& p : parts) process_line(p, opt, out, depth + 1);
                return;
            }
        }
    }
    out.push_back(e);
}

void process_line(const std::string& line, const NormalizeOptions& opt, std::vector<std::string>& out, int depth) {
    // inline numbered markers ("1. Sepsis 2. Pneumonia") and semicolons separate entries
    std::string marked = std::regex_replace(line, re(R"(\s+\(?\d{1,2}[.)](?!\d)\s+)"), "\n");
    std::replace(marked.begin(), marked.end(), ';', '\n');
    for (const auto& piece : util::split_lines(marked)) {
        const std::string cleaned = clean_entry(piece);
        for (const auto& part : comma_split(cleaned, true)) emit(part, opt, out, depth);
    }
}

}  // namespace

std::vector<std::string> normalize_diagnoses(const std::string& raw, const NormalizeOptions& options) {
    std::vector<std::string> entries;
    for (const auto& line : util::split_lines(raw)) process_line(line, options, entries, 0);
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (auto& e : entries) {
        if (seen.insert(util::to_lower(e)).second) out.push_back(std::move(e));
    }
    return out;
}

// --- pool and sampling -----------------------------------------------------------------

DiagnosisPool::DiagnosisPool(const std::vector<std::string>& entries) {
    for (const auto& e : entries) add(e);
}

void DiagnosisPool::add(const std::string& entry) {
    const std::string e = util::trim(entry);
    if (text_length(e) < 3) return;
    const std::string key = util::to_lower(e);
    if (index_.count(key)) return;
    const auto pos = std::lower_bound(entries_.begin(), entries_.end(), e);
    entries_.insert(pos, e);
    index_.clear();
    for (std::size_t i = 0; i < entries_.size(); ++i) index_[util::to_lower(entries_[i])] = i;
}

bool DiagnosisPool::contains(const std::string& entry) const { return index_.count(util::to_lower(util::trim(entry))) != 0; }

std::size_t option_count_for(std::size_t gold_size) {
    switch (gold_size) {
        case 1: return 6;
        case 2: return 8;
        case 3: return 12;
        default: throw SchemaError("gold set size must be 1, 2 or 3 (got " + std::to_string(gold_size) + ")");
    }
}

std::vector<std::string> sample_distractors(const std::vector<std::string>& gold, const DiagnosisPool& pool,
                                            std::uint64_t seed, const DistractorFilter& filter) {
    const std::size_t need = option_count_for(gold.size()) - gold.size();
    std::set<std::string> excluded;
    for (const auto& g : gold) excluded.insert(util::to_lower(util::trim(g)));
    std::vector<std::string> available;
    for (const auto& e : pool.entries()) {
        if (!excluded.count(util::to_lower(e))) available.push_back(e);
    }
    util::SeededRng rng(seed);
    rng.shuffle(available);

    std::vector<std::string> picked;
    std::size_t cursor = 0;
    auto fill = [&] {
        while (picked.size() < need && cursor < available.size()) picked.push_back(available[cursor++]);
    };
    fill();
    if (filter) {
        for (int round = 0; round < 16 && !picked.empty(); ++round) {
            const auto removed = filter(gold, picked);
            std::set<std::string> drop;
            for (const auto& r : removed) drop.insert(util::to_lower(util::trim(r)));
            const auto before = picked.size();
            picked.erase(std::remove_if(picked.begin(), picked.end(),
                                        [&](const std::string& p) { return drop.count(util::to_lower(p)) != 0; }),
                         picked.end());
            if (picked.size() == before) break;
            fill();
        }
    }
    if (picked.size() < need) {
        throw PoolExhausted("diagnosis pool has " + std::to_string(picked.size()) + " usable distractors, need " +
                            std::to_string(need));
    }
    return picked;
}

std::string mask_candidates(std::string note, const std::vector<std::string>& candidates) {
    std::vector<std::string> longs;
    for (const auto& c : candidates) {
        if (text_length(c) > 4) longs.push_back(c);
    }
    std::stable_sort(longs.begin(), longs.end(),
                     [](const std::string& a, const std::string& b) { return a.size() > b.size(); });
    // every replacement shortens the note, so this terminates
    bool changed = true;
    while (changed) {
        changed = false;
        for (const auto& c : longs) {
            if (util::ireplace_all(note, c, "___") > 0) changed = true;
        }
    }
    return note;
}

std::string apply_mask_spans(std::string note, std::vector<std::string> spans) {
    std::stable_sort(spans.begin(), spans.end(),
                     [](const std::string& a, const std::string& b) { return a.size() > b.size(); });
    for (const auto& raw : spans) {
        const std::string span = util::trim(raw);
        if (span.empty()) continue;
        if (note.find(span) == std::string::npos) {
            logger().warn("mask span not found in note: '{}'", span);
            continue;
        }
        std::string out;
        std::size_t pos = 0;
        while (true) {
            const auto hit = note.find(span, pos);
            if (hit == std::string::npos) break;
            out.append(note, pos, hit - pos);
            out += "___";
            pos = hit + span.size();
        }
        out.append(note, pos, std::string::npos);
        note = std::move(out);
    }
    return note;
}

TaskInstance assemble_instance(const std::string& case_id, const std::string& masked_note,
                               const std::vector<std::string>& gold, const std::vector<std::string>& distractors,
                               std::uint64_t seed) {
    std::vector<std::pair<std::string, bool>> options;
    for (const auto& g : gold) options.emplace_back(g, true);
    for (const auto& d : distractors) options.emplace_back(d, false);
    util::SeededRng rng(seed);
    rng.shuffle(options);

    TaskInstance t;
    t.case_id = case_id;
    t.shuffle_seed = seed;
    std::vector<std::string> texts;
    for (std::size_t i = 0; i < options.size(); ++i) {
        t.candidates.push_back({static_cast<int>(i + 1), options[i].first});
        if (options[i].second) t.gold.push_back(static_cast<int>(i + 1));
        texts.push_back(options[i].first);
    }
    t.masked_note = mask_candidates(masked_note, texts);
    return t;
}

// --- corpus ------------------------------------------------------------------------------

namespace {

std::string history_text(const RawRecord& r) {
    std::vector<std::string> parts;
    for (const auto& [name, text] : r.sections) {
        const std::string canon = canonical_section_name(name);
        if (canon == "HISTORY OF PRESENT ILLNESS" || canon == "PAST MEDICAL HISTORY" ||
            canon == "MEDICATIONS ON ADMISSION" || canon == "MEDICATIONS") {
            parts.push_back(canon + ":\n" + util::trim(text));
        }
    }
    return util::join(parts, "\n\n");
}

}  // namespace

PrepResult prepare_corpus(std::vector<RawRecord> records, const PrepOptions& options) {
    std::sort(records.begin(), records.end(),
              [](const RawRecord& a, const RawRecord& b) { return a.note_id < b.note_id; });
    PrepResult result;
    std::vector<std::vector<std::string>> golds;
    for (const auto& r : records) {
        golds.push_back(normalize_diagnoses(r.discharge_diagnosis_text, options.normalize));
        for (const auto& g : golds.back()) result.pool.add(g);
    }

    const bool llm = static_cast<bool>(options.agents);
    for (std::size_t i = 0; i < records.size(); ++i) {
        const RawRecord& r = records[i];
        const auto& gold = golds[i];
        if (gold.empty()) {
            result.rejected.push_back({r.note_id, "no diagnoses after normalization"});
            continue;
        }
        if (gold.size() > 3) {
            result.rejected.push_back({r.note_id, "more than three diagnoses (" + std::to_string(gold.size()) + ")"});
            continue;
        }
        std::string note = mask_sections(r);
        const std::uint64_t note_seed = util::derive_seed(options.seed, r.note_id);

        std::optional<AgentContext> ctx;
        if (llm) ctx.emplace(options.agents(r.note_id));
        if (ctx && options.llm_semantic_filter) {
            try {
                if (request_recoverability(*ctx, history_text(r), gold)) {
                    result.rejected.push_back({r.note_id, "diagnoses recoverable from history"});
                    continue;
                }
            } catch (const ProviderError& e) {
                logger().warn("{}: semantic filter skipped: {}", r.note_id, e.what());
            }
        }
        if (ctx && options.llm_phrase_mask) {
            try {
                note = apply_mask_spans(note, request_mask_spans(*ctx, note, gold));
            } catch (const ProviderError& e) {
                logger().warn("{}: phrase masking skipped: {}", r.note_id, e.what());
            }
        }

        std::vector<std::string> distractors;
        auto* cache = options.distractor_cache;
        if (cache && cache->count(r.note_id) &&
            cache->at(r.note_id).size() == option_count_for(gold.size()) - gold.size()) {
            distractors = cache->at(r.note_id);
        } else {
            DistractorFilter filter;
            if (ctx && options.llm_distractor_filter) {
                filter = [&](const std::vector<std::string>& g, const std::vector<std::string>& drawn) {
                    try {
                        return request_distractor_removals(*ctx, g, drawn);
                    } catch (const ProviderError& e) {
                        logger().warn("{}: distractor filter skipped: {}", r.note_id, e.what());
                        return std::vector<std::string>{};
                    }
                };
            }
            try {
                distractors = sample_distractors(gold, result.pool, util::derive_seed(note_seed, "distractors"), filter);
            } catch (const PoolExhausted& e) {
                result.rejected.push_back({r.note_id, e.what()});
                continue;
            }
            if (cache) (*cache)[r.note_id] = distractors;
        }

        TaskInstance inst =
            assemble_instance(r.note_id, note, gold, distractors, util::derive_seed(note_seed, "shuffle"));
        inst.service_label = r.service_label;
        inst.reference_bhc = r.reference_bhc;
        validate(inst);
        result.instances.push_back(std::move(inst));
    }
    return result;
}

json corpus_stats(const std::vector<TaskInstance>& instances) {
    auto summarize = [](std::vector<double> v) {
        if (v.empty()) return json{{"mean", 0}, {"std", 0}, {"min", 0}, {"median", 0}, {"max", 0}};
        std::sort(v.begin(), v.end());
        double sum = 0;
        for (double x : v) sum += x;
        const double mean = sum / static_cast<double>(v.size());
        double sq = 0;
        for (double x : v) sq += (x - mean) * (x - mean);
        const double sd = v.size() > 1 ? std::sqrt(sq / static_cast<double>(v.size() - 1)) : 0.0;
        const std::size_t n = v.size();
        const double median = n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
        return json{{"mean", mean}, {"std", sd}, {"min", v.front()}, {"median", median}, {"max", v.back()}};
    };
    std::vector<double> options, correct, distractors, words, chars, ratio;
    for (const auto& t : instances) {
        options.push_back(static_cast<double>(t.candidates.size()));
        correct.push_back(static_cast<double>(t.gold.size()));
        distractors.push_back(static_cast<double>(t.candidates.size() - t.gold.size()));
        std::istringstream is(t.masked_note);
        std::size_t w = 0;
        for (std::string tok; is >> tok;) ++w;
        words.push_back(static_cast<double>(w));
        chars.push_back(static_cast<double>(text_length(t.masked_note)));
        ratio.push_back(t.candidates.empty() ? 0.0
                                             : 100.0 * static_cast<double>(t.gold.size()) /
                                                   static_cast<double>(t.candidates.size()));
    }
    return json{{"cases", instances.size()},
                {"options_per_case", summarize(options)},
                {"correct_labels_per_case", summarize(correct)},
                {"distractors_per_case", summarize(distractors)},
                {"input_words", summarize(words)},
                {"input_characters", summarize(chars)},
                {"correct_option_ratio_pct", summarize(ratio)}};
}

}  // namespace camp
