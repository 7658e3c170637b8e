#pragma once
// Building selection-task instances from discharge-summary records:
// diagnosis normalization, leak-section removal, distractor sampling and
// seeded assembly with exact-match masking.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "camp/agents.hpp"
#include "camp/core.hpp"

namespace camp {

// Sections in source order.
using SectionList = std::vector<std::pair<std::string, std::string>>;

struct RawRecord {
    std::string note_id;
    SectionList sections;
    std::string discharge_diagnosis_text;
    std::optional<std::string> service_label;
    std::optional<std::string> reference_bhc;
};

// "sections" may be an object (key order kept) or a list of {name, text}.
// A missing discharge_diagnosis_text is taken from the DISCHARGE DIAGNOSIS section.
RawRecord parse_raw_record(const std::string& json_line);
std::vector<RawRecord> read_raw_records(const std::filesystem::path& path);
std::string raw_record_to_json(const RawRecord& record);

// Known section names (upper case). Names are compared after upper-casing,
// whitespace collapsing and dropping a trailing colon.
const std::vector<std::string>& canonical_sections();
const std::vector<std::string>& leak_sections();
std::string canonical_section_name(const std::string& name);

// Splits a plain-text note into sections on header lines such as
// "History of Present Illness:"; text before the first header goes under
// "PREAMBLE". Used for converting plain-text summaries.
SectionList split_sections(const std::string& text);

// Drops the leak sections and renders the rest as "NAME:\ntext" blocks
// separated by blank lines. Unknown sections are kept with a warning.
std::string mask_sections(const RawRecord& record);

struct NormalizeOptions {
    std::size_t resplit_threshold = 120;
    std::size_t min_length = 3;
};

// Splits a discharge-diagnosis block into individual diagnoses. Idempotent
// under newline join.
std::vector<std::string> normalize_diagnoses(const std::string& raw, const NormalizeOptions& options = {});

class DiagnosisPool {
public:
    DiagnosisPool() = default;
    // Entries shorter than 3 characters and case-insensitive duplicates are dropped.
    explicit DiagnosisPool(const std::vector<std::string>& entries);
    void add(const std::string& entry);
    const std::vector<std::string>& entries() const { return entries_; }  // sorted
    std::size_t size() const { return entries_.size(); }
    bool contains(const std::string& entry) const;

private:
    std::vector<std::string> entries_;
    std::map<std::string, std::size_t> index_;  // lower-case -> position
};

// Total options for a gold-set size: 1 -> 6, 2 -> 8, 3 -> 12. Throws
// SchemaError otherwise.
std::size_t option_count_for(std::size_t gold_size);

// Given gold and the drawn distractors, returns the distractors to discard.
using DistractorFilter =
    std::function<std::vector<std::string>(const std::vector<std::string>& gold, const std::vector<std::string>& drawn)>;

// Seeded draw of option_count_for(|gold|) - |gold| distinct pool entries that
// are not gold (case-insensitive). With a filter, rejected entries are
// replaced by further draws. Throws PoolExhausted.
std::vector<std::string> sample_distractors(const std::vector<std::string>& gold, const DiagnosisPool& pool,
                                            std::uint64_t seed, const DistractorFilter& filter = {});

// Replaces every occurrence of each candidate longer than 4 characters
// (case-insensitive, longest first, repeated to a fixpoint) with "___".
std::string mask_candidates(std::string note, const std::vector<std::string>& candidates);

// Replaces spans longest first; spans absent from the note are skipped with a warning.
std::string apply_mask_spans(std::string note, std::vector<std::string> spans);

// Shuffles gold ∪ distractors with the seed, recomputes gold indices and
// masks the note.
TaskInstance assemble_instance(const std::string& case_id, const std::string& masked_note,
                               const std::vector<std::string>& gold, const std::vector<std::string>& distractors,
                               std::uint64_t seed);

struct PrepOptions {
    std::uint64_t seed = 0;
    NormalizeOptions normalize;
    // Provider-backed steps; used only when `agents` is set.
    bool llm_phrase_mask = false;
    bool llm_distractor_filter = false;
    bool llm_semantic_filter = false;
    std::function<AgentContext(const std::string& note_id)> agents;
    // note_id -> distractors; reused when present, filled otherwise.
    std::map<std::string, std::vector<std::string>>* distractor_cache = nullptr;
};

struct Rejection {
    std::string note_id;
    std::string reason;
};

struct PrepResult {
    std::vector<TaskInstance> instances;  // sorted by case_id
    DiagnosisPool pool;
    std::vector<Rejection> rejected;
};

PrepResult prepare_corpus(std::vector<RawRecord> records, const PrepOptions& options);

// Option / label / length statistics over a corpus.
json corpus_stats(const std::vector<TaskInstance>& instances);

}  // namespace camp
