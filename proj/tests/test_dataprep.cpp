#include <gtest/gtest.h>

#include <algorithm>
#include <cctype>
#include <random>
#include <set>

#include "camp/dataprep.hpp"
#include "camp/error.hpp"
#include "camp/pipeline.hpp"
#include "camp/util.hpp"

using namespace camp;
namespace fs = std::filesystem;

namespace {

const fs::path kData = CAMP_TEST_DATA_DIR;

using Strings = std::vector<std::string>;

std::string lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

bool has_ci(const std::string& hay, const std::string& needle) { return lower(hay).find(lower(needle)) != std::string::npos; }

std::size_t count_exact(const std::string& hay, const std::string& needle) {
    std::size_t n = 0;
    for (auto p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + needle.size())) ++n;
    return n;
}

std::string join_lines(const Strings& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "\n" : "") + v[i];
    return out;
}

RawRecord record(const std::string& id, SectionList sections) {
    RawRecord r;
    r.note_id = id;
    r.sections = std::move(sections);
    for (const auto& [name, text] : r.sections) {
        if (canonical_section_name(name) == "DISCHARGE DIAGNOSIS") r.discharge_diagnosis_text = text;
    }
    return r;
}

DiagnosisPool big_pool(std::size_t n) {
    Strings e;
    for (std::size_t i = 0; i < n; ++i) e.push_back("Condition " + std::to_string(1000 + i));
    return DiagnosisPool(e);
}

}  // namespace

TEST(Normalize, ExampleBlocks) {
    EXPECT_EQ(normalize_diagnoses("Primary: Sepsis\n- Pneumonia, COPD exacerbation"),
              (Strings{"Sepsis", "Pneumonia", "COPD exacerbation"}));
    EXPECT_EQ(normalize_diagnoses("Axis I: Depression."), (Strings{"Depression"}));
    EXPECT_EQ(normalize_diagnoses(""), Strings{});
    EXPECT_EQ(normalize_diagnoses("  \n\n  "), Strings{});
}

TEST(Normalize, DelimitersAndMarkers) {
    EXPECT_EQ(normalize_diagnoses("1. Sepsis 2. Pneumonia"), (Strings{"Sepsis", "Pneumonia"}));
    EXPECT_EQ(normalize_diagnoses("1) Acute kidney injury\n2) Hyperkalemia"),
              (Strings{"Acute kidney injury", "Hyperkalemia"}));
    EXPECT_EQ(normalize_diagnoses("Hyperkalemia; Toxic metabolic encephalopathy"),
              (Strings{"Hyperkalemia", "Toxic metabolic encephalopathy"}));
    EXPECT_EQ(normalize_diagnoses("* Atrial fibrillation\n+ Heart failure"),
              (Strings{"Atrial fibrillation", "Heart failure"}));
    EXPECT_EQ(normalize_diagnoses("Secondary diagnoses:\nAnemia"), (Strings{"Anemia"}));
}

TEST(Normalize, CommasInsideParenthesesAndQualifiers) {
    EXPECT_EQ(normalize_diagnoses("Pneumonia (right lower lobe, aspiration)"),
              (Strings{"Pneumonia (right lower lobe, aspiration)"}));
    EXPECT_EQ(normalize_diagnoses("Gait difficulty, likely related to alcohol use"),
              (Strings{"Gait difficulty, likely related to alcohol use"}));
}

TEST(Normalize, DropsShortAndDuplicateEntries) {
    const Strings out = normalize_diagnoses("Sepsis\nsepsis\nA\nSEPSIS.");
    EXPECT_EQ(out, (Strings{"Sepsis"}));
}

TEST(Normalize, IdempotentUnderNewlineJoin) {
    const Strings words = {"Sepsis",  "pneumonia", "acute",  "chronic", "kidney",  "injury", "heart",
                           "failure", "COPD",      "likely", "due",     "to",      "gout",   "anemia",
                           "type",    "2",         "DM",     "with",    "without", "(left", "side)"};
    const Strings seps = {"\n", ", ", "; ", "\n- ", "\n* ", " 1. ", " 2) ", "\n\n", "\nPrimary: ", "\nSecondary: ", " "};
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 500; ++trial) {
        std::string raw = trial % 3 == 0 ? "Primary: " : "";
        const int n = 1 + static_cast<int>(rng() % 25);
        for (int i = 0; i < n; ++i) {
            raw += words[rng() % words.size()];
            raw += seps[rng() % seps.size()];
        }
        const Strings once = normalize_diagnoses(raw);
        EXPECT_EQ(normalize_diagnoses(join_lines(once)), once) << raw;
        for (const auto& d : once) {
            EXPECT_GE(d.size(), 3u) << raw;
            EXPECT_EQ(d, util::trim(d)) << raw;
        }
    }
}

TEST(Normalize, FixtureRecordsAreIdempotent) {
    for (const auto& r : read_raw_records(kData / "fixtures/raw_records.jsonl")) {
        const Strings once = normalize_diagnoses(r.discharge_diagnosis_text);
        EXPECT_FALSE(once.empty()) << r.note_id;
        EXPECT_EQ(normalize_diagnoses(join_lines(once)), once) << r.note_id;
    }
}

TEST(Sections, CanonicalNames) {
    EXPECT_EQ(canonical_section_name("  History of   present illness: "), "HISTORY OF PRESENT ILLNESS");
    EXPECT_EQ(canonical_section_name("Follow-up Instructions"), "FOLLOWUP INSTRUCTIONS");
    EXPECT_EQ(canonical_section_name("Discharge Diagnoses:"), "DISCHARGE DIAGNOSIS");
    EXPECT_EQ(leak_sections().size(), 6u);
    const auto& known = canonical_sections();
    for (const auto& leak : leak_sections()) {
        EXPECT_NE(std::find(known.begin(), known.end(), leak), known.end()) << leak;
    }
}

TEST(Sections, MaskRemovesEveryLeakSection) {
    SectionList sections = {{"Chief Complaint", "Fever"}, {"History of Present Illness", "Three days of cough."}};
    for (const auto& leak : leak_sections()) sections.emplace_back(leak, "LEAK " + leak);
    sections.emplace_back("Physical Exam", "Crackles at the right base.");
    const std::string out = mask_sections(record("n1", sections));
    EXPECT_EQ(out.find("LEAK"), std::string::npos);
    const auto cc = out.find("CHIEF COMPLAINT:\nFever");
    const auto hpi = out.find("HISTORY OF PRESENT ILLNESS:\nThree days of cough.");
    const auto pe = out.find("PHYSICAL EXAM:\nCrackles at the right base.");
    ASSERT_NE(cc, std::string::npos);
    ASSERT_NE(hpi, std::string::npos);
    ASSERT_NE(pe, std::string::npos);
    EXPECT_LT(cc, hpi);
    EXPECT_LT(hpi, pe);
}

TEST(Sections, AdmissionOnlyRecordIsUnchanged) {
    const SectionList sections = {{"CHIEF COMPLAINT", "Chest pain"},
                                  {"HISTORY OF PRESENT ILLNESS", "Pain at rest."},
                                  {"PAST MEDICAL HISTORY", "Hypertension"}};
    EXPECT_EQ(mask_sections(record("n2", sections)),
              "CHIEF COMPLAINT:\nChest pain\n\nHISTORY OF PRESENT ILLNESS:\nPain at rest.\n\nPAST MEDICAL HISTORY:\nHypertension");
}

TEST(Sections, SplitPlainText) {
    const SectionList s = split_sections("seen on the ward\nChief Complaint: Fever\nHistory of Present Illness:\nCough\nmore\n");
    ASSERT_EQ(s.size(), 3u);
    EXPECT_EQ(s[0].first, "PREAMBLE");
    EXPECT_EQ(s[1].first, "CHIEF COMPLAINT");
    EXPECT_EQ(util::trim(s[1].second), "Fever");
    EXPECT_EQ(s[2].first, "HISTORY OF PRESENT ILLNESS");
    EXPECT_EQ(util::trim(s[2].second), "Cough\nmore");
}

TEST(RawRecords, ObjectAndListForms) {
    const RawRecord a = parse_raw_record(
        R"({"note_id":"a","sections":{"CHIEF COMPLAINT":"x","DISCHARGE DIAGNOSIS":"Sepsis"}})");
    EXPECT_EQ(a.sections.size(), 2u);
    EXPECT_EQ(a.sections[0].first, "CHIEF COMPLAINT");
    EXPECT_EQ(a.discharge_diagnosis_text, "Sepsis");
    const RawRecord b = parse_raw_record(
        R"({"note_id":"b","sections":[{"name":"Discharge Diagnosis","text":"Gout"}],"service_label":"MED"})");
    EXPECT_EQ(b.discharge_diagnosis_text, "Gout");
    EXPECT_EQ(b.service_label, std::optional<std::string>("MED"));
    const RawRecord back = parse_raw_record(raw_record_to_json(b));
    EXPECT_EQ(back.sections, b.sections);
    EXPECT_EQ(back.service_label, b.service_label);
    EXPECT_THROW(parse_raw_record("{"), SchemaError);
    EXPECT_THROW(parse_raw_record(R"({"sections":{}})"), SchemaError);
    EXPECT_THROW(parse_raw_record(R"({"note_id":"c","sections":{"A":1}})"), SchemaError);
}

TEST(Pool, DropsShortAndCaseDuplicates) {
    DiagnosisPool pool({"Sepsis", "sepsis", "AB", "Gout", "Anemia"});
    EXPECT_EQ(pool.size(), 3u);
    EXPECT_TRUE(pool.contains("SEPSIS"));
    EXPECT_FALSE(pool.contains("AB"));
    EXPECT_TRUE(std::is_sorted(pool.entries().begin(), pool.entries().end()));
    pool.add("GOUT");
    EXPECT_EQ(pool.size(), 3u);
}

TEST(Distractors, OptionCounts) {
    EXPECT_EQ(option_count_for(1), 6u);
    EXPECT_EQ(option_count_for(2), 8u);
    EXPECT_EQ(option_count_for(3), 12u);
    EXPECT_THROW(option_count_for(0), SchemaError);
    EXPECT_THROW(option_count_for(4), SchemaError);
}

TEST(Distractors, CountsDistinctExcludeGoldDeterministic) {
    const DiagnosisPool pool = big_pool(40);
    const std::map<std::size_t, std::size_t> expected = {{1, 5}, {2, 6}, {3, 9}};
    for (const auto& [g, n] : expected) {
        Strings gold;
        for (std::size_t i = 0; i < g; ++i) gold.push_back("condition " + std::to_string(1000 + i));
        for (std::uint64_t seed = 0; seed < 50; ++seed) {
            const Strings d = sample_distractors(gold, pool, seed);
            ASSERT_EQ(d.size(), n);
            EXPECT_EQ(std::set<std::string>(d.begin(), d.end()).size(), n);
            for (const auto& x : d) {
                EXPECT_TRUE(pool.contains(x));
                for (const auto& y : gold) EXPECT_NE(lower(x), lower(y));
            }
            EXPECT_EQ(sample_distractors(gold, pool, seed), d);
        }
    }
    EXPECT_NE(sample_distractors({"x1x"}, pool, 1), sample_distractors({"x1x"}, pool, 2));
}

TEST(Distractors, FilterReplacesRejectedDraws) {
    const DiagnosisPool pool = big_pool(30);
    std::set<std::string> banned;
    const DistractorFilter filter = [&](const Strings&, const Strings& drawn) {
        Strings out;
        for (const auto& d : drawn) {
            if (d.back() % 2 == 0) {
                out.push_back(d);
                banned.insert(d);
            }
        }
        return out;
    };
    const Strings d = sample_distractors({"Sepsis"}, pool, 5, filter);
    ASSERT_EQ(d.size(), 5u);
    for (const auto& x : d) EXPECT_EQ(banned.count(x), 0u) << x;
}

TEST(Distractors, PoolExhausted) {
    const DiagnosisPool pool({"Sepsis", "Gout", "Anemia", "Asthma"});
    EXPECT_THROW(sample_distractors({"Sepsis"}, pool, 0), PoolExhausted);
}

TEST(Masking, SpecExamples) {
    const TaskInstance t = assemble_instance("c", "Pt with pneumonia and gout; PNEUMONIA resolved.", {"Pneumonia"},
                                             {"Gout", "Anemia", "Asthma", "Cellulitis", "Syncope"}, 3);
    EXPECT_EQ(t.masked_note, "Pt with ___ and gout; ___ resolved.");
    ASSERT_EQ(t.candidates.size(), 6u);
    ASSERT_EQ(t.gold.size(), 1u);
    EXPECT_EQ(t.candidates[static_cast<std::size_t>(t.gold[0] - 1)].text, "Pneumonia");
}

TEST(Masking, LongestFirstAndFixpoint) {
    EXPECT_EQ(mask_candidates("congestive heart failure, heart failure", {"heart failure", "congestive heart failure"}),
              "___, ___");
    EXPECT_EQ(mask_candidates("SEPSIS and Sepsis", {"sepsis"}), "___ and ___");
    EXPECT_EQ(mask_candidates("gout and GOUT", {"gout"}), "gout and GOUT");
}

TEST(Masking, ApplySpans) {
    EXPECT_EQ(apply_mask_spans("congestive heart failure with heart failure", {"heart failure", "congestive heart failure"}),
              "___ with ___");
    EXPECT_EQ(apply_mask_spans("note text", {"absent span", "  "}), "note text");
}

TEST(Masking, AssemblyIsSeededPermutation) {
    const Strings gold = {"Sepsis", "Pneumonia"};
    const Strings dis = {"Gout", "Anemia", "Asthma", "Cellulitis", "Syncope", "Migraine"};
    const TaskInstance a = assemble_instance("c", "note", gold, dis, 11);
    const TaskInstance b = assemble_instance("c", "note", gold, dis, 11);
    EXPECT_EQ(a.candidates.size(), 8u);
    std::set<std::string> texts;
    for (std::size_t i = 0; i < a.candidates.size(); ++i) {
        EXPECT_EQ(a.candidates[i].index, static_cast<int>(i) + 1);
        EXPECT_EQ(a.candidates[i].text, b.candidates[i].text);
        texts.insert(a.candidates[i].text);
    }
    EXPECT_EQ(texts.size(), 8u);
    EXPECT_EQ(a.gold, b.gold);
    std::set<std::string> gold_texts;
    for (int g : a.gold) gold_texts.insert(a.candidates[static_cast<std::size_t>(g - 1)].text);
    EXPECT_EQ(gold_texts, std::set<std::string>(gold.begin(), gold.end()));
    bool any_diff = false;
    for (std::uint64_t s = 0; s < 10 && !any_diff; ++s) {
        any_diff = assemble_instance("c", "note", gold, dis, s).candidates[0].text != a.candidates[0].text;
    }
    EXPECT_TRUE(any_diff);
}

TEST(Masking, RandomNotesProperty) {
    const Strings longs = {"Pneumonia",     "Heart failure",     "Congestive heart failure", "Sepsis",
                           "Septic shock",  "Acute kidney injury", "Chronic kidney disease", "Cellulitis",
                           "Hyponatremia",  "Atrial fibrillation", "Asthma exacerbation",    "Anemia"};
    const Strings shorts = {"Gout", "UTI", "CHF", "AKI", "DVT"};
    const Strings filler = {"patient", "noted", "stable", "pain", "mild", "worse", "today"};
    std::mt19937_64 rng(2024);
    auto recase = [&](std::string s) {
        const int mode = static_cast<int>(rng() % 3);
        if (mode == 1) return lower(s);
        if (mode == 2) return util::to_upper(s);
        return s;
    };
    for (int trial = 0; trial < 500; ++trial) {
        Strings cands;
        std::set<std::size_t> picked;
        while (picked.size() < 4) picked.insert(rng() % longs.size());
        for (auto i : picked) cands.push_back(longs[i]);
        cands.push_back(shorts[rng() % shorts.size()]);
        std::string note;
        const int n = 5 + static_cast<int>(rng() % 30);
        for (int i = 0; i < n; ++i) {
            const int kind = static_cast<int>(rng() % 3);
            std::string token = kind == 0   ? recase(longs[rng() % longs.size()])
                                : kind == 1 ? shorts[rng() % shorts.size()]
                                            : filler[rng() % filler.size()];
            note += token + " | ";
        }
        const Strings gold(cands.begin(), cands.begin() + 1);
        const Strings dis(cands.begin() + 1, cands.end());
        const std::string masked = mask_candidates(note, cands);
        for (const auto& c : cands) {
            if (c.size() > 4) {
                EXPECT_FALSE(has_ci(masked, c)) << c << " in " << masked;
            } else {
                EXPECT_EQ(count_exact(masked, c), count_exact(note, c)) << c;
            }
        }
        EXPECT_EQ(mask_candidates(masked, cands), masked);
    }
}

TEST(Masking, FixtureCorpusHasNoCandidateLeak) {
    const auto instances = read_instances((kData / "fixtures/corpus.jsonl").string());
    ASSERT_EQ(instances.size(), 10u);
    for (const auto& t : instances) {
        for (const auto& c : t.candidates) {
            if (c.text.size() > 4) EXPECT_FALSE(has_ci(t.masked_note, c.text)) << t.case_id << ": " << c.text;
        }
    }
}

TEST(Prepare, FixtureRecordsMatchCommittedCorpus) {
    const auto records = read_raw_records(kData / "fixtures/raw_records.jsonl");
    ASSERT_EQ(records.size(), 11u);
    PrepOptions opt;
    opt.seed = 2024;
    const PrepResult r = prepare_corpus(records, opt);
    ASSERT_EQ(r.instances.size(), 10u);
    ASSERT_EQ(r.rejected.size(), 1u);
    EXPECT_EQ(r.rejected[0].note_id, "10010471-DS-5");
    const auto committed = read_instances((kData / "fixtures/corpus.jsonl").string());
    ASSERT_EQ(committed.size(), r.instances.size());
    for (std::size_t i = 0; i < committed.size(); ++i) {
        EXPECT_EQ(json(r.instances[i]).dump(), json(committed[i]).dump())
            << committed[i].case_id;
    }
    std::set<std::size_t> counts;
    for (const auto& t : r.instances) {
        EXPECT_EQ(t.candidates.size(), option_count_for(t.gold.size())) << t.case_id;
        counts.insert(t.candidates.size());
        for (const auto& leak : leak_sections()) EXPECT_EQ(t.masked_note.find(leak + ":"), std::string::npos);
    }
    EXPECT_EQ(counts, (std::set<std::size_t>{6, 8, 12}));
    // input order does not matter
    auto reversed = records;
    std::reverse(reversed.begin(), reversed.end());
    const PrepResult again = prepare_corpus(reversed, opt);
    ASSERT_EQ(again.instances.size(), r.instances.size());
    for (std::size_t i = 0; i < r.instances.size(); ++i) {
        EXPECT_EQ(json(again.instances[i]).dump(), json(r.instances[i]).dump());
    }
}

TEST(Prepare, DistractorCacheIsReused) {
    const auto records = read_raw_records(kData / "fixtures/raw_records.jsonl");
    std::map<std::string, Strings> cache;
    PrepOptions opt;
    opt.seed = 1;
    opt.distractor_cache = &cache;
    const PrepResult first = prepare_corpus(records, opt);
    EXPECT_EQ(cache.size(), first.instances.size());
    opt.seed = 777;
    const PrepResult second = prepare_corpus(records, opt);
    for (std::size_t i = 0; i < first.instances.size(); ++i) {
        std::set<std::string> a, b;
        for (const auto& c : first.instances[i].candidates) a.insert(c.text);
        for (const auto& c : second.instances[i].candidates) b.insert(c.text);
        EXPECT_EQ(a, b);
    }
}

TEST(Prepare, ProviderBackedSteps) {
    RawRecord keep = record("k1", {{"HISTORY OF PRESENT ILLNESS", "Fever with productive cough, lobar infiltrate."},
                                   {"DISCHARGE DIAGNOSIS", "Pneumonia"}});
    RawRecord drop = record("k2", {{"HISTORY OF PRESENT ILLNESS", "Known gout flare."},
                                   {"DISCHARGE DIAGNOSIS", "Gout flare"}});
    Strings extra;
    for (int i = 0; i < 20; ++i) extra.push_back("Filler condition " + std::to_string(i));
    RawRecord filler = record("k0", {{"DISCHARGE DIAGNOSIS", join_lines(Strings(extra.begin(), extra.begin() + 3))}});
    std::vector<RawRecord> records = {keep, drop, filler};
    for (int i = 3; i < 20; i += 3) {
        records.push_back(record("z" + std::to_string(i),
                                 {{"DISCHARGE DIAGNOSIS", join_lines(Strings(extra.begin() + i,
                                                                             extra.begin() + std::min(i + 3, 20)))}}));
    }
    const json script = json::array({
        {{"match", {{"stage", "semantic_filter"}}}, {"response", R"({"recoverable": false})"}},
        {{"match", {{"stage", "semantic_filter"}, {"case_id", "k2"}}}, {"response", R"({"recoverable": true})"}},
        {{"match", {{"stage", "phrase_mask"}}}, {"response", R"({"mask_phrase": []})"}},
        {{"match", {{"stage", "phrase_mask"}, {"case_id", "k1"}}},
         {"response", R"({"mask_phrase": ["lobar infiltrate"]})"}},
        {{"match", {{"stage", "distractor_filter"}}}, {"response", R"({"remove": []})"}},
    });
    MockProvider mock(script);
    LlmGateway gateway(mock, "mock-model", 2);
    const PromptLibrary prompts = PromptLibrary::load_default();
    std::vector<std::unique_ptr<TokenLedger>> ledgers;
    PrepOptions opt;
    opt.seed = 3;
    opt.llm_phrase_mask = opt.llm_distractor_filter = opt.llm_semantic_filter = true;
    opt.agents = [&](const std::string& id) {
        ledgers.push_back(std::make_unique<TokenLedger>());
        return AgentContext{gateway, prompts, *ledgers.back(), id, {}};
    };
    const PrepResult r = prepare_corpus(records, opt);
    bool saw_k1 = false;
    for (const auto& t : r.instances) {
        EXPECT_NE(t.case_id, "k2");
        if (t.case_id == "k1") {
            saw_k1 = true;
            EXPECT_EQ(t.masked_note.find("lobar infiltrate"), std::string::npos);
            EXPECT_NE(t.masked_note.find("productive cough, ___."), std::string::npos);
        }
    }
    EXPECT_TRUE(saw_k1);
    bool k2_rejected = false;
    for (const auto& rej : r.rejected) k2_rejected |= rej.note_id == "k2";
    EXPECT_TRUE(k2_rejected);
    EXPECT_GT(mock.calls(), 0u);
}

TEST(Prepare, CorpusStats) {
    const auto instances = read_instances((kData / "fixtures/corpus.jsonl").string());
    const json s = corpus_stats(instances);
    EXPECT_FALSE(s.empty());
    EXPECT_EQ(corpus_stats({}).is_object(), true);
}
