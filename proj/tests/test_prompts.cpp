#include <gtest/gtest.h>

#include "camp/error.hpp"
#include "camp/prompts.hpp"

using namespace camp;

TEST(Placeholders, FindsIdentifiersOnly) {
    const auto p = find_placeholders("Note {clinical_note} and {options_text}; json {\"a\": 1} {Upper} {x1}");
    EXPECT_EQ(p, (std::set<std::string>{"clinical_note", "options_text", "x1"}));
}

TEST(PromptTemplate, RendersAndValidates) {
    PromptTemplate t("t", "Role {role}: {note} / {role}");
    EXPECT_EQ(t.render({{"role", "cardiologist"}, {"note", "n"}}), "Role cardiologist: n / cardiologist");
    EXPECT_THROW(t.render({{"role", "x"}}), TemplateError);
}

TEST(PromptTemplate, ValuesAreNotReexpanded) {
    PromptTemplate t("t", "{a}");
    EXPECT_EQ(t.render({{"a", "{b}"}}), "{b}");
}

TEST(PromptLibrary, DefaultSetIsComplete) {
    const PromptLibrary lib = PromptLibrary::load_default();
    const std::map<std::string, std::set<std::string>> expected = {
        {"initial_review", {"clinical_note", "options_text"}},
        {"orchestrator", {"clinical_note", "options_text", "panel_size"}},
        {"specialist_review", {"role", "focus", "clinical_note", "candidates_text"}},
        {"arbitration", {"clinical_note", "contested_evidence"}},
        {"bhc_generation", {"clinical_note", "diagnosis_list"}},
        {"bhc_judge", {"clinical_note", "target_bhc", "candidate_systems_text", "dimension_keys"}},
        {"single_agent", {"clinical_note", "options_text"}},
        {"cot", {"clinical_note", "options_text"}},
        {"majority_vote", {"agent_id", "clinical_note", "options_text"}},
        {"medagents_initial", {"agent_id", "specialty", "clinical_note", "options_text"}},
        {"medagents_revote", {"agent_id", "clinical_note", "options_text", "peer_opinions"}},
        {"llm_judge", {"clinical_note", "options_text", "proposals_text"}},
        {"devils_advocate", {"clinical_note", "pool_text"}},
        {"repair", {"error"}},
        {"phrase_mask", {"clinical_note", "diagnosis_list"}},
        {"distractor_filter", {"gold_list", "distractor_list"}},
        {"semantic_filter", {"history_text", "diagnosis_list"}},
    };
    EXPECT_EQ(lib.all().size(), expected.size());
    for (const auto& [name, holes] : expected) {
        ASSERT_TRUE(lib.contains(name)) << name;
        EXPECT_EQ(lib.get(name).required_placeholders(), holes) << name;
    }
}

TEST(PromptLibrary, VoteVocabularyInSpecialistPrompt) {
    const PromptLibrary lib = PromptLibrary::load_default();
    const std::string body = lib.get("specialist_review").body();
    for (const char* word : {"KEEP", "REMOVE", "NEUTRAL"}) EXPECT_NE(body.find(word), std::string::npos) << word;
    EXPECT_NE(lib.get("arbitration").body().find("INCLUDE"), std::string::npos);
    EXPECT_NE(lib.get("arbitration").body().find("EXCLUDE"), std::string::npos);
}

TEST(PromptLibrary, UnknownTemplateAndHashStability) {
    PromptLibrary lib;
    lib.add(PromptTemplate("a", "x {y}"));
    EXPECT_THROW(lib.get("b"), TemplateError);
    PromptLibrary same;
    same.add(PromptTemplate("a", "x {y}"));
    EXPECT_EQ(lib.content_hash(), same.content_hash());
    same.add(PromptTemplate("a", "x {y}!"));
    EXPECT_NE(lib.content_hash(), same.content_hash());
}

TEST(PromptLibrary, MissingDirectory) { EXPECT_THROW(PromptLibrary::load("/nonexistent/prompts"), IoError); }
