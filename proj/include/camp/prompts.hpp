#pragma once
// Named prompt templates with {placeholder} markers.

#include <filesystem>
#include <map>
#include <set>
#include <string>

namespace camp {

using PlaceholderMap = std::map<std::string, std::string>;

class PromptTemplate {
public:
    PromptTemplate() = default;
    PromptTemplate(std::string name, std::string body);

    const std::string& name() const { return name_; }
    const std::string& body() const { return body_; }
    // Identifiers appearing as {identifier} in the body.
    const std::set<std::string>& required_placeholders() const { return required_; }

    // Single-pass substitution: substituted values are never re-scanned, so
    // braces inside a note are left alone. Throws TemplateError naming every
    // missing placeholder.
    std::string render(const PlaceholderMap& values) const;

private:
    std::string name_;
    std::string body_;
    std::set<std::string> required_;
};

// Placeholder identifiers in `text`: `{` + [a-z_][a-z0-9_]* + `}`.
std::set<std::string> find_placeholders(const std::string& text);

class PromptLibrary {
public:
    PromptLibrary() = default;
    // Loads every *.txt in `dir`; the file stem is the template name.
    static PromptLibrary load(const std::filesystem::path& dir);
    // The repository's prompts/ directory.
    static PromptLibrary load_default();

    void add(PromptTemplate t);
    bool contains(const std::string& name) const { return templates_.count(name) != 0; }
    // Throws TemplateError when absent.
    const PromptTemplate& get(const std::string& name) const;
    std::string render(const std::string& name, const PlaceholderMap& values) const;

    // Hash of every (name, body) pair; recorded in run manifests.
    std::string content_hash() const;
    const std::map<std::string, PromptTemplate>& all() const { return templates_; }

private:
    std::map<std::string, PromptTemplate> templates_;
};

}  // namespace camp
