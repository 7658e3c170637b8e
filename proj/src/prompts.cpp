#include "camp/prompts.hpp"

#include <cctype>

#include "camp/error.hpp"
#include "camp/util.hpp"

namespace camp {

namespace {

bool ident_start(char c) { return c == '_' || (c >= 'a' && c <= 'z'); }
bool ident_char(char c) { return ident_start(c) || (c >= '0' && c <= '9'); }

// Length of the placeholder starting at text[pos] == '{', or 0 if none.
std::size_t placeholder_at(const std::string& text, std::size_t pos) {
    if (pos + 2 >= text.size() || text[pos] != '{' || !ident_start(text[pos + 1])) return 0;
    std::size_t i = pos + 2;
    while (i < text.size() && ident_char(text[i])) ++i;
    if (i < text.size() && text[i] == '}') return i - pos + 1;
    return 0;
}

}  // namespace

std::set<std::string> find_placeholders(const std::string& text) {
    std::set<std::string> out;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (std::size_t len = placeholder_at(text, i)) {
            out.insert(text.substr(i + 1, len - 2));
            i += len - 1;
        }
    }
    return out;
}

PromptTemplate::PromptTemplate(std::string name, std::string body)
    : name_(std::move(name)), body_(std::move(body)), required_(find_placeholders(body_)) {}

std::string PromptTemplate::render(const PlaceholderMap& values) const {
    std::string missing;
    for (const auto& p : required_) {
        if (!values.count(p)) missing += (missing.empty() ? "" : ", ") + p;
    }
    if (!missing.empty()) throw TemplateError("template '" + name_ + "' missing placeholders: " + missing);

    std::string out;
    out.reserve(body_.size() + 256);
    for (std::size_t i = 0; i < body_.size(); ++i) {
        if (std::size_t len = placeholder_at(body_, i)) {
            out += values.at(body_.substr(i + 1, len - 2));
            i += len - 1;
        } else {
            out.push_back(body_[i]);
        }
    }
    return out;
}

PromptLibrary PromptLibrary::load(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw IoError("prompt directory not found: " + dir.string());
    PromptLibrary lib;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
        std::string body = util::read_file(entry.path());
        while (!body.empty() && (body.back() == '\n' || body.back() == '\r')) body.pop_back();
        lib.add(PromptTemplate(entry.path().stem().string(), std::move(body)));
    }
    return lib;
}

PromptLibrary PromptLibrary::load_default() { return load(CAMP_DEFAULT_PROMPT_DIR); }

void PromptLibrary::add(PromptTemplate t) {
    const std::string name = t.name();
    templates_[name] = std::move(t);
}

const PromptTemplate& PromptLibrary::get(const std::string& name) const {
    auto it = templates_.find(name);
    if (it == templates_.end()) throw TemplateError("unknown prompt template '" + name + "'");
    return it->second;
}

std::string PromptLibrary::render(const std::string& name, const PlaceholderMap& values) const {
    return get(name).render(values);
}

std::string PromptLibrary::content_hash() const {
    std::string blob;
    for (const auto& [name, t] : templates_) {
        blob += name;
        blob.push_back('\0');
        blob += t.body();
        blob.push_back('\0');
    }
    return util::sha256_hex(blob);
}

}  // namespace camp
