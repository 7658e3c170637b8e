#pragma once
// String, hashing and seeded-RNG helpers shared across modules.

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace camp::util {

std::string to_lower(std::string_view s);
std::string to_upper(std::string_view s);
std::string trim(std::string_view s);
// Lowercase and collapse runs of whitespace to a single space.
std::string normalize_role(std::string_view s);
std::string collapse_whitespace(std::string_view s);
bool iequals(std::string_view a, std::string_view b);
// Case-insensitive (ASCII) substring search; npos when absent.
std::size_t ifind(std::string_view haystack, std::string_view needle, std::size_t from = 0);
bool icontains(std::string_view haystack, std::string_view needle);
// Replaces every case-insensitive occurrence of `needle`; returns the count.
std::size_t ireplace_all(std::string& text, std::string_view needle, std::string_view replacement);
std::vector<std::string> split_lines(std::string_view text);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

std::string sha256_hex(std::string_view data);
std::uint64_t fnv1a64(std::string_view data);
// Derives an independent 64-bit seed from a base seed and a label.
std::uint64_t derive_seed(std::uint64_t base, std::string_view label);

// Deterministic across standard libraries: std::shuffle and
// std::uniform_int_distribution are implementation-defined, mt19937_64 is not.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed) : engine_(seed) {}

    // Uniform integer in [0, bound).
    std::uint64_t below(std::uint64_t bound);
    // Uniform real in [0, 1).
    double unit();

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);
// Writes via a temporary sibling and rename so readers never see partial files.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

// Formats a ratio with fixed decimals; used by text tables.
std::string fixed(double value, int decimals);

}  // namespace camp::util
