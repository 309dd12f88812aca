#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "geoact/feature_vector.hpp"

namespace geoact::text {

using TokenSequence = std::vector<std::string>;

inline constexpr const char* kUrlToken = "#url";
inline constexpr const char* kMentionToken = "#mention";
inline constexpr const char* kPositiveEmoticonToken = "#emopos";
inline constexpr const char* kNegativeEmoticonToken = "#emoneg";

// Lowercases, compresses elongations, maps URLs/mentions/emoticons to
// placeholder tokens, keeps hashtags, and splits on whitespace and punctuation.
TokenSequence normalize(std::string_view text);

// Runs of three or more identical code points shrink to two.
std::string compress_elongations(std::string_view s);

// +1 / -1 for a lexicon emoticon, 0 otherwise. Expects lowercased input.
int emoticon_polarity(std::string_view token);

// Contiguous n-grams for n in 1..n_max, space-joined, in order of position.
std::vector<std::string> extract_ngrams(std::span<const std::string> tokens, std::size_t n_max = 3);

class Vocabulary {
public:
    Vocabulary() = default;
    explicit Vocabulary(std::vector<std::string> entries);

    std::optional<std::uint32_t> index_of(std::string_view ngram) const;
    const std::string& ngram(std::uint32_t index) const { return entries_.at(index); }
    std::size_t size() const noexcept { return entries_.size(); }
    const std::vector<std::string>& entries() const noexcept { return entries_; }

    void write(std::ostream& out) const;
    static Vocabulary read(std::istream& in);
    void save(const std::filesystem::path& path) const;
    static Vocabulary load(const std::filesystem::path& path);

private:
    struct Hash {
        using is_transparent = void;
        std::size_t operator()(std::string_view s) const noexcept { return std::hash<std::string_view>{}(s); }
    };
    std::vector<std::string> entries_;
    std::unordered_map<std::string, std::uint32_t, Hash, std::equal_to<>> index_;
};

// Number of entries kept for a training set of `documents` items.
std::size_t vocabulary_budget(std::size_t documents, double keep_ratio);

// Keeps the ceil(keep_ratio * |docs|) n-grams with the highest document
// frequency, ties broken lexicographically. Index order follows that ranking.
Vocabulary build_vocab(std::span<const std::vector<std::string>> docs, double keep_ratio = 0.25);

// Binary presence encoding over the vocabulary.
FeatureVector vectorize(std::span<const std::string> tokens, const Vocabulary& vocab, std::size_t n_max = 3);

}  // namespace geoact::text
