#include "geoact/textprep.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_set>

#include "geoact/errors.hpp"

namespace geoact::text {

namespace {

constexpr std::array kPositiveEmoticons = {
    ":)", ":-)", ":))", ":d", ":-d", ";)", ";-)", ";d", ":p", ":-p", "=)", "=d", ":]", "(:",
    "(;", "<3", "^_^", "^^", ":o)", "8)", ":}", ":*", ":-*",
};
constexpr std::array kNegativeEmoticons = {
    ":(", ":-(", ":((", ":'(", ":/", ":-/", ":|", ":-|", "d:", "):", ":[", ";(",
    ">:(", "</3", ":s", ":-s", "-_-", ":@", "=(", ":c",
};

std::size_t utf8_length(unsigned char lead) {
    if (lead < 0x80) return 1;
    if ((lead >> 5) == 0x6) return 2;
    if ((lead >> 4) == 0xE) return 3;
    if ((lead >> 3) == 0x1E) return 4;
    return 1;  // stray continuation or invalid byte: treat as its own unit
}

bool is_word_byte(unsigned char c) {
    return c >= 0x80 || std::isalnum(c) || c == '_';
}

bool is_space(unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool starts_with(std::string_view s, std::string_view prefix) {
    return s.substr(0, prefix.size()) == prefix;
}

// Splits on every non-word byte, dropping the punctuation.
void split_words(std::string_view s, TokenSequence& out) {
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && !is_word_byte(static_cast<unsigned char>(s[i]))) ++i;
        std::size_t j = i;
        while (j < s.size() && is_word_byte(static_cast<unsigned char>(s[j]))) ++j;
        if (j > i) out.emplace_back(s.substr(i, j - i));
        i = j;
    }
}

void emit_token(std::string_view lowered, TokenSequence& out) {
    // URLs are matched before compression so "www." survives.
    if (starts_with(lowered, "http://") || starts_with(lowered, "https://") || starts_with(lowered, "www.")) {
        out.emplace_back(kUrlToken);
        return;
    }
    const std::string compressed = compress_elongations(lowered);
    std::string_view raw = compressed;
    if (raw.size() > 1 && raw[0] == '@') {
        out.emplace_back(kMentionToken);
        return;
    }
    if (int p = emoticon_polarity(raw); p != 0) {
        out.emplace_back(p > 0 ? kPositiveEmoticonToken : kNegativeEmoticonToken);
        return;
    }
    if (raw.size() > 1 && raw[0] == '#' && is_word_byte(static_cast<unsigned char>(raw[1]))) {
        std::size_t j = 1;
        while (j < raw.size() && is_word_byte(static_cast<unsigned char>(raw[j]))) ++j;
        out.emplace_back(raw.substr(0, j));
        split_words(raw.substr(j), out);
        return;
    }
    split_words(raw, out);
}

}  // namespace

int emoticon_polarity(std::string_view token) {
    for (const char* e : kPositiveEmoticons)
        if (token == e) return 1;
    for (const char* e : kNegativeEmoticons)
        if (token == e) return -1;
    return 0;
}

std::string compress_elongations(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    std::string_view prev;
    int run = 0;
    std::size_t i = 0;
    while (i < s.size()) {
        std::size_t len = std::min(utf8_length(static_cast<unsigned char>(s[i])), s.size() - i);
        std::string_view cp = s.substr(i, len);
        run = (cp == prev) ? run + 1 : 1;
        if (run <= 2) out.append(cp);
        prev = cp;
        i += len;
    }
    return out;
}

TokenSequence normalize(std::string_view text) {
    std::string lowered(text);
    for (auto& c : lowered)
        if (static_cast<unsigned char>(c) < 0x80) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    TokenSequence out;
    std::string_view s = lowered;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && is_space(static_cast<unsigned char>(s[i]))) ++i;
        std::size_t j = i;
        while (j < s.size() && !is_space(static_cast<unsigned char>(s[j]))) ++j;
        if (j > i) emit_token(s.substr(i, j - i), out);
        i = j;
    }
    return out;
}

std::vector<std::string> extract_ngrams(std::span<const std::string> tokens, std::size_t n_max) {
    std::vector<std::string> out;
    for (std::size_t n = 1; n <= n_max; ++n) {
        if (tokens.size() < n) break;
        for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
            std::string g = tokens[i];
            for (std::size_t k = 1; k < n; ++k) {
                g += ' ';
                g += tokens[i + k];
            }
            out.push_back(std::move(g));
        }
    }
    return out;
}

Vocabulary::Vocabulary(std::vector<std::string> entries) : entries_(std::move(entries)) {
    index_.reserve(entries_.size());
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (!index_.emplace(entries_[i], static_cast<std::uint32_t>(i)).second)
            throw DataError("duplicate vocabulary entry \"" + entries_[i] + "\"");
    }
}

std::optional<std::uint32_t> Vocabulary::index_of(std::string_view ngram) const {
    auto it = index_.find(ngram);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

void Vocabulary::write(std::ostream& out) const {
    for (std::size_t i = 0; i < entries_.size(); ++i) out << i << '\t' << entries_[i] << '\n';
}

Vocabulary Vocabulary::read(std::istream& in) {
    std::vector<std::string> entries;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos) throw ParseError(lineno, "expected \"index<TAB>ngram\"");
        std::size_t idx = 0;
        try {
            idx = std::stoul(line.substr(0, tab));
        } catch (const std::exception&) {
            throw ParseError(lineno, "bad vocabulary index");
        }
        if (idx != entries.size()) throw ParseError(lineno, "vocabulary indices must be dense and ascending");
        entries.push_back(line.substr(tab + 1));
    }
    return Vocabulary(std::move(entries));
}

void Vocabulary::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    write(out);
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    return read(in);
}

std::size_t vocabulary_budget(std::size_t documents, double keep_ratio) {
    // The epsilon keeps products like 0.1 * 30 from rounding up a whole entry.
    const double n = keep_ratio * static_cast<double>(documents);
    return static_cast<std::size_t>(std::ceil(n - 1e-9));
}

Vocabulary build_vocab(std::span<const std::vector<std::string>> docs, double keep_ratio) {
    if (docs.empty()) throw DataError("cannot build a vocabulary from an empty training set");
    std::unordered_map<std::string, std::size_t> df;
    std::unordered_set<std::string_view> seen;
    for (const auto& doc : docs) {
        seen.clear();
        for (const auto& g : doc)
            if (seen.insert(g).second) ++df[g];
    }
    std::vector<std::pair<std::string, std::size_t>> ranked(df.begin(), df.end());
    const std::size_t budget = std::min(vocabulary_budget(docs.size(), keep_ratio), ranked.size());
    auto by_rank = [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    };
    std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(budget), ranked.end(), by_rank);
    std::vector<std::string> entries;
    entries.reserve(budget);
    for (std::size_t i = 0; i < budget; ++i) entries.push_back(std::move(ranked[i].first));
    return Vocabulary(std::move(entries));
}

FeatureVector vectorize(std::span<const std::string> tokens, const Vocabulary& vocab, std::size_t n_max) {
    std::vector<FeatureVector::Entry> entries;
    for (const auto& g : extract_ngrams(tokens, n_max))
        if (auto idx = vocab.index_of(g)) entries.push_back({*idx, 1.0});
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.index < b.index; });
    entries.erase(std::unique(entries.begin(), entries.end(),
                              [](const auto& a, const auto& b) { return a.index == b.index; }),
                  entries.end());
    return FeatureVector::from_unsorted(std::move(entries));
}

}  // namespace geoact::text
