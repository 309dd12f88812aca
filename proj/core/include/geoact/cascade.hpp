#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "geoact/corpus.hpp"
#include "geoact/svm.hpp"
#include "geoact/textprep.hpp"

namespace geoact::cascade {

// Token-level keyword match against normalized text.
class KeywordFilter {
public:
    // Each keyword is normalized and expanded with simple suffix variants
    // ("drink" -> "drinks", "drinking", "drinked"...).
    explicit KeywordFilter(std::span<const std::string> keywords);

    static KeywordFilter defaults();
    static KeywordFilter read(std::istream& in);  // one per line, '#' comments
    static KeywordFilter load(const std::filesystem::path& path);

    bool matches(std::span<const std::string> tokens) const;
    bool matches_text(std::string_view text) const;

    const std::set<std::string, std::less<>>& terms() const noexcept { return terms_; }
    const std::vector<std::string>& keywords() const noexcept { return keywords_; }

private:
    std::vector<std::string> keywords_;
    std::set<std::string, std::less<>> terms_;
};

std::span<const std::string_view> default_keywords();

bool keyword_match(const TweetRecord& t, const KeywordFilter& f);

enum class ActivityLabel { FilteredOut, NoMention, DrinkingMention, UserDrinking, UserDrinkingNow };

std::string_view to_string(ActivityLabel label);
ActivityLabel parse_activity_label(std::string_view s);
// Depth in the chain: FilteredOut = 0 ... UserDrinkingNow = 4.
int depth(ActivityLabel label) noexcept;

struct Level {
    text::Vocabulary vocab;
    svm::LinearModel model;
};

struct CascadeModel {
    KeywordFilter filter;
    std::array<Level, 3> levels;

    void save(const std::filesystem::path& dir) const;
    static CascadeModel load(const std::filesystem::path& dir);
};

enum class UpstreamMode {
    Predicted,     // level k+1 trains on level-k predicted positives with gold
    GoldPositive,  // level k+1 trains on gold positives of level k
};

struct CascadeConfig {
    svm::TrainConfig train;
    std::vector<double> lambda_grid = svm::default_lambda_grid();
    double keep_ratio = 0.25;
    double train_fraction = 0.8;
    UpstreamMode upstream = UpstreamMode::Predicted;
    std::size_t n_max = 3;
};

struct LevelReport {
    std::size_t pool = 0;        // labeled tweets reaching this level
    std::size_t train_size = 0;
    std::size_t test_size = 0;
    std::size_t negatives = 0;   // class sizes over the pool
    std::size_t positives = 0;
    double reg_lambda = 0.0;
    svm::Metrics cv;
    svm::Metrics test;
};

struct CascadeTraining {
    CascadeModel model;
    std::array<LevelReport, 3> reports;
};

CascadeTraining train_cascade(std::span<const TweetRecord> labeled, const KeywordFilter& filter,
                              const CascadeConfig& cfg = {});

ActivityLabel classify_tokens(std::span<const std::string> tokens, const CascadeModel& m);
ActivityLabel classify_tweet(const TweetRecord& t, const CascadeModel& m);

struct ChainCounts {
    std::size_t total = 0;
    std::size_t passed_filter = 0;
    std::size_t drinking_mention = 0;  // this and every deeper count are cumulative
    std::size_t user_drinking = 0;
    std::size_t user_drinking_now = 0;
};

ChainCounts count_chain(std::span<const ActivityLabel> labels);

}  // namespace geoact::cascade
