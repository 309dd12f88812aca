#include "geoact/cascade.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "geoact/errors.hpp"

namespace geoact::cascade {

namespace {

constexpr std::string_view kDefaultKeywords[] = {
    "alcohol", "bar",    "beer",    "booze",  "champagne", "cocktail", "drink",  "drunk",
    "hammered", "hangover", "liquor", "margarita", "party", "pub",     "rum",    "shot",
    "tequila",  "tipsy",  "turnup",  "vodka",  "wasted",    "whiskey",  "wine",
};

const char* const kLevelNames[] = {"SVM-1 (drinking mention)", "SVM-2 (user drinking)",
                                   "SVM-3 (user drinking now)"};

std::vector<std::string> variants(const std::string& k) {
    std::vector<std::string> out{k, k + "s", k + "ing", k + "ed"};
    if (k.size() > 2 && k.back() == 'e') out.push_back(k.substr(0, k.size() - 1) + "ing");
    return out;
}

Answer answer_at(const GoldLabels& g, std::size_t level) {
    switch (level) {
        case 0: return g.q1;
        case 1: return g.q2;
        default: return g.q3;
    }
}

}  // namespace

std::span<const std::string_view> default_keywords() {
    return kDefaultKeywords;
}

KeywordFilter::KeywordFilter(std::span<const std::string> keywords) {
    for (const auto& raw : keywords) {
        auto toks = text::normalize(raw);
        if (toks.empty()) continue;
        std::string phrase = toks[0];
        for (std::size_t i = 1; i < toks.size(); ++i) phrase += " " + toks[i];
        keywords_.push_back(phrase);
        if (toks.size() == 1) {
            for (auto& v : variants(phrase)) terms_.insert(std::move(v));
        } else {
            terms_.insert(phrase);
        }
    }
    if (terms_.empty()) throw DataError("keyword filter is empty");
}

KeywordFilter KeywordFilter::defaults() {
    std::vector<std::string> k(std::begin(kDefaultKeywords), std::end(kDefaultKeywords));
    return KeywordFilter(k);
}

KeywordFilter KeywordFilter::read(std::istream& in) {
    std::vector<std::string> k;
    std::string line;
    while (std::getline(in, line)) {
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        auto e = line.find_last_not_of(" \t\r");
        k.push_back(line.substr(b, e - b + 1));
    }
    return KeywordFilter(k);
}

KeywordFilter KeywordFilter::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    return read(in);
}

bool KeywordFilter::matches(std::span<const std::string> tokens) const {
    for (const auto& t : tokens) {
        std::string_view v = t;
        if (v.size() > 1 && v.front() == '#') v.remove_prefix(1);
        if (terms_.contains(v)) return true;
    }
    for (const auto& g : text::extract_ngrams(tokens, 3))
        if (g.find(' ') != std::string::npos && terms_.contains(g)) return true;
    return false;
}

bool KeywordFilter::matches_text(std::string_view text) const {
    return matches(text::normalize(text));
}

bool keyword_match(const TweetRecord& t, const KeywordFilter& f) {
    return f.matches_text(t.text);
}

std::string_view to_string(ActivityLabel label) {
    switch (label) {
        case ActivityLabel::FilteredOut: return "filtered_out";
        case ActivityLabel::NoMention: return "no_mention";
        case ActivityLabel::DrinkingMention: return "drinking_mention";
        case ActivityLabel::UserDrinking: return "user_drinking";
        case ActivityLabel::UserDrinkingNow: return "user_drinking_now";
    }
    return "filtered_out";
}

ActivityLabel parse_activity_label(std::string_view s) {
    for (auto l : {ActivityLabel::FilteredOut, ActivityLabel::NoMention, ActivityLabel::DrinkingMention,
                   ActivityLabel::UserDrinking, ActivityLabel::UserDrinkingNow})
        if (to_string(l) == s) return l;
    throw DataError("unknown activity label \"" + std::string(s) + "\"");
}

int depth(ActivityLabel label) noexcept {
    return static_cast<int>(label);
}

void CascadeModel::save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "keywords.txt");
        if (!out) throw DataError("cannot write " + (dir / "keywords.txt").string());
        for (const auto& k : filter.keywords()) out << k << '\n';
    }
    for (std::size_t k = 0; k < levels.size(); ++k) {
        const auto stem = "level" + std::to_string(k + 1);
        levels[k].vocab.save(dir / (stem + ".vocab.tsv"));
        levels[k].model.save(dir / (stem + ".model"));
    }
}

CascadeModel CascadeModel::load(const std::filesystem::path& dir) {
    auto filter = KeywordFilter::load(dir / "keywords.txt");
    std::array<Level, 3> levels;
    for (std::size_t k = 0; k < levels.size(); ++k) {
        const auto stem = "level" + std::to_string(k + 1);
        levels[k].vocab = text::Vocabulary::load(dir / (stem + ".vocab.tsv"));
        levels[k].model = svm::LinearModel::load(dir / (stem + ".model"));
    }
    return CascadeModel{std::move(filter), std::move(levels)};
}

CascadeTraining train_cascade(std::span<const TweetRecord> labeled, const KeywordFilter& filter,
                              const CascadeConfig& cfg) {
    std::vector<text::TokenSequence> tokens;
    std::vector<const GoldLabels*> gold;
    for (const auto& t : labeled) {
        if (!t.gold || t.gold->q1 == Answer::Absent) continue;
        auto toks = text::normalize(t.text);
        if (!filter.matches(toks)) continue;
        tokens.push_back(std::move(toks));
        gold.push_back(&*t.gold);
    }

    std::vector<std::size_t> pool(tokens.size());
    for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;

    std::array<Level, 3> levels;
    std::array<LevelReport, 3> reports;
    for (std::size_t k = 0; k < 3; ++k) {
        const char* name = kLevelNames[k];
        std::vector<svm::Label> y;
        y.reserve(pool.size());
        for (auto i : pool) y.push_back(answer_at(*gold[i], k) == Answer::Yes ? 1 : -1);
        auto& rep = reports[k];
        rep.pool = pool.size();
        rep.positives = static_cast<std::size_t>(std::count(y.begin(), y.end(), 1));
        rep.negatives = y.size() - rep.positives;
        if (rep.positives == 0 || rep.negatives == 0)
            throw DegenerateLabelsError(std::string(name) + ": training pool has a single class (" +
                                        std::to_string(rep.positives) + " positive, " +
                                        std::to_string(rep.negatives) + " negative)");

        const std::uint64_t seed = cfg.train.seed + k;
        const auto split = svm::stratified_split(y, cfg.train_fraction, seed);

        std::vector<std::vector<std::string>> docs;
        docs.reserve(split.train.size());
        for (auto j : split.train) docs.push_back(text::extract_ngrams(tokens[pool[j]], cfg.n_max));
        levels[k].vocab = text::build_vocab(docs, cfg.keep_ratio);

        std::vector<FeatureVector> X(pool.size());
        for (std::size_t j = 0; j < pool.size(); ++j)
            X[j] = text::vectorize(tokens[pool[j]], levels[k].vocab, cfg.n_max);

        std::vector<FeatureVector> Xtr, Xte;
        std::vector<svm::Label> ytr, yte;
        for (auto j : split.train) {
            Xtr.push_back(X[j]);
            ytr.push_back(y[j]);
        }
        for (auto j : split.test) {
            Xte.push_back(X[j]);
            yte.push_back(y[j]);
        }
        rep.train_size = Xtr.size();
        rep.test_size = Xte.size();

        svm::TrainConfig tc = cfg.train;
        tc.seed = seed;
        svm::CrossValidationResult cv;
        try {
            cv = svm::cross_validate(Xtr, ytr, cfg.lambda_grid, tc);
        } catch (const DegenerateLabelsError& e) {
            throw DegenerateLabelsError(std::string(name) + ": " + e.what());
        }
        rep.reg_lambda = cv.best.reg_lambda;
        rep.cv = cv.best_mean;
        levels[k].model = svm::train(Xtr, ytr, cv.best);
        rep.test = svm::evaluate(levels[k].model, Xte, yte);

        if (k == 2) break;
        std::vector<std::size_t> next;
        for (std::size_t j = 0; j < pool.size(); ++j) {
            const auto& g = *gold[pool[j]];
            if (answer_at(g, k + 1) == Answer::Absent) continue;
            const bool upstream_yes = cfg.upstream == UpstreamMode::Predicted
                                          ? svm::classify(levels[k].model, X[j]) > 0
                                          : answer_at(g, k) == Answer::Yes;
            if (upstream_yes) next.push_back(pool[j]);
        }
        pool = std::move(next);
    }
    return {CascadeModel{filter, std::move(levels)}, reports};
}

ActivityLabel classify_tokens(std::span<const std::string> tokens, const CascadeModel& m) {
    if (!m.filter.matches(tokens)) return ActivityLabel::FilteredOut;
    constexpr ActivityLabel on_negative[] = {ActivityLabel::NoMention, ActivityLabel::DrinkingMention,
                                             ActivityLabel::UserDrinking};
    for (std::size_t k = 0; k < m.levels.size(); ++k) {
        const auto x = text::vectorize(tokens, m.levels[k].vocab);
        if (svm::classify(m.levels[k].model, x) < 0) return on_negative[k];
    }
    return ActivityLabel::UserDrinkingNow;
}

ActivityLabel classify_tweet(const TweetRecord& t, const CascadeModel& m) {
    return classify_tokens(text::normalize(t.text), m);
}

ChainCounts count_chain(std::span<const ActivityLabel> labels) {
    ChainCounts c;
    c.total = labels.size();
    for (auto l : labels) {
        const int d = depth(l);
        if (d >= 1) ++c.passed_filter;
        if (d >= 2) ++c.drinking_mention;
        if (d >= 3) ++c.user_drinking;
        if (d >= 4) ++c.user_drinking_now;
    }
    return c;
}

}  // namespace geoact::cascade
