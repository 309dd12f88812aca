#include "geoact/svm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <string>

#include "geoact/errors.hpp"

namespace geoact::svm {

namespace {

std::string format_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Fisher-Yates with a raw 64-bit engine so the permutation does not depend
// on the standard library's distribution implementation.
void shuffle(std::vector<std::size_t>& v, std::mt19937_64& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(v[i - 1], v[j]);
    }
}

std::size_t dimension_of(std::span<const FeatureVector> X) {
    std::size_t dim = 0;
    for (const auto& x : X)
        if (!x.empty()) dim = std::max<std::size_t>(dim, x.entries().back().index + 1u);
    return dim;
}

struct ClassWeights {
    double pos = 1.0;
    double neg = 1.0;
    double of(Label y) const noexcept { return y > 0 ? pos : neg; }
};

ClassWeights class_weights(std::span<const Label> y, bool balance) {
    ClassWeights w;
    if (!balance) return w;
    const auto n = static_cast<double>(y.size());
    const auto npos = static_cast<double>(std::count(y.begin(), y.end(), 1));
    const auto nneg = n - npos;
    w.pos = n / (2.0 * npos);
    w.neg = n / (2.0 * nneg);
    return w;
}

void add_scaled(std::vector<double>& dst, const FeatureVector& x, double scale) {
    for (const auto& e : x.entries()) dst[e.index] += scale * e.value;
}

}  // namespace

void LinearModel::write(std::ostream& out) const {
    out << "bias\t" << format_real(bias) << '\n';
    out << "threshold\t" << format_real(threshold) << '\n';
    out << "dimension\t" << weights.size() << '\n';
    for (std::size_t i = 0; i < weights.size(); ++i)
        if (weights[i] != 0.0) out << i << '\t' << format_real(weights[i]) << '\n';
    out << "end\n";
}

LinearModel LinearModel::read(std::istream& in) {
    LinearModel m;
    bool have_bias = false, have_threshold = false, have_dim = false;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (line == "end") {
            if (!have_bias || !have_threshold || !have_dim) throw ParseError(lineno, "model header incomplete");
            return m;
        }
        auto tab = line.find('\t');
        if (tab == std::string::npos) throw ParseError(lineno, "expected \"key<TAB>value\"");
        const std::string key = line.substr(0, tab);
        const std::string value = line.substr(tab + 1);
        try {
            if (key == "bias") {
                m.bias = std::stod(value);
                have_bias = true;
            } else if (key == "threshold") {
                m.threshold = std::stod(value);
                have_threshold = true;
            } else if (key == "dimension") {
                m.weights.assign(std::stoul(value), 0.0);
                have_dim = true;
            } else {
                if (!have_dim) throw ParseError(lineno, "weight before dimension");
                std::size_t idx = std::stoul(key);
                if (idx >= m.weights.size()) throw ParseError(lineno, "weight index beyond dimension");
                m.weights[idx] = std::stod(value);
            }
        } catch (const std::invalid_argument&) {
            throw ParseError(lineno, "bad number");
        } catch (const std::out_of_range&) {
            throw ParseError(lineno, "number out of range");
        }
    }
    throw DataError("model file ended before \"end\" marker");
}

void LinearModel::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    write(out);
}

LinearModel LinearModel::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    return read(in);
}

double decision(const LinearModel& m, const FeatureVector& x) noexcept {
    return x.dot(m.weights) + m.bias;
}

Label classify(const LinearModel& m, const FeatureVector& x) noexcept {
    return decision(m, x) - m.threshold >= 0.0 ? 1 : -1;
}

void TrainConfig::validate() const {
    if (!(reg_lambda > 0.0) || !std::isfinite(reg_lambda)) throw DataError("reg_lambda must be positive");
    if (epochs == 0) throw DataError("epochs must be positive");
    if (folds < 2) throw DataError("folds must be at least 2");
}

void check_labels(std::span<const Label> y, const char* context) {
    std::size_t pos = 0, neg = 0;
    for (Label l : y) {
        if (l == 1)
            ++pos;
        else if (l == -1)
            ++neg;
        else
            throw DataError(std::string(context) + ": labels must be -1 or +1");
    }
    if (pos == 0 || neg == 0)
        throw DegenerateLabelsError(std::string(context) + ": training data has a single class (" +
                                    std::to_string(pos) + " positive, " + std::to_string(neg) + " negative)");
}

double objective(const LinearModel& m, std::span<const FeatureVector> X, std::span<const Label> y,
                 const TrainConfig& cfg) {
    const auto cw = class_weights(y, cfg.balance_classes);
    double loss = 0.0, total = 0.0;
    for (std::size_t i = 0; i < X.size(); ++i) {
        const double c = cw.of(y[i]);
        loss += c * std::max(0.0, 1.0 - y[i] * decision(m, X[i]));
        total += c;
    }
    double sq = 0.0;
    for (double w : m.weights) sq += w * w;
    return 0.5 * cfg.reg_lambda * sq + (total > 0.0 ? loss / total : 0.0);
}

LinearModel train(std::span<const FeatureVector> X, std::span<const Label> y, const TrainConfig& cfg,
                  TrainTrace* trace) {
    cfg.validate();
    if (X.size() != y.size()) throw DataError("train: feature and label counts differ");
    if (X.size() < 2) throw DegenerateLabelsError("train: need at least two examples");
    check_labels(y, "train");

    const std::size_t n = X.size();
    const std::size_t dim = dimension_of(X);
    const auto cw = class_weights(y, cfg.balance_classes);
    const double lambda = cfg.reg_lambda;

    double mean_sq = 0.0;
    for (const auto& x : X) mean_sq += x.squared_norm();
    mean_sq /= static_cast<double>(n);
    const double eta0 = 1.0 / std::max(1.0, mean_sq);
    const double t0 = std::max(1.0, 1.0 / (lambda * eta0));

    // w = v / wdiv; averaged iterate = (u + wfrac * v) / adiv.
    std::vector<double> v(dim, 0.0), u(dim, 0.0);
    double wdiv = 1.0, adiv = 1.0, wfrac = 0.0;
    double bias = 0.0, avg_bias = 0.0;

    auto renorm = [&] {
        for (std::size_t k = 0; k < dim; ++k) {
            u[k] = (u[k] + wfrac * v[k]) / adiv;
            v[k] /= wdiv;
        }
        wdiv = adiv = 1.0;
        wfrac = 0.0;
    };
    auto averaged = [&] {
        LinearModel m;
        m.weights.resize(dim);
        for (std::size_t k = 0; k < dim; ++k) m.weights[k] = (u[k] + wfrac * v[k]) / adiv;
        m.bias = avg_bias;
        return m;
    };

    std::mt19937_64 rng(cfg.seed);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    double t = 0.0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle(order, rng);
        for (std::size_t i : order) {
            t += 1.0;
            const double eta = 1.0 / (lambda * (t + t0));
            const double mu = 1.0 / std::max(1.0, t - static_cast<double>(n));
            const auto& x = X[i];
            const double s = x.dot(v) / wdiv + bias;
            const double d = (y[i] * s < 1.0) ? cw.of(y[i]) * y[i] : 0.0;

            wdiv /= (1.0 - eta * lambda);
            const double etd = eta * d * wdiv;
            if (d != 0.0) add_scaled(v, x, etd);
            if (mu >= 1.0) {
                std::fill(u.begin(), u.end(), 0.0);
                adiv = wdiv;
                wfrac = 1.0;
            } else {
                if (d != 0.0) add_scaled(u, x, -wfrac * etd);
                adiv /= (1.0 - mu);
                wfrac += mu * adiv / wdiv;
            }
            bias += eta * d;
            avg_bias += mu * (bias - avg_bias);
            if (wdiv > 1e5 || adiv > 1e5) renorm();
        }
        if (trace) trace->objective_per_epoch.push_back(objective(averaged(), X, y, cfg));
    }
    return averaged();
}

double harmonic_f(double precision, double recall) noexcept {
    return (precision + recall > 0.0) ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

Metrics Metrics::from_counts(std::size_t tp, std::size_t fp, std::size_t tn, std::size_t fn) {
    Metrics m{tp, fp, tn, fn};
    m.precision = (tp + fp) ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    m.recall = (tp + fn) ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    m.f_score = harmonic_f(m.precision, m.recall);
    return m;
}

Metrics evaluate_predictions(std::span<const Label> truth, std::span<const Label> predicted) {
    if (truth.size() != predicted.size()) throw DataError("evaluate: size mismatch");
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (predicted[i] > 0)
            (truth[i] > 0 ? tp : fp)++;
        else
            (truth[i] > 0 ? fn : tn)++;
    }
    return Metrics::from_counts(tp, fp, tn, fn);
}

Metrics evaluate(const LinearModel& m, std::span<const FeatureVector> X, std::span<const Label> y) {
    if (X.size() != y.size()) throw DataError("evaluate: feature and label counts differ");
    std::vector<Label> pred(X.size());
    for (std::size_t i = 0; i < X.size(); ++i) pred[i] = classify(m, X[i]);
    return evaluate_predictions(y, pred);
}

std::vector<double> default_lambda_grid() {
    return {1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1e0, 1e1};
}

std::vector<std::size_t> stratified_folds(std::span<const Label> y, std::size_t folds, std::uint64_t seed) {
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < y.size(); ++i) (y[i] > 0 ? pos : neg).push_back(i);
    std::mt19937_64 rng(seed);
    shuffle(pos, rng);
    shuffle(neg, rng);
    std::vector<std::size_t> fold(y.size());
    for (std::size_t k = 0; k < pos.size(); ++k) fold[pos[k]] = k % folds;
    // Offset negatives so small classes do not all pile into fold 0.
    for (std::size_t k = 0; k < neg.size(); ++k) fold[neg[k]] = (k + pos.size()) % folds;
    return fold;
}

Split stratified_split(std::span<const Label> y, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw DataError("train fraction must lie in (0, 1)");
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < y.size(); ++i) (y[i] > 0 ? pos : neg).push_back(i);
    std::mt19937_64 rng(seed);
    Split s;
    for (auto* cls : {&pos, &neg}) {
        shuffle(*cls, rng);
        auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(cls->size())));
        if (cls->size() >= 2) n_train = std::clamp<std::size_t>(n_train, 1, cls->size() - 1);
        s.train.insert(s.train.end(), cls->begin(), cls->begin() + static_cast<std::ptrdiff_t>(n_train));
        s.test.insert(s.test.end(), cls->begin() + static_cast<std::ptrdiff_t>(n_train), cls->end());
    }
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.test.begin(), s.test.end());
    return s;
}

CrossValidationResult cross_validate(std::span<const FeatureVector> X, std::span<const Label> y,
                                     std::span<const double> lambda_grid, const TrainConfig& cfg) {
    cfg.validate();
    if (lambda_grid.empty()) throw DataError("cross_validate: empty lambda grid");
    if (X.size() != y.size()) throw DataError("cross_validate: feature and label counts differ");
    check_labels(y, "cross_validate");

    const auto fold = stratified_folds(y, cfg.folds, cfg.seed);
    for (std::size_t f = 0; f < cfg.folds; ++f) {
        bool has_pos = false, has_neg = false;
        for (std::size_t i = 0; i < y.size(); ++i)
            if (fold[i] == f) (y[i] > 0 ? has_pos : has_neg) = true;
        if (!has_pos || !has_neg)
            throw DegenerateLabelsError("cross_validate: fold " + std::to_string(f) +
                                        " lacks one class; too few examples for " + std::to_string(cfg.folds) +
                                        " folds");
    }

    std::vector<double> grid(lambda_grid.begin(), lambda_grid.end());
    std::sort(grid.begin(), grid.end());

    CrossValidationResult result;
    bool have_best = false;
    for (double lambda : grid) {
        TrainConfig c = cfg;
        c.reg_lambda = lambda;
        double p = 0.0, r = 0.0, fs = 0.0;
        std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
        for (std::size_t f = 0; f < cfg.folds; ++f) {
            std::vector<FeatureVector> Xtr, Xte;
            std::vector<Label> ytr, yte;
            for (std::size_t i = 0; i < y.size(); ++i) {
                if (fold[i] == f) {
                    Xte.push_back(X[i]);
                    yte.push_back(y[i]);
                } else {
                    Xtr.push_back(X[i]);
                    ytr.push_back(y[i]);
                }
            }
            const auto model = train(Xtr, ytr, c);
            const auto m = evaluate(model, Xte, yte);
            p += m.precision;
            r += m.recall;
            fs += m.f_score;
            tp += m.tp;
            fp += m.fp;
            tn += m.tn;
            fn += m.fn;
        }
        const auto k = static_cast<double>(cfg.folds);
        Metrics mean{tp, fp, tn, fn, p / k, r / k, fs / k};
        result.scores.push_back({lambda, mean});
        if (!have_best || mean.f_score > result.best_mean.f_score) {
            result.best = c;
            result.best_mean = mean;
            have_best = true;
        }
    }
    return result;
}

}  // namespace geoact::svm
