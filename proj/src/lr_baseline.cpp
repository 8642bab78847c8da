#include "deconf/lr_baseline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "deconf/error.hpp"
#include "deconf/model.hpp"

namespace deconf {

namespace detail {
extern const std::string_view kFunctionWordsData;
}

namespace {

struct ParsedList {
    std::string version;
    std::vector<std::string> words;
};

ParsedList parse_function_words(std::istream& in) {
    ParsedList out;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line.front() == '#') {
            const auto pos = line.find("version:");
            if (pos != std::string::npos) {
                out.version = line.substr(pos + 8);
                out.version.erase(0, out.version.find_first_not_of(' '));
            }
            continue;
        }
        if (std::find(out.words.begin(), out.words.end(), line) == out.words.end()) out.words.push_back(line);
    }
    return out;
}

const ParsedList& builtin_list() {
    static const ParsedList list = [] {
        std::istringstream in{std::string(detail::kFunctionWordsData)};
        return parse_function_words(in);
    }();
    return list;
}

bool is_sentence_end(const std::string& t) { return t == "." || t == "!" || t == "?"; }

}  // namespace

const std::vector<std::string>& default_function_words() { return builtin_list().words; }
std::string_view function_words_version() { return builtin_list().version; }

std::vector<std::string> load_function_words(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open function-word list " + path);
    auto words = parse_function_words(in).words;
    if (words.empty()) throw Error("function-word list " + path + " is empty");
    return words;
}

double mean_sentence_length(const std::vector<std::string>& tokens) {
    int sentences = 0;
    int words = 0;
    int current = 0;
    for (const auto& t : tokens) {
        if (is_sentence_end(t)) {
            if (current > 0) ++sentences;
            current = 0;
        } else {
            ++current;
            ++words;
        }
    }
    if (current > 0) ++sentences;
    return sentences ? static_cast<double>(words) / sentences : 0.0;
}

Eigen::VectorXd StyleFeatureSpace::features(const Document& doc) const {
    Eigen::VectorXd f = Eigen::VectorXd::Zero(size());
    const double n = static_cast<double>(std::max<std::size_t>(doc.tokens.size(), 1));
    for (const auto& t : doc.tokens) {
        auto it = std::find(function_words.begin(), function_words.end(), t);
        if (it != function_words.end()) f(it - function_words.begin()) += 1.0 / n;
    }
    if (!pos_trigrams.empty() && doc.pos && doc.pos->size() >= 3) {
        const auto& tags = *doc.pos;
        const double trigrams = static_cast<double>(tags.size() - 2);
        const auto offset = static_cast<Eigen::Index>(function_words.size());
        for (std::size_t i = 0; i + 2 < tags.size(); ++i) {
            const std::string key = tags[i] + ' ' + tags[i + 1] + ' ' + tags[i + 2];
            auto it = std::lower_bound(pos_trigrams.begin(), pos_trigrams.end(), key);
            if (it != pos_trigrams.end() && *it == key) f(offset + (it - pos_trigrams.begin())) += 1.0 / trigrams;
        }
    }
    f(length_index()) = mean_sentence_length(doc.tokens);
    return f;
}

StyleFeatureSpace make_feature_space(const Corpus& train, std::vector<std::string> function_words) {
    StyleFeatureSpace space;
    space.function_words = std::move(function_words);
    std::map<std::string, int> counts;
    for (const auto& doc : train) {
        if (!doc.pos || doc.pos->size() < 3) continue;
        const auto& tags = *doc.pos;
        for (std::size_t i = 0; i + 2 < tags.size(); ++i) ++counts[tags[i] + ' ' + tags[i + 1] + ' ' + tags[i + 2]];
    }
    for (const auto& [key, c] : counts)
        if (c >= 2) space.pos_trigrams.push_back(key);
    return space;
}

std::vector<double> LinearModel::predict_proba(const Document& doc) const {
    const Eigen::VectorXd x = ((space.features(doc) - mean).array() / scale.array()).matrix();
    const Eigen::VectorXd z = weights * x + bias;
    return softmax({z.data(), static_cast<std::size_t>(z.size())});
}

namespace {

// Full-batch gradient descent with a backtracking step on the penalised
// negative log-likelihood.
void fit(LinearModel& model, const Eigen::MatrixXd& X, const std::vector<int>& y, double l2, const LrConfig& config) {
    const auto m = static_cast<Eigen::Index>(model.classes.size());
    const auto F = X.rows();
    const auto N = X.cols();
    model.weights = Eigen::MatrixXd::Zero(m, F);
    model.bias = Eigen::VectorXd::Zero(m);
    model.l2 = l2;

    auto objective = [&](const Eigen::MatrixXd& W, const Eigen::VectorXd& b, Eigen::MatrixXd* gW, Eigen::VectorXd* gb) {
        Eigen::MatrixXd Z = W * X;
        Z.colwise() += b;
        double nll = 0.0;
        for (Eigen::Index i = 0; i < N; ++i) {
            auto col = Z.col(i);
            const double top = col.maxCoeff();
            col = (col.array() - top).exp().matrix();
            const double s = col.sum();
            col /= s;
            nll -= std::log(std::max(col(y[static_cast<std::size_t>(i)]), 1e-300));
            col(y[static_cast<std::size_t>(i)]) -= 1.0;
        }
        if (gW) *gW = Z * X.transpose() / static_cast<double>(N) + l2 * W;
        if (gb) *gb = Z.rowwise().sum() / static_cast<double>(N);
        return nll / static_cast<double>(N) + 0.5 * l2 * W.squaredNorm();
    };

    double step = 1.0;
    Eigen::MatrixXd gW;
    Eigen::VectorXd gb;
    double f = objective(model.weights, model.bias, &gW, &gb);
    for (int it = 0; it < config.max_iterations; ++it) {
        const double gnorm2 = gW.squaredNorm() + gb.squaredNorm();
        if (std::sqrt(gnorm2) < config.tolerance) break;
        while (true) {
            const Eigen::MatrixXd W = model.weights - step * gW;
            const Eigen::VectorXd b = model.bias - step * gb;
            const double f_new = objective(W, b, nullptr, nullptr);
            if (f_new <= f - 0.5 * step * gnorm2 || step < 1e-10) {
                model.weights = W;
                model.bias = b;
                f = objective(model.weights, model.bias, &gW, &gb);
                step *= 2.0;
                break;
            }
            step *= 0.5;
        }
    }
}

}  // namespace

LinearModel train_lr_baseline(const Corpus& train, const Corpus& dev, const LrConfig& config) {
    if (train.empty()) throw Error("no documents with required fields for the logistic-regression baseline");
    if (config.l2_grid.empty()) throw Error("empty L2 grid");

    LinearModel model;
    model.classes = class_names(train);
    model.space = make_feature_space(train, config.function_words);
    const auto labels = label_indices(train, model.classes);

    const auto F = model.space.size();
    Eigen::MatrixXd X(F, static_cast<Eigen::Index>(train.size()));
    for (std::size_t i = 0; i < train.size(); ++i) X.col(static_cast<Eigen::Index>(i)) = model.space.features(train[i]);
    model.mean = X.rowwise().mean();
    model.scale = ((X.colwise() - model.mean).array().square().rowwise().mean().sqrt()).matrix();
    for (Eigen::Index k = 0; k < F; ++k)
        if (model.scale(k) < 1e-12) model.scale(k) = 1.0;
    X = ((X.colwise() - model.mean).array().colwise() / model.scale.array()).matrix();

    const auto dev_labels = dev.empty() ? std::vector<int>{} : label_indices(dev, model.classes);
    LinearModel best;
    double best_acc = -1.0;
    for (double l2 : config.l2_grid) {
        LinearModel candidate = model;
        fit(candidate, X, labels, l2, config);
        double acc = 0.0;
        if (!dev.empty()) {
            std::size_t correct = 0;
            for (std::size_t i = 0; i < dev.size(); ++i)
                if (argmax(candidate.predict_proba(dev[i])) == dev_labels[i]) ++correct;
            acc = static_cast<double>(correct) / static_cast<double>(dev.size());
        }
        if (acc > best_acc) {
            best_acc = acc;
            best = std::move(candidate);
        }
    }
    return best;
}

}  // namespace deconf
