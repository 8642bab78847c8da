#include "deconf/log_odds.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include "deconf/error.hpp"

namespace deconf {

double ConfoundDistribution::entropy() const {
    double h = 0.0;
    for (double p : probs)
        if (p > 0.0) h -= p * std::log(p);
    return h;
}

LogOddsTable::LogOddsTable(Eigen::MatrixXd scores, std::vector<std::string> classes, std::vector<std::string> words,
                           double alpha0)
    : scores_(std::move(scores)), classes_(std::move(classes)), words_(std::move(words)), alpha0_(alpha0) {
    if (scores_.rows() != static_cast<Eigen::Index>(classes_.size()) ||
        scores_.cols() != static_cast<Eigen::Index>(words_.size()))
        throw Error("log-odds table shape does not match classes x words");
}

int LogOddsTable::class_index(const std::string& cls) const {
    auto it = std::find(classes_.begin(), classes_.end(), cls);
    if (it == classes_.end()) throw Error("unknown class \"" + cls + "\"");
    return static_cast<int>(it - classes_.begin());
}

LogOddsTable compute_log_odds(const Corpus& train, const Vocabulary& vocab, double alpha0) {
    if (!(alpha0 > 0.0)) throw Error("alpha0 must be positive");
    if (train.empty()) throw Error("empty corpus");

    auto classes = class_names(train);
    const auto labels = label_indices(train, classes);
    const int m = static_cast<int>(classes.size());
    const int V = vocab.size();

    Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(m, V);
    for (std::size_t d = 0; d < train.size(); ++d)
        for (const auto& tok : train[d].tokens) counts(labels[d], vocab.id_of(tok)) += 1.0;

    const Eigen::VectorXd class_totals = counts.rowwise().sum();
    const Eigen::RowVectorXd background = counts.colwise().sum();
    const double total = class_totals.sum();

    Eigen::MatrixXd scores = Eigen::MatrixXd::Zero(m, V);
    for (int w = 0; w < V; ++w) {
        if (background(w) <= 0.0) continue;
        const double alpha_w = alpha0 * background(w) / total;
        for (int y = 0; y < m; ++y) {
            const double f_in = counts(y, w);
            const double f_out = background(w) - f_in;
            const double n_in = class_totals(y);
            const double n_out = total - n_in;
            const double odds_in = (f_in + alpha_w) / std::max(n_in + alpha0 - f_in - alpha_w, 1e-12);
            const double odds_out = (f_out + alpha_w) / std::max(n_out + alpha0 - f_out - alpha_w, 1e-12);
            const double delta = std::log(odds_in) - std::log(odds_out);
            const double variance = 1.0 / (f_in + alpha_w) + 1.0 / (f_out + alpha_w);
            scores(y, w) = delta / std::sqrt(variance);
        }
    }
    return {std::move(scores), std::move(classes), vocab.tokens(), alpha0};
}

namespace {

std::vector<int> ranked_words(const LogOddsTable& table, int cls) {
    std::vector<int> ids;
    for (int w = 0; w < table.num_words(); ++w) {
        const auto& word = table.words()[static_cast<std::size_t>(w)];
        if (word == Vocabulary::pad_token || word == Vocabulary::unk_token || word == Vocabulary::mask_token)
            continue;
        ids.push_back(w);
    }
    std::sort(ids.begin(), ids.end(), [&](int a, int b) {
        const double sa = table.score(cls, a);
        const double sb = table.score(cls, b);
        if (sa != sb) return sa > sb;
        return table.words()[static_cast<std::size_t>(a)] < table.words()[static_cast<std::size_t>(b)];
    });
    return ids;
}

}  // namespace

std::vector<std::string> top_k_words(const LogOddsTable& table, const std::string& cls, int k) {
    if (k < 0) throw Error("k must be >= 0");
    const int y = table.class_index(cls);
    if (k == 0) return {};
    const auto ranked = ranked_words(table, y);
    std::vector<std::string> out;
    for (std::size_t i = 0; i < ranked.size() && i < static_cast<std::size_t>(k); ++i)
        out.push_back(table.words()[static_cast<std::size_t>(ranked[i])]);
    return out;
}

Eigen::MatrixXd word_class_distribution(const LogOddsTable& table) {
    Eigen::MatrixXd p = table.scores().unaryExpr([](double lo) {
        const double x = std::clamp(lo, -kLogOddsClamp, kLogOddsClamp);
        return 1.0 / (1.0 + std::exp(-x));
    });
    for (Eigen::Index y = 0; y < p.rows(); ++y) p.row(y) /= p.row(y).sum();
    return p;
}

std::vector<double> class_log_prior(const Corpus& train, std::span<const std::string> classes) {
    const auto labels = label_indices(train, classes);
    std::vector<double> counts(classes.size(), 0.0);
    for (int y : labels) counts[static_cast<std::size_t>(y)] += 1.0;
    const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
    if (*hi - *lo <= 0.01 * *hi) return {};
    const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
    std::vector<double> prior;
    for (double c : counts) prior.push_back(std::log(std::max(c, 0.5) / total));
    return prior;
}

ConfoundDistribution document_confound_distribution(std::span<const int> doc_ids, const Eigen::MatrixXd& pwy,
                                                     std::span<const double> log_prior) {
    const auto m = pwy.rows();
    if (!log_prior.empty() && static_cast<Eigen::Index>(log_prior.size()) != m)
        throw Error("class prior length does not match the number of classes");

    Eigen::VectorXd logits = Eigen::VectorXd::Zero(m);
    int scored = 0;
    for (int id : doc_ids) {
        if (id == Vocabulary::pad_id || id == Vocabulary::mask_id) continue;
        if (id < 0 || id >= pwy.cols()) throw Error("token id " + std::to_string(id) + " outside the table");
        logits += pwy.col(id).array().log().matrix();
        ++scored;
    }
    if (scored == 0) throw Error("no scoreable tokens");
    for (std::size_t y = 0; y < log_prior.size(); ++y) logits(static_cast<Eigen::Index>(y)) += log_prior[y];

    const double top = logits.maxCoeff();
    Eigen::VectorXd e = (logits.array() - top).exp();
    e /= e.sum();
    return {std::vector<double>(e.data(), e.data() + e.size())};
}

std::vector<ConfoundDistribution> log_odds_confounds(const std::vector<TokenIds>& docs, const LogOddsTable& table,
                                                     std::span<const double> log_prior) {
    const Eigen::MatrixXd pwy = word_class_distribution(table);
    std::vector<ConfoundDistribution> out;
    out.reserve(docs.size());
    for (const auto& d : docs) out.push_back(document_confound_distribution(d, pwy, log_prior));
    return out;
}

void write_log_odds(std::ostream& out, const LogOddsTable& table) {
    out << std::setprecision(17);
    for (int y = 0; y < table.num_classes(); ++y) {
        std::vector<int> ids(static_cast<std::size_t>(table.num_words()));
        std::iota(ids.begin(), ids.end(), 0);
        std::stable_sort(ids.begin(), ids.end(), [&](int a, int b) {
            const double sa = table.score(y, a);
            const double sb = table.score(y, b);
            if (sa != sb) return sa > sb;
            return table.words()[static_cast<std::size_t>(a)] < table.words()[static_cast<std::size_t>(b)];
        });
        for (int w : ids)
            out << table.words()[static_cast<std::size_t>(w)] << '\t' << table.classes()[static_cast<std::size_t>(y)]
                << '\t' << table.score(y, w) << '\n';
    }
}

LogOddsTable read_log_odds(std::istream& in, const Vocabulary& vocab) {
    std::map<std::string, std::vector<std::pair<int, double>>> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto t1 = line.find('\t');
        const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
        if (t2 == std::string::npos) throw Error("log-odds line " + std::to_string(line_no) + ": expected 3 fields");
        const std::string word = line.substr(0, t1);
        const std::string cls = line.substr(t1 + 1, t2 - t1 - 1);
        auto& row = rows[cls];
        if (!vocab.contains(word)) continue;
        row.emplace_back(vocab.id_of(word), std::stod(line.substr(t2 + 1)));
    }
    if (rows.empty()) throw Error("empty log-odds table");
    std::vector<std::string> classes;
    Eigen::MatrixXd scores = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()), vocab.size());
    for (const auto& [cls, entries] : rows) {
        const auto y = static_cast<Eigen::Index>(classes.size());
        classes.push_back(cls);
        for (const auto& [w, s] : entries) scores(y, w) = s;
    }
    return {std::move(scores), std::move(classes), vocab.tokens(), kDefaultAlpha0};
}

void write_confounds(std::ostream& out, const std::vector<ConfoundDistribution>& confounds) {
    out << std::setprecision(17);
    for (const auto& c : confounds) {
        for (std::size_t k = 0; k < c.probs.size(); ++k) out << (k ? " " : "") << c.probs[k];
        out << '\n';
    }
}

std::vector<ConfoundDistribution> read_confounds(std::istream& in) {
    std::vector<ConfoundDistribution> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        ConfoundDistribution c;
        double v;
        while (ss >> v) c.probs.push_back(v);
        if (!out.empty() && c.size() != out.front().size()) throw Error("confound rows have inconsistent lengths");
        out.push_back(std::move(c));
    }
    return out;
}

}  // namespace deconf
