#include "deconf/evaluate.hpp"

#include <algorithm>
#include <iomanip>
#include <istream>
#include <ostream>
#include <set>

#include <nlohmann/json.hpp>

#include "deconf/error.hpp"
#include "deconf/training.hpp"

namespace deconf {

Predictor neural_predictor(const Model& model, const Vocabulary& vocab) {
    return [&model, &vocab](const Document& doc) { return predict_proba(model, vocab.encode(doc.tokens)); };
}

bool SplitReport::operator==(const SplitReport& o) const {
    return accuracy == o.accuracy && per_class_accuracy == o.per_class_accuracy && num_examples == o.num_examples &&
           confusion.rows() == o.confusion.rows() && confusion.cols() == o.confusion.cols() && confusion == o.confusion;
}

SplitReport evaluate_split(const Predictor& predict, const Corpus& docs, std::span<const std::string> classes) {
    const auto m = static_cast<Eigen::Index>(classes.size());
    const auto gold = label_indices(docs, classes);
    SplitReport r;
    r.confusion = Eigen::MatrixXi::Zero(m, m);
    r.num_examples = static_cast<int>(docs.size());
    for (std::size_t i = 0; i < docs.size(); ++i) {
        const auto probs = predict(docs[i]);
        if (static_cast<Eigen::Index>(probs.size()) != m) throw Error("predictor output does not match class count");
        ++r.confusion(gold[i], argmax(probs));
    }
    const int correct = r.confusion.trace();
    r.accuracy = docs.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(docs.size());
    for (Eigen::Index y = 0; y < m; ++y) {
        const int row = r.confusion.row(y).sum();
        if (row > 0) r.per_class_accuracy[classes[static_cast<std::size_t>(y)]] = static_cast<double>(r.confusion(y, y)) / row;
    }
    return r;
}

EvalReport evaluate_accuracy(const Predictor& predict, std::span<const std::string> classes, const Corpus& test_in,
                             const Corpus& test_out) {
    EvalReport report;
    report.classes.assign(classes.begin(), classes.end());
    if (test_in.empty())
        report.warnings.emplace_back("in-domain test split is empty");
    else
        report.in = evaluate_split(predict, test_in, classes);
    if (test_out.empty())
        report.warnings.emplace_back("out-of-domain test split is empty");
    else
        report.out = evaluate_split(predict, test_out, classes);
    return report;
}

std::vector<EvalReport> masked_evaluation(const Predictor& predict, std::span<const std::string> classes,
                                          const LogOddsTable& table, const Corpus& test_in, const Corpus& test_out,
                                          std::span<const int> ks) {
    std::vector<EvalReport> reports;
    for (int k : ks) {
        const Corpus in = mask_corpus(test_in, table, k);
        const Corpus out = mask_corpus(test_out, table, k);
        EvalReport r = evaluate_accuracy(predict, classes, in, out);
        r.mask_k = k;
        reports.push_back(std::move(r));
    }
    return reports;
}

std::vector<std::string> prompt_ids(const Corpus& corpus) {
    std::set<std::string> ids;
    for (const auto& doc : corpus)
        if (doc.prompt) ids.insert(*doc.prompt);
    return {ids.begin(), ids.end()};
}

PromptSplit prompt_holdout_splits(const Corpus& train, const Corpus& dev, const std::string& prompt) {
    const auto known = prompt_ids(train);
    const auto known_dev = prompt_ids(dev);
    if (std::find(known.begin(), known.end(), prompt) == known.end() &&
        std::find(known_dev.begin(), known_dev.end(), prompt) == known_dev.end())
        throw Error("unknown prompt id \"" + prompt + "\"");

    PromptSplit s;
    s.prompt = prompt;
    for (const auto& doc : train)
        if (doc.prompt != prompt) s.train.push_back(doc);
    for (const auto& doc : dev) {
        if (doc.prompt == prompt) {
            Document held = doc;
            held.domain = Domain::out;
            s.test_out.push_back(std::move(held));
        } else {
            s.dev.push_back(doc);
        }
    }
    return s;
}

double mean_out_of_domain_accuracy(std::span<const EvalReport> reports) {
    double total = 0.0;
    int n = 0;
    for (const auto& r : reports)
        if (r.out) {
            total += r.out->accuracy;
            ++n;
        }
    if (n == 0) throw Error("no out-of-domain results to average");
    return total / n;
}

// ---------------------------------------------------------------------------
// Serialisation

namespace {

nlohmann::json split_to_json(const SplitReport& s) {
    nlohmann::json j;
    j["accuracy"] = s.accuracy;
    j["num_examples"] = s.num_examples;
    j["per_class_accuracy"] = s.per_class_accuracy;
    std::vector<std::vector<int>> rows;
    for (Eigen::Index r = 0; r < s.confusion.rows(); ++r) {
        rows.emplace_back();
        for (Eigen::Index c = 0; c < s.confusion.cols(); ++c) rows.back().push_back(s.confusion(r, c));
    }
    j["confusion"] = rows;
    return j;
}

SplitReport split_from_json(const nlohmann::json& j) {
    SplitReport s;
    s.accuracy = j.at("accuracy").get<double>();
    s.num_examples = j.at("num_examples").get<int>();
    s.per_class_accuracy = j.at("per_class_accuracy").get<std::map<std::string, double>>();
    const auto rows = j.at("confusion").get<std::vector<std::vector<int>>>();
    s.confusion = Eigen::MatrixXi::Zero(static_cast<Eigen::Index>(rows.size()),
                                        rows.empty() ? 0 : static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows[r].size(); ++c)
            s.confusion(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    return s;
}

void write_split_text(std::ostream& out, const std::string& prefix, const SplitReport& s) {
    out << prefix << "accuracy: " << s.accuracy << '\n';
    out << prefix << "num_examples: " << s.num_examples << '\n';
    for (const auto& [cls, acc] : s.per_class_accuracy) out << prefix << "accuracy[" << cls << "]: " << acc << '\n';
}

}  // namespace

void write_report_text(std::ostream& out, const EvalReport& report) {
    const auto old = out.precision(6);
    out << "mask_k: " << (report.mask_k ? std::to_string(*report.mask_k) : "none") << '\n';
    if (report.in) write_split_text(out, "in.", *report.in);
    if (report.out) write_split_text(out, "out.", *report.out);
    for (const auto& w : report.warnings) out << "warning: " << w << '\n';
    out.precision(old);
}

void write_report_jsonl(std::ostream& out, const EvalReport& report) {
    nlohmann::json j;
    j["classes"] = report.classes;
    j["mask_k"] = report.mask_k ? nlohmann::json(*report.mask_k) : nlohmann::json(nullptr);
    j["in"] = report.in ? split_to_json(*report.in) : nlohmann::json(nullptr);
    j["out"] = report.out ? split_to_json(*report.out) : nlohmann::json(nullptr);
    j["warnings"] = report.warnings;
    out << j.dump() << '\n';
}

std::vector<EvalReport> read_reports_jsonl(std::istream& in) {
    std::vector<EvalReport> reports;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line);
        EvalReport r;
        r.classes = j.at("classes").get<std::vector<std::string>>();
        if (!j.at("mask_k").is_null()) r.mask_k = j.at("mask_k").get<int>();
        if (!j.at("in").is_null()) r.in = split_from_json(j.at("in"));
        if (!j.at("out").is_null()) r.out = split_from_json(j.at("out"));
        r.warnings = j.at("warnings").get<std::vector<std::string>>();
        reports.push_back(std::move(r));
    }
    return reports;
}

void write_confusion_csv(std::ostream& out, const std::vector<std::string>& classes, const Eigen::MatrixXi& confusion) {
    out << "gold";
    for (const auto& c : classes) out << ',' << c;
    out << '\n';
    for (Eigen::Index r = 0; r < confusion.rows(); ++r) {
        out << classes[static_cast<std::size_t>(r)];
        for (Eigen::Index c = 0; c < confusion.cols(); ++c) out << ',' << confusion(r, c);
        out << '\n';
    }
}

}  // namespace deconf
