#include "deconf/analyze.hpp"

#include <algorithm>
#include <iomanip>
#include <ostream>

#include "deconf/error.hpp"

namespace deconf {

std::string_view to_string(LexiconMethod m) { return m == LexiconMethod::attention ? "attention" : "saliency"; }

void LexiconAccumulator::add(std::span<const int> doc_ids, std::span<const double> scores) {
    if (doc_ids.size() != scores.size()) throw Error("lexicon: score count does not match token count");
    for (std::size_t i = 0; i < doc_ids.size(); ++i) {
        const int id = doc_ids[i];
        if (id == Vocabulary::pad_id) continue;
        const auto idx = static_cast<std::size_t>(id);
        if (idx >= sums_.size()) {
            sums_.resize(idx + 1, 0.0);
            counts_.resize(idx + 1, 0);
        }
        sums_[idx] += scores[i];
        ++counts_[idx];
    }
}

LexiconReport LexiconAccumulator::finish(const Vocabulary& vocab, LexiconMethod method, int top_k,
                                         int min_count) const {
    LexiconReport report;
    report.method = method;
    report.top_k = top_k;
    report.min_count = min_count;
    for (std::size_t id = 0; id < counts_.size(); ++id) {
        if (counts_[id] == 0 || counts_[id] < min_count) continue;
        if (id == Vocabulary::pad_id || id == Vocabulary::mask_id) continue;
        report.entries.push_back({vocab.token_of(static_cast<int>(id)), sums_[id] / static_cast<double>(counts_[id]),
                                  counts_[id]});
    }
    std::sort(report.entries.begin(), report.entries.end(), [](const LexiconEntry& a, const LexiconEntry& b) {
        return a.mean_score != b.mean_score ? a.mean_score > b.mean_score : a.word < b.word;
    });
    if (top_k >= 0 && report.entries.size() > static_cast<std::size_t>(top_k))
        report.entries.resize(static_cast<std::size_t>(top_k));
    return report;
}

LexiconReport attention_lexicon(const Model& model, const Vocabulary& vocab, const std::vector<TokenIds>& test,
                                int top_k, int min_count) {
    if (test.empty()) throw Error("empty test set");
    LexiconAccumulator acc;
    for (const auto& doc : test) {
        const auto kept = std::span<const int>(doc).first(std::min<std::size_t>(doc.size(), model.config.max_length));
        acc.add(kept, encode(model.encoder, kept, model.config.max_length).attention);
    }
    return acc.finish(vocab, LexiconMethod::attention, top_k, min_count);
}

LexiconReport saliency_lexicon(const Model& model, const Vocabulary& vocab, const std::vector<TokenIds>& test,
                               int top_k, int min_count) {
    if (test.empty()) throw Error("empty test set");
    LexiconAccumulator acc;
    for (const auto& doc : test) {
        const auto kept = std::span<const int>(doc).first(std::min<std::size_t>(doc.size(), model.config.max_length));
        acc.add(kept, saliency_map(kept, model.encoder, model.classifier, model.config.max_length));
    }
    return acc.finish(vocab, LexiconMethod::saliency, top_k, min_count);
}

void write_lexicon(std::ostream& out, const LexiconReport& report) {
    const auto old = out.precision(8);
    for (std::size_t i = 0; i < report.entries.size(); ++i) {
        const auto& e = report.entries[i];
        out << (i + 1) << '\t' << e.word << '\t' << e.mean_score << '\t' << e.count << '\n';
    }
    out.precision(old);
}

}  // namespace deconf
