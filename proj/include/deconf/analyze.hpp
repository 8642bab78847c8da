#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "deconf/corpus.hpp"
#include "deconf/model.hpp"

namespace deconf {

enum class LexiconMethod { attention, saliency };
std::string_view to_string(LexiconMethod m);

struct LexiconEntry {
    std::string word;
    double mean_score = 0.0;
    long count = 0;
};

struct LexiconReport {
    std::vector<LexiconEntry> entries;  // mean score descending, ties lexicographic
    LexiconMethod method = LexiconMethod::attention;
    int top_k = 20;
    int min_count = 10;
};

// Order-independent accumulation of per-token scores by word type.
class LexiconAccumulator {
public:
    // `scores` has one entry per position of `doc_ids`; PAD positions are ignored.
    void add(std::span<const int> doc_ids, std::span<const double> scores);
    LexiconReport finish(const Vocabulary& vocab, LexiconMethod method, int top_k, int min_count) const;

    const std::vector<double>& sums() const { return sums_; }
    const std::vector<long>& counts() const { return counts_; }

private:
    std::vector<double> sums_;
    std::vector<long> counts_;
};

LexiconReport attention_lexicon(const Model& model, const Vocabulary& vocab, const std::vector<TokenIds>& test,
                                int top_k = 20, int min_count = 10);
LexiconReport saliency_lexicon(const Model& model, const Vocabulary& vocab, const std::vector<TokenIds>& test,
                               int top_k = 20, int min_count = 10);

// rank<TAB>word<TAB>mean_score<TAB>count
void write_lexicon(std::ostream& out, const LexiconReport& report);

}  // namespace deconf
