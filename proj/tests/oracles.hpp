#pragma once

// Independent reference implementations used to check the library.

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "deconf/corpus.hpp"

namespace deconf::testing {

// Scalar, map-based evaluation of the z-scored one-vs-rest log-odds with an
// informative Dirichlet prior. Returns score[class][word].
inline std::map<std::string, std::map<std::string, double>> brute_force_log_odds(const Corpus& corpus,
                                                                                 const Vocabulary& vocab,
                                                                                 double alpha0) {
    std::map<std::string, std::map<std::string, long>> f;
    std::map<std::string, long> bg;
    std::map<std::string, long> n;
    long total = 0;
    for (const auto& d : corpus)
        for (const auto& t : d.tokens) {
            const std::string w = vocab.token_of(vocab.id_of(t));
            ++f[d.label][w];
            ++bg[w];
            ++n[d.label];
            ++total;
        }
    std::map<std::string, std::map<std::string, double>> out;
    for (const auto& [cls, n_in_l] : n) {
        for (int id = 0; id < vocab.size(); ++id) {
            const std::string& w = vocab.token_of(id);
            const double b = bg.count(w) ? static_cast<double>(bg[w]) : 0.0;
            if (b == 0.0) {
                out[cls][w] = 0.0;
                continue;
            }
            const double a = alpha0 * b / static_cast<double>(total);
            const double fi = f[cls].count(w) ? static_cast<double>(f[cls][w]) : 0.0;
            const double fo = b - fi;
            const double ni = static_cast<double>(n_in_l);
            const double no = static_cast<double>(total) - ni;
            const double d1 = std::log((fi + a) / (ni + alpha0 - fi - a));
            const double d2 = std::log((fo + a) / (no + alpha0 - fo - a));
            out[cls][w] = (d1 - d2) / std::sqrt(1.0 / (fi + a) + 1.0 / (fo + a));
        }
    }
    return out;
}

}  // namespace deconf::testing
