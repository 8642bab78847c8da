#pragma once

#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "deconf/corpus.hpp"

namespace deconf::testing {

inline Document doc(const std::string& text, const std::string& label, Domain domain = Domain::in) {
    Document d;
    std::istringstream ss(text);
    for (std::string t; ss >> t;) d.tokens.push_back(t);
    d.label = label;
    d.domain = domain;
    return d;
}

// Random corpus over a small alphabet; every class gets at least one document.
inline Corpus random_corpus(std::mt19937_64& rng, int classes, int docs, int max_len, int alphabet) {
    Corpus c;
    std::uniform_int_distribution<int> len(1, max_len), word(0, alphabet - 1), cls(0, classes - 1);
    for (int i = 0; i < docs; ++i) {
        Document d;
        d.label = "c" + std::to_string(i < classes ? i : cls(rng));
        const int n = len(rng);
        for (int j = 0; j < n; ++j) d.tokens.push_back("t" + std::to_string(word(rng)));
        c.push_back(std::move(d));
    }
    return c;
}

// Documents draw from one of two disjoint vocabularies: ids [3, 13) or [13, 23).
inline std::vector<TokenIds> disjoint_fixture(std::uint64_t seed, int docs = 40, int len = 30) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> w(0, 9);
    std::vector<TokenIds> out;
    for (int d = 0; d < docs; ++d) {
        TokenIds ids;
        const int base = d % 2 == 0 ? 3 : 13;
        for (int i = 0; i < len; ++i) ids.push_back(base + w(rng));
        out.push_back(ids);
    }
    return out;
}

}  // namespace deconf::testing
