#include "deconf/corpus.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <map>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "deconf/error.hpp"
#include "deconf/log_odds.hpp"

namespace deconf {

std::string_view to_string(Domain d) { return d == Domain::in ? "in" : "out"; }

Domain parse_domain(std::string_view s) {
    if (s == "in") return Domain::in;
    if (s == "out") return Domain::out;
    throw Error("invalid domain \"" + std::string(s) + "\" (expected in|out)");
}

// ---------------------------------------------------------------------------
// Tokenizer

namespace {

constexpr std::array<std::string_view, 8> kClitics = {"n't", "'t", "'s", "'re", "'ve", "'ll", "'d", "'m"};

bool is_punct(char c) {
    return std::ispunct(static_cast<unsigned char>(c)) != 0;
}

bool starts_with(std::string_view s, std::string_view p) { return s.substr(0, p.size()) == p; }

bool ends_with(std::string_view s, std::string_view p) {
    return s.size() >= p.size() && s.substr(s.size() - p.size()) == p;
}

bool is_clitic(std::string_view s) {
    return std::find(kClitics.begin(), kClitics.end(), s) != kClitics.end();
}

std::string normalize_chunk(std::string_view chunk) {
    // U+2019 RIGHT SINGLE QUOTATION MARK is folded to an ASCII apostrophe.
    std::string out;
    out.reserve(chunk.size());
    for (std::size_t i = 0; i < chunk.size(); ++i) {
        if (i + 2 < chunk.size() && static_cast<unsigned char>(chunk[i]) == 0xE2 &&
            static_cast<unsigned char>(chunk[i + 1]) == 0x80 &&
            static_cast<unsigned char>(chunk[i + 2]) == 0x99) {
            out.push_back('\'');
            i += 2;
            continue;
        }
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(chunk[i]))));
    }
    return out;
}

void split_word(std::string_view word, std::vector<std::string>& out) {
    if (word.empty()) return;
    if (is_clitic(word)) {
        out.emplace_back(word);
        return;
    }
    if (word.size() > 3 && ends_with(word, "n't")) {
        out.emplace_back(word.substr(0, word.size() - 3));
        out.emplace_back("n't");
        return;
    }
    for (std::string_view clitic : kClitics) {
        if (clitic == "n't") continue;
        if (word.size() > clitic.size() && ends_with(word, clitic)) {
            out.emplace_back(word.substr(0, word.size() - clitic.size()));
            out.emplace_back(clitic);
            return;
        }
    }
    out.emplace_back(word);
}

void tokenize_chunk(std::string_view raw, std::vector<std::string>& out) {
    if (raw == Vocabulary::pad_token || raw == Vocabulary::unk_token || raw == Vocabulary::mask_token) {
        out.emplace_back(raw);
        return;
    }
    const std::string chunk = normalize_chunk(raw);
    std::string_view s = chunk;
    if (starts_with(s, "http://") || starts_with(s, "https://") || starts_with(s, "www.")) {
        out.emplace_back(s);
        return;
    }
    if (is_clitic(s)) {
        out.emplace_back(s);
        return;
    }

    std::size_t begin = 0;
    while (begin < s.size() && is_punct(s[begin])) {
        // A leading apostrophe that starts a clitic ("'re.") stays attached.
        if (s[begin] == '\'') {
            std::size_t end = begin + 1;
            while (end < s.size() && !is_punct(s[end])) ++end;
            if (is_clitic(s.substr(begin, end - begin))) break;
        }
        out.emplace_back(1, s[begin]);
        ++begin;
    }
    std::size_t end = s.size();
    std::vector<std::string> trailing;
    while (end > begin && is_punct(s[end - 1])) {
        trailing.emplace_back(1, s[end - 1]);
        --end;
    }
    split_word(s.substr(begin, end - begin), out);
    out.insert(out.end(), trailing.rbegin(), trailing.rend());
}

}  // namespace

std::vector<std::string> tokenize(std::string_view raw_text) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < raw_text.size()) {
        while (i < raw_text.size() && std::isspace(static_cast<unsigned char>(raw_text[i]))) ++i;
        std::size_t j = i;
        while (j < raw_text.size() && !std::isspace(static_cast<unsigned char>(raw_text[j]))) ++j;
        if (j > i) tokenize_chunk(raw_text.substr(i, j - i), out);
        i = j;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary::Vocabulary() {
    for (std::string_view t : {pad_token, unk_token, mask_token}) add(std::string(t));
}

int Vocabulary::add(const std::string& token) {
    auto [it, inserted] = ids_.try_emplace(token, size());
    if (inserted) tokens_.push_back(token);
    return it->second;
}

int Vocabulary::id_of(std::string_view token) const {
    auto it = ids_.find(std::string(token));
    return it == ids_.end() ? unk_id : it->second;
}

bool Vocabulary::contains(std::string_view token) const { return ids_.contains(std::string(token)); }

const std::string& Vocabulary::token_of(int id) const {
    if (id < 0 || id >= size()) throw Error("token id " + std::to_string(id) + " out of range");
    return tokens_[static_cast<std::size_t>(id)];
}

TokenIds Vocabulary::encode(std::span<const std::string> tokens) const {
    TokenIds ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens) ids.push_back(id_of(t));
    return ids;
}

std::vector<std::string> Vocabulary::decode(std::span<const int> ids) const {
    std::vector<std::string> out;
    out.reserve(ids.size());
    for (int id : ids) out.push_back(token_of(id));
    return out;
}

void Vocabulary::save(std::ostream& out) const {
    for (std::size_t i = num_reserved; i < tokens_.size(); ++i) out << tokens_[i] << '\n';
}

Vocabulary Vocabulary::load(std::istream& in) {
    Vocabulary v;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (v.contains(line)) throw Error("duplicate vocabulary entry \"" + line + "\"");
        v.add(line);
    }
    return v;
}

Vocabulary build_vocabulary(const Corpus& corpus, int max_size) {
    if (corpus.empty()) throw Error("empty corpus");
    if (max_size < 1) throw Error("max_size must be >= 1");

    std::unordered_map<std::string, long> counts;
    for (const auto& doc : corpus)
        for (const auto& t : doc.tokens) ++counts[t];
    for (std::string_view r : {Vocabulary::pad_token, Vocabulary::unk_token, Vocabulary::mask_token})
        counts.erase(std::string(r));

    std::vector<std::pair<std::string, long>> ranked(counts.begin(), counts.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    if (ranked.size() > static_cast<std::size_t>(max_size)) ranked.resize(static_cast<std::size_t>(max_size));

    Vocabulary v;
    for (const auto& [token, count] : ranked) v.add(token);
    return v;
}

std::vector<TokenIds> encode_corpus(const Corpus& corpus, const Vocabulary& vocab) {
    std::vector<TokenIds> out;
    out.reserve(corpus.size());
    for (const auto& doc : corpus) out.push_back(vocab.encode(doc.tokens));
    return out;
}

std::vector<std::string> class_names(const Corpus& corpus) {
    std::set<std::string> labels;
    for (const auto& doc : corpus) labels.insert(doc.label);
    return {labels.begin(), labels.end()};
}

std::vector<int> label_indices(const Corpus& corpus, std::span<const std::string> classes) {
    std::vector<int> out;
    out.reserve(corpus.size());
    for (const auto& doc : corpus) {
        auto it = std::find(classes.begin(), classes.end(), doc.label);
        if (it == classes.end()) throw Error("unknown label \"" + doc.label + "\"");
        out.push_back(static_cast<int>(it - classes.begin()));
    }
    return out;
}

void check_labels(const Corpus& corpus, std::span<const std::string> classes) {
    (void)label_indices(corpus, classes);
}

// ---------------------------------------------------------------------------
// Masking

std::set<std::string> top_k_union(const LogOddsTable& table, int k) {
    if (k < 0) throw Error("k must be >= 0");
    std::set<std::string> words;
    if (k == 0) return words;
    for (const auto& cls : table.classes())
        for (auto& w : top_k_words(table, cls, k)) words.insert(std::move(w));
    return words;
}

Document mask_tokens(const Document& doc, const std::set<std::string>& words) {
    Document out = doc;
    for (auto& t : out.tokens)
        if (words.contains(t)) t = std::string(Vocabulary::mask_token);
    return out;
}

Document mask_top_k(const Document& doc, const LogOddsTable& table, int k) {
    return mask_tokens(doc, top_k_union(table, k));
}

Corpus mask_corpus(const Corpus& corpus, const LogOddsTable& table, int k) {
    const auto words = top_k_union(table, k);
    Corpus out;
    out.reserve(corpus.size());
    for (const auto& doc : corpus) out.push_back(mask_tokens(doc, words));
    return out;
}

// ---------------------------------------------------------------------------
// Splitting

CorpusSplits split_corpus(const Corpus& corpus, const SplitSpec& spec) {
    if (!(spec.dev_fraction > 0 && spec.dev_fraction < 1) || !(spec.test_fraction > 0 && spec.test_fraction < 1) ||
        spec.dev_fraction + spec.test_fraction >= 1)
        throw Error("split fractions must lie in (0,1) and sum to less than 1");

    const auto classes = class_names(corpus);
    std::map<std::string, std::vector<std::size_t>> in_by_class;
    std::map<std::string, std::vector<std::size_t>> out_by_class;
    for (const auto& c : classes) {
        in_by_class[c];
        out_by_class[c];
    }
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const auto& doc = corpus[i];
        if (static_cast<int>(doc.tokens.size()) < spec.min_tokens) continue;
        (doc.domain == Domain::in ? in_by_class : out_by_class)[doc.label].push_back(i);
    }
    for (const auto& c : classes)
        if (in_by_class[c].empty() && out_by_class[c].empty())
            throw Error("class \"" + c + "\" empty after filtering (min_tokens=" + std::to_string(spec.min_tokens) + ")");

    // Balance in-domain classes by downsampling to the smallest class.
    std::size_t per_class = std::numeric_limits<std::size_t>::max();
    for (const auto& c : classes) per_class = std::min(per_class, in_by_class[c].size());
    if (per_class == 0) throw Error("a class has no in-domain documents after filtering");

    const auto n_dev = static_cast<std::size_t>(std::llround(spec.dev_fraction * static_cast<double>(per_class)));
    const auto n_test = static_cast<std::size_t>(std::llround(spec.test_fraction * static_cast<double>(per_class)));
    if (n_dev + n_test >= per_class)
        throw Error("not enough documents per class (" + std::to_string(per_class) + ") for the requested fractions");

    std::mt19937_64 rng(spec.seed);
    CorpusSplits out;
    for (const auto& c : classes) {
        auto idx = in_by_class[c];
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(per_class);
        for (std::size_t i = 0; i < per_class; ++i) {
            const auto& doc = corpus[idx[i]];
            if (i < n_dev)
                out.dev.push_back(doc);
            else if (i < n_dev + n_test)
                out.test_in.push_back(doc);
            else
                out.train.push_back(doc);
        }
    }
    for (std::size_t i = 0; i < corpus.size(); ++i)
        if (corpus[i].domain == Domain::out && static_cast<int>(corpus[i].tokens.size()) >= spec.min_tokens)
            out.test_out.push_back(corpus[i]);
    return out;
}

// ---------------------------------------------------------------------------
// Synthetic corpus

void validate(const SynthSpec& s) {
    auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (s.num_classes < 2) throw Error("num_classes must be >= 2");
    if (s.style_words_per_class < 0 || s.topic_words_per_class < 0 || s.filler_vocab_size < 0)
        throw Error("word inventory sizes must be >= 0");
    if (s.doc_length.first < 1 || s.doc_length.second < s.doc_length.first) throw Error("invalid doc_length range");
    if (!prob(s.style_strength) || !prob(s.topic_strength_in) || !prob(s.topic_strength_out))
        throw Error("strengths must be probabilities");
    if (!(s.topic_strength_out < s.topic_strength_in) && s.topic_strength_in > 0.0)
        throw Error("topic_strength_out must be smaller than topic_strength_in");
    if (s.style_strength + s.topic_strength_in > 1.0 + 1e-12 || s.style_strength + s.topic_strength_out > 1.0 + 1e-12)
        throw Error("style and topic strengths sum to more than 1");
    if (s.style_strength > 0 && s.style_words_per_class == 0) throw Error("style_strength > 0 needs style words");
    if (s.topic_strength_in > 0 && s.topic_words_per_class == 0) throw Error("topic_strength_in > 0 needs topic words");
    if (s.filler_vocab_size == 0 && (s.style_strength + s.topic_strength_in < 1.0 - 1e-12 ||
                                     s.style_strength + s.topic_strength_out < 1.0 - 1e-12))
        throw Error("filler_vocab_size=0 but style+topic strengths sum to less than 1");
    if (s.docs_per_class_per_domain < 0) throw Error("docs_per_class_per_domain must be >= 0");
}

std::string synth_class_name(int y) { return "l" + std::to_string(y); }
std::string synth_style_word(int y, int i) { return "sty" + std::to_string(y) + "_" + std::to_string(i); }
std::string synth_topic_word(int y, int i) { return "top" + std::to_string(y) + "_" + std::to_string(i); }
std::string synth_filler_word(int i) { return "w" + std::to_string(i); }

std::set<std::string> SynthLexicon::all_topic_words() const {
    std::set<std::string> out;
    for (const auto& t : topic) out.insert(t.begin(), t.end());
    return out;
}

std::set<std::string> SynthLexicon::all_style_words() const {
    std::set<std::string> out;
    for (const auto& s : style) out.insert(s.begin(), s.end());
    return out;
}

SynthLexicon synth_lexicon(const SynthSpec& spec) {
    SynthLexicon lex;
    lex.style.resize(static_cast<std::size_t>(spec.num_classes));
    lex.topic.resize(static_cast<std::size_t>(spec.num_classes));
    for (int y = 0; y < spec.num_classes; ++y) {
        for (int i = 0; i < spec.style_words_per_class; ++i) lex.style[y].push_back(synth_style_word(y, i));
        for (int i = 0; i < spec.topic_words_per_class; ++i) lex.topic[y].push_back(synth_topic_word(y, i));
    }
    for (int i = 0; i < spec.filler_vocab_size; ++i) lex.filler.push_back(synth_filler_word(i));
    return lex;
}

Corpus generate_synthetic(const SynthSpec& spec) {
    validate(spec);
    const SynthLexicon lex = synth_lexicon(spec);
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> length(spec.doc_length.first, spec.doc_length.second);

    auto pick = [&rng](const std::vector<std::string>& words) -> const std::string& {
        std::uniform_int_distribution<std::size_t> d(0, words.size() - 1);
        return words[d(rng)];
    };

    Corpus corpus;
    corpus.reserve(static_cast<std::size_t>(2 * spec.num_classes * spec.docs_per_class_per_domain));
    for (Domain domain : {Domain::in, Domain::out}) {
        const double topic_p = domain == Domain::in ? spec.topic_strength_in : spec.topic_strength_out;
        for (int n = 0; n < spec.docs_per_class_per_domain; ++n) {
            for (int y = 0; y < spec.num_classes; ++y) {
                Document doc;
                doc.label = synth_class_name(y);
                doc.domain = domain;
                const int len = length(rng);
                doc.tokens.reserve(static_cast<std::size_t>(len));
                for (int i = 0; i < len; ++i) {
                    const double u = unit(rng);
                    if (u < spec.style_strength)
                        doc.tokens.push_back(pick(lex.style[y]));
                    else if (u < spec.style_strength + topic_p)
                        doc.tokens.push_back(pick(lex.topic[y]));
                    else
                        doc.tokens.push_back(pick(lex.filler));
                }
                corpus.push_back(std::move(doc));
            }
        }
    }
    return corpus;
}

// ---------------------------------------------------------------------------
// Corpus files

namespace {

std::string join(const std::vector<std::string>& tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out.push_back(' ');
        out += tokens[i];
    }
    return out;
}

}  // namespace

Corpus read_corpus(std::istream& in) {
    Corpus corpus;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto where = "corpus line " + std::to_string(line_no) + ": ";
        nlohmann::json rec;
        try {
            rec = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw Error(where + e.what());
        }
        if (!rec.contains("text") || !rec["text"].is_string()) throw Error(where + "missing string field \"text\"");
        if (!rec.contains("label") || !rec["label"].is_string()) throw Error(where + "missing string field \"label\"");
        Document doc;
        doc.tokens = tokenize(rec["text"].get<std::string>());
        doc.label = rec["label"].get<std::string>();
        if (rec.contains("domain")) doc.domain = parse_domain(rec["domain"].get<std::string>());
        if (rec.contains("prompt") && !rec["prompt"].is_null()) doc.prompt = rec["prompt"].get<std::string>();
        if (rec.contains("pos") && !rec["pos"].is_null()) {
            doc.pos = rec["pos"].get<std::vector<std::string>>();
            if (doc.pos->size() != doc.tokens.size())
                throw Error(where + "pos has " + std::to_string(doc.pos->size()) + " tags for " +
                            std::to_string(doc.tokens.size()) + " tokens");
        }
        if (doc.tokens.empty()) continue;
        corpus.push_back(std::move(doc));
    }
    return corpus;
}

Corpus read_corpus_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open corpus file " + path);
    return read_corpus(in);
}

void write_corpus(std::ostream& out, const Corpus& corpus) {
    for (const auto& doc : corpus) {
        nlohmann::json rec;
        rec["text"] = join(doc.tokens);
        rec["label"] = doc.label;
        rec["domain"] = std::string(to_string(doc.domain));
        if (doc.prompt) rec["prompt"] = *doc.prompt;
        if (doc.pos) rec["pos"] = *doc.pos;
        out << rec.dump() << '\n';
    }
}

void write_corpus_file(const std::string& path, const Corpus& corpus) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write corpus file " + path);
    write_corpus(out, corpus);
}

}  // namespace deconf
