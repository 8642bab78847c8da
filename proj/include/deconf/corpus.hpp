#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace deconf {

class LogOddsTable;

enum class Domain { in, out };

std::string_view to_string(Domain d);
Domain parse_domain(std::string_view s);

struct Document {
    std::vector<std::string> tokens;
    std::string label;
    Domain domain = Domain::in;
    std::optional<std::string> prompt;
    std::optional<std::vector<std::string>> pos;

    bool operator==(const Document&) const = default;
};

using Corpus = std::vector<Document>;
using TokenIds = std::vector<int>;

// Lowercases, detaches punctuation and splits English clitics ("don't" ->
// "do", "n't"). URLs and numerals are kept as single tokens.
std::vector<std::string> tokenize(std::string_view raw_text);

class Vocabulary {
public:
    static constexpr int pad_id = 0;
    static constexpr int unk_id = 1;
    static constexpr int mask_id = 2;
    static constexpr int num_reserved = 3;

    static constexpr std::string_view pad_token = "PAD";
    static constexpr std::string_view unk_token = "UNK";
    static constexpr std::string_view mask_token = "MASK";

    Vocabulary();

    // Appends a token if absent and returns its id.
    int add(const std::string& token);

    int id_of(std::string_view token) const;  // UNK for unknown tokens
    bool contains(std::string_view token) const;
    const std::string& token_of(int id) const;
    int size() const { return static_cast<int>(tokens_.size()); }
    const std::vector<std::string>& tokens() const { return tokens_; }

    TokenIds encode(std::span<const std::string> tokens) const;
    std::vector<std::string> decode(std::span<const int> ids) const;

    // One non-reserved token per line, in id order.
    void save(std::ostream& out) const;
    static Vocabulary load(std::istream& in);

    bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> ids_;
};

inline bool is_reserved(int id) { return id >= 0 && id < Vocabulary::num_reserved; }

// Keeps the max_size most frequent tokens; ties broken lexicographically.
Vocabulary build_vocabulary(const Corpus& corpus, int max_size = 30000);

std::vector<TokenIds> encode_corpus(const Corpus& corpus, const Vocabulary& vocab);

// Distinct labels in sorted order.
std::vector<std::string> class_names(const Corpus& corpus);
std::vector<int> label_indices(const Corpus& corpus, std::span<const std::string> classes);

// Replaces every token in the union over classes of the top-k log-odds words
// with MASK.
Document mask_top_k(const Document& doc, const LogOddsTable& table, int k);
std::set<std::string> top_k_union(const LogOddsTable& table, int k);
Document mask_tokens(const Document& doc, const std::set<std::string>& words);
Corpus mask_corpus(const Corpus& corpus, const LogOddsTable& table, int k);

struct SplitSpec {
    std::uint64_t seed = 1;
    double dev_fraction = 0.1;
    double test_fraction = 0.1;
    int min_tokens = 50;
};

struct CorpusSplits {
    Corpus train;
    Corpus dev;
    Corpus test_in;
    Corpus test_out;
};

CorpusSplits split_corpus(const Corpus& corpus, const SplitSpec& spec);

struct SynthSpec {
    int num_classes = 4;
    int style_words_per_class = 100;
    int topic_words_per_class = 10;
    int filler_vocab_size = 1000;
    std::pair<int, int> doc_length{60, 120};
    double style_strength = 0.15;
    double topic_strength_in = 0.15;
    double topic_strength_out = 0.0;
    int docs_per_class_per_domain = 500;
    std::uint64_t seed = 1;
};

void validate(const SynthSpec& spec);

std::string synth_class_name(int y);
std::string synth_style_word(int y, int i);
std::string synth_topic_word(int y, int i);
std::string synth_filler_word(int i);

// Word inventories the generator allocates: style and topic sets per class.
struct SynthLexicon {
    std::vector<std::vector<std::string>> style;
    std::vector<std::vector<std::string>> topic;
    std::vector<std::string> filler;

    std::set<std::string> all_topic_words() const;
    std::set<std::string> all_style_words() const;
};

SynthLexicon synth_lexicon(const SynthSpec& spec);

// Classes interleaved: for each domain, docs_per_class_per_domain rounds of
// one document per class.
Corpus generate_synthetic(const SynthSpec& spec);

// Line-delimited JSON records with fields text, label, domain, prompt, pos.
Corpus read_corpus(std::istream& in);
Corpus read_corpus_file(const std::string& path);
void write_corpus(std::ostream& out, const Corpus& corpus);
void write_corpus_file(const std::string& path, const Corpus& corpus);

// Restricts a corpus to the given label set; unknown labels are rejected.
void check_labels(const Corpus& corpus, std::span<const std::string> classes);

}  // namespace deconf
