#pragma once

#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "deconf/analyze.hpp"
#include "deconf/corpus.hpp"
#include "deconf/evaluate.hpp"
#include "deconf/lda.hpp"
#include "deconf/log_odds.hpp"
#include "deconf/lr_baseline.hpp"
#include "deconf/training.hpp"

namespace deconf {

// One-command synthetic benchmark: generate, split, build confounds, train every
// mode, evaluate in/out of domain, under masking, and extract lexicons.
struct BenchConfig {
    std::uint64_t seed = 1;
    SynthSpec synth;
    SplitSpec split;
    int embed_dim = 32;
    int hidden_dim = 32;
    int head_hidden = 64;
    int max_vocab = 30000;
    TrainConfig train;
    std::vector<TrainMode> modes{TrainMode::noadv, TrainMode::alt_lo, TrainMode::alt_lda, TrainMode::gr_lo,
                                 TrainMode::lr};
    std::vector<int> mask_ks{20, 50, 100, 200};
    int lexicon_top_k = 20;
    int lexicon_min_count = 10;
};

// Seeds of the generator, split, model and training all follow `seed`.
BenchConfig default_bench_config(std::uint64_t seed = 1);

struct ModeResult {
    TrainMode mode = TrainMode::noadv;
    EvalReport report;
    std::vector<EvalReport> masked;  // ascending mask_k
    std::optional<LexiconReport> attention;
    std::optional<LexiconReport> saliency;
    std::optional<TrainState> state;
    std::optional<LinearModel> linear;
    int selected_iteration = 0;
    double seconds = 0.0;

    const EvalReport& masked_at(int k) const;
};

struct BenchReport {
    BenchConfig config;
    std::vector<std::string> classes;
    Vocabulary vocab;
    LogOddsTable table;
    std::set<std::string> topic_words;
    std::set<std::string> style_words;
    // Smallest per-class k whose masked union holds as many words as the union
    // of planted topic sets.
    int topic_mask_k = 0;
    std::size_t train_size = 0, dev_size = 0, test_in_size = 0, test_out_size = 0;
    std::vector<ModeResult> results;

    const ModeResult& result(TrainMode mode) const;
    bool has(TrainMode mode) const;
};

struct BenchHooks {
    std::ostream* progress = nullptr;
    std::ostream* train_log = nullptr;
};

BenchReport run_benchmark(const BenchConfig& config, const BenchHooks& hooks = {});

int count_in(const LexiconReport& lexicon, const std::set<std::string>& words);

// Human-readable comparison table.
void write_bench_table(std::ostream& out, const BenchReport& report);
// Machine-readable summary; timings excluded so reruns compare byte-for-byte.
void write_bench_json(std::ostream& out, const BenchReport& report);

}  // namespace deconf
