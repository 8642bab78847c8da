// deconf: command-line front end.
//
//   deconf synth    generate a synthetic confounded corpus
//   deconf prepare  filter and split a corpus, build the vocabulary
//   deconf logodds  log-odds table and per-document confound distributions
//   deconf mask     replace the top-k log-odds words with MASK
//   deconf train    train a classifier (noadv, alt-lo, alt-lda, gr-lo, lr)
//   deconf eval     in/out-of-domain accuracy, optionally on masked test sets
//   deconf lexicon  attention or saliency lexicon of a trained model
//   deconf bench    end-to-end synthetic benchmark
//
// Exit status: 0 success, 1 domain error, 2 usage error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "deconf/analyze.hpp"
#include "deconf/bench.hpp"
#include "deconf/checkpoint.hpp"
#include "deconf/corpus.hpp"
#include "deconf/error.hpp"
#include "deconf/evaluate.hpp"
#include "deconf/lda.hpp"
#include "deconf/log_odds.hpp"
#include "deconf/lr_baseline.hpp"
#include "deconf/training.hpp"

namespace fs = std::filesystem;
using namespace deconf;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string default_output_root() {
    const char* env = std::getenv("DECONF_OUTPUT_ROOT");
    return env && *env ? env : "deconf-out";
}

std::string file_checksum(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    std::uint64_t h = 1469598103934665603ULL;
    char buf[1 << 16];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ULL;
        }
        if (!in) break;
    }
    std::ostringstream ss;
    ss << "fnv1a64:" << std::hex << std::setw(16) << std::setfill('0') << h;
    return ss.str();
}

void require_file(const std::string& path, const std::string& what) {
    if (!path.empty() && !fs::is_regular_file(path)) throw Error(what + " not found: " + path);
}

fs::path prepare_out_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw Error("output directory not writable: " + dir);
    return fs::path(dir);
}

std::ofstream open_out(const fs::path& p) {
    std::ofstream out(p);
    if (!out) throw Error("cannot write " + p.string());
    return out;
}

std::ifstream open_in(const std::string& p) {
    std::ifstream in(p);
    if (!in) throw Error("cannot open " + p);
    return in;
}

// Flat `key = value` lines; '#' starts a comment. Keys are long option names.
std::map<std::string, std::string> read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot read config file " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const auto trim = [](std::string s) {
            s.erase(0, s.find_first_not_of(" \t\r"));
            s.erase(s.find_last_not_of(" \t\r") + 1);
            return s;
        };
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw UsageError(path + ":" + std::to_string(n) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::replace(key.begin(), key.end(), '_', '-');
        kv[key] = trim(line.substr(eq + 1));
    }
    return kv;
}

// Fills options the command line left unset.
void apply_config(CLI::App* cmd, const std::map<std::string, std::string>& kv) {
    for (const auto& [key, value] : kv) {
        CLI::Option* opt = cmd->get_option_no_throw("--" + key);
        if (!opt) throw UsageError("unknown config key '" + key + "' for command " + cmd->get_name());
        if (opt->count() > 0) continue;
        if (opt->get_expected_min() > 1 || opt->get_items_expected_max() > 1) {
            std::stringstream ss(value);
            std::string item;
            while (std::getline(ss, item, ',')) opt->add_result(item);
        } else {
            opt->add_result(value);
        }
        opt->run_callback();
    }
}

class Manifest {
public:
    Manifest(const CLI::App* cmd, int argc, char** argv) {
        j_["command"] = cmd->get_name();
        j_["argv"] = std::vector<std::string>(argv, argv + argc);
        nlohmann::json cfg = nlohmann::json::object();
        for (const CLI::Option* opt : cmd->get_options()) {
            if (opt->get_lnames().empty()) continue;
            const std::string name = opt->get_lnames().front();
            if (name == "help" || name == "config") continue;
            if (opt->count() > 0) {
                const auto& r = opt->results();
                cfg[name] = r.size() == 1 ? nlohmann::json(r.front()) : nlohmann::json(r);
            } else {
                cfg[name] = opt->get_default_str();
            }
        }
        j_["config"] = cfg;
        j_["versions"] = {{"deconf", DECONF_VERSION},
                          {"checkpoint_format", std::string(kCheckpointFormat)},
                          {"function_words", std::string(function_words_version())}};
        j_["inputs"] = nlohmann::json::object();
        j_["outputs"] = nlohmann::json::array();
    }

    void seed(std::uint64_t s) { j_["seed"] = s; }
    void input(const std::string& role, const std::string& path) {
        if (!path.empty()) j_["inputs"][role] = {{"path", path}, {"checksum", file_checksum(path)}};
    }
    void output(const fs::path& p) { j_["outputs"].push_back({{"path", p.string()}, {"checksum", file_checksum(p.string())}}); }
    void note(const std::string& key, nlohmann::json v) { j_[key] = std::move(v); }

    void write(const fs::path& dir) const {
        auto out = open_out(dir / ("manifest-" + j_["command"].get<std::string>() + ".json"));
        out << j_.dump(2) << '\n';
    }

private:
    nlohmann::json j_;
};

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        try {
            std::size_t used = 0;
            const int v = std::stoi(item, &used);
            if (used != item.size() || v < 0) throw std::invalid_argument(item);
            out.push_back(v);
        } catch (const std::exception&) {
            throw UsageError("expected a comma-separated list of non-negative integers, got '" + s + "'");
        }
    }
    return out;
}

// Per-class seeded holdout used when no dev corpus is given.
std::pair<Corpus, Corpus> holdout_dev(const Corpus& corpus, double fraction, std::uint64_t seed) {
    std::map<std::string, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < corpus.size(); ++i) by_class[corpus[i].label].push_back(i);
    std::mt19937_64 rng(seed);
    std::vector<bool> to_dev(corpus.size(), false);
    for (auto& [label, idx] : by_class) {
        std::shuffle(idx.begin(), idx.end(), rng);
        const auto n = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(idx.size())));
        for (std::size_t i = 0; i < n && i + 1 < idx.size(); ++i) to_dev[idx[i]] = true;
    }
    Corpus train, dev;
    for (std::size_t i = 0; i < corpus.size(); ++i) (to_dev[i] ? dev : train).push_back(corpus[i]);
    return {train, dev};
}

Vocabulary load_vocabulary(const std::string& path) {
    auto in = open_in(path);
    return Vocabulary::load(in);
}

LogOddsTable load_table(const std::string& path, const Vocabulary& vocab) {
    auto in = open_in(path);
    return read_log_odds(in, vocab);
}

// ---------------------------------------------------------------------------

struct SynthArgs {
    SynthSpec spec;
    std::string out_dir = default_output_root();
};

int run_synth(const SynthArgs& a, Manifest& manifest) {
    validate(a.spec);
    const auto dir = prepare_out_dir(a.out_dir);
    const Corpus corpus = generate_synthetic(a.spec);
    write_corpus_file((dir / "corpus.jsonl").string(), corpus);
    const auto lex = synth_lexicon(a.spec);
    {
        auto out = open_out(dir / "planted_words.tsv");
        for (std::size_t y = 0; y < lex.topic.size(); ++y) {
            for (const auto& w : lex.style[y]) out << w << '\t' << synth_class_name(static_cast<int>(y)) << "\tstyle\n";
            for (const auto& w : lex.topic[y]) out << w << '\t' << synth_class_name(static_cast<int>(y)) << "\ttopic\n";
        }
    }
    manifest.seed(a.spec.seed);
    manifest.output(dir / "corpus.jsonl");
    manifest.output(dir / "planted_words.tsv");
    manifest.write(dir);
    std::cout << "wrote " << corpus.size() << " documents to " << (dir / "corpus.jsonl").string() << '\n';
    return 0;
}

struct PrepareArgs {
    std::string corpus;
    SplitSpec split;
    int max_vocab = 30000;
    std::string out_dir = default_output_root();
};

int run_prepare(const PrepareArgs& a, Manifest& manifest) {
    require_file(a.corpus, "corpus");
    const auto dir = prepare_out_dir(a.out_dir);
    const auto splits = split_corpus(read_corpus_file(a.corpus), a.split);
    const Vocabulary vocab = build_vocabulary(splits.train, a.max_vocab);
    write_corpus_file((dir / "train.jsonl").string(), splits.train);
    write_corpus_file((dir / "dev.jsonl").string(), splits.dev);
    write_corpus_file((dir / "test_in.jsonl").string(), splits.test_in);
    write_corpus_file((dir / "test_out.jsonl").string(), splits.test_out);
    {
        auto out = open_out(dir / "vocab.txt");
        vocab.save(out);
    }
    manifest.seed(a.split.seed);
    manifest.input("corpus", a.corpus);
    for (const char* f : {"train.jsonl", "dev.jsonl", "test_in.jsonl", "test_out.jsonl", "vocab.txt"})
        manifest.output(dir / f);
    manifest.write(dir);
    std::cout << "train " << splits.train.size() << ", dev " << splits.dev.size() << ", test_in "
              << splits.test_in.size() << ", test_out " << splits.test_out.size() << ", vocabulary " << vocab.size()
              << '\n';
    return 0;
}

struct LogOddsArgs {
    std::string corpus;
    std::string vocab;
    double alpha0 = kDefaultAlpha0;
    int top_k = 0;
    std::string out_dir = default_output_root();
};

int run_logodds(const LogOddsArgs& a, Manifest& manifest) {
    require_file(a.corpus, "corpus");
    require_file(a.vocab, "vocabulary");
    const auto dir = prepare_out_dir(a.out_dir);
    const Corpus train = read_corpus_file(a.corpus);
    const Vocabulary vocab = a.vocab.empty() ? build_vocabulary(train) : load_vocabulary(a.vocab);
    const LogOddsTable table = compute_log_odds(train, vocab, a.alpha0);
    {
        auto out = open_out(dir / "logodds.tsv");
        write_log_odds(out, table);
    }
    {
        const auto conf = log_odds_confounds(encode_corpus(train, vocab), table,
                                             class_log_prior(train, table.classes()));
        auto out = open_out(dir / "confounds.txt");
        write_confounds(out, conf);
    }
    if (a.vocab.empty()) {
        auto out = open_out(dir / "vocab.txt");
        vocab.save(out);
        manifest.output(dir / "vocab.txt");
    }
    if (a.top_k > 0)
        for (const auto& cls : table.classes()) {
            std::cout << cls << ':';
            for (const auto& w : top_k_words(table, cls, a.top_k)) std::cout << ' ' << w;
            std::cout << '\n';
        }
    manifest.input("corpus", a.corpus);
    manifest.input("vocab", a.vocab);
    manifest.output(dir / "logodds.tsv");
    manifest.output(dir / "confounds.txt");
    manifest.write(dir);
    return 0;
}

struct MaskArgs {
    std::string corpus;
    std::string table;
    std::string vocab;
    int k = 20;
    std::string out_dir = default_output_root();
};

int run_mask(const MaskArgs& a, Manifest& manifest) {
    require_file(a.corpus, "corpus");
    require_file(a.table, "log-odds table");
    require_file(a.vocab, "vocabulary");
    const auto dir = prepare_out_dir(a.out_dir);
    const Corpus corpus = read_corpus_file(a.corpus);
    const Vocabulary vocab = load_vocabulary(a.vocab);
    const LogOddsTable table = load_table(a.table, vocab);
    const auto out_path = dir / ("masked_k" + std::to_string(a.k) + ".jsonl");
    write_corpus_file(out_path.string(), mask_corpus(corpus, table, a.k));
    manifest.input("corpus", a.corpus);
    manifest.input("table", a.table);
    manifest.input("vocab", a.vocab);
    manifest.output(out_path);
    manifest.write(dir);
    return 0;
}

struct TrainArgs {
    std::string mode = "noadv";
    std::string corpus;
    std::string dev;
    std::string vocab;
    std::string confounds;  // lo | lda, defaulted from the mode
    std::string table;
    std::string function_words;
    int max_vocab = 30000;
    int embed_dim = 128;
    int hidden_dim = 128;
    int head_hidden = 256;
    double dev_fraction = 0.1;
    std::string optimizer = "adam";
    TrainConfig config;
    int mask_k = -1;
    std::string out_dir = default_output_root();
};

int run_train(TrainArgs a, Manifest& manifest) {
    require_file(a.corpus, "corpus");
    require_file(a.dev, "dev corpus");
    require_file(a.vocab, "vocabulary");
    require_file(a.table, "log-odds table");
    require_file(a.function_words, "function-word list");
    a.config.mode = parse_train_mode(a.mode);
    a.config.optimizer = parse_optimizer(a.optimizer);
    if (a.mask_k >= 0) a.config.mask_k = a.mask_k;
    a.config.validate();
    const auto dir = prepare_out_dir(a.out_dir);

    Corpus train = read_corpus_file(a.corpus);
    Corpus dev;
    if (a.dev.empty())
        std::tie(train, dev) = holdout_dev(train, a.dev_fraction, a.config.seed);
    else
        dev = read_corpus_file(a.dev);
    if (train.empty()) throw Error("empty corpus");

    Checkpoint ckpt;
    ckpt.mode = a.config.mode;
    ckpt.classes = class_names(train);
    check_labels(dev, ckpt.classes);
    ckpt.vocab = a.vocab.empty() ? build_vocabulary(train, a.max_vocab) : load_vocabulary(a.vocab);
    ckpt.train_config = a.config;

    manifest.seed(a.config.seed);
    manifest.input("corpus", a.corpus);
    manifest.input("dev", a.dev);
    manifest.input("vocab", a.vocab);
    manifest.input("table", a.table);

    const auto ckpt_path = dir / "model.ckpt";
    if (a.config.mode == TrainMode::lr) {
        LrConfig lr;
        if (!a.function_words.empty()) lr.function_words = load_function_words(a.function_words);
        ckpt.linear = train_lr_baseline(train, dev, lr);
        save_checkpoint(ckpt_path.string(), ckpt);
        manifest.output(ckpt_path);
        manifest.write(dir);
        return 0;
    }

    std::optional<LogOddsTable> table;
    const auto need_table = [&] {
        if (!table) table = a.table.empty() ? compute_log_odds(train, ckpt.vocab, a.config.alpha0)
                                            : load_table(a.table, ckpt.vocab);
        return *table;
    };
    if (a.config.mask_k) {
        const LogOddsTable& t = need_table();
        train = mask_corpus(train, t, *a.config.mask_k);
        dev = mask_corpus(dev, t, *a.config.mask_k);
    }

    const Dataset train_ds = make_dataset(train, ckpt.vocab, ckpt.classes);
    const Dataset dev_ds = make_dataset(dev, ckpt.vocab, ckpt.classes);

    ModelConfig mc;
    mc.vocab_size = ckpt.vocab.size();
    mc.embed_dim = a.embed_dim;
    mc.hidden_dim = a.hidden_dim;
    mc.head_hidden = a.head_hidden;
    mc.num_classes = static_cast<int>(ckpt.classes.size());
    mc.num_topics = mc.num_classes;
    mc.seed = a.config.seed;

    std::string confound_kind = a.confounds;
    if (confound_kind.empty()) confound_kind = a.config.mode == TrainMode::alt_lda ? "lda" : "lo";
    if (confound_kind != "lo" && confound_kind != "lda") throw UsageError("--confounds must be lo or lda");

    std::vector<ConfoundDistribution> confounds;
    if (a.config.mode != TrainMode::noadv) {
        if (confound_kind == "lo") {
            confounds = log_odds_confounds(train_ds.docs, need_table(), class_log_prior(train, ckpt.classes));
        } else {
            LdaOptions lda;
            lda.num_topics = a.config.lda_topics;
            lda.iterations = a.config.lda_iterations;
            lda.seed = a.config.seed;
            confounds = lda_training_distributions(fit_lda(train_ds.docs, ckpt.vocab.size(), lda));
            mc.num_topics = a.config.lda_topics;
        }
    }
    manifest.note("confounds", confound_kind);

    auto log = open_out(dir / "train_log.jsonl");
    int phase_count = 0;
    TrainHooks hooks;
    hooks.log = &log;
    hooks.progress = &std::cerr;
    hooks.on_phase_end = [&](const TrainState& s) {
        Checkpoint c = ckpt;
        c.state = s;
        std::ostringstream name;
        name << "phase-" << std::setw(2) << std::setfill('0') << phase_count++ << '-' << to_string(s.phase) << ".ckpt";
        save_checkpoint((dir / name.str()).string(), c);
    };

    switch (a.config.mode) {
        case TrainMode::noadv: ckpt.state = train_noadv(train_ds, dev_ds, mc, a.config, hooks); break;
        case TrainMode::alt_lo:
        case TrainMode::alt_lda: ckpt.state = run_alternating(train_ds, dev_ds, confounds, mc, a.config, hooks); break;
        case TrainMode::gr_lo: ckpt.state = train_grl(train_ds, dev_ds, confounds, mc, a.config, hooks); break;
        case TrainMode::lr: break;
    }
    log.close();
    save_checkpoint(ckpt_path.string(), ckpt);
    manifest.output(ckpt_path);
    manifest.output(dir / "train_log.jsonl");
    manifest.note("selected_iteration", ckpt.state->selected_iteration);
    manifest.note("best_dev_accuracy", ckpt.state->best_dev);
    manifest.write(dir);
    std::cout << "dev accuracy " << ckpt.state->best_dev << ", checkpoint " << ckpt_path.string() << '\n';
    return 0;
}

struct EvalArgs {
    std::string checkpoint;
    std::string test_in;
    std::string test_out;
    std::string table;
    std::string mask_top_k;
    std::string out_dir = default_output_root();
};

int run_eval(const EvalArgs& a, Manifest& manifest) {
    require_file(a.checkpoint, "checkpoint");
    require_file(a.test_in, "in-domain test corpus");
    require_file(a.test_out, "out-of-domain test corpus");
    require_file(a.table, "log-odds table");
    const auto ks = parse_int_list(a.mask_top_k);
    if (!ks.empty() && a.table.empty()) throw UsageError("--mask-top-k requires --table");
    const auto dir = prepare_out_dir(a.out_dir);

    const Checkpoint ckpt = load_checkpoint(a.checkpoint);
    const Corpus test_in = a.test_in.empty() ? Corpus{} : read_corpus_file(a.test_in);
    const Corpus test_out = a.test_out.empty() ? Corpus{} : read_corpus_file(a.test_out);
    check_labels(test_in, ckpt.classes);
    check_labels(test_out, ckpt.classes);
    const auto predict = checkpoint_predictor(ckpt);

    std::vector<EvalReport> reports{evaluate_accuracy(predict, ckpt.classes, test_in, test_out)};
    if (!ks.empty()) {
        const LogOddsTable table = load_table(a.table, ckpt.vocab);
        for (auto& r : masked_evaluation(predict, ckpt.classes, table, test_in, test_out, ks)) reports.push_back(r);
    }

    auto text = open_out(dir / "report.txt");
    auto jsonl = open_out(dir / "report.jsonl");
    for (const auto& r : reports) {
        write_report_text(text, r);
        text << '\n';
        write_report_jsonl(jsonl, r);
        write_report_text(std::cout, r);
        std::cout << '\n';
    }
    text.close();
    jsonl.close();
    manifest.output(dir / "report.txt");
    manifest.output(dir / "report.jsonl");
    for (const auto& [split, rep] : {std::pair{"in", reports.front().in}, std::pair{"out", reports.front().out}}) {
        if (!rep) continue;
        const auto p = dir / (std::string("confusion_") + split + ".csv");
        auto out = open_out(p);
        write_confusion_csv(out, ckpt.classes, rep->confusion);
        out.close();
        manifest.output(p);
    }
    manifest.seed(ckpt.train_config.seed);
    manifest.input("checkpoint", a.checkpoint);
    manifest.input("test_in", a.test_in);
    manifest.input("test_out", a.test_out);
    manifest.input("table", a.table);
    manifest.write(dir);
    return 0;
}

struct LexiconArgs {
    std::string checkpoint;
    std::string corpus;
    std::string method = "attention";
    int top_k = 20;
    int min_count = 10;
    std::string out_dir = default_output_root();
};

int run_lexicon(const LexiconArgs& a, Manifest& manifest) {
    require_file(a.checkpoint, "checkpoint");
    require_file(a.corpus, "corpus");
    const auto dir = prepare_out_dir(a.out_dir);
    const Checkpoint ckpt = load_checkpoint(a.checkpoint);
    if (!ckpt.state) throw Error("lexicons need a neural checkpoint");
    const auto docs = encode_corpus(read_corpus_file(a.corpus), ckpt.vocab);
    const auto report = a.method == "attention"
                            ? attention_lexicon(ckpt.state->model, ckpt.vocab, docs, a.top_k, a.min_count)
                            : saliency_lexicon(ckpt.state->model, ckpt.vocab, docs, a.top_k, a.min_count);
    const auto p = dir / ("lexicon_" + a.method + ".tsv");
    {
        auto out = open_out(p);
        write_lexicon(out, report);
    }
    write_lexicon(std::cout, report);
    manifest.seed(ckpt.train_config.seed);
    manifest.input("checkpoint", a.checkpoint);
    manifest.input("corpus", a.corpus);
    manifest.output(p);
    manifest.write(dir);
    return 0;
}

struct BenchArgs {
    BenchConfig config = default_bench_config(1);
    std::uint64_t seed = 1;
    std::string modes = "noadv,alt-lo,alt-lda,gr-lo,lr";
    bool save_checkpoints = false;
    bool quiet = false;
    std::string out_dir = default_output_root();
};

int run_bench(const BenchArgs& a, Manifest& manifest) {
    const auto dir = prepare_out_dir(a.out_dir);
    BenchConfig cfg = a.config;
    cfg.seed = cfg.synth.seed = cfg.split.seed = cfg.train.seed = a.seed;
    cfg.modes.clear();
    std::stringstream ss(a.modes);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) {
            try {
                cfg.modes.push_back(parse_train_mode(item));
            } catch (const Error& e) {
                throw UsageError(e.what());
            }
        }
    if (cfg.modes.empty()) throw UsageError("--modes is empty");

    auto log = open_out(dir / "bench_train_log.jsonl");
    BenchHooks hooks;
    hooks.progress = a.quiet ? nullptr : &std::cerr;
    hooks.train_log = &log;
    const BenchReport rep = run_benchmark(cfg, hooks);
    log.close();

    {
        auto out = open_out(dir / "bench.txt");
        write_bench_table(out, rep);
    }
    {
        auto out = open_out(dir / "bench.json");
        write_bench_json(out, rep);
    }
    write_bench_table(std::cout, rep);
    if (a.save_checkpoints)
        for (const auto& r : rep.results) {
            Checkpoint c;
            c.mode = r.mode;
            c.classes = rep.classes;
            c.vocab = rep.vocab;
            c.train_config = cfg.train;
            c.train_config.mode = r.mode;
            c.state = r.state;
            c.linear = r.linear;
            const auto p = dir / (std::string(to_string(r.mode)) + ".ckpt");
            save_checkpoint(p.string(), c);
            manifest.output(p);
        }
    manifest.seed(a.seed);
    manifest.note("bench_config", {{"synth",
                                    {{"num_classes", cfg.synth.num_classes},
                                     {"style_words_per_class", cfg.synth.style_words_per_class},
                                     {"topic_words_per_class", cfg.synth.topic_words_per_class},
                                     {"filler_vocab_size", cfg.synth.filler_vocab_size},
                                     {"doc_length", {cfg.synth.doc_length.first, cfg.synth.doc_length.second}},
                                     {"style_strength", cfg.synth.style_strength},
                                     {"topic_strength_in", cfg.synth.topic_strength_in},
                                     {"topic_strength_out", cfg.synth.topic_strength_out},
                                     {"docs_per_class_per_domain", cfg.synth.docs_per_class_per_domain}}},
                                   {"model", {{"embed_dim", cfg.embed_dim}, {"hidden_dim", cfg.hidden_dim},
                                              {"head_hidden", cfg.head_hidden}}},
                                   {"train", train_config_to_json(cfg.train)}});
    manifest.output(dir / "bench.txt");
    manifest.output(dir / "bench.json");
    manifest.output(dir / "bench_train_log.jsonl");
    manifest.write(dir);
    return 0;
}

void add_train_config_options(CLI::App* cmd, TrainConfig& c) {
    cmd->add_option("--batch-size", c.batch_size, "Minibatch size b");
    cmd->add_option("--learning-rate", c.learning_rate, "Optimizer step size");
    cmd->add_option("--adversary-steps", c.adversary_steps, "Topic-training steps t per iteration");
    cmd->add_option("--forgetting-steps", c.forgetting_steps, "Topic-forgetting steps c per iteration");
    cmd->add_option("--outer-iterations", c.outer_iterations, "Alternating iterations T");
    cmd->add_option("--lambda", c.lambda, "Gradient-reversal scale");
    cmd->add_option("--patience", c.patience, "Early-stopping patience in epochs");
    cmd->add_option("--max-epochs", c.max_epochs, "Upper bound on pretraining epochs");
    cmd->add_option("--seed", c.seed, "Seed for every random choice");
    cmd->add_option("--alpha0", c.alpha0, "Dirichlet prior strength for log-odds");
    cmd->add_option("--entropy-floor", c.entropy_floor, "Iteration selection floor, fraction of ln K");
    cmd->add_option("--lda-topics", c.lda_topics, "LDA topic count for alt-lda");
    cmd->add_option("--lda-iterations", c.lda_iterations, "Gibbs sweeps for alt-lda");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Topic-confound demotion for text classifiers", "deconf"};
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default();
    std::string config_path;
    app.add_option("--config", config_path, "Flat key = value file; command-line flags win")
        ->check(CLI::ExistingFile);

    SynthArgs synth;
    auto* c_synth = app.add_subcommand("synth", "Generate a synthetic confounded corpus");
    c_synth->add_option("--classes", synth.spec.num_classes, "Number of classes m");
    c_synth->add_option("--style-words", synth.spec.style_words_per_class, "Style words per class");
    c_synth->add_option("--topic-words", synth.spec.topic_words_per_class, "Topic words per class");
    c_synth->add_option("--filler-words", synth.spec.filler_vocab_size, "Shared filler vocabulary size");
    c_synth->add_option("--min-length", synth.spec.doc_length.first, "Shortest document");
    c_synth->add_option("--max-length", synth.spec.doc_length.second, "Longest document");
    c_synth->add_option("--style-strength", synth.spec.style_strength, "P(style word) per token");
    c_synth->add_option("--topic-strength-in", synth.spec.topic_strength_in, "P(topic word) in domain");
    c_synth->add_option("--topic-strength-out", synth.spec.topic_strength_out, "P(topic word) out of domain");
    c_synth->add_option("--docs-per-class", synth.spec.docs_per_class_per_domain, "Documents per class and domain");
    c_synth->add_option("--seed", synth.spec.seed, "Generator seed");
    c_synth->add_option("--out-dir", synth.out_dir, "Output directory");

    PrepareArgs prep;
    auto* c_prep = app.add_subcommand("prepare", "Filter, split and build the vocabulary");
    c_prep->add_option("--corpus", prep.corpus, "Input corpus (JSONL)")->required();
    c_prep->add_option("--dev-fraction", prep.split.dev_fraction, "Per-class dev fraction");
    c_prep->add_option("--test-fraction", prep.split.test_fraction, "Per-class in-domain test fraction");
    c_prep->add_option("--min-tokens", prep.split.min_tokens, "Drop shorter documents");
    c_prep->add_option("--max-vocab", prep.max_vocab, "Vocabulary size before reserved ids");
    c_prep->add_option("--seed", prep.split.seed, "Split seed");
    c_prep->add_option("--out-dir", prep.out_dir, "Output directory");

    LogOddsArgs lo;
    auto* c_lo = app.add_subcommand("logodds", "Log-odds table and confound distributions");
    c_lo->add_option("--corpus", lo.corpus, "Training corpus (JSONL)")->required();
    c_lo->add_option("--vocab", lo.vocab, "Vocabulary file; built from the corpus when absent");
    c_lo->add_option("--alpha0", lo.alpha0, "Dirichlet prior strength");
    c_lo->add_option("--top-k", lo.top_k, "Print the top-k words per class");
    c_lo->add_option("--out-dir", lo.out_dir, "Output directory");

    MaskArgs mask;
    auto* c_mask = app.add_subcommand("mask", "Mask the top-k log-odds words of a corpus");
    c_mask->add_option("--corpus", mask.corpus, "Corpus to mask")->required();
    c_mask->add_option("--table", mask.table, "Log-odds table")->required();
    c_mask->add_option("--vocab", mask.vocab, "Vocabulary the table was built with")->required();
    c_mask->add_option("--k", mask.k, "Words per class to mask");
    c_mask->add_option("--out-dir", mask.out_dir, "Output directory");

    TrainArgs tr;
    auto* c_train = app.add_subcommand("train", "Train a classifier");
    c_train->add_option("--mode", tr.mode, "noadv, alt-lo, alt-lda, gr-lo or lr")
        ->check(CLI::IsMember({"noadv", "alt-lo", "alt_lo", "alt-lda", "alt_lda", "gr-lo", "gr_lo", "lr"}));
    c_train->add_option("--corpus", tr.corpus, "Training corpus (JSONL)")->required();
    c_train->add_option("--dev", tr.dev, "Dev corpus; a per-class holdout of the training corpus when absent");
    c_train->add_option("--dev-fraction", tr.dev_fraction, "Holdout fraction when --dev is absent");
    c_train->add_option("--vocab", tr.vocab, "Vocabulary file; built from the corpus when absent");
    c_train->add_option("--max-vocab", tr.max_vocab, "Vocabulary size when building");
    c_train->add_option("--confounds", tr.confounds, "lo or lda (default follows the mode)")
        ->check(CLI::IsMember({"lo", "lda"}));
    c_train->add_option("--table", tr.table, "Precomputed log-odds table");
    c_train->add_option("--mask-k", tr.mask_k, "Train on inputs with the top-k log-odds words masked");
    c_train->add_option("--function-words", tr.function_words, "Function-word list for lr");
    c_train->add_option("--embed-dim", tr.embed_dim, "Embedding size");
    c_train->add_option("--hidden-dim", tr.hidden_dim, "Recurrent state size per direction");
    c_train->add_option("--head-hidden", tr.head_hidden, "Hidden units of the classifier and adversary heads");
    c_train->add_option("--optimizer", tr.optimizer, "adam or sgd")->check(CLI::IsMember({"adam", "sgd"}));
    add_train_config_options(c_train, tr.config);
    c_train->add_option("--out-dir", tr.out_dir, "Output directory");

    EvalArgs ev;
    auto* c_eval = app.add_subcommand("eval", "Evaluate a checkpoint");
    c_eval->add_option("--checkpoint", ev.checkpoint, "Model checkpoint")->required();
    c_eval->add_option("--test-in", ev.test_in, "In-domain test corpus");
    c_eval->add_option("--test-out", ev.test_out, "Out-of-domain test corpus");
    c_eval->add_option("--table", ev.table, "Log-odds table for masked evaluation");
    c_eval->add_option("--mask-top-k", ev.mask_top_k, "Comma-separated k values, e.g. 20,50,100,200");
    c_eval->add_option("--out-dir", ev.out_dir, "Output directory");

    LexiconArgs lx;
    auto* c_lex = app.add_subcommand("lexicon", "Attention or saliency lexicon");
    c_lex->add_option("--checkpoint", lx.checkpoint, "Model checkpoint")->required();
    c_lex->add_option("--corpus", lx.corpus, "Documents to score")->required();
    c_lex->add_option("--method", lx.method, "attention or saliency")
        ->check(CLI::IsMember({"attention", "saliency"}));
    c_lex->add_option("--top-k", lx.top_k, "Entries to keep");
    c_lex->add_option("--min-count", lx.min_count, "Minimum occurrences per word");
    c_lex->add_option("--out-dir", lx.out_dir, "Output directory");

    BenchArgs bench;
    auto* c_bench = app.add_subcommand("bench", "Synthetic benchmark over all training modes");
    c_bench->add_option("--seed", bench.seed, "Single seed for data, splits, models and training");
    c_bench->add_option("--style-words", bench.config.synth.style_words_per_class, "Style words per class");
    c_bench->add_option("--topic-words", bench.config.synth.topic_words_per_class, "Topic words per class");
    c_bench->add_option("--filler-words", bench.config.synth.filler_vocab_size, "Shared filler vocabulary size");
    c_bench->add_option("--embed-dim", bench.config.embed_dim, "Embedding size");
    c_bench->add_option("--hidden-dim", bench.config.hidden_dim, "Recurrent state size per direction");
    c_bench->add_option("--head-hidden", bench.config.head_hidden, "Hidden units of the heads");
    {
        auto& c = bench.config.train;
        c_bench->add_option("--batch-size", c.batch_size, "Minibatch size b");
        c_bench->add_option("--learning-rate", c.learning_rate, "Optimizer step size");
        c_bench->add_option("--adversary-steps", c.adversary_steps, "Topic-training steps t per iteration");
        c_bench->add_option("--forgetting-steps", c.forgetting_steps, "Topic-forgetting steps c per iteration");
        c_bench->add_option("--outer-iterations", c.outer_iterations, "Alternating iterations T");
        c_bench->add_option("--lambda", c.lambda, "Gradient-reversal scale");
        c_bench->add_option("--patience", c.patience, "Early-stopping patience in epochs");
        c_bench->add_option("--alpha0", c.alpha0, "Dirichlet prior strength for log-odds");
        c_bench->add_option("--lda-topics", c.lda_topics, "LDA topic count for alt-lda");
        c_bench->add_option("--lda-iterations", c.lda_iterations, "Gibbs sweeps for alt-lda");
    }
    c_bench->add_option("--modes", bench.modes, "Comma-separated modes to run");
    c_bench->add_flag("--save-checkpoints", bench.save_checkpoints, "Write one checkpoint per mode");
    c_bench->add_flag("--quiet", bench.quiet, "No progress output");
    c_bench->add_option("--out-dir", bench.out_dir, "Output directory");

    try {
        try {
            app.parse(argc, argv);
        } catch (const CLI::ParseError& e) {
            return app.exit(e) == 0 ? 0 : 2;
        }
        CLI::App* cmd = app.get_subcommands().front();
        if (!config_path.empty()) apply_config(cmd, read_config_file(config_path));
        Manifest manifest(cmd, argc, argv);

        if (cmd == c_synth) return run_synth(synth, manifest);
        if (cmd == c_prep) return run_prepare(prep, manifest);
        if (cmd == c_lo) return run_logodds(lo, manifest);
        if (cmd == c_mask) return run_mask(mask, manifest);
        if (cmd == c_train) return run_train(tr, manifest);
        if (cmd == c_eval) return run_eval(ev, manifest);
        if (cmd == c_lex) return run_lexicon(lx, manifest);
        if (cmd == c_bench) return run_bench(bench, manifest);
        return 2;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n\n" << app.help();
        return 2;
    } catch (const CLI::Error& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
