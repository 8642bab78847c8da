#include "deconf/bench.hpp"

#include <algorithm>
#include <chrono>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "deconf/error.hpp"

namespace deconf {

BenchConfig default_bench_config(std::uint64_t seed) {
    BenchConfig c;
    c.seed = seed;
    c.synth.seed = seed;
    c.split.seed = seed;
    c.train.seed = seed;
    c.train.alpha0 = 1e4;
    return c;
}

const EvalReport& ModeResult::masked_at(int k) const {
    for (const auto& r : masked)
        if (r.mask_k == k) return r;
    throw Error("no masked evaluation at k=" + std::to_string(k));
}

const ModeResult& BenchReport::result(TrainMode mode) const {
    for (const auto& r : results)
        if (r.mode == mode) return r;
    throw Error("benchmark has no result for mode " + std::string(to_string(mode)));
}

bool BenchReport::has(TrainMode mode) const {
    return std::any_of(results.begin(), results.end(), [mode](const ModeResult& r) { return r.mode == mode; });
}

int count_in(const LexiconReport& lexicon, const std::set<std::string>& words) {
    return static_cast<int>(std::count_if(lexicon.entries.begin(), lexicon.entries.end(),
                                          [&](const LexiconEntry& e) { return words.count(e.word) > 0; }));
}

namespace {

void say(const BenchHooks& hooks, const std::string& line) {
    if (hooks.progress) *hooks.progress << line << std::endl;
}

}  // namespace

BenchReport run_benchmark(const BenchConfig& config, const BenchHooks& hooks) {
    BenchReport rep;
    rep.config = config;

    const Corpus corpus = generate_synthetic(config.synth);
    const CorpusSplits splits = split_corpus(corpus, config.split);
    rep.train_size = splits.train.size();
    rep.dev_size = splits.dev.size();
    rep.test_in_size = splits.test_in.size();
    rep.test_out_size = splits.test_out.size();

    const SynthLexicon lexicon = synth_lexicon(config.synth);
    rep.topic_words = lexicon.all_topic_words();
    rep.style_words = lexicon.all_style_words();

    rep.classes = class_names(splits.train);
    rep.vocab = build_vocabulary(splits.train, config.max_vocab);
    rep.table = compute_log_odds(splits.train, rep.vocab, config.train.alpha0);

    const int topic_total = static_cast<int>(rep.topic_words.size());
    rep.topic_mask_k = 1;
    while (static_cast<int>(top_k_union(rep.table, rep.topic_mask_k).size()) < topic_total &&
           rep.topic_mask_k < rep.table.num_words())
        ++rep.topic_mask_k;

    std::vector<int> ks = config.mask_ks;
    ks.push_back(rep.topic_mask_k);
    ks.push_back(topic_total);
    std::sort(ks.begin(), ks.end());
    ks.erase(std::unique(ks.begin(), ks.end()), ks.end());

    const Dataset train = make_dataset(splits.train, rep.vocab, rep.classes);
    const Dataset dev = make_dataset(splits.dev, rep.vocab, rep.classes);
    const std::vector<TokenIds> test_in_ids = encode_corpus(splits.test_in, rep.vocab);

    const auto m = static_cast<int>(rep.classes.size());
    ModelConfig base;
    base.vocab_size = rep.vocab.size();
    base.embed_dim = config.embed_dim;
    base.hidden_dim = config.hidden_dim;
    base.head_hidden = config.head_hidden;
    base.num_classes = m;
    base.num_topics = m;
    base.seed = config.seed;

    const auto needs = [&](TrainMode a) {
        return std::find(config.modes.begin(), config.modes.end(), a) != config.modes.end();
    };

    std::vector<ConfoundDistribution> lo_confounds;
    if (needs(TrainMode::alt_lo) || needs(TrainMode::gr_lo))
        lo_confounds = log_odds_confounds(train.docs, rep.table, class_log_prior(splits.train, rep.classes));

    std::vector<ConfoundDistribution> lda_confounds;
    if (needs(TrainMode::alt_lda)) {
        say(hooks, "fitting LDA (" + std::to_string(config.train.lda_topics) + " topics)");
        LdaOptions lda;
        lda.num_topics = config.train.lda_topics;
        lda.iterations = config.train.lda_iterations;
        lda.seed = config.seed;
        lda_confounds = lda_training_distributions(fit_lda(train.docs, rep.vocab.size(), lda));
    }

    TrainHooks train_hooks;
    train_hooks.log = hooks.train_log;
    train_hooks.progress = hooks.progress;

    for (TrainMode mode : config.modes) {
        say(hooks, "training " + std::string(to_string(mode)));
        const auto start = std::chrono::steady_clock::now();
        TrainConfig tc = config.train;
        tc.mode = mode;
        ModeResult res;
        res.mode = mode;
        Predictor predict;

        if (mode == TrainMode::lr) {
            LrConfig lr;
            lr.function_words.assign(rep.style_words.begin(), rep.style_words.end());
            res.linear = train_lr_baseline(splits.train, splits.dev, lr);
            predict = [&lin = *res.linear](const Document& d) { return lin.predict_proba(d); };
        } else {
            ModelConfig mc = base;
            switch (mode) {
                case TrainMode::noadv: res.state = train_noadv(train, dev, mc, tc, train_hooks); break;
                case TrainMode::alt_lo: res.state = run_alternating(train, dev, lo_confounds, mc, tc, train_hooks); break;
                case TrainMode::alt_lda:
                    mc.num_topics = config.train.lda_topics;
                    res.state = run_alternating(train, dev, lda_confounds, mc, tc, train_hooks);
                    break;
                case TrainMode::gr_lo: res.state = train_grl(train, dev, lo_confounds, mc, tc, train_hooks); break;
                case TrainMode::lr: break;
            }
            res.selected_iteration = res.state->selected_iteration;
            predict = neural_predictor(res.state->model, rep.vocab);
        }

        res.report = evaluate_accuracy(predict, rep.classes, splits.test_in, splits.test_out);
        res.masked = masked_evaluation(predict, rep.classes, rep.table, splits.test_in, splits.test_out, ks);
        if (res.state) {
            res.attention = attention_lexicon(res.state->model, rep.vocab, test_in_ids, config.lexicon_top_k,
                                              config.lexicon_min_count);
            res.saliency = saliency_lexicon(res.state->model, rep.vocab, test_in_ids, config.lexicon_top_k,
                                            config.lexicon_min_count);
        }
        res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::ostringstream line;
        line << std::fixed << std::setprecision(4) << "  " << to_string(mode) << ": in " << *res.report.accuracy_in()
             << " out " << *res.report.accuracy_out() << " (" << std::setprecision(1) << res.seconds << " s)";
        say(hooks, line.str());
        rep.results.push_back(std::move(res));
    }
    return rep;
}

void write_bench_table(std::ostream& out, const BenchReport& rep) {
    const auto old_flags = out.flags();
    const auto old_prec = out.precision();
    out << "synthetic benchmark, seed " << rep.config.seed << ": " << rep.classes.size() << " classes, train "
        << rep.train_size << ", dev " << rep.dev_size << ", test_in " << rep.test_in_size << ", test_out "
        << rep.test_out_size << ", vocabulary " << rep.vocab.size() << "\n";
    out << "planted topic words: " << rep.topic_words.size() << "; per-class k masking that many words: "
        << rep.topic_mask_k << "\n\n";

    std::vector<int> ks;
    if (!rep.results.empty())
        for (const auto& r : rep.results.front().masked) ks.push_back(*r.mask_k);

    out << std::left << std::setw(9) << "mode" << std::right << std::setw(8) << "in" << std::setw(8) << "out";
    for (int k : ks) out << std::setw(10) << ("in@" + std::to_string(k));
    out << std::setw(8) << "topic" << std::setw(8) << "sal" << std::setw(6) << "iter" << "\n";
    out << std::fixed << std::setprecision(1);
    for (const auto& r : rep.results) {
        out << std::left << std::setw(9) << to_string(r.mode) << std::right << std::setw(8)
            << 100.0 * r.report.accuracy_in().value_or(0.0) << std::setw(8)
            << 100.0 * r.report.accuracy_out().value_or(0.0);
        for (int k : ks) out << std::setw(10) << 100.0 * r.masked_at(k).accuracy_in().value_or(0.0);
        if (r.attention)
            out << std::setw(8) << count_in(*r.attention, rep.topic_words) << std::setw(8)
                << count_in(*r.saliency, rep.topic_words);
        else
            out << std::setw(8) << "-" << std::setw(8) << "-";
        out << std::setw(6) << r.selected_iteration << "\n";
    }
    out << "\nin/out: accuracy (%) on in-domain and out-of-domain test; in@k: in-domain accuracy with the top-k\n"
           "log-odds words per class masked; topic/sal: planted topic words among the top-"
        << rep.config.lexicon_top_k << " attention / saliency lexicon entries.\n";
    for (const auto& r : rep.results) {
        if (!r.attention) continue;
        out << "\n" << to_string(r.mode) << " attention lexicon:";
        for (const auto& e : r.attention->entries) out << ' ' << e.word;
        out << "\n" << to_string(r.mode) << " saliency lexicon:";
        for (const auto& e : r.saliency->entries) out << ' ' << e.word;
        out << "\n";
    }
    out.flags(old_flags);
    out.precision(old_prec);
}

void write_bench_json(std::ostream& out, const BenchReport& rep) {
    nlohmann::json j;
    j["seed"] = rep.config.seed;
    j["classes"] = rep.classes;
    j["topic_mask_k"] = rep.topic_mask_k;
    j["sizes"] = {{"train", rep.train_size}, {"dev", rep.dev_size}, {"test_in", rep.test_in_size},
                  {"test_out", rep.test_out_size}, {"vocabulary", rep.vocab.size()}};
    nlohmann::json modes = nlohmann::json::array();
    for (const auto& r : rep.results) {
        nlohmann::json m;
        m["mode"] = std::string(to_string(r.mode));
        m["accuracy_in"] = r.report.accuracy_in().value_or(0.0);
        m["accuracy_out"] = r.report.accuracy_out().value_or(0.0);
        nlohmann::json masked = nlohmann::json::object();
        for (const auto& e : r.masked)
            masked[std::to_string(*e.mask_k)] = {{"in", e.accuracy_in().value_or(0.0)},
                                                 {"out", e.accuracy_out().value_or(0.0)}};
        m["masked"] = masked;
        m["selected_iteration"] = r.selected_iteration;
        if (r.state) m["encoder_checksum"] = checksum(r.state->model.encoder);
        if (r.attention) {
            std::vector<std::string> att, sal;
            for (const auto& e : r.attention->entries) att.push_back(e.word);
            for (const auto& e : r.saliency->entries) sal.push_back(e.word);
            m["attention_lexicon"] = att;
            m["saliency_lexicon"] = sal;
            m["attention_topic_words"] = count_in(*r.attention, rep.topic_words);
            m["saliency_topic_words"] = count_in(*r.saliency, rep.topic_words);
        }
        modes.push_back(m);
    }
    j["modes"] = modes;
    out << j.dump(2) << '\n';
}

}  // namespace deconf
