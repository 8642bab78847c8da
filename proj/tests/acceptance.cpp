// Acceptance suite: one PASS/FAIL line per criterion. Tolerances and
// thresholds are fixed here; the exit status is non-zero if any line fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "deconf/bench.hpp"
#include "deconf/checkpoint.hpp"
#include "deconf/lda.hpp"
#include "deconf/log_odds.hpp"
#include "deconf/training.hpp"
#include "fixtures.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

using namespace deconf;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, double limit_seconds, const std::function<Outcome()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= limit_seconds;
    const bool pass = o.pass && in_time;
    if (!pass) ++failures;
    char timing[96];
    std::snprintf(timing, sizeof timing, "%.1fs of %.0fs%s", secs, limit_seconds, in_time ? "" : ", over time");
    std::cout << (pass ? "PASS" : "FAIL") << "  criterion " << id << ": " << name << " | " << o.detail << " ["
              << timing << "]" << std::endl;
}

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

// ---------------------------------------------------------------------------

Outcome log_odds_oracle() {
    constexpr double kTol = 1e-9;
    std::mt19937_64 rng(101);
    double worst = 0.0;
    for (int c = 0; c < 20; ++c) {
        Corpus corpus;
        std::uniform_int_distribution<int> classes(2, 4), docs(3, 10);
        do {
            corpus = deconf::testing::random_corpus(rng, classes(rng), docs(rng), 10, 15);
        } while ([&] {
            std::size_t n = 0;
            for (const auto& d : corpus) n += d.tokens.size();
            return n > 100;
        }());
        const auto vocab = build_vocabulary(corpus);
        const auto table = compute_log_odds(corpus, vocab, kDefaultAlpha0);
        const auto oracle = deconf::testing::brute_force_log_odds(corpus, vocab, kDefaultAlpha0);
        for (int y = 0; y < table.num_classes(); ++y)
            for (int w = Vocabulary::num_reserved; w < table.num_words(); ++w) {
                const double expect =
                    oracle.at(table.classes()[static_cast<std::size_t>(y)]).at(vocab.token_of(w));
                worst = std::max(worst, std::abs(table.score(y, w) - expect));
            }
    }
    return {worst <= kTol, "20 corpora, max |diff| = " + fmt("%.2e", worst) + " (tol 1e-9)"};
}

Outcome confound_normalization() {
    std::mt19937_64 rng(202);
    const Corpus train = deconf::testing::random_corpus(rng, 4, 200, 40, 60);
    const auto vocab = build_vocabulary(train);
    const auto table = compute_log_odds(train, vocab);
    const Eigen::MatrixXd pwy = word_class_distribution(table);
    const auto prior = class_log_prior(train, table.classes());
    if (prior.empty()) return {false, "fixture corpus is balanced; expected a class prior"};
    std::uniform_int_distribution<int> len(1, 80), word(Vocabulary::num_reserved, vocab.size() - 1);
    double worst_sum = 0.0, worst_order = 0.0, worst_growth = -1.0;
    const std::vector<double> uniform;
    for (int d = 0; d < 1000; ++d) {
        TokenIds ids(static_cast<std::size_t>(len(rng)));
        for (int& id : ids) id = word(rng);
        TokenIds shuffled = ids;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        for (const auto* lp : {&prior, &uniform}) {
            const auto t = document_confound_distribution(ids, pwy, *lp);
            worst_sum = std::max(worst_sum, std::abs(std::accumulate(t.probs.begin(), t.probs.end(), 0.0) - 1.0));
            const auto ts = document_confound_distribution(shuffled, pwy, *lp);
            for (std::size_t k = 0; k < t.probs.size(); ++k)
                worst_order = std::max(worst_order, std::abs(t.probs[k] - ts.probs[k]));
        }
        // A class prior does not scale with length, so doubling is checked on the likelihood alone.
        TokenIds doubled = ids;
        doubled.insert(doubled.end(), ids.begin(), ids.end());
        worst_growth = std::max(worst_growth, document_confound_distribution(doubled, pwy, uniform).entropy() -
                                                  document_confound_distribution(ids, pwy, uniform).entropy());
    }
    const bool pass = worst_sum <= 1e-6 && worst_order <= 1e-9 && worst_growth <= 1e-12;
    return {pass, "1000 docs, max |sum-1| = " + fmt("%.1e", worst_sum) + ", max reorder diff = " +
                      fmt("%.1e", worst_order) + ", max entropy gain on doubling = " + fmt("%.1e", worst_growth)};
}

Outcome gradient_checks() {
    constexpr double kTol = 1e-4;
    double classification = 0.0, combined = 0.0, reversal = 0.0, saliency = 0.0;
    const auto worst = [](const std::vector<deconf::testing::GroupError>& errs) {
        double w = 0.0;
        for (const auto& e : errs) w = std::max(w, e.error);
        return w;
    };
    {
        auto f = deconf::testing::tiny_fixture(21);
        classification = worst(deconf::testing::check_objective(f, {true, AdversaryTarget::none, 0.0}));
    }
    {
        auto f = deconf::testing::tiny_fixture(22);
        combined = worst(deconf::testing::check_objective(f, {true, AdversaryTarget::uniform, 1.0}));
    }
    {
        auto f = deconf::testing::tiny_fixture(23);
        const double lambda = 0.2;
        reversal = worst(deconf::testing::check_objective(f, {true, AdversaryTarget::confound, -lambda}));
        Vector g = Vector::Random(8);
        const Vector r = grl_transform(g, lambda);
        for (Eigen::Index i = 0; i < g.size(); ++i)
            if (r(i) != -lambda * g(i)) reversal = std::max(reversal, 1.0);
        if (GradientReversal{lambda}.forward(g) != g) reversal = std::max(reversal, 1.0);
    }
    {
        auto f = deconf::testing::tiny_fixture(24);
        saliency = deconf::testing::check_saliency(f, {3, 4, 5, 6, 7});
    }
    const bool pass = classification <= kTol && combined <= kTol && reversal <= kTol && saliency <= kTol;
    return {pass, "max relative error: classification " + fmt("%.1e", classification) + ", combined " +
                      fmt("%.1e", combined) + ", reversal path " + fmt("%.1e", reversal) + ", saliency " +
                      fmt("%.1e", saliency) + " (tol 1e-4)"};
}

Outcome cross_entropy_identities() {
    double worst_uniform = 0.0;
    for (int k = 2; k <= 100; ++k) {
        const std::vector<double> u(static_cast<std::size_t>(k), 1.0 / k);
        worst_uniform = std::max(worst_uniform, std::abs(cross_entropy_dist(u, u) - std::log(static_cast<double>(k))));
    }
    std::mt19937_64 rng(404);
    std::gamma_distribution<double> gamma(1.0, 1.0);
    std::uniform_int_distribution<int> dims(2, 60);
    int violations = 0;
    for (int i = 0; i < 1000; ++i) {
        const int k = dims(rng);
        std::vector<double> q(static_cast<std::size_t>(k));
        double s = 0.0;
        for (double& x : q) s += (x = gamma(rng));
        for (double& x : q) x /= s;
        const std::vector<double> u(static_cast<std::size_t>(k), 1.0 / k);
        if (!(cross_entropy_dist(q, u) > std::log(static_cast<double>(k)))) ++violations;
    }
    return {worst_uniform <= 1e-9 && violations == 0,
            "max |CE(U,U) - ln K| = " + fmt("%.1e", worst_uniform) + ", CE(q,U) <= ln K in " +
                std::to_string(violations) + "/1000 draws"};
}

Outcome alternating_structure() {
    SynthSpec spec;
    spec.style_words_per_class = 10;
    spec.topic_words_per_class = 4;
    spec.filler_vocab_size = 60;
    spec.doc_length = {20, 30};
    spec.docs_per_class_per_domain = 15;
    spec.seed = 5;
    const Corpus corpus = generate_synthetic(spec);
    Corpus train, dev;
    for (std::size_t i = 0; i < corpus.size(); ++i)
        if (corpus[i].domain == Domain::in) (i % 5 == 0 ? dev : train).push_back(corpus[i]);
    const auto vocab = build_vocabulary(train);
    const auto classes = class_names(train);
    const Dataset dtrain = make_dataset(train, vocab, classes);
    const Dataset ddev = make_dataset(dev, vocab, classes);
    const auto table = compute_log_odds(train, vocab);
    const auto confounds = log_odds_confounds(dtrain.docs, table);

    ModelConfig mc;
    mc.vocab_size = vocab.size();
    mc.embed_dim = 8;
    mc.hidden_dim = 8;
    mc.head_hidden = 8;
    mc.num_classes = static_cast<int>(classes.size());
    mc.num_topics = mc.num_classes;
    mc.seed = 5;
    TrainConfig tc;
    tc.mode = TrainMode::alt_lo;
    tc.batch_size = 8;
    tc.adversary_steps = 30;
    tc.forgetting_steps = 30;
    tc.outer_iterations = 3;
    tc.max_epochs = 3;
    tc.seed = 5;

    bool isolated = true;
    int phases = 0;
    std::uint64_t enc_before = 0;
    std::vector<std::uint64_t> advs_before;
    TrainHooks hooks;
    hooks.on_phase_end = [&](const TrainState& s) {
        ++phases;
        std::vector<std::uint64_t> advs;
        for (const auto& a : s.model.adversaries.heads()) advs.push_back(checksum(a));
        const auto enc = checksum(s.model.encoder);
        if (s.phase == Phase::topic_train) {
            if (enc != enc_before || advs.size() != advs_before.size() + 1 ||
                !std::equal(advs_before.begin(), advs_before.end(), advs.begin()))
                isolated = false;
        } else if (s.phase == Phase::topic_forget) {
            if (advs != advs_before || enc == enc_before) isolated = false;
        }
        enc_before = enc;
        advs_before = advs;
    };
    const TrainState a = run_alternating(dtrain, ddev, confounds, mc, tc, hooks);
    const TrainState b = run_alternating(dtrain, ddev, confounds, mc, tc);
    const auto bytes = [&](const TrainState& s) {
        Checkpoint c;
        c.mode = tc.mode;
        c.classes = classes;
        c.vocab = vocab;
        c.train_config = tc;
        c.state = s;
        return serialize_checkpoint(c);
    };
    const bool same = bytes(a) == bytes(b);
    const bool pool = a.model.adversaries.size() == 3;
    return {pool && isolated && same && phases == 7,
            "pool size " + std::to_string(a.model.adversaries.size()) + ", phase isolation " +
                (isolated ? "holds" : "violated") + " over " + std::to_string(phases) + " phases, checkpoints " +
                (same ? "identical" : "differ")};
}

Outcome lda_sanity() {
    int separated = 0;
    for (std::uint64_t seed : {1, 2, 3}) {
        LdaOptions o;
        o.num_topics = 2;
        o.iterations = 200;
        o.seed = seed;
        const auto state = fit_lda(deconf::testing::disjoint_fixture(seed), 23, o);
        const auto a = lda_top_words(state, 0, 10);
        const auto b = lda_top_words(state, 1, 10);
        std::set<int> sa(a.begin(), a.end());
        if (std::none_of(b.begin(), b.end(), [&](int w) { return sa.count(w) > 0; })) ++separated;
    }
    return {separated == 3, std::to_string(separated) + "/3 seeds with disjoint top-10 word sets"};
}

// ---------------------------------------------------------------------------
// Synthetic benchmark

constexpr double kNoadvInMin = 0.90;
constexpr double kOutGapMin = 0.20;
constexpr double kAltInMin = 0.80;
constexpr double kNoadvMaskDropMin = 0.15;
constexpr double kAltMaskDropMax = 0.05;
constexpr double kNoadvTopicShareMin = 0.60;
constexpr double kAltTopicShareMax = 0.20;

const BenchReport& bench() {
    static const BenchReport rep = [] {
        std::ostringstream log;
        BenchHooks hooks;
        hooks.train_log = &log;
        BenchReport r = run_benchmark(default_bench_config(1), hooks);
        write_bench_table(std::cerr, r);
        return r;
    }();
    return rep;
}

std::string pct(double x) { return fmt("%.1f", 100.0 * x); }

Outcome directional_accuracy() {
    const auto& rep = bench();
    const double noadv_in = *rep.result(TrainMode::noadv).report.accuracy_in();
    const double noadv_out = *rep.result(TrainMode::noadv).report.accuracy_out();
    const double alt_in = *rep.result(TrainMode::alt_lo).report.accuracy_in();
    const double alt_out = *rep.result(TrainMode::alt_lo).report.accuracy_out();
    const double lda_out = *rep.result(TrainMode::alt_lda).report.accuracy_out();
    const double grl_out = *rep.result(TrainMode::gr_lo).report.accuracy_out();
    const bool pass = noadv_in >= kNoadvInMin && alt_out - noadv_out >= kOutGapMin && alt_in >= kAltInMin &&
                      alt_out > lda_out && lda_out > grl_out;
    return {pass, "noadv in/out " + pct(noadv_in) + "/" + pct(noadv_out) + ", alt-lo in/out " + pct(alt_in) + "/" +
                      pct(alt_out) + ", out: alt-lo " + pct(alt_out) + " > alt-lda " + pct(lda_out) + " > gr-lo " +
                      pct(grl_out) + " (need noadv in >= 90, gap >= 20, alt-lo in >= 80, strict order)"};
}

Outcome masking_robustness() {
    const auto& rep = bench();
    const int k = rep.topic_mask_k;
    const auto drop = [&](TrainMode m) {
        const auto& r = rep.result(m);
        return *r.report.accuracy_in() - *r.masked_at(k).accuracy_in();
    };
    const double noadv = drop(TrainMode::noadv), alt = drop(TrainMode::alt_lo);
    return {noadv >= kNoadvMaskDropMin && alt < kAltMaskDropMax,
            "k = " + std::to_string(k) + " per class (" + std::to_string(top_k_union(rep.table, k).size()) +
                " words masked), in-domain drop: noadv " + pct(noadv) + ", alt-lo " + pct(alt) +
                " (need >= 15 and < 5)"};
}

Outcome lexicon_shift() {
    const auto& rep = bench();
    const auto& noadv = rep.result(TrainMode::noadv);
    const auto& alt = rep.result(TrainMode::alt_lo);
    const int n = rep.config.lexicon_top_k;
    const int noadv_topic = count_in(*noadv.attention, rep.topic_words);
    const int alt_topic = count_in(*alt.attention, rep.topic_words);
    const int alt_sal_topic = count_in(*alt.saliency, rep.topic_words);
    const int alt_size = static_cast<int>(alt.attention->entries.size());
    const int alt_other = alt_size - alt_topic;
    const bool pass = noadv_topic >= kNoadvTopicShareMin * n && alt_topic < kAltTopicShareMax * n &&
                      2 * alt_other > alt_size && alt_sal_topic > alt_topic;
    return {pass, "topic words in top-" + std::to_string(n) + ": noadv attention " + std::to_string(noadv_topic) +
                      ", alt-lo attention " + std::to_string(alt_topic) + ", alt-lo saliency " +
                      std::to_string(alt_sal_topic) + " (need >= 12, < 4 with style/filler majority, saliency > attention)"};
}

}  // namespace

int main() {
    report(1, "log-odds oracle equivalence", 5, log_odds_oracle);
    report(2, "confound normalization", 10, confound_normalization);
    report(3, "gradient checks", 60, gradient_checks);
    report(4, "cross-entropy identities", 1, cross_entropy_identities);
    report(5, "alternating schedule structure", 300, alternating_structure);
    report(6, "in/out-of-domain accuracy on the synthetic benchmark", 1800, directional_accuracy);
    report(7, "masking robustness", 600, masking_robustness);
    report(8, "lexicon shift", 300, lexicon_shift);
    report(9, "LDA separates disjoint vocabularies", 120, lda_sanity);
    return failures == 0 ? 0 : 1;
}
