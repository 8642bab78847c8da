#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "deconf/checkpoint.hpp"
#include "deconf/error.hpp"
#include "fixtures.hpp"

using namespace deconf;

namespace {

struct Trained {
    Vocabulary vocab;
    std::vector<std::string> classes;
    Dataset train;
    Dataset dev;
    std::vector<ConfoundDistribution> confounds;
    ModelConfig model;
    TrainConfig config;
};

Trained fixture() {
    Trained t;
    std::mt19937_64 rng(4);
    const Corpus corpus = deconf::testing::random_corpus(rng, 2, 30, 8, 12);
    t.vocab = build_vocabulary(corpus);
    t.classes = class_names(corpus);
    t.train = make_dataset(corpus, t.vocab, t.classes);
    t.dev = t.train;
    const auto table = compute_log_odds(corpus, t.vocab);
    t.confounds = log_odds_confounds(t.train.docs, table);
    t.model.vocab_size = t.vocab.size();
    t.model.embed_dim = 4;
    t.model.hidden_dim = 3;
    t.model.head_hidden = 5;
    t.model.num_classes = 2;
    t.model.num_topics = 2;
    t.config.mode = TrainMode::alt_lo;
    t.config.batch_size = 8;
    t.config.adversary_steps = 5;
    t.config.forgetting_steps = 5;
    t.config.outer_iterations = 2;
    t.config.max_epochs = 2;
    t.config.seed = 3;
    return t;
}

Checkpoint make_checkpoint(const Trained& t) {
    Checkpoint c;
    c.mode = t.config.mode;
    c.classes = t.classes;
    c.vocab = t.vocab;
    c.train_config = t.config;
    c.state = run_alternating(t.train, t.dev, t.confounds, t.model, t.config);
    return c;
}

}  // namespace

TEST(Checkpoint, RoundTripPreservesEverything) {
    const Trained t = fixture();
    const Checkpoint c = make_checkpoint(t);
    const auto bytes = serialize_checkpoint(c);
    const Checkpoint back = deserialize_checkpoint(bytes);
    EXPECT_EQ(back.mode, c.mode);
    EXPECT_EQ(back.classes, c.classes);
    EXPECT_EQ(back.vocab, c.vocab);
    ASSERT_TRUE(back.state);
    const TrainState& a = *c.state;
    const TrainState& b = *back.state;
    EXPECT_EQ(b.model.config, a.model.config);
    EXPECT_EQ(checksum(b.model.encoder), checksum(a.model.encoder));
    EXPECT_EQ(checksum(b.model.classifier), checksum(a.model.classifier));
    ASSERT_EQ(b.model.adversaries.size(), a.model.adversaries.size());
    for (std::size_t i = 0; i < a.model.adversaries.size(); ++i)
        EXPECT_EQ(checksum(b.model.adversaries[i]), checksum(a.model.adversaries[i]));
    EXPECT_EQ(b.rng, a.rng);
    EXPECT_EQ(b.model.adversaries.rng(), a.model.adversaries.rng());
    EXPECT_EQ(b.phase, a.phase);
    EXPECT_EQ(b.iteration, a.iteration);
    EXPECT_EQ(b.step, a.step);
    EXPECT_EQ(b.selected_iteration, a.selected_iteration);
    EXPECT_EQ(b.encoder_optimizer.steps(), a.encoder_optimizer.steps());
    EXPECT_EQ(b.encoder_optimizer.first_moments(), a.encoder_optimizer.first_moments());
    EXPECT_EQ(b.encoder_optimizer.second_moments(), a.encoder_optimizer.second_moments());
    ASSERT_EQ(b.iterations.size(), a.iterations.size());
    EXPECT_EQ(b.iterations.back().encoder_checksum, a.iterations.back().encoder_checksum);
    EXPECT_EQ(back.train_config.outer_iterations, 2);
    EXPECT_EQ(back.train_config.mode, TrainMode::alt_lo);
    // Re-serialising gives the same bytes.
    EXPECT_EQ(serialize_checkpoint(back), bytes);
}

TEST(Checkpoint, IdenticalSeedsGiveIdenticalBytes) {
    const Trained t = fixture();
    EXPECT_EQ(serialize_checkpoint(make_checkpoint(t)), serialize_checkpoint(make_checkpoint(t)));
}

TEST(Checkpoint, ResumedTrainingMatchesUninterrupted) {
    Trained t = fixture();
    TrainState live = make_train_state(t.model, t.config);
    pretrain(live, t.train, t.dev, t.config);
    topic_training_phase(live, t.train, t.confounds, t.config);

    Checkpoint c;
    c.mode = t.config.mode;
    c.classes = t.classes;
    c.vocab = t.vocab;
    c.train_config = t.config;
    c.state = live;
    TrainState resumed = *deserialize_checkpoint(serialize_checkpoint(c)).state;

    topic_forgetting_phase(live, t.train, t.config);
    topic_forgetting_phase(resumed, t.train, t.config);
    EXPECT_EQ(checksum(resumed.model.encoder), checksum(live.model.encoder));
    EXPECT_EQ(checksum(resumed.model.classifier), checksum(live.model.classifier));
}

TEST(Checkpoint, PredictorMatchesModel) {
    const Trained t = fixture();
    const Checkpoint c = make_checkpoint(t);
    const auto predict = checkpoint_predictor(deserialize_checkpoint(serialize_checkpoint(c)));
    const auto d = deconf::testing::doc("t1 t2 t3", "c0");
    EXPECT_EQ(predict(d), predict_proba(c.state->model, t.vocab.encode(d.tokens)));
}

TEST(Checkpoint, LinearModelRoundTrip) {
    Corpus train, dev;
    for (int i = 0; i < 10; ++i) {
        train.push_back(deconf::testing::doc(i % 2 ? "the a b . c d ." : "of a b c d e f g .", i % 2 ? "A" : "B"));
        dev.push_back(train.back());
    }
    Checkpoint c;
    c.mode = TrainMode::lr;
    c.classes = {"A", "B"};
    c.train_config.mode = TrainMode::lr;
    c.linear = train_lr_baseline(train, dev);
    const Checkpoint back = deserialize_checkpoint(serialize_checkpoint(c));
    ASSERT_TRUE(back.linear);
    EXPECT_FALSE(back.state);
    EXPECT_EQ(back.linear->predict_proba(train[0]), c.linear->predict_proba(train[0]));
}

TEST(Checkpoint, RejectsGarbageAndWrongFormat) {
    const std::vector<std::uint8_t> junk{1, 2, 3, 4};
    EXPECT_THROW(deserialize_checkpoint(junk), Error);
    const auto cbor = nlohmann::json::to_cbor(nlohmann::json{{"format", "something-else/9"}});
    EXPECT_THROW(deserialize_checkpoint(cbor), Error);
}

TEST(Checkpoint, FileRoundTrip) {
    const Trained t = fixture();
    const Checkpoint c = make_checkpoint(t);
    const auto path = (std::filesystem::temp_directory_path() / "deconf_ckpt_test.ckpt").string();
    save_checkpoint(path, c);
    EXPECT_EQ(serialize_checkpoint(load_checkpoint(path)), serialize_checkpoint(c));
    std::filesystem::remove(path);
    EXPECT_THROW(load_checkpoint(path), Error);
}

TEST(ConfigJson, TrainConfigRoundTrip) {
    TrainConfig c;
    c.mode = TrainMode::gr_lo;
    c.lambda = 0.35;
    c.mask_k = 50;
    c.optimizer = OptimizerKind::sgd;
    const TrainConfig back = train_config_from_json(train_config_to_json(c));
    EXPECT_EQ(back.mode, c.mode);
    EXPECT_DOUBLE_EQ(back.lambda, 0.35);
    EXPECT_EQ(back.mask_k, 50);
    EXPECT_EQ(back.optimizer, OptimizerKind::sgd);
    ModelConfig m;
    m.vocab_size = 99;
    m.seed = 12345678901ULL;
    EXPECT_EQ(model_config_from_json(model_config_to_json(m)), m);
}
