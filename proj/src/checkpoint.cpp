#include "deconf/checkpoint.hpp"

#include <fstream>
#include <iterator>
#include <memory>
#include <sstream>

#include "deconf/error.hpp"

namespace deconf {

using nlohmann::json;

json train_config_to_json(const TrainConfig& c) {
    json j;
    j["mode"] = std::string(to_string(c.mode));
    j["batch_size"] = c.batch_size;
    j["learning_rate"] = c.learning_rate;
    j["adversary_steps"] = c.adversary_steps;
    j["forgetting_steps"] = c.forgetting_steps;
    j["outer_iterations"] = c.outer_iterations;
    j["lambda"] = c.lambda;
    j["patience"] = c.patience;
    j["max_epochs"] = c.max_epochs;
    j["seed"] = c.seed;
    j["alpha0"] = c.alpha0;
    j["mask_k"] = c.mask_k ? json(*c.mask_k) : json(nullptr);
    j["optimizer"] = std::string(to_string(c.optimizer));
    j["entropy_floor"] = c.entropy_floor;
    j["lda_topics"] = c.lda_topics;
    j["lda_iterations"] = c.lda_iterations;
    return j;
}

TrainConfig train_config_from_json(const json& j) {
    TrainConfig c;
    c.mode = parse_train_mode(j.at("mode").get<std::string>());
    c.batch_size = j.at("batch_size").get<int>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.adversary_steps = j.at("adversary_steps").get<int>();
    c.forgetting_steps = j.at("forgetting_steps").get<int>();
    c.outer_iterations = j.at("outer_iterations").get<int>();
    c.lambda = j.at("lambda").get<double>();
    c.patience = j.at("patience").get<int>();
    c.max_epochs = j.at("max_epochs").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.alpha0 = j.at("alpha0").get<double>();
    if (!j.at("mask_k").is_null()) c.mask_k = j.at("mask_k").get<int>();
    c.optimizer = parse_optimizer(j.at("optimizer").get<std::string>());
    c.entropy_floor = j.at("entropy_floor").get<double>();
    c.lda_topics = j.at("lda_topics").get<int>();
    c.lda_iterations = j.at("lda_iterations").get<int>();
    return c;
}

json model_config_to_json(const ModelConfig& c) {
    return {{"vocab_size", c.vocab_size}, {"embed_dim", c.embed_dim},     {"hidden_dim", c.hidden_dim},
            {"head_hidden", c.head_hidden}, {"num_classes", c.num_classes}, {"num_topics", c.num_topics},
            {"seed", c.seed},               {"max_length", c.max_length}};
}

ModelConfig model_config_from_json(const json& j) {
    ModelConfig c;
    c.vocab_size = j.at("vocab_size").get<int>();
    c.embed_dim = j.at("embed_dim").get<int>();
    c.hidden_dim = j.at("hidden_dim").get<int>();
    c.head_hidden = j.at("head_hidden").get<int>();
    c.num_classes = j.at("num_classes").get<int>();
    c.num_topics = j.at("num_topics").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.max_length = j.at("max_length").get<int>();
    return c;
}

namespace {

json tensor_list(const std::vector<std::span<const double>>& views) {
    json arr = json::array();
    for (auto v : views) arr.push_back(std::vector<double>(v.begin(), v.end()));
    return arr;
}

void restore_tensors(const json& arr, const std::vector<std::span<double>>& views, std::string_view what) {
    if (!arr.is_array() || arr.size() != views.size())
        throw Error("checkpoint: wrong tensor count for " + std::string(what));
    for (std::size_t t = 0; t < views.size(); ++t) {
        const auto values = arr[t].get<std::vector<double>>();
        if (values.size() != views[t].size()) throw Error("checkpoint: tensor size mismatch in " + std::string(what));
        std::copy(values.begin(), values.end(), views[t].begin());
    }
}

json head_to_json(const HeadParams& h) {
    return {{"shape", {h.input_dim(), static_cast<int>(h.hidden_weights.rows()), h.output_dim()}},
            {"tensors", tensor_list(tensors(h))}};
}

HeadParams head_from_json(const json& j) {
    const auto shape = j.at("shape").get<std::vector<int>>();
    if (shape.size() != 3) throw Error("checkpoint: bad head shape");
    HeadParams h;
    h.hidden_weights.resize(shape[1], shape[0]);
    h.hidden_bias.resize(shape[1]);
    h.output_weights.resize(shape[2], shape[1]);
    h.output_bias.resize(shape[2]);
    restore_tensors(j.at("tensors"), tensors(h), "head");
    return h;
}

json optimizer_to_json(const Optimizer& o) {
    return {{"kind", std::string(to_string(o.kind()))},
            {"learning_rate", o.learning_rate()},
            {"steps", o.steps()},
            {"m", o.first_moments()},
            {"v", o.second_moments()}};
}

Optimizer optimizer_from_json(const json& j) {
    Optimizer o(parse_optimizer(j.at("kind").get<std::string>()), j.at("learning_rate").get<double>());
    o.restore(j.at("steps").get<long>(), j.at("m").get<std::vector<std::vector<double>>>(),
              j.at("v").get<std::vector<std::vector<double>>>());
    return o;
}

template <class Rng>
std::string rng_state(const Rng& rng) {
    std::ostringstream ss;
    ss << rng;
    return ss.str();
}

template <class Rng>
void set_rng_state(Rng& rng, const std::string& s) {
    std::istringstream ss(s);
    ss >> rng;
    if (!ss) throw Error("checkpoint: corrupt RNG state");
}

json state_to_json(const TrainState& s) {
    json j;
    j["model_config"] = model_config_to_json(s.model.config);
    j["encoder"] = tensor_list(tensors(s.model.encoder));
    j["classifier"] = head_to_json(s.model.classifier);
    json pool = json::array();
    for (const auto& h : s.model.adversaries.heads()) pool.push_back(head_to_json(h));
    j["adversaries"] = pool;
    j["adversary_rng"] = rng_state(s.model.adversaries.rng());
    j["encoder_optimizer"] = optimizer_to_json(s.encoder_optimizer);
    j["classifier_optimizer"] = optimizer_to_json(s.classifier_optimizer);
    j["phase"] = std::string(to_string(s.phase));
    j["iteration"] = s.iteration;
    j["step"] = s.step;
    j["best_dev"] = s.best_dev;
    j["epochs_without_improvement"] = s.epochs_without_improvement;
    j["epochs"] = s.epochs;
    j["selected_iteration"] = s.selected_iteration;
    j["rng"] = rng_state(s.rng);
    json iters = json::array();
    for (const auto& r : s.iterations)
        iters.push_back({{"iteration", r.iteration},
                         {"dev_accuracy", r.dev_accuracy},
                         {"adversary_entropy", r.adversary_entropy},
                         {"encoder_checksum", r.encoder_checksum}});
    j["iterations"] = iters;
    return j;
}

TrainState state_from_json(const json& j) {
    TrainState s;
    s.model = init_params(model_config_from_json(j.at("model_config")));
    restore_tensors(j.at("encoder"), tensors(s.model.encoder), "encoder");
    s.model.classifier = head_from_json(j.at("classifier"));
    for (const auto& h : j.at("adversaries")) s.model.adversaries.add(head_from_json(h));
    set_rng_state(s.model.adversaries.rng(), j.at("adversary_rng").get<std::string>());
    s.encoder_optimizer = optimizer_from_json(j.at("encoder_optimizer"));
    s.classifier_optimizer = optimizer_from_json(j.at("classifier_optimizer"));
    s.phase = parse_phase(j.at("phase").get<std::string>());
    s.iteration = j.at("iteration").get<int>();
    s.step = j.at("step").get<long>();
    s.best_dev = j.at("best_dev").get<double>();
    s.epochs_without_improvement = j.at("epochs_without_improvement").get<int>();
    s.epochs = j.at("epochs").get<int>();
    s.selected_iteration = j.at("selected_iteration").get<int>();
    set_rng_state(s.rng, j.at("rng").get<std::string>());
    for (const auto& r : j.at("iterations"))
        s.iterations.push_back({r.at("iteration").get<int>(), r.at("dev_accuracy").get<double>(),
                                r.at("adversary_entropy").get<double>(), r.at("encoder_checksum").get<std::uint64_t>()});
    return s;
}

json vector_to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vector_from_json(const json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json linear_to_json(const LinearModel& m) {
    return {{"function_words", m.space.function_words},
            {"pos_trigrams", m.space.pos_trigrams},
            {"classes", m.classes},
            {"mean", vector_to_json(m.mean)},
            {"scale", vector_to_json(m.scale)},
            {"weights_rows", m.weights.rows()},
            {"weights", std::vector<double>(m.weights.data(), m.weights.data() + m.weights.size())},
            {"bias", vector_to_json(m.bias)},
            {"l2", m.l2}};
}

LinearModel linear_from_json(const json& j) {
    LinearModel m;
    m.space.function_words = j.at("function_words").get<std::vector<std::string>>();
    m.space.pos_trigrams = j.at("pos_trigrams").get<std::vector<std::string>>();
    m.classes = j.at("classes").get<std::vector<std::string>>();
    m.mean = vector_from_json(j.at("mean"));
    m.scale = vector_from_json(j.at("scale"));
    const auto rows = j.at("weights_rows").get<Eigen::Index>();
    const auto w = j.at("weights").get<std::vector<double>>();
    if (rows <= 0 || static_cast<Eigen::Index>(w.size()) % rows != 0) throw Error("checkpoint: bad linear weights");
    m.weights = Eigen::Map<const Eigen::MatrixXd>(w.data(), rows, static_cast<Eigen::Index>(w.size()) / rows);
    m.bias = vector_from_json(j.at("bias"));
    m.l2 = j.at("l2").get<double>();
    return m;
}

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
    json j;
    j["format"] = std::string(kCheckpointFormat);
    j["mode"] = std::string(to_string(ckpt.mode));
    j["classes"] = ckpt.classes;
    j["vocabulary"] = std::vector<std::string>(ckpt.vocab.tokens().begin() + Vocabulary::num_reserved,
                                               ckpt.vocab.tokens().end());
    j["train_config"] = train_config_to_json(ckpt.train_config);
    j["state"] = ckpt.state ? state_to_json(*ckpt.state) : json(nullptr);
    j["linear"] = ckpt.linear ? linear_to_json(*ckpt.linear) : json(nullptr);
    return json::to_cbor(j);
}

Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
    json j;
    try {
        j = json::from_cbor(bytes.begin(), bytes.end());
    } catch (const json::exception& e) {
        throw Error(std::string("checkpoint: not a valid container (") + e.what() + ")");
    }
    if (!j.is_object() || j.value("format", "") != kCheckpointFormat)
        throw Error("checkpoint: unsupported format tag (expected " + std::string(kCheckpointFormat) + ")");
    try {
        Checkpoint c;
        c.mode = parse_train_mode(j.at("mode").get<std::string>());
        c.classes = j.at("classes").get<std::vector<std::string>>();
        for (const auto& t : j.at("vocabulary").get<std::vector<std::string>>()) c.vocab.add(t);
        c.train_config = train_config_from_json(j.at("train_config"));
        if (!j.at("state").is_null()) c.state = state_from_json(j.at("state"));
        if (!j.at("linear").is_null()) c.linear = linear_from_json(j.at("linear"));
        return c;
    } catch (const json::exception& e) {
        throw Error(std::string("checkpoint: malformed field (") + e.what() + ")");
    }
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    const auto bytes = serialize_checkpoint(ckpt);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write checkpoint " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open checkpoint " + path);
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize_checkpoint(bytes);
}

std::function<std::vector<double>(const Document&)> checkpoint_predictor(const Checkpoint& ckpt) {
    if (ckpt.linear) {
        auto model = std::make_shared<const LinearModel>(*ckpt.linear);
        return [model](const Document& d) { return model->predict_proba(d); };
    }
    if (ckpt.state) {
        auto model = std::make_shared<const Model>(ckpt.state->model);
        auto vocab = std::make_shared<const Vocabulary>(ckpt.vocab);
        return [model, vocab](const Document& d) { return predict_proba(*model, vocab->encode(d.tokens)); };
    }
    throw Error("checkpoint carries no model");
}

}  // namespace deconf
