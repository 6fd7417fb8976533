#include "eclipse/config.hpp"

#include <fstream>
#include <set>
#include <string>

namespace eclipse {

namespace {

using nlohmann::json;

// Reads fields from one JSON object and rejects keys nobody asked for.
class StrictReader {
public:
    StrictReader(const json& j, std::string section) : j_(j), section_(std::move(section)) {
        if (!j_.is_object()) throw ConfigError(section_ + ": expected an object");
    }

    template <typename T>
    void read(const char* key, T& out) {
        seen_.insert(key);
        auto it = j_.find(key);
        if (it == j_.end()) return;
        try {
            out = it->template get<T>();
        } catch (const json::exception& e) {
            throw ConfigError(section_ + "." + key + ": " + e.what());
        }
    }

    template <typename T, typename Parse>
    void read_enum(const char* key, T& out, Parse parse) {
        std::string name;
        seen_.insert(key);
        auto it = j_.find(key);
        if (it == j_.end()) return;
        if (!it->is_string()) throw ConfigError(section_ + "." + key + ": expected a string");
        try {
            out = parse(it->template get<std::string>());
        } catch (const std::invalid_argument& e) {
            throw ConfigError(section_ + "." + key + ": " + e.what());
        }
    }

    const json* child(const char* key) {
        seen_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    void finish() const {
        for (const auto& [key, value] : j_.items()) {
            if (!seen_.contains(key)) throw ConfigError(section_ + ": unknown key '" + key + "'");
        }
    }

private:
    const json& j_;
    std::string section_;
    std::set<std::string> seen_;
};

}  // namespace

json to_json(const SyntheticDatasetSpec& s) {
    return {{"num_clips", s.num_clips},
            {"total_frames", s.total_frames},
            {"frames", s.frames},
            {"height", s.height},
            {"width", s.width},
            {"patch", s.patch},
            {"spect_rows", s.spect_rows},
            {"spect_channels", s.spect_channels},
            {"vocab", s.vocab},
            {"text_len", s.text_len},
            {"latent_dim", s.latent_dim},
            {"visual_fraction", s.visual_fraction},
            {"pixel_noise", s.pixel_noise},
            {"spect_noise", s.spect_noise},
            {"seed", s.seed}};
}

SyntheticDatasetSpec dataset_spec_from_json(const json& j) {
    SyntheticDatasetSpec s;
    StrictReader r(j, "data");
    r.read("num_clips", s.num_clips);
    r.read("total_frames", s.total_frames);
    r.read("frames", s.frames);
    r.read("height", s.height);
    r.read("width", s.width);
    r.read("patch", s.patch);
    r.read("spect_rows", s.spect_rows);
    r.read("spect_channels", s.spect_channels);
    r.read("vocab", s.vocab);
    r.read("text_len", s.text_len);
    r.read("latent_dim", s.latent_dim);
    r.read("visual_fraction", s.visual_fraction);
    r.read("pixel_noise", s.pixel_noise);
    r.read("spect_noise", s.spect_noise);
    r.read("seed", s.seed);
    r.finish();
    return s;
}

json to_json(const ModelConfig& c) {
    return {{"d", c.d},
            {"heads", c.heads},
            {"layers", c.layers},
            {"av_blocks", c.av_blocks},
            {"variant", std::string(to_string(c.variant))},
            {"frames", c.frames},
            {"height", c.height},
            {"width", c.width},
            {"patch", c.patch},
            {"spect_rows", c.spect_rows},
            {"spect_channels", c.spect_channels},
            {"audio_hidden", c.audio_hidden},
            {"vocab", c.vocab},
            {"max_text_tokens", c.max_text_tokens},
            {"text_layers", c.text_layers},
            {"logit_scale_init", c.logit_scale_init}};
}

ModelConfig model_config_from_json(const json& j) {
    ModelConfig c;
    StrictReader r(j, "model");
    r.read("d", c.d);
    r.read("heads", c.heads);
    r.read("layers", c.layers);
    r.read("av_blocks", c.av_blocks);
    r.read_enum("variant", c.variant, block_variant_from_string);
    r.read("frames", c.frames);
    r.read("height", c.height);
    r.read("width", c.width);
    r.read("patch", c.patch);
    r.read("spect_rows", c.spect_rows);
    r.read("spect_channels", c.spect_channels);
    r.read("audio_hidden", c.audio_hidden);
    r.read("vocab", c.vocab);
    r.read("max_text_tokens", c.max_text_tokens);
    r.read("text_layers", c.text_layers);
    r.read("logit_scale_init", c.logit_scale_init);
    r.finish();
    return c;
}

json to_json(const TrainConfig& c) {
    return {{"steps", c.steps},
            {"batch_size", c.batch_size},
            {"eval_every", c.eval_every},
            {"sampling", std::string(to_string(c.sampling))},
            {"lr_slow", c.adam.lr_slow},
            {"lr_new", c.adam.lr_new},
            {"beta1", c.adam.beta1},
            {"beta2", c.adam.beta2},
            {"eps", c.adam.eps},
            {"weight_decay_slow", c.adam.weight_decay_slow}};
}

TrainConfig train_config_from_json(const json& j) {
    TrainConfig c;
    StrictReader r(j, "train");
    r.read("steps", c.steps);
    r.read("batch_size", c.batch_size);
    r.read("eval_every", c.eval_every);
    r.read_enum("sampling", c.sampling, sampling_strategy_from_string);
    r.read("lr_slow", c.adam.lr_slow);
    r.read("lr_new", c.adam.lr_new);
    r.read("beta1", c.adam.beta1);
    r.read("beta2", c.adam.beta2);
    r.read("eps", c.adam.eps);
    r.read("weight_decay_slow", c.adam.weight_decay_slow);
    r.finish();
    if (c.batch_size < 1) throw ConfigError("train.batch_size must be at least 1");
    return c;
}

json to_json(const RunConfig& c) {
    return {{"seed", c.seed}, {"data", to_json(c.data)}, {"model", to_json(c.model)}, {"train", to_json(c.train)}};
}

RunConfig run_config_from_json(const json& j) {
    RunConfig c;
    StrictReader r(j, "config");
    r.read("seed", c.seed);
    if (const json* d = r.child("data")) {
        if (d->contains("seed")) throw ConfigError("data.seed: randomness is derived from the top-level seed");
        c.data = dataset_spec_from_json(*d);
    }
    if (const json* m = r.child("model")) c.model = model_config_from_json(*m);
    if (const json* t = r.child("train")) c.train = train_config_from_json(*t);
    r.finish();
    c.data.seed = derive_seed(c.seed, "data");
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    RunConfig cfg = run_config_from_json(j);
    check_consistent(cfg);
    return cfg;
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view purpose) {
    // FNV-1a over the purpose, mixed with the seed by splitmix64.
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : purpose) {
        h ^= c;
        h *= 1099511628211ull;
    }
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (h | 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

void check_consistent(const RunConfig& cfg) {
    try {
        cfg.data.validate();
        cfg.model.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    auto mismatch = [](const char* what, std::size_t data, std::size_t model) {
        throw ConfigError(std::string("data.") + what + " = " + std::to_string(data) + " but model." + what + " = " +
                          std::to_string(model));
    };
    const auto& d = cfg.data;
    const auto& m = cfg.model;
    if (d.frames != m.frames) mismatch("frames", d.frames, m.frames);
    if (d.height != m.height) mismatch("height", d.height, m.height);
    if (d.width != m.width) mismatch("width", d.width, m.width);
    if (d.patch != m.patch) mismatch("patch", d.patch, m.patch);
    if (d.spect_rows != m.spect_rows) mismatch("spect_rows", d.spect_rows, m.spect_rows);
    if (d.spect_channels != m.spect_channels) mismatch("spect_channels", d.spect_channels, m.spect_channels);
    if (d.vocab != m.vocab) mismatch("vocab", d.vocab, m.vocab);
    if (d.text_len > m.max_text_tokens) mismatch("text_len", d.text_len, m.max_text_tokens);
}

}  // namespace eclipse
