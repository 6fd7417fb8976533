#include "eclipse/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "eclipse/config.hpp"
#include "eclipse/io.hpp"
#include "eclipse/ops.hpp"
#include "eclipse/rng.hpp"

namespace eclipse {

std::size_t SyntheticDatasetSpec::visual_attributes() const {
    return static_cast<std::size_t>(std::lround(visual_fraction * static_cast<double>(latent_dim)));
}

void SyntheticDatasetSpec::validate() const {
    auto fail = [](const std::string& msg) { throw std::invalid_argument("synthetic dataset: " + msg); };
    if (num_clips == 0) fail("num_clips must be positive");
    if (frames == 0 || frames > total_frames) fail("need 1 <= frames <= total_frames");
    if (patch == 0 || height % patch != 0 || width % patch != 0) fail("frame size not divisible by patch");
    if (spect_rows == 0 || spect_channels == 0) fail("spectrogram extents must be positive");
    if (latent_dim == 0) fail("latent_dim must be positive");
    if (values_per_attribute() < 2) fail("vocab must give at least two values per latent attribute");
    if (text_len < latent_dim) fail("text_len must cover every latent attribute");
    if (!(visual_fraction >= 0.0 && visual_fraction <= 1.0)) fail("visual_fraction must lie in [0,1]");
    if (pixel_noise < 0.0 || spect_noise < 0.0) fail("noise levels must be non-negative");
}

namespace {

// Index of the temporal segment (as used by random-segment sampling) containing `frame`.
std::size_t segment_of(std::size_t frame, std::size_t total, std::size_t segments) {
    for (std::size_t i = 0; i < segments; ++i) {
        if (frame < (i + 1) * total / segments) return i;
    }
    return segments - 1;
}

}  // namespace

Dataset generate_synthetic(const SyntheticDatasetSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    const std::size_t values = spec.values_per_attribute();
    const std::size_t n_visual = spec.visual_attributes();
    const std::size_t n_audio = spec.audio_attributes();
    const std::size_t grid_w = spec.width / spec.patch;
    const std::size_t n_patches = (spec.height / spec.patch) * grid_w;
    const std::size_t P = spec.patch;

    std::vector<std::size_t> codebook(spec.vocab);
    std::iota(codebook.begin(), codebook.end(), std::size_t{0});
    std::shuffle(codebook.begin(), codebook.end(), rng.engine());

    std::vector<std::size_t> regions(n_patches);
    std::iota(regions.begin(), regions.end(), std::size_t{0});
    std::shuffle(regions.begin(), regions.end(), rng.engine());

    // Low-frequency colored patterns: a flat color plus one cosine of at most one cycle per patch.
    std::vector<std::vector<std::vector<double>>> patterns(n_visual);
    for (auto& per_value : patterns) {
        per_value.resize(values);
        for (auto& pattern : per_value) {
            double color[3], amp[3];
            for (int c = 0; c < 3; ++c) {
                color[c] = rng.uniform(-1.0, 1.0);
                amp[c] = rng.uniform(-1.0, 1.0);
            }
            const double fy = static_cast<double>(rng.uniform_int(0, 1));
            const double fx = static_cast<double>(rng.uniform_int(0, 1));
            const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
            pattern.resize(P * P * 3);
            for (std::size_t i = 0; i < P; ++i)
                for (std::size_t j = 0; j < P; ++j) {
                    const double wave = std::cos(2.0 * std::numbers::pi * (fy * i + fx * j) / P + phase);
                    for (int c = 0; c < 3; ++c) pattern[(i * P + j) * 3 + c] = 0.6 * color[c] + 0.4 * amp[c] * wave;
                }
        }
    }

    std::vector<std::vector<std::vector<double>>> signatures(n_audio);
    for (auto& per_value : signatures) {
        per_value.resize(values);
        for (auto& sig : per_value) {
            sig.resize(spec.spect_channels);
            for (double& s : sig) s = rng.normal();
        }
    }
    std::vector<double> envelope(spec.spect_rows);
    for (std::size_t m = 0; m < spec.spect_rows; ++m) {
        envelope[m] = 0.5 + 0.5 * std::sin(std::numbers::pi * (static_cast<double>(m) + 0.5) /
                                           static_cast<double>(spec.spect_rows));
    }

    Dataset data;
    data.spec = spec;
    data.examples.reserve(spec.num_clips);
    const std::size_t total = spec.total_frames;
    for (std::size_t clip = 0; clip < spec.num_clips; ++clip) {
        Example ex;
        ex.latent.resize(spec.latent_dim);
        for (auto& z : ex.latent) z = rng.uniform_int(0, values - 1);

        std::vector<double> pixels(total * spec.height * spec.width * 3);
        for (double& p : pixels) p = 0.5 + spec.pixel_noise * rng.normal();
        for (std::size_t f = 0; f < total; ++f) {
            for (std::size_t a = 0; a < n_visual; ++a) {
                const auto& pattern = patterns[a][ex.latent[a]];
                const std::size_t region = regions[a % n_patches];
                const std::size_t row0 = (region / grid_w) * P;
                const std::size_t col0 = (region % grid_w) * P;
                for (std::size_t i = 0; i < P; ++i)
                    for (std::size_t j = 0; j < P; ++j)
                        for (std::size_t c = 0; c < 3; ++c)
                            pixels[((f * spec.height + row0 + i) * spec.width + col0 + j) * 3 + c] +=
                                0.25 * pattern[(i * P + j) * 3 + c];
            }
        }
        for (double& p : pixels) p = std::clamp(p, 0.0, 1.0);

        std::vector<double> spect(total * spec.spect_rows * spec.spect_channels);
        for (double& s : spect) s = spec.spect_noise * rng.normal();
        for (std::size_t f = 0; f < total; ++f) {
            const std::size_t segment = segment_of(f, total, spec.frames);
            for (std::size_t a = 0; a < n_audio; ++a) {
                if (a % spec.frames != segment) continue;
                const auto& sig = signatures[a][ex.latent[n_visual + a]];
                for (std::size_t m = 0; m < spec.spect_rows; ++m)
                    for (std::size_t c = 0; c < spec.spect_channels; ++c)
                        spect[(f * spec.spect_rows + m) * spec.spect_channels + c] += envelope[m] * sig[c];
            }
        }

        ex.clip.frames = Tensor::from({total, spec.height, spec.width, 3}, std::move(pixels));
        ex.clip.frame_times.resize(total);
        for (std::size_t f = 0; f < total; ++f) ex.clip.frame_times[f] = static_cast<double>(f) / 3.0;
        ex.clip.source_id = "synthetic-" + std::to_string(clip);
        ex.audio.spect = Tensor::from({total, spec.spect_rows, spec.spect_channels}, std::move(spect));
        ex.text.tokens.resize(spec.text_len);
        for (std::size_t i = 0; i < spec.text_len; ++i) {
            const std::size_t attr = i % spec.latent_dim;
            ex.text.tokens[i] = codebook[attr * values + ex.latent[attr]];
        }
        data.examples.push_back(std::move(ex));
    }
    return data;
}

SampledExample take_frames(const Example& ex, const std::vector<std::size_t>& indices) {
    SampledExample s;
    s.clip.frames = ops::index_select(ex.clip.frames, 0, indices);
    for (auto i : indices) s.clip.frame_times.push_back(ex.clip.frame_times.at(i));
    s.clip.source_id = ex.clip.source_id;
    s.audio.spect = ops::index_select(ex.audio.spect, 0, indices);
    s.audio.span_seconds = ex.audio.span_seconds;
    return s;
}

namespace {

constexpr int kManifestVersion = 1;

Tensor stack(const std::vector<Example>& examples, const auto& select) {
    Shape shape = select(examples.front()).shape();
    shape.insert(shape.begin(), examples.size());
    std::vector<double> values;
    values.reserve(shape_numel(shape));
    for (const auto& ex : examples) {
        const Tensor t = select(ex);
        values.insert(values.end(), t.data().begin(), t.data().end());
    }
    return Tensor::from(std::move(shape), std::move(values));
}

Tensor unstack(const Tensor& all, std::size_t i) {
    Shape shape(all.shape().begin() + 1, all.shape().end());
    const std::size_t n = shape_numel(shape);
    const auto d = all.data();
    return Tensor::from(std::move(shape), std::vector<double>(d.begin() + i * n, d.begin() + (i + 1) * n));
}

Tensor ids_tensor(const std::vector<std::size_t>& ids) {
    std::vector<double> v(ids.begin(), ids.end());
    return Tensor::from({ids.size()}, std::move(v));
}

std::vector<std::size_t> tensor_ids(const Tensor& t) {
    std::vector<std::size_t> ids;
    for (double v : t.data()) ids.push_back(static_cast<std::size_t>(v));
    return ids;
}

}  // namespace

void save_dataset(const Dataset& data, const std::filesystem::path& dir) {
    if (data.examples.empty()) throw std::invalid_argument("save_dataset: empty dataset");
    std::filesystem::create_directories(dir);
    save_tensor(dir / "frames.bin", stack(data.examples, [](const Example& e) { return e.clip.frames; }));
    save_tensor(dir / "spect.bin", stack(data.examples, [](const Example& e) { return e.audio.spect; }));
    save_tensor(dir / "text.bin", stack(data.examples, [](const Example& e) { return ids_tensor(e.text.tokens); }));
    save_tensor(dir / "latent.bin", stack(data.examples, [](const Example& e) { return ids_tensor(e.latent); }));
    nlohmann::json manifest = {
        {"format", "eclipse-synthetic-dataset"},
        {"version", kManifestVersion},
        {"num_clips", data.examples.size()},
        {"train_clips", data.train_size()},
        {"val_clips", data.val_size()},
        {"spec", to_json(data.spec)},
        {"files",
         {{"frames", "frames.bin"}, {"spect", "spect.bin"}, {"text", "text.bin"}, {"latent", "latent.bin"}}},
    };
    std::ofstream out(dir / "manifest.json");
    out << manifest.dump(2) << '\n';
}

Dataset load_dataset(const std::filesystem::path& dir) {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw FormatError("no manifest.json in " + dir.string());
    const nlohmann::json manifest = nlohmann::json::parse(in);
    if (manifest.value("format", "") != "eclipse-synthetic-dataset" || manifest.value("version", 0) != kManifestVersion) {
        throw FormatError("unrecognized dataset manifest in " + dir.string());
    }
    Dataset data;
    data.spec = dataset_spec_from_json(manifest.at("spec"));
    const Tensor frames = load_tensor(dir / "frames.bin");
    const Tensor spect = load_tensor(dir / "spect.bin");
    const Tensor text = load_tensor(dir / "text.bin");
    const Tensor latent = load_tensor(dir / "latent.bin");
    const std::size_t n = manifest.at("num_clips").get<std::size_t>();
    for (const Tensor* t : {&frames, &spect, &text, &latent}) {
        if (t->dim(0) != n) throw FormatError("dataset tensor " + format_shape(t->shape()) + " disagrees with manifest");
    }
    for (std::size_t i = 0; i < n; ++i) {
        Example ex;
        ex.clip.frames = unstack(frames, i);
        ex.clip.source_id = "synthetic-" + std::to_string(i);
        for (std::size_t f = 0; f < ex.clip.num_frames(); ++f) ex.clip.frame_times.push_back(static_cast<double>(f) / 3.0);
        ex.audio.spect = unstack(spect, i);
        ex.text.tokens = tensor_ids(unstack(text, i));
        ex.latent = tensor_ids(unstack(latent, i));
        data.examples.push_back(std::move(ex));
    }
    return data;
}

}  // namespace eclipse
