#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "eclipse/embeddings.hpp"
#include "eclipse/types.hpp"

namespace eclipse {

/// Parameters of the synthetic paragraph-video-audio corpus.
///
/// Every clip carries a latent vector of `latent_dim` categorical attributes, each with
/// vocab / latent_dim values. The text spells out all attributes through a fixed codebook.
/// round(ρ·latent_dim) attributes are painted into fixed frame regions (shared round-robin when
/// they outnumber the regions); the rest are painted into spectrograms, one temporal segment
/// each, so they are only recoverable from audio.
struct SyntheticDatasetSpec {
    std::size_t num_clips = 500;
    std::size_t total_frames = 16;
    std::size_t frames = 4;  // T, sampled per clip
    std::size_t height = 8;
    std::size_t width = 8;
    std::size_t patch = 4;
    std::size_t spect_rows = 8;      // M
    std::size_t spect_channels = 8;  // C
    std::size_t vocab = 24;
    std::size_t text_len = 6;    // L
    std::size_t latent_dim = 6;  // attributes per clip
    double visual_fraction = 0.3;  // ρ
    double pixel_noise = 0.1;
    double spect_noise = 0.3;
    std::uint64_t seed = 0;

    std::size_t values_per_attribute() const { return vocab / latent_dim; }
    std::size_t visual_attributes() const;
    std::size_t audio_attributes() const { return latent_dim - visual_attributes(); }
    void validate() const;
};

struct Example {
    VideoClip clip;           // total_frames frames
    AudioSpectrogram audio;   // total_frames spectrograms, one per frame
    TextSequence text;
    std::vector<std::size_t> latent;
};

/// The first 80% of clips form the training split, the rest validation.
struct Dataset {
    SyntheticDatasetSpec spec;
    std::vector<Example> examples;

    std::size_t train_size() const { return examples.size() - val_size(); }
    std::size_t val_size() const { return examples.size() / 5; }
    std::span<const Example> train() const { return std::span(examples).first(train_size()); }
    std::span<const Example> val() const { return std::span(examples).subspan(train_size()); }
};

Dataset generate_synthetic(const SyntheticDatasetSpec& spec);

/// The clip and audio restricted to the given frame indices.
struct SampledExample {
    VideoClip clip;
    AudioSpectrogram audio;
};
SampledExample take_frames(const Example& ex, const std::vector<std::size_t>& indices);

/// Writes frames.bin, spect.bin, text.bin, latent.bin, and manifest.json into `dir`.
void save_dataset(const Dataset& data, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace eclipse
