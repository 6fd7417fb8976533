#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "eclipse/tensor.hpp"

namespace eclipse {

/// T RGB frames, values in [0,1], laid out T×H×W×3.
struct VideoClip {
    Tensor frames;
    std::vector<double> frame_times;  // seconds
    std::string source_id;

    std::size_t num_frames() const { return frames.dim(0); }
    std::size_t height() const { return frames.dim(1); }
    std::size_t width() const { return frames.dim(2); }
};

/// One M×C spectrogram per frame, laid out T×M×C.
struct AudioSpectrogram {
    Tensor spect;
    double span_seconds = 10.0;

    std::size_t num_steps() const { return spect.dim(0); }
};

struct TextSequence {
    std::vector<std::size_t> tokens;
};

/// Visual stream state, T×(N+1)×d. Token 0 of every frame is that frame's CLS.
struct TokenGrid {
    Tensor tokens;

    std::size_t frames() const { return tokens.dim(0); }
    std::size_t tokens_per_frame() const { return tokens.dim(1); }
    std::size_t width() const { return tokens.dim(2); }
};

/// Audio stream state, T×d.
struct AudioTrack {
    Tensor embeds;

    std::size_t steps() const { return embeds.dim(0); }
    std::size_t width() const { return embeds.dim(1); }
};

}  // namespace eclipse
