#pragma once

#include <cstdint>
#include <vector>

#include "plq/tensor.hpp"

namespace plq {

/// Parametric stand-in for a face corpus: a head ellipse, two eyes and a
/// mouth whose positions and colors are fixed per identity, with small
/// per-sample jitter on top.
struct SyntheticFaceSpec {
    std::uint64_t identity_seed = 0;
    int height = 32;
    int width = 32;
    double position_jitter = 0.75; // pixels
    double color_jitter = 0.03;
};

/// Identity-determined primitive parameters (before jitter).
struct FaceParams {
    double background[3];
    double skin[3];
    double eye_color[3];
    double mouth_color[3];
    double head_cx, head_cy, head_rx, head_ry;
    double eye_dx, eye_y, eye_r;
    double mouth_y, mouth_half_w, mouth_half_h;
};

/// Same identity_seed always yields the same parameters.
FaceParams face_params(std::uint64_t identity_seed);

/// Renders sample `sample_index` of the identity; two samples of one
/// identity differ only by jitter.
Image render_synthetic_face(const SyntheticFaceSpec& spec, std::uint64_t sample_index);

struct LabeledImage {
    Image image;
    int label = 0;
};

/// Identity i gets seed derive_stream(base_seed, i) and samples 0..per_identity-1.
std::vector<LabeledImage> make_synthetic_dataset(int n_identities, int samples_per_identity,
                                                 std::uint64_t base_seed, int canvas = 32);

} // namespace plq
