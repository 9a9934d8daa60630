#include "plq/synthetic.hpp"

#include <algorithm>
#include <stdexcept>

#include "plq/rng.hpp"

namespace plq {

namespace {

constexpr std::uint64_t kParamsTag = 0x1D;
constexpr std::uint64_t kJitterTag = 0x2E;

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

struct Jitter {
    double head_dx, head_dy;
    double eye_dx, eye_dy;
    double mouth_dx, mouth_dy;
    double color[3];
};

Jitter sample_jitter(const SyntheticFaceSpec& spec, std::uint64_t sample_index) {
    SplitMix64 rng(derive_stream(derive_stream(spec.identity_seed, kJitterTag), sample_index));
    const double p = spec.position_jitter;
    const double c = spec.color_jitter;
    Jitter j;
    j.head_dx = rng.next_in(-p, p);
    j.head_dy = rng.next_in(-p, p);
    j.eye_dx = rng.next_in(-p, p);
    j.eye_dy = rng.next_in(-p, p);
    j.mouth_dx = rng.next_in(-p, p);
    j.mouth_dy = rng.next_in(-p, p);
    for (double& v : j.color) v = rng.next_in(-c, c);
    return j;
}

} // namespace

FaceParams face_params(std::uint64_t identity_seed) {
    SplitMix64 rng(derive_stream(identity_seed, kParamsTag));
    FaceParams p;
    for (double& v : p.background) v = 0.10 + rng.next_double() * 0.18;
    p.skin[0] = 0.55 + rng.next_double() * 0.32;
    p.skin[1] = 0.40 + rng.next_double() * 0.32;
    p.skin[2] = 0.30 + rng.next_double() * 0.32;
    for (double& v : p.eye_color) v = 0.02 + rng.next_double() * 0.22;
    p.mouth_color[0] = 0.50 + rng.next_double() * 0.40;
    p.mouth_color[1] = 0.08 + rng.next_double() * 0.20;
    p.mouth_color[2] = 0.08 + rng.next_double() * 0.20;
    p.head_cx = 14.0 + rng.next_double() * 4.0;
    p.head_cy = 15.0 + rng.next_double() * 4.0;
    p.head_rx = 9.0 + rng.next_double() * 3.5;
    p.head_ry = 11.0 + rng.next_double() * 3.5;
    p.eye_dx = 3.5 + rng.next_double() * 2.0;
    p.eye_y = p.head_cy - (3.0 + rng.next_double() * 2.5);
    p.eye_r = 1.2 + rng.next_double() * 0.8;
    p.mouth_y = p.head_cy + 3.0 + rng.next_double() * 2.5;
    p.mouth_half_w = 2.0 + rng.next_double() * 2.0;
    p.mouth_half_h = 0.8 + rng.next_double() * 0.8;
    return p;
}

Image render_synthetic_face(const SyntheticFaceSpec& spec, std::uint64_t sample_index) {
    const FaceParams p = face_params(spec.identity_seed);
    const Jitter j = sample_jitter(spec, sample_index);

    const double scale = static_cast<double>(std::min(spec.height, spec.width)) / 32.0;
    const double cx = p.head_cx * scale + j.head_dx;
    const double cy = p.head_cy * scale + j.head_dy;
    const double rx = p.head_rx * scale;
    const double ry = p.head_ry * scale;
    const double eye_y = p.eye_y * scale + j.eye_dy;
    const double eye_dx = p.eye_dx * scale;
    const double eye_r = p.eye_r * scale;
    const double mouth_y = p.mouth_y * scale + j.mouth_dy;
    const double mouth_hw = p.mouth_half_w * scale;
    const double mouth_hh = p.mouth_half_h * scale;

    auto in_ellipse = [](double x, double y, double ex, double ey, double erx, double ery) {
        const double dx = (x - ex) / erx;
        const double dy = (y - ey) / ery;
        return dx * dx + dy * dy <= 1.0;
    };

    Image img = Tensor::zeros({static_cast<std::size_t>(spec.height),
                               static_cast<std::size_t>(spec.width), 3});
    for (int y = 0; y < spec.height; ++y) {
        for (int x = 0; x < spec.width; ++x) {
            const double fx = static_cast<double>(x);
            const double fy = static_cast<double>(y);
            const double* color = p.background;
            if (in_ellipse(fx, fy, cx, cy, rx, ry)) {
                color = p.skin;
                const double ex_l = cx - eye_dx + j.eye_dx;
                const double ex_r = cx + eye_dx + j.eye_dx;
                if (in_ellipse(fx, fy, ex_l, eye_y, eye_r, eye_r) ||
                    in_ellipse(fx, fy, ex_r, eye_y, eye_r, eye_r)) {
                    color = p.eye_color;
                } else if (std::abs(fx - (cx + j.mouth_dx)) <= mouth_hw &&
                           std::abs(fy - mouth_y) <= mouth_hh) {
                    color = p.mouth_color;
                }
            }
            for (int c = 0; c < 3; ++c) {
                img.at3(static_cast<std::size_t>(y), static_cast<std::size_t>(x),
                        static_cast<std::size_t>(c)) = clamp01(color[c] + j.color[c]);
            }
        }
    }
    return img;
}

std::vector<LabeledImage> make_synthetic_dataset(int n_identities, int samples_per_identity,
                                                 std::uint64_t base_seed, int canvas) {
    if (n_identities < 1 || samples_per_identity < 1) {
        throw std::invalid_argument("dataset needs at least one identity and one sample");
    }
    std::vector<LabeledImage> out;
    out.reserve(static_cast<std::size_t>(n_identities) *
                static_cast<std::size_t>(samples_per_identity));
    for (int id = 0; id < n_identities; ++id) {
        SyntheticFaceSpec spec;
        spec.identity_seed = derive_stream(base_seed, static_cast<std::uint64_t>(id));
        spec.height = canvas;
        spec.width = canvas;
        for (int s = 0; s < samples_per_identity; ++s) {
            out.push_back({render_synthetic_face(spec, static_cast<std::uint64_t>(s)), id});
        }
    }
    return out;
}

} // namespace plq
