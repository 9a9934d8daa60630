#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <string>

#include "plq/errors.hpp"
#include "plq/layers.hpp"
#include "test_support.hpp"

using namespace plq;
using testutil::finite_difference;
using testutil::max_rel_err;
using testutil::random_tensor;

namespace {

Conv2D make_conv(int ksize, int stride, int padding, int in_c, int out_c, std::uint64_t seed) {
    Conv2D c;
    c.ksize = ksize;
    c.stride = stride;
    c.padding = padding;
    c.in_channels = in_c;
    c.out_channels = out_c;
    c.kernel = random_tensor({static_cast<std::size_t>(ksize), static_cast<std::size_t>(ksize),
                              static_cast<std::size_t>(in_c), static_cast<std::size_t>(out_c)},
                             seed);
    c.bias = random_tensor({static_cast<std::size_t>(out_c)}, seed + 1);
    return c;
}

FullyConnected make_fc(int in_dim, int out_dim, std::uint64_t seed) {
    FullyConnected fc;
    fc.in_dim = in_dim;
    fc.out_dim = out_dim;
    fc.weights = random_tensor({static_cast<std::size_t>(out_dim),
                                static_cast<std::size_t>(in_dim)}, seed);
    fc.bias = random_tensor({static_cast<std::size_t>(out_dim)}, seed + 1);
    return fc;
}

// Checks backward_input and backward_weights of `layer` against central
// finite differences of phi(x) = sum(upstream .* forward(x)).
void check_gradients(const Layer& layer, const Tensor& input, std::uint64_t seed,
                     const Tensor* mask = nullptr) {
    const Tensor out = forward(layer, input, mask);
    const Tensor upstream = random_tensor(out.shape, seed);

    const Tensor din = backward_input(layer, input, upstream, mask);
    const Tensor fd_in = finite_difference(
        [&](const Tensor& x) { return testutil::dot(upstream, forward(layer, x, mask)); }, input);
    CHECK(max_rel_err(din, fd_in) < 1e-6);

    if (layer_has_weights(layer)) {
        const Tensor dw = backward_weights(layer, input, upstream);
        Layer probe_layer = layer;
        Tensor* weights = nullptr;
        if (auto* c = std::get_if<Conv2D>(&probe_layer)) {
            weights = &c->kernel;
        } else {
            weights = &std::get<FullyConnected>(probe_layer).weights;
        }
        Tensor fd_w = Tensor::zeros(weights->shape);
        const double step = 1e-5;
        for (std::size_t i = 0; i < weights->numel(); ++i) {
            const double orig = weights->data[i];
            weights->data[i] = orig + step;
            const double hi = testutil::dot(upstream, forward(probe_layer, input, mask));
            weights->data[i] = orig - step;
            const double lo = testutil::dot(upstream, forward(probe_layer, input, mask));
            weights->data[i] = orig;
            fd_w.data[i] = (hi - lo) / (2.0 * step);
        }
        CHECK(max_rel_err(dw, fd_w) < 1e-6);
    }
}

} // namespace

TEST_CASE("relu forward and backward") {
    const Tensor in = Tensor::from({3}, {-1.0, 0.0, 2.0});
    const Tensor out = forward(Relu{}, in);
    CHECK(out.data == std::vector<double>{0.0, 0.0, 2.0});

    const Tensor in2 = Tensor::from({2}, {-1.0, 2.0});
    const Tensor up = Tensor::from({2}, {5.0, 5.0});
    const Tensor din = backward_input(Relu{}, in2, up);
    CHECK(din.data == std::vector<double>{0.0, 5.0});

    // Subgradient at exactly 0 is 0.
    const Tensor at_zero = Tensor::from({1}, {0.0});
    CHECK(backward_input(Relu{}, at_zero, Tensor::from({1}, {3.0})).data[0] == 0.0);
}

TEST_CASE("dropout site applies inverted-dropout scaling") {
    const Tensor in = Tensor::from({4}, {2.0, 4.0, 6.0, 8.0});
    const Tensor mask = Tensor::from({4}, {1.0, 0.0, 1.0, 0.0});
    const Tensor out = forward(DropoutSite{0.5}, in, &mask);
    CHECK(out.data == std::vector<double>{4.0, 0.0, 12.0, 0.0});

    SUBCASE("deterministic mode is the identity") {
        CHECK(forward(DropoutSite{0.5}, in) == in);
        const Tensor up = Tensor::from({4}, {1.0, 2.0, 3.0, 4.0});
        CHECK(backward_input(DropoutSite{0.5}, in, up) == up);
    }
    SUBCASE("all-ones mask in the p -> 0 limit equals deterministic mode exactly") {
        const Tensor ones = Tensor::from({4}, {1.0, 1.0, 1.0, 1.0});
        CHECK(forward(DropoutSite{0.0}, in, &ones) == in);
        // At p > 0 an all-ones mask keeps the inverted-dropout scale.
        const Tensor scaled = forward(DropoutSite{0.5}, in, &ones);
        for (std::size_t i = 0; i < in.numel(); ++i) {
            CHECK(scaled.data[i] == 2.0 * in.data[i]);
        }
    }
    SUBCASE("mask on a non-dropout layer is rejected") {
        CHECK_THROWS_AS(forward(Relu{}, in, &mask), std::invalid_argument);
    }
}

TEST_CASE("fully connected forward matches matrix-vector product") {
    FullyConnected fc;
    fc.in_dim = 2;
    fc.out_dim = 2;
    fc.weights = Tensor::from({2, 2}, {1.0, 2.0, 3.0, 4.0});
    fc.bias = Tensor::zeros({2});
    const Tensor out = forward(fc, Tensor::from({2}, {1.0, 1.0}));
    CHECK(out.data == std::vector<double>{3.0, 7.0});

    SUBCASE("backward_input is the transpose product") {
        const Tensor din = backward_input(fc, Tensor::from({2}, {1.0, 1.0}),
                                          Tensor::from({2}, {1.0, 0.0}));
        CHECK(din.data == std::vector<double>{1.0, 2.0});
    }
    SUBCASE("backward_weights is the outer product") {
        FullyConnected row;
        row.in_dim = 2;
        row.out_dim = 1;
        row.weights = Tensor::zeros({1, 2});
        row.bias = Tensor::zeros({1});
        const Tensor dw = backward_weights(row, Tensor::from({2}, {1.0, 2.0}),
                                           Tensor::from({1}, {3.0}));
        CHECK(dw.shape == std::vector<std::size_t>{1, 2});
        CHECK(dw.data == std::vector<double>{3.0, 6.0});
    }
    SUBCASE("zero upstream gives zero weight gradient") {
        const Tensor dw = backward_weights(fc, Tensor::from({2}, {1.0, 1.0}),
                                           Tensor::zeros({2}));
        CHECK(dw.data == std::vector<double>{0.0, 0.0, 0.0, 0.0});
    }
}

TEST_CASE("conv2d gradients match finite differences") {
    SUBCASE("3x3 kernel on 6x6 single-channel input") {
        const Layer layer{make_conv(3, 1, 0, 1, 1, 42)};
        check_gradients(layer, random_tensor({6, 6, 1}, 43), 44);
    }
    SUBCASE("padded multi-channel") {
        const Layer layer{make_conv(3, 1, 1, 2, 3, 45)};
        check_gradients(layer, random_tensor({5, 5, 2}, 46), 47);
    }
    SUBCASE("strided") {
        const Layer layer{make_conv(3, 2, 1, 2, 2, 48)};
        check_gradients(layer, random_tensor({7, 7, 2}, 49), 50);
    }
}

TEST_CASE("every layer kind agrees with finite differences") {
    check_gradients(Layer{make_fc(6, 4, 51)}, random_tensor({6}, 52), 53);
    check_gradients(Layer{AvgPool2{}}, random_tensor({4, 6, 2}, 54), 55);
    check_gradients(Layer{Flatten{}}, random_tensor({3, 2, 2}, 56), 57);
    // Inputs kept away from the kink so the numeric derivative is clean.
    check_gradients(Layer{Relu{}}, random_tensor({10}, 58, 0.5, 2.0), 59);
    check_gradients(Layer{Relu{}}, random_tensor({10}, 60, -2.0, -0.5), 61);
}

TEST_CASE("dropout gradients with a fixed mask") {
    const Tensor input = random_tensor({8}, 62);
    Tensor mask = Tensor::zeros({8});
    SplitMix64 rng(63);
    for (double& v : mask.data) v = rng.next_double() < 0.5 ? 0.0 : 1.0;
    check_gradients(Layer{DropoutSite{0.5}}, input, 64, &mask);
}

TEST_CASE("avgpool averages 2x2 blocks") {
    const Tensor in = Tensor::from({2, 2, 1}, {1.0, 2.0, 3.0, 4.0});
    const Tensor out = forward(AvgPool2{}, in);
    CHECK(out.shape == std::vector<std::size_t>{1, 1, 1});
    CHECK(out.data[0] == doctest::Approx(2.5));

    CHECK_THROWS_AS(forward(AvgPool2{}, random_tensor({3, 4, 1}, 65)), ShapeError);
}

TEST_CASE("forward is pure") {
    const Layer layer{make_conv(3, 1, 1, 2, 3, 66)};
    const Tensor input = random_tensor({6, 6, 2}, 67);
    CHECK(forward(layer, input) == forward(layer, input));
}

TEST_CASE("shape errors carry the layer index and both shapes") {
    FullyConnected fc = make_fc(4, 2, 68);
    try {
        forward(fc, random_tensor({5}, 69), nullptr, 7);
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        CHECK(e.layer_index() == 7);
        const std::string msg = e.what();
        CHECK(msg.find("layer 7") != std::string::npos);
        CHECK(msg.find("[4]") != std::string::npos);
        CHECK(msg.find("[5]") != std::string::npos);
    }

    Conv2D conv = make_conv(3, 2, 0, 1, 1, 70);
    CHECK_THROWS_AS(forward(conv, random_tensor({6, 6, 1}, 71)), ShapeError);
}

TEST_CASE("outputs stay finite on finite inputs") {
    const Layer conv{make_conv(3, 1, 1, 3, 8, 72)};
    const Tensor image = random_tensor({8, 8, 3}, 73, 0.0, 1.0);
    CHECK(forward(conv, image).all_finite());
    const Tensor up = random_tensor({8, 8, 8}, 74);
    CHECK(backward_input(conv, image, up).all_finite());
    CHECK(backward_weights(conv, image, up).all_finite());
}
