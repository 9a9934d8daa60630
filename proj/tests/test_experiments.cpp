#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "plq/experiments.hpp"
#include "plq/model.hpp"
#include "test_support.hpp"

using namespace plq;
using testutil::random_tensor;

namespace {

PlqMap constant_map(std::size_t h, std::size_t w, double value) {
    PlqMap map;
    map.values = Tensor::zeros({h, w});
    for (double& v : map.values.data) v = value;
    map.merged_saliency = Tensor::zeros({h, w});
    return map;
}

MaskExperimentConfig fast_config() {
    MaskExperimentConfig config;
    config.fiq.m = 8;
    config.fiq.alpha = 20.0;
    config.fiq.r = 0.9;
    config.gamma = 6.0;
    config.seed = 3;
    return config;
}

} // namespace

TEST_CASE("inner margins follow the 5 percent rule") {
    CHECK(inner_margin(100) == 5);
    CHECK(inner_margin(32) == 2);
    CHECK(inner_margin(112) == 6);
}

TEST_CASE("random masks stay inside the inner region") {
    const Image image = Tensor::zeros({100, 100, 3});

    SUBCASE("s = 50 keeps top and left in [5, 45]") {
        for (std::uint64_t seed = 0; seed < 500; ++seed) {
            const auto [masked, mask] = place_random_mask(image, 50, seed);
            CHECK(mask.top >= 5);
            CHECK(mask.top <= 45);
            CHECK(mask.left >= 5);
            CHECK(mask.left <= 45);
        }
    }
    SUBCASE("s = 10 reaches the extremes 5 and 85") {
        int min_top = 1000, max_top = -1, min_left = 1000, max_left = -1;
        for (std::uint64_t seed = 0; seed < 3000; ++seed) {
            const auto [masked, mask] = place_random_mask(image, 10, seed);
            min_top = std::min(min_top, mask.top);
            max_top = std::max(max_top, mask.top);
            min_left = std::min(min_left, mask.left);
            max_left = std::max(max_left, mask.left);
        }
        CHECK(min_top == 5);
        CHECK(max_top == 85);
        CHECK(min_left == 5);
        CHECK(max_left == 85);
    }
    SUBCASE("the largest feasible size has a unique placement") {
        const auto [masked, mask] = place_random_mask(image, 90, 17);
        CHECK(mask.top == 5);
        CHECK(mask.left == 5);
        CHECK(max_feasible_mask(image) == 90);
    }
    SUBCASE("an oversized mask reports the maximum feasible size") {
        try {
            place_random_mask(image, 91, 0);
            FAIL("expected invalid_argument");
        } catch (const std::invalid_argument& e) {
            CHECK(std::string(e.what()).find("90") != std::string::npos);
        }
    }
}

TEST_CASE("masking changes only the declared square") {
    const Image image = random_tensor({32, 32, 3}, 1, 0.0, 1.0);
    const auto [masked, mask] = place_random_mask(image, 6, 7, 0.25);
    for (int y = 0; y < 32; ++y) {
        for (int x = 0; x < 32; ++x) {
            const bool inside = y >= mask.top && y < mask.top + mask.size && x >= mask.left &&
                                x < mask.left + mask.size;
            for (std::size_t c = 0; c < 3; ++c) {
                const double v = masked.at3(static_cast<std::size_t>(y),
                                            static_cast<std::size_t>(x), c);
                if (inside) {
                    CHECK(v == 0.25);
                } else {
                    CHECK(v == image.at3(static_cast<std::size_t>(y),
                                         static_cast<std::size_t>(x), c));
                }
            }
        }
    }
}

TEST_CASE("delta_q is the plain difference") {
    CHECK(delta_q(0.7, 0.4) == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(delta_q(0.5, 0.5) == 0.0);
    CHECK(delta_q(0.3, 0.8) == -delta_q(0.8, 0.3));
}

TEST_CASE("delta_p averages differences over the region only") {
    const PlqMap org = constant_map(8, 8, 0.8);
    const PlqMap mod = constant_map(8, 8, 0.3);
    const auto region = rect_pixels(Rect{2, 2, 3, 3});
    CHECK(delta_p(org, mod, region) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(delta_p(org, org, region) == 0.0);

    SUBCASE("matches a brute-force loop on random maps") {
        PlqMap a = constant_map(8, 8, 0.0);
        PlqMap b = constant_map(8, 8, 0.0);
        a.values = random_tensor({8, 8}, 2, 0.0, 0.999);
        b.values = random_tensor({8, 8}, 3, 0.0, 0.999);
        const auto pixels = rect_pixels(Rect{1, 2, 5, 5});
        double sum = 0.0;
        for (const auto& [y, x] : pixels) {
            sum += a.values.at2(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) -
                   b.values.at2(static_cast<std::size_t>(y), static_cast<std::size_t>(x));
        }
        CHECK(delta_p(a, b, pixels) == doctest::Approx(sum / 25.0).epsilon(1e-15));
    }
    SUBCASE("empty regions and stray pixels are rejected") {
        CHECK_THROWS_AS(delta_p(org, mod, {}), std::invalid_argument);
        const std::vector<std::pair<int, int>> oob{{9, 0}};
        CHECK_THROWS_AS(delta_p(org, mod, oob), std::invalid_argument);
    }
}

TEST_CASE("mask sizes resolve by resolution") {
    CHECK(resolve_mask_sizes(256, 256) == std::vector<int>{10, 20, 30, 40, 50});
    CHECK(resolve_mask_sizes(112, 112) == std::vector<int>{10, 20, 30, 40, 50});
    CHECK(resolve_mask_sizes(32, 32) == std::vector<int>{3, 6, 10, 13, 16});
    CHECK(resolve_mask_sizes(8, 8) == std::vector<int>{1, 2, 3, 4});
}

TEST_CASE("fill_region restores structure deterministically") {
    SUBCASE("a constant image is a fixed point") {
        Image flat = Tensor::zeros({16, 16, 3});
        for (double& v : flat.data) v = 0.3;
        const Rect region{4, 4, 6, 6};
        const Image mean_filled = fill_region(flat, region, FillMode::MeanFill);
        const Image blur_filled = fill_region(flat, region, FillMode::BlurFill);
        for (std::size_t i = 0; i < flat.numel(); ++i) {
            CHECK(mean_filled.data[i] == doctest::Approx(0.3).epsilon(1e-12));
            CHECK(blur_filled.data[i] == doctest::Approx(0.3).epsilon(1e-12));
        }
    }
    SUBCASE("mean fill recovers a black square in a white image") {
        Image white = Tensor::zeros({16, 16, 3});
        for (double& v : white.data) v = 1.0;
        const MaskSpec mask{5, 5, 4, 0.0};
        const Image damaged = apply_mask(white, mask);
        const Image restored = fill_region(damaged, mask_rect(mask), FillMode::MeanFill);
        CHECK(restored == white);
    }
    SUBCASE("blur fill is deterministic") {
        const Image image = random_tensor({16, 16, 3}, 5, 0.0, 1.0);
        const Rect region{3, 3, 5, 5};
        CHECK(fill_region(image, region, FillMode::BlurFill) ==
              fill_region(image, region, FillMode::BlurFill));
    }
    SUBCASE("pixels outside the region are untouched") {
        const Image image = random_tensor({16, 16, 3}, 6, 0.0, 1.0);
        const Rect region{3, 3, 5, 5};
        const Image filled = fill_region(image, region, FillMode::BlurFill);
        for (int y = 0; y < 16; ++y) {
            for (int x = 0; x < 16; ++x) {
                if (y >= 3 && y < 8 && x >= 3 && x < 8) continue;
                for (std::size_t c = 0; c < 3; ++c) {
                    CHECK(filled.at3(static_cast<std::size_t>(y), static_cast<std::size_t>(x),
                                     c) ==
                          image.at3(static_cast<std::size_t>(y), static_cast<std::size_t>(x), c));
                }
            }
        }
    }
    SUBCASE("a region with no ring is rejected") {
        const Image image = random_tensor({8, 8, 3}, 7, 0.0, 1.0);
        CHECK_THROWS_AS(fill_region(image, Rect{0, 0, 8, 8}, FillMode::MeanFill),
                        std::invalid_argument);
    }
}

TEST_CASE("mask experiment protocol arithmetic and determinism") {
    const EmbeddingModel model = make_toy16(0.5, 50);
    std::vector<Image> images;
    for (std::uint64_t i = 0; i < 2; ++i) {
        images.push_back(random_tensor({32, 32, 3}, 60 + i, 0.0, 1.0));
    }

    SUBCASE("no images, no records") {
        const auto result = run_mask_experiment(model, {}, fast_config());
        CHECK(result.records.empty());
    }
    SUBCASE("records count is images x feasible sizes x per_size_count") {
        auto config = fast_config();
        const auto result = run_mask_experiment(model, images, config);
        CHECK(result.records.size() == 2 * 5);
        CHECK(result.skipped_sizes.empty());

        config.per_size_count = 2;
        CHECK(run_mask_experiment(model, images, config).records.size() == 2 * 5 * 2);
    }
    SUBCASE("infeasible sizes are skipped with a notice") {
        auto config = fast_config();
        config.sizes = {6, 100};
        const auto result = run_mask_experiment(model, images, config);
        CHECK(result.records.size() == 2);
        CHECK(result.skipped_sizes == std::vector<int>{100});
    }
    SUBCASE("runs are byte-identical across repeats and thread counts") {
        auto config = fast_config();
        const auto a = run_mask_experiment(model, images, config);
        const auto b = run_mask_experiment(model, images, config);
        config.threads = 4;
        const auto c = run_mask_experiment(model, images, config);
        CHECK(records_csv(a.records) == records_csv(b.records));
        CHECK(records_csv(a.records) == records_csv(c.records));
        CHECK(summary_csv(summarize_mask_records(a.records)) ==
              summary_csv(summarize_mask_records(c.records)));
    }
    SUBCASE("records are ordered by image then size and reproducible from parts") {
        const auto result = run_mask_experiment(model, images, fast_config());
        int last_image = -1;
        int last_size = 0;
        for (const DeltaRecord& rec : result.records) {
            if (rec.image_id != last_image) {
                CHECK(rec.image_id == last_image + 1);
                last_image = rec.image_id;
                last_size = 0;
            }
            CHECK(rec.mask.size > last_size);
            last_size = rec.mask.size;
            CHECK(rec.delta_q == rec.q_org - rec.q_mod);
        }
    }
}

TEST_CASE("records are recomputable from the declared seed alone") {
    const EmbeddingModel model = make_toy16(0.5, 54);
    const std::vector<Image> images{random_tensor({32, 32, 3}, 70, 0.0, 1.0)};
    auto config = fast_config();
    config.sizes = {8};
    const auto result = run_mask_experiment(model, images, config);
    REQUIRE(result.records.size() == 1);
    const DeltaRecord& rec = result.records[0];

    const auto [masked, mask] = place_random_mask(
        images[0], 8, mask_placement_seed(config.seed, 0, 8), config.fill_value);
    CHECK(mask.top == rec.mask.top);
    CHECK(mask.left == rec.mask.left);
    const PlqResult org =
        plq_map(model, images[0], config.fiq, config.gamma, config.mode, config.clip_norm);
    const PlqResult mod =
        plq_map(model, masked, config.fiq, config.gamma, config.mode, config.clip_norm);
    CHECK(rec.q_org == org.quality.q_scaled);
    CHECK(rec.q_mod == mod.quality.q_scaled);
    CHECK(rec.delta_q == delta_q(org.quality.q_scaled, mod.quality.q_scaled));
    CHECK(rec.delta_p == delta_p(org.map, mod.map, rect_pixels(mask_rect(mask))));
}

TEST_CASE("mask summaries match an independent recomputation") {
    const EmbeddingModel model = make_toy16(0.5, 51);
    std::vector<Image> images;
    for (std::uint64_t i = 0; i < 3; ++i) {
        images.push_back(random_tensor({32, 32, 3}, 80 + i, 0.0, 1.0));
    }
    auto config = fast_config();
    config.per_size_count = 2;
    const auto result = run_mask_experiment(model, images, config);
    const auto summaries = summarize_mask_records(result.records);

    // Type-7 percentile, written independently of the library helper.
    auto percentile = [](std::vector<double> v, double p) {
        std::sort(v.begin(), v.end());
        const double idx = p * static_cast<double>(v.size() - 1);
        const std::size_t lo = static_cast<std::size_t>(std::floor(idx));
        const std::size_t hi = static_cast<std::size_t>(std::ceil(idx));
        return v[lo] + (v[hi] - v[lo]) * (idx - std::floor(idx));
    };

    for (const MaskSummary& s : summaries) {
        std::vector<double> dq, dp;
        int positive_dq = 0, positive_dp = 0;
        for (const DeltaRecord& rec : result.records) {
            if (rec.mask.size != s.size) continue;
            dq.push_back(rec.delta_q);
            dp.push_back(rec.delta_p);
            positive_dq += rec.delta_q > 0.0 ? 1 : 0;
            positive_dp += rec.delta_p > 0.0 ? 1 : 0;
        }
        REQUIRE(static_cast<int>(dq.size()) == s.n);
        CHECK(s.n == 6);
        CHECK(s.frac_positive_dq ==
              doctest::Approx(static_cast<double>(positive_dq) / s.n).epsilon(1e-15));
        CHECK(s.frac_positive_dp ==
              doctest::Approx(static_cast<double>(positive_dp) / s.n).epsilon(1e-15));
        CHECK(s.median_dq == doctest::Approx(percentile(dq, 0.5)).epsilon(1e-15));
        CHECK(s.q1_dq == doctest::Approx(percentile(dq, 0.25)).epsilon(1e-15));
        CHECK(s.q3_dq == doctest::Approx(percentile(dq, 0.75)).epsilon(1e-15));
        CHECK(s.median_dp == doctest::Approx(percentile(dp, 0.5)).epsilon(1e-15));
    }
}

TEST_CASE("restoration records follow the masked-to-filled orientation") {
    const EmbeddingModel model = make_toy16(0.5, 52);
    std::vector<Image> images{random_tensor({32, 32, 3}, 90, 0.0, 1.0)};

    RestorationConfig config;
    config.sizes = {8};
    config.fiq.m = 8;
    config.fiq.alpha = 20.0;
    config.fiq.r = 0.9;
    config.gamma = 6.0;
    config.repeats = 3;
    config.seed = 5;

    const auto result = run_restoration_experiment(model, images, config);
    REQUIRE(result.records.size() == 1);
    const RestorationRecord& rec = result.records[0];
    CHECK(rec.delta_q == rec.q_filled_mean - rec.q_masked_mean);
    CHECK(rec.q_masked_std >= 0.0);
    CHECK(rec.q_filled_std >= 0.0);

    SUBCASE("deterministic across repeats and thread counts") {
        auto threaded = config;
        threaded.threads = 3;
        const auto again = run_restoration_experiment(model, images, threaded);
        CHECK(restoration_records_csv(result.records) ==
              restoration_records_csv(again.records));
    }
    SUBCASE("summary aggregates the records") {
        const RestorationSummary summary = summarize_restoration(result.records);
        CHECK(summary.n == 1);
        CHECK(summary.median_delta_q == doctest::Approx(rec.delta_q).epsilon(1e-15));
    }
}

TEST_CASE("restoring an undamaged constant region is a no-op on quality") {
    const EmbeddingModel model = make_toy16(0.5, 53);
    Image flat = Tensor::zeros({32, 32, 3});
    for (double& v : flat.data) v = 0.42;

    // Filling any region of a constant image reproduces the image, so the
    // masked-vs-filled quality gap vanishes when no mask is applied.
    const Rect region{10, 10, 8, 8};
    const Image filled = fill_region(flat, region, FillMode::MeanFill);
    FiqConfig config;
    config.m = 8;
    const double q_before = quality(model, flat, config).q_scaled;
    const double q_after = quality(model, filled, config).q_scaled;
    CHECK(q_before == doctest::Approx(q_after).epsilon(1e-12));
}

TEST_CASE("csv emission uses the pinned schemas") {
    DeltaRecord rec;
    rec.image_id = 3;
    rec.mask = {4, 5, 6, 0.0};
    rec.q_org = 0.75;
    rec.q_mod = 0.25;
    rec.delta_q = 0.5;
    rec.delta_p = -0.125;
    const std::string csv = records_csv({rec});
    CHECK(csv == "image_id,size,top,left,q_org,q_mod,delta_q,delta_p\n"
                 "3,6,4,5,0.75,0.25,0.5,-0.125\n");

    const std::string header = restoration_records_csv({}).substr(0, 20);
    CHECK(header == "image_id,size,top,le");
}
