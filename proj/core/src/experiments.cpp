#include "plq/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "plq/errors.hpp"
#include "plq/format.hpp"
#include "plq/parallel.hpp"
#include "plq/rng.hpp"

namespace plq {

namespace {

void require_image(const Image& image) {
    if (image.rank() != 3) {
        throw ShapeError("expected an {H, W, C} image, got " + shape_to_string(image.shape));
    }
}

// Linear-interpolation percentile of an ascending-sorted vector.
double percentile_sorted(const std::vector<double>& sorted, double p) {
    if (sorted.size() == 1) return sorted[0];
    const double pos = p * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    if (lo + 1 >= sorted.size()) return sorted.back();
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac;
}

double fraction_positive(const std::vector<double>& values) {
    std::size_t n = 0;
    for (double v : values) {
        if (v > 0.0) ++n;
    }
    return static_cast<double>(n) / static_cast<double>(values.size());
}

} // namespace

int inner_margin(std::size_t side) {
    return static_cast<int>(std::lround(0.05 * static_cast<double>(side)));
}

int max_feasible_mask(const Image& image) {
    require_image(image);
    const int h = static_cast<int>(image.shape[0]);
    const int w = static_cast<int>(image.shape[1]);
    return std::min(h - 2 * inner_margin(image.shape[0]), w - 2 * inner_margin(image.shape[1]));
}

Image apply_mask(const Image& image, const MaskSpec& mask) {
    require_image(image);
    const int h = static_cast<int>(image.shape[0]);
    const int w = static_cast<int>(image.shape[1]);
    if (mask.size <= 0 || mask.top < 0 || mask.left < 0 || mask.top + mask.size > h ||
        mask.left + mask.size > w) {
        throw std::invalid_argument("mask square does not fit inside the image");
    }
    Image out = image;
    const std::size_t c = image.shape[2];
    for (int y = mask.top; y < mask.top + mask.size; ++y) {
        for (int x = mask.left; x < mask.left + mask.size; ++x) {
            for (std::size_t ch = 0; ch < c; ++ch) {
                out.at3(static_cast<std::size_t>(y), static_cast<std::size_t>(x), ch) =
                    mask.fill_value;
            }
        }
    }
    return out;
}

std::pair<Image, MaskSpec> place_random_mask(const Image& image, int size, std::uint64_t seed,
                                             double fill_value) {
    require_image(image);
    const int h = static_cast<int>(image.shape[0]);
    const int w = static_cast<int>(image.shape[1]);
    const int mh = inner_margin(image.shape[0]);
    const int mw = inner_margin(image.shape[1]);
    const int feasible = std::min(h - 2 * mh, w - 2 * mw);
    if (size <= 0 || size > feasible) {
        throw std::invalid_argument("mask size " + std::to_string(size) +
                                    " does not fit the inner region; max feasible size is " +
                                    std::to_string(feasible));
    }
    SplitMix64 rng(seed);
    MaskSpec mask;
    mask.size = size;
    mask.fill_value = fill_value;
    mask.top = mh + static_cast<int>(rng.next_below(
                        static_cast<std::uint64_t>(h - 2 * mh - size + 1)));
    mask.left = mw + static_cast<int>(rng.next_below(
                         static_cast<std::uint64_t>(w - 2 * mw - size + 1)));
    return {apply_mask(image, mask), mask};
}

Rect mask_rect(const MaskSpec& mask) { return {mask.top, mask.left, mask.size, mask.size}; }

std::vector<std::pair<int, int>> rect_pixels(const Rect& rect) {
    std::vector<std::pair<int, int>> pixels;
    pixels.reserve(static_cast<std::size_t>(rect.height) * static_cast<std::size_t>(rect.width));
    for (int y = rect.top; y < rect.top + rect.height; ++y) {
        for (int x = rect.left; x < rect.left + rect.width; ++x) {
            pixels.emplace_back(y, x);
        }
    }
    return pixels;
}

double delta_q(double q_org, double q_mod) { return q_org - q_mod; }

double delta_p(const PlqMap& p_org, const PlqMap& p_mod,
               std::span<const std::pair<int, int>> region) {
    if (!p_org.values.same_shape(p_mod.values)) {
        throw ShapeError("pixel-quality maps differ in shape: " +
                         shape_to_string(p_org.values.shape) + " vs " +
                         shape_to_string(p_mod.values.shape));
    }
    if (region.empty()) {
        throw std::invalid_argument("delta_p needs a nonempty pixel region");
    }
    const int h = static_cast<int>(p_org.values.shape[0]);
    const int w = static_cast<int>(p_org.values.shape[1]);
    double sum = 0.0;
    for (const auto& [y, x] : region) {
        if (y < 0 || x < 0 || y >= h || x >= w) {
            throw std::invalid_argument("region pixel (" + std::to_string(y) + ", " +
                                        std::to_string(x) + ") is out of bounds");
        }
        sum += p_org.values.at2(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) -
               p_mod.values.at2(static_cast<std::size_t>(y), static_cast<std::size_t>(x));
    }
    return sum / static_cast<double>(region.size());
}

std::vector<int> resolve_mask_sizes(std::size_t height, std::size_t width) {
    const std::size_t side = std::min(height, width);
    if (side >= 112) {
        return {10, 20, 30, 40, 50};
    }
    std::vector<int> sizes;
    for (int i = 1; i <= 5; ++i) {
        const int s = static_cast<int>(std::lround(0.1 * i * static_cast<double>(side)));
        if (s > 0 && (sizes.empty() || sizes.back() != s)) sizes.push_back(s);
    }
    return sizes;
}

std::uint64_t mask_placement_seed(std::uint64_t seed, int image_id, int size, int repeat) {
    const std::uint64_t image_seed = derive_stream(seed, static_cast<std::uint64_t>(image_id));
    const std::uint64_t size_seed = derive_stream(image_seed, static_cast<std::uint64_t>(size));
    return derive_stream(size_seed, static_cast<std::uint64_t>(repeat));
}

MaskExperimentResult run_mask_experiment(const EmbeddingModel& model,
                                         const std::vector<Image>& images,
                                         const MaskExperimentConfig& config) {
    MaskExperimentResult result;
    if (images.empty()) return result;
    if (config.per_size_count < 1) {
        throw std::invalid_argument("per_size_count must be >= 1");
    }

    std::vector<int> sizes = config.sizes;
    if (sizes.empty()) {
        sizes = resolve_mask_sizes(images[0].shape[0], images[0].shape[1]);
    }
    const int feasible = max_feasible_mask(images[0]);
    std::vector<int> usable;
    for (int s : sizes) {
        if (s >= 1 && s <= feasible) {
            usable.push_back(s);
        } else {
            result.skipped_sizes.push_back(s);
        }
    }
    if (usable.empty()) return result;

    const std::size_t per_image = usable.size() * static_cast<std::size_t>(config.per_size_count);
    result.records.assign(images.size() * per_image, DeltaRecord{});

    parallel_for(images.size(), config.threads, [&](std::size_t i) {
        const Image& image = images[i];
        const PlqResult org =
            plq_map(model, image, config.fiq, config.gamma, config.mode, config.clip_norm);
        std::size_t slot = i * per_image;
        for (int size : usable) {
            for (int rep = 0; rep < config.per_size_count; ++rep, ++slot) {
                const std::uint64_t place_seed =
                    mask_placement_seed(config.seed, static_cast<int>(i), size, rep);
                auto [masked, mask] =
                    place_random_mask(image, size, place_seed, config.fill_value);
                const PlqResult mod = plq_map(model, masked, config.fiq, config.gamma,
                                              config.mode, config.clip_norm);
                DeltaRecord& rec = result.records[slot];
                rec.image_id = static_cast<int>(i);
                rec.mask = mask;
                rec.q_org = org.quality.q_scaled;
                rec.q_mod = mod.quality.q_scaled;
                rec.delta_q = delta_q(rec.q_org, rec.q_mod);
                rec.delta_p = delta_p(org.map, mod.map, rect_pixels(mask_rect(mask)));
            }
        }
    });
    return result;
}

std::vector<MaskSummary> summarize_mask_records(const std::vector<DeltaRecord>& records) {
    std::vector<int> sizes;
    for (const DeltaRecord& rec : records) {
        if (std::find(sizes.begin(), sizes.end(), rec.mask.size) == sizes.end()) {
            sizes.push_back(rec.mask.size);
        }
    }
    std::sort(sizes.begin(), sizes.end());

    std::vector<MaskSummary> summaries;
    for (int size : sizes) {
        std::vector<double> dq, dp;
        for (const DeltaRecord& rec : records) {
            if (rec.mask.size != size) continue;
            dq.push_back(rec.delta_q);
            dp.push_back(rec.delta_p);
        }
        MaskSummary s;
        s.size = size;
        s.n = static_cast<int>(dq.size());
        s.frac_positive_dq = fraction_positive(dq);
        s.frac_positive_dp = fraction_positive(dp);
        std::sort(dq.begin(), dq.end());
        std::sort(dp.begin(), dp.end());
        s.median_dq = percentile_sorted(dq, 0.5);
        s.q1_dq = percentile_sorted(dq, 0.25);
        s.q3_dq = percentile_sorted(dq, 0.75);
        s.median_dp = percentile_sorted(dp, 0.5);
        summaries.push_back(s);
    }
    return summaries;
}

Image fill_region(const Image& image, const Rect& region, FillMode mode) {
    require_image(image);
    const int h = static_cast<int>(image.shape[0]);
    const int w = static_cast<int>(image.shape[1]);
    const std::size_t channels = image.shape[2];
    if (region.top < 0 || region.left < 0 || region.height <= 0 || region.width <= 0 ||
        region.top + region.height > h || region.left + region.width > w) {
        throw std::invalid_argument("fill region does not fit inside the image");
    }
    auto in_region = [&](int y, int x) {
        return y >= region.top && y < region.top + region.height && x >= region.left &&
               x < region.left + region.width;
    };

    Image out = image;
    if (mode == FillMode::MeanFill) {
        // 2-pixel border ring around the region, clipped to the image.
        std::vector<double> mean(channels, 0.0);
        std::size_t count = 0;
        for (int y = region.top - 2; y < region.top + region.height + 2; ++y) {
            for (int x = region.left - 2; x < region.left + region.width + 2; ++x) {
                if (y < 0 || x < 0 || y >= h || x >= w || in_region(y, x)) continue;
                for (std::size_t c = 0; c < channels; ++c) {
                    mean[c] += image.at3(static_cast<std::size_t>(y),
                                         static_cast<std::size_t>(x), c);
                }
                ++count;
            }
        }
        if (count == 0) {
            throw std::invalid_argument("fill region has an empty border ring");
        }
        for (double& v : mean) v /= static_cast<double>(count);
        for (int y = region.top; y < region.top + region.height; ++y) {
            for (int x = region.left; x < region.left + region.width; ++x) {
                for (std::size_t c = 0; c < channels; ++c) {
                    out.at3(static_cast<std::size_t>(y), static_cast<std::size_t>(x), c) = mean[c];
                }
            }
        }
        return out;
    }

    // BlurFill: Jacobi iterations of a 3x3 box blur over the region, with
    // everything outside the region fixed at the original image values.
    if (region.height >= h && region.width >= w) {
        throw std::invalid_argument("fill region has an empty border ring");
    }
    Image current = image;
    Image next = image;
    for (int iter = 0; iter < 25; ++iter) {
        for (int y = region.top; y < region.top + region.height; ++y) {
            for (int x = region.left; x < region.left + region.width; ++x) {
                for (std::size_t c = 0; c < channels; ++c) {
                    double sum = 0.0;
                    int n = 0;
                    for (int dy = -1; dy <= 1; ++dy) {
                        for (int dx = -1; dx <= 1; ++dx) {
                            const int ny = y + dy;
                            const int nx = x + dx;
                            if (ny < 0 || nx < 0 || ny >= h || nx >= w) continue;
                            sum += current.at3(static_cast<std::size_t>(ny),
                                               static_cast<std::size_t>(nx), c);
                            ++n;
                        }
                    }
                    next.at3(static_cast<std::size_t>(y), static_cast<std::size_t>(x), c) =
                        sum / static_cast<double>(n);
                }
            }
        }
        std::swap(current, next);
    }
    return current;
}

RestorationResult run_restoration_experiment(const EmbeddingModel& model,
                                             const std::vector<Image>& images,
                                             const RestorationConfig& config) {
    RestorationResult result;
    if (images.empty()) return result;
    if (config.repeats < 2) {
        throw std::invalid_argument("restoration repeats must be >= 2");
    }

    std::vector<int> sizes = config.sizes;
    if (sizes.empty()) {
        sizes = resolve_mask_sizes(images[0].shape[0], images[0].shape[1]);
    }
    const int feasible = max_feasible_mask(images[0]);
    std::vector<int> usable;
    for (int s : sizes) {
        if (s >= 1 && s <= feasible) {
            usable.push_back(s);
        } else {
            result.skipped_sizes.push_back(s);
        }
    }
    if (usable.empty()) return result;

    result.records.assign(images.size() * usable.size(), RestorationRecord{});

    parallel_for(images.size(), config.threads, [&](std::size_t i) {
        const Image& image = images[i];
        std::size_t slot = i * usable.size();
        for (int size : usable) {
            const std::uint64_t place_seed =
                mask_placement_seed(config.seed, static_cast<int>(i), size);
            auto [masked, mask] = place_random_mask(image, size, place_seed, config.fill_value);
            const Image filled = fill_region(masked, mask_rect(mask), config.fill);

            const QualityStats masked_stats = quality_stats(model, masked, config.fiq,
                                                            config.repeats);
            const QualityStats filled_stats = quality_stats(model, filled, config.fiq,
                                                            config.repeats);
            const PlqResult masked_map = plq_map(model, masked, config.fiq, config.gamma,
                                                 config.mode, config.clip_norm);
            const PlqResult filled_map = plq_map(model, filled, config.fiq, config.gamma,
                                                 config.mode, config.clip_norm);

            RestorationRecord& rec = result.records[slot++];
            rec.image_id = static_cast<int>(i);
            rec.mask = mask;
            rec.q_masked_mean = masked_stats.mean;
            rec.q_masked_std = masked_stats.stddev;
            rec.q_filled_mean = filled_stats.mean;
            rec.q_filled_std = filled_stats.stddev;
            rec.delta_q = filled_stats.mean - masked_stats.mean;
            rec.delta_p = delta_p(filled_map.map, masked_map.map,
                                  rect_pixels(mask_rect(mask)));
        }
    });
    return result;
}

RestorationSummary summarize_restoration(const std::vector<RestorationRecord>& records) {
    RestorationSummary s;
    s.n = static_cast<int>(records.size());
    if (records.empty()) return s;
    std::vector<double> dq, dp, stds;
    for (const RestorationRecord& rec : records) {
        dq.push_back(rec.delta_q);
        dp.push_back(rec.delta_p);
        stds.push_back(rec.q_masked_std);
        stds.push_back(rec.q_filled_std);
    }
    s.frac_improved = fraction_positive(dq);
    std::sort(dq.begin(), dq.end());
    std::sort(dp.begin(), dp.end());
    std::sort(stds.begin(), stds.end());
    s.median_delta_q = percentile_sorted(dq, 0.5);
    s.median_delta_p = percentile_sorted(dp, 0.5);
    s.median_q_std = percentile_sorted(stds, 0.5);
    return s;
}

std::string records_csv(const std::vector<DeltaRecord>& records) {
    std::string out = "image_id,size,top,left,q_org,q_mod,delta_q,delta_p\n";
    for (const DeltaRecord& rec : records) {
        out += std::to_string(rec.image_id) + "," + std::to_string(rec.mask.size) + "," +
               std::to_string(rec.mask.top) + "," + std::to_string(rec.mask.left) + "," +
               format_g9(rec.q_org) + "," + format_g9(rec.q_mod) + "," +
               format_g9(rec.delta_q) + "," + format_g9(rec.delta_p) + "\n";
    }
    return out;
}

std::string summary_csv(const std::vector<MaskSummary>& summaries) {
    std::string out =
        "size,n,frac_positive_dq,median_dq,q1_dq,q3_dq,frac_positive_dp,median_dp\n";
    for (const MaskSummary& s : summaries) {
        out += std::to_string(s.size) + "," + std::to_string(s.n) + "," +
               format_g9(s.frac_positive_dq) + "," + format_g9(s.median_dq) + "," +
               format_g9(s.q1_dq) + "," + format_g9(s.q3_dq) + "," +
               format_g9(s.frac_positive_dp) + "," + format_g9(s.median_dp) + "\n";
    }
    return out;
}

std::string restoration_records_csv(const std::vector<RestorationRecord>& records) {
    std::string out =
        "image_id,size,top,left,q_masked_mean,q_masked_std,q_filled_mean,q_filled_std,"
        "delta_q,delta_p\n";
    for (const RestorationRecord& rec : records) {
        out += std::to_string(rec.image_id) + "," + std::to_string(rec.mask.size) + "," +
               std::to_string(rec.mask.top) + "," + std::to_string(rec.mask.left) + "," +
               format_g9(rec.q_masked_mean) + "," + format_g9(rec.q_masked_std) + "," +
               format_g9(rec.q_filled_mean) + "," + format_g9(rec.q_filled_std) + "," +
               format_g9(rec.delta_q) + "," + format_g9(rec.delta_p) + "\n";
    }
    return out;
}

std::string restoration_summary_csv(const RestorationSummary& summary) {
    std::string out = "n,frac_improved,median_delta_q,median_q_std,median_delta_p\n";
    out += std::to_string(summary.n) + "," + format_g9(summary.frac_improved) + "," +
           format_g9(summary.median_delta_q) + "," + format_g9(summary.median_q_std) + "," +
           format_g9(summary.median_delta_p) + "\n";
    return out;
}

} // namespace plq
