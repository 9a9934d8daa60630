#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "plq/quality.hpp"
#include "plq/saliency.hpp"
#include "plq/tensor.hpp"

namespace plq {

/// Square occlusion constrained to the inner region of the image (a margin
/// of round(0.05 * side) is excluded on every side).
struct MaskSpec {
    int top = 0;
    int left = 0;
    int size = 0;
    double fill_value = 0.0;
};

struct DeltaRecord {
    int image_id = 0;
    MaskSpec mask;
    double q_org = 0.0;   // scaled quality of the unmodified image
    double q_mod = 0.0;   // scaled quality of the modified image
    double delta_q = 0.0; // q_org - q_mod
    double delta_p = 0.0; // mean pixel-quality difference over the mask square
};

int inner_margin(std::size_t side);

/// Largest mask size that fits the inner region.
int max_feasible_mask(const Image& image);

/// Copy of the image with the mask square set to fill_value in all channels.
Image apply_mask(const Image& image, const MaskSpec& mask);

/// Uniform placement over the inner region. The original image is untouched.
std::pair<Image, MaskSpec> place_random_mask(const Image& image, int size, std::uint64_t seed,
                                             double fill_value = 0.0);

std::vector<std::pair<int, int>> rect_pixels(const Rect& rect);
Rect mask_rect(const MaskSpec& mask);

double delta_q(double q_org, double q_mod);

/// (1/|P|) * sum over P of (p_org - p_mod).
double delta_p(const PlqMap& p_org, const PlqMap& p_mod,
               std::span<const std::pair<int, int>> region);

/// Mask sizes for the degradation protocol: absolute {10,20,30,40,50} when
/// min(H, W) >= 112, else fractions {0.1..0.5} of min(H, W), rounded.
std::vector<int> resolve_mask_sizes(std::size_t height, std::size_t width);

struct MaskExperimentConfig {
    std::vector<int> sizes;      // empty = resolve from image dimensions
    int per_size_count = 1;
    FiqConfig fiq;
    double gamma = 7.5;
    WeightMode mode = WeightMode::PaperLiteral;
    std::optional<double> clip_norm;
    double fill_value = 0.0;
    std::uint64_t seed = 0;
    int threads = 1;
};

struct MaskExperimentResult {
    std::vector<DeltaRecord> records; // ordered by (image_id, size, repeat)
    std::vector<int> skipped_sizes;   // infeasible for the image dimensions
};

/// Placement stream used by the experiment runners for (image, size, repeat);
/// exposed so records can be recomputed from the declared seed alone.
std::uint64_t mask_placement_seed(std::uint64_t seed, int image_id, int size, int repeat = 0);

/// One mask per (image, size, repeat); the placement stream is derived from
/// (seed, image_id, size, repeat). Deterministic and thread-count invariant.
MaskExperimentResult run_mask_experiment(const EmbeddingModel& model,
                                         const std::vector<Image>& images,
                                         const MaskExperimentConfig& config);

struct MaskSummary {
    int size = 0;
    int n = 0;
    double frac_positive_dq = 0.0;
    double median_dq = 0.0;
    double q1_dq = 0.0;
    double q3_dq = 0.0;
    double frac_positive_dp = 0.0;
    double median_dp = 0.0;
};

std::vector<MaskSummary> summarize_mask_records(const std::vector<DeltaRecord>& records);

enum class FillMode { MeanFill, BlurFill };

/// Deterministic region restoration. MeanFill sets region pixels to the
/// per-channel mean of the 2-pixel border ring around the region; BlurFill
/// runs 25 Jacobi passes of a 3x3 box blur over the region with the
/// surrounding pixels held fixed.
Image fill_region(const Image& image, const Rect& region, FillMode mode);

struct RestorationRecord {
    int image_id = 0;
    MaskSpec mask;
    double q_masked_mean = 0.0; // quality_stats means over `repeats` seeds
    double q_masked_std = 0.0;
    double q_filled_mean = 0.0;
    double q_filled_std = 0.0;
    double delta_q = 0.0;  // q_filled_mean - q_masked_mean; > 0 = restored
    double delta_p = 0.0;  // mean (p_filled - p_masked) over the region
};

struct RestorationConfig {
    std::vector<int> sizes;
    FiqConfig fiq;
    double gamma = 7.5;
    WeightMode mode = WeightMode::PaperLiteral;
    std::optional<double> clip_norm;
    FillMode fill = FillMode::MeanFill;
    int repeats = 10;
    double fill_value = 0.0;
    std::uint64_t seed = 0;
    int threads = 1;
};

struct RestorationResult {
    std::vector<RestorationRecord> records;
    std::vector<int> skipped_sizes;
};

/// Mask-then-fill: places a random mask, restores the region with the fill
/// proxy and measures the quality change from the masked to the filled image.
RestorationResult run_restoration_experiment(const EmbeddingModel& model,
                                             const std::vector<Image>& images,
                                             const RestorationConfig& config);

struct RestorationSummary {
    int n = 0;
    double frac_improved = 0.0; // records with delta_q > 0
    double median_delta_q = 0.0;
    double median_q_std = 0.0;  // pooled masked + filled stds
    double median_delta_p = 0.0;
};

RestorationSummary summarize_restoration(const std::vector<RestorationRecord>& records);

// CSV emission; all floating-point fields use 9 significant digits.
std::string records_csv(const std::vector<DeltaRecord>& records);
std::string summary_csv(const std::vector<MaskSummary>& summaries);
std::string restoration_records_csv(const std::vector<RestorationRecord>& records);
std::string restoration_summary_csv(const RestorationSummary& summary);

} // namespace plq
