#pragma once

#include <string>
#include <vector>

#include "plq/saliency.hpp"
#include "plq/tensor.hpp"

namespace plq {

// Binary PPM (P6, maxval 255) is the primary format; PNG (8-bit RGB, no
// interlace) is supported as a convenience. Intensities map to [0, 1] by
// dividing by 255 on read; writes quantize with round(v * 255) clamped to
// [0, 255], so write-then-read round-trips bit-exactly after quantization.

Image read_ppm(const std::string& path);
void write_ppm(const std::string& path, const Image& image);

Image read_png(const std::string& path);
void write_png(const std::string& path, const Image& image);

/// Dispatches on the file extension (.ppm or .png).
Image read_image(const std::string& path);
void write_image(const std::string& path, const Image& image);

/// Fixed red-yellow-green colormap, versioned as "ryg-v1":
/// v <= 0.5 -> (255, round(510 v), 0); v > 0.5 -> (round(510 (1 - v)), 255, 0).
struct RenderedMap {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<unsigned char> pixels; // H * W * 3, row-major RGB
    std::string colormap_id = "ryg-v1";
};

RenderedMap render_heatmap(const Tensor& plq_values);
RenderedMap render_heatmap(const PlqMap& map);

/// Writes the rendered heatmap as PPM or PNG depending on the extension.
void write_rendered(const std::string& path, const RenderedMap& rendered);

/// PLQ map serialization: H rows of W comma-separated decimal values with
/// 9 significant digits.
std::string plq_csv(const Tensor& plq_values);
void write_plq_csv(const std::string& path, const Tensor& plq_values);
Tensor read_plq_csv(const std::string& path);

void write_text_file(const std::string& path, const std::string& content);

} // namespace plq
