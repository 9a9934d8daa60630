#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include "plq/errors.hpp"
#include "plq/image_io.hpp"
#include "plq/saliency.hpp"
#include "test_support.hpp"

using namespace plq;
using testutil::random_tensor;

namespace {

std::filesystem::path work_dir() {
    const auto dir = std::filesystem::temp_directory_path() / "plq_io_test";
    std::filesystem::create_directories(dir);
    return dir;
}

Image quantized(const Image& image) {
    Image out = image;
    for (double& v : out.data) {
        v = std::clamp(std::lround(v * 255.0), 0L, 255L) / 255.0;
    }
    return out;
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

} // namespace

TEST_CASE("ppm write-read round-trips bit-exactly after quantization") {
    const auto dir = work_dir();
    const Image image = random_tensor({7, 5, 3}, 1, 0.0, 1.0);
    const std::string path = (dir / "roundtrip.ppm").string();
    write_ppm(path, image);
    CHECK(read_ppm(path) == quantized(image));

    // A second write of the read image is byte-identical.
    const std::string path2 = (dir / "roundtrip2.ppm").string();
    write_ppm(path2, read_ppm(path));
    CHECK(slurp(path) == slurp(path2));
}

TEST_CASE("ppm parses the minimal P6 header") {
    const auto dir = work_dir();
    const std::string path = (dir / "tiny.ppm").string();
    std::string bytes = "P6\n2 2\n255\n";
    for (int i = 0; i < 12; ++i) bytes.push_back(static_cast<char>(i * 20));
    std::ofstream(path, std::ios::binary) << bytes;

    const Image img = read_ppm(path);
    CHECK(img.shape == std::vector<std::size_t>{2, 2, 3});
    CHECK(img.at3(0, 0, 1) == doctest::Approx(20.0 / 255.0).epsilon(1e-15));

    SUBCASE("comments and extra whitespace are tolerated") {
        const std::string cpath = (dir / "comment.ppm").string();
        std::ofstream(cpath, std::ios::binary) << ("P6\n# a comment\n 2\t2 \n255\n" +
                                                   bytes.substr(11));
        CHECK(read_ppm(cpath).shape == std::vector<std::size_t>{2, 2, 3});
    }
}

TEST_CASE("ppm rejects malformed input with byte offsets") {
    const auto dir = work_dir();
    SUBCASE("wrong magic") {
        const std::string path = (dir / "notppm.ppm").string();
        std::ofstream(path, std::ios::binary) << "P5\n2 2\n255\n....";
        try {
            read_ppm(path);
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.byte_offset() == 0);
        }
    }
    SUBCASE("unsupported maxval names the value") {
        const std::string path = (dir / "deep.ppm").string();
        std::ofstream(path, std::ios::binary) << "P6\n2 2\n65535\n" << std::string(24, 'x');
        try {
            read_ppm(path);
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find("65535") != std::string::npos);
        }
    }
    SUBCASE("short pixel payload") {
        const std::string path = (dir / "short.ppm").string();
        std::ofstream(path, std::ios::binary) << "P6\n2 2\n255\n" << std::string(5, 'x');
        CHECK_THROWS_AS(read_ppm(path), ParseError);
    }
    SUBCASE("missing dimensions") {
        const std::string path = (dir / "nodims.ppm").string();
        std::ofstream(path, std::ios::binary) << "P6\nxyz";
        CHECK_THROWS_AS(read_ppm(path), ParseError);
    }
}

TEST_CASE("png write-read round-trips bit-exactly after quantization") {
    const auto dir = work_dir();
    const Image image = random_tensor({9, 6, 3}, 2, 0.0, 1.0);
    const std::string path = (dir / "roundtrip.png").string();
    write_png(path, image);
    CHECK(read_png(path) == quantized(image));

    SUBCASE("read_image dispatches on extension") {
        CHECK(read_image(path) == quantized(image));
        CHECK_THROWS_AS(read_image((dir / "file.bmp").string()), Error);
    }
    SUBCASE("non-8-bit-RGB PNGs are rejected") {
        std::string bytes = slurp(path);
        bytes[24] = 16; // bit depth byte inside IHDR
        const std::string bad = (dir / "deep.png").string();
        std::ofstream(bad, std::ios::binary) << bytes;
        CHECK_THROWS_AS(read_png(bad), ParseError);
    }
    SUBCASE("truncated files are rejected") {
        std::string bytes = slurp(path);
        const std::string bad = (dir / "trunc.png").string();
        std::ofstream(bad, std::ios::binary) << bytes.substr(0, bytes.size() / 2);
        CHECK_THROWS_AS(read_png(bad), ParseError);
    }
}

TEST_CASE("heatmap colormap hits the pinned anchor colors") {
    const Tensor values = Tensor::from({1, 3}, {0.0, 0.5, 0.9});
    const RenderedMap rendered = render_heatmap(values);
    CHECK(rendered.colormap_id == "ryg-v1");
    // v = 0 -> red
    CHECK(rendered.pixels[0] == 255);
    CHECK(rendered.pixels[1] == 0);
    CHECK(rendered.pixels[2] == 0);
    // v = 0.5 -> yellow
    CHECK(rendered.pixels[3] == 255);
    CHECK(rendered.pixels[4] == 255);
    CHECK(rendered.pixels[5] == 0);
    // v = 0.9 -> round(510 * 0.1) = 51
    CHECK(rendered.pixels[6] == 51);
    CHECK(rendered.pixels[7] == 255);
    CHECK(rendered.pixels[8] == 0);

    SUBCASE("out-of-range values are rejected") {
        CHECK_THROWS_AS(render_heatmap(Tensor::from({1, 1}, {1.0})), std::invalid_argument);
        CHECK_THROWS_AS(render_heatmap(Tensor::from({1, 1}, {-0.1})), std::invalid_argument);
    }
}

TEST_CASE("larger saliency is never redder after visualize and render") {
    SplitMix64 rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        double a = rng.next_double() * 0.01;
        double b = rng.next_double() * 0.01;
        if (a > b) std::swap(a, b);
        const PlqMap map = visualize(Tensor::from({1, 2}, {a, b}), 6.5);
        const RenderedMap rendered = render_heatmap(map);
        CHECK(rendered.pixels[0] >= rendered.pixels[3]); // R non-increasing
        CHECK(rendered.pixels[1] <= rendered.pixels[4]); // G non-decreasing
    }
}

TEST_CASE("plq csv uses 9 significant digits and round-trips closely") {
    const auto dir = work_dir();
    Tensor values = Tensor::from({2, 2}, {0.123456789123, 0.5, 0.0, 0.999999999});
    const std::string csv = plq_csv(values);
    CHECK(csv == "0.123456789,0.5\n0,0.999999999\n");

    const std::string path = (dir / "map.csv").string();
    write_plq_csv(path, values);
    const Tensor back = read_plq_csv(path);
    REQUIRE(back.shape == values.shape);
    for (std::size_t i = 0; i < values.numel(); ++i) {
        CHECK(back.data[i] == doctest::Approx(values.data[i]).epsilon(5e-9));
    }

    SUBCASE("rendering the csv equals rendering the parsed values") {
        const RenderedMap direct = render_heatmap(back);
        const std::string out = (dir / "map.ppm").string();
        write_rendered(out, direct);
        const Image img = read_ppm(out);
        CHECK(img.shape == std::vector<std::size_t>{2, 2, 3});
    }
    SUBCASE("ragged rows are rejected") {
        const std::string bad = (dir / "ragged.csv").string();
        std::ofstream(bad) << "0.1,0.2\n0.3\n";
        CHECK_THROWS_AS(read_plq_csv(bad), ParseError);
    }
    SUBCASE("out-of-range values are rejected") {
        const std::string bad = (dir / "range.csv").string();
        std::ofstream(bad) << "0.1,1.5\n";
        CHECK_THROWS_AS(read_plq_csv(bad), ParseError);
    }
    SUBCASE("non-numeric cells are rejected") {
        const std::string bad = (dir / "alpha.csv").string();
        std::ofstream(bad) << "0.1,zebra\n";
        CHECK_THROWS_AS(read_plq_csv(bad), ParseError);
    }
}
