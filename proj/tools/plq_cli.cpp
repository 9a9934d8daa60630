// Command-line surface for the pixel-level quality toolkit. Every run is
// fully determined by its arguments: identical invocations produce
// byte-identical output files regardless of thread count.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "plq/errors.hpp"
#include "plq/experiments.hpp"
#include "plq/format.hpp"
#include "plq/image_io.hpp"
#include "plq/model.hpp"
#include "plq/parallel.hpp"
#include "plq/quality.hpp"
#include "plq/rng.hpp"
#include "plq/saliency.hpp"
#include "plq/synthetic.hpp"
#include "plq/train.hpp"
#include "plq/weight_io.hpp"

namespace fs = std::filesystem;

namespace {

struct Options {
    std::string model_path;
    std::uint64_t seed = 0;
    int m = 100;
    double dropout = 0.5;
    double alpha = 130.0;
    double r = 0.88;
    double gamma = 7.5;
    double clip_norm = 1.0;
    bool no_clip = false;
    std::string weight_mode = "paper-literal";
    bool normalize = false;
    int threads = 1;
    std::string out;

    plq::FiqConfig fiq() const {
        plq::FiqConfig config;
        config.m = m;
        config.dropout_p = dropout;
        config.alpha = alpha;
        config.r = r;
        config.normalize_embeddings = normalize;
        config.seed = seed;
        return config;
    }

    plq::WeightMode mode() const {
        if (weight_mode == "paper-literal") return plq::WeightMode::PaperLiteral;
        if (weight_mode == "sign-corrected") return plq::WeightMode::SignCorrected;
        throw std::invalid_argument("--weight-mode must be paper-literal or sign-corrected");
    }

    std::optional<double> clip() const {
        if (no_clip) return std::nullopt;
        return clip_norm;
    }

    plq::EmbeddingModel load_model() const {
        if (model_path.empty()) {
            throw std::invalid_argument("--model is required for this command");
        }
        return plq::load_model(model_path);
    }

    std::string out_or_fail() const {
        if (out.empty()) {
            throw std::invalid_argument("--out is required for this command");
        }
        return out;
    }
};

std::vector<std::string> list_corpus(const std::string& dir) {
    std::vector<std::string> paths;
    if (!fs::is_directory(dir)) {
        throw plq::Error("\"" + dir + "\" is not a directory");
    }
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string ext = entry.path().extension().string();
        if (ext == ".ppm" || ext == ".png") paths.push_back(entry.path().string());
    }
    std::sort(paths.begin(), paths.end());
    if (paths.empty()) {
        throw plq::Error("no .ppm or .png images found in \"" + dir + "\"");
    }
    return paths;
}

std::vector<plq::Image> load_corpus(const std::string& dir) {
    const std::vector<std::string> paths = list_corpus(dir);
    std::vector<plq::Image> images(paths.size());
    for (std::size_t i = 0; i < paths.size(); ++i) images[i] = plq::read_image(paths[i]);
    return images;
}

void cmd_quality(const Options& opt, const std::string& image_path, int repeats) {
    const plq::EmbeddingModel model = opt.load_model();
    const plq::Image image = plq::read_image(image_path);
    const plq::QualityResult result = plq::quality(model, image, opt.fiq());
    std::cout << "q_raw=" << plq::format_g9(result.q_raw)
              << " q_scaled=" << plq::format_g9(result.q_scaled) << "\n";
    if (repeats > 0) {
        const plq::QualityStats stats = plq::quality_stats(model, image, opt.fiq(), repeats);
        std::cout << "q_scaled_mean=" << plq::format_g9(stats.mean)
                  << " q_scaled_std=" << plq::format_g9(stats.stddev) << "\n";
    }
}

void cmd_map(const Options& opt, const std::string& image_path) {
    const plq::EmbeddingModel model = opt.load_model();
    const plq::Image image = plq::read_image(image_path);
    const std::string out = opt.out_or_fail();
    const plq::PlqResult result =
        plq::plq_map(model, image, opt.fiq(), opt.gamma, opt.mode(), opt.clip());
    plq::write_plq_csv(out + ".csv", result.map.values);
    plq::write_rendered(out + ".ppm", plq::render_heatmap(result.map));
    std::cout << "q_raw=" << plq::format_g9(result.quality.q_raw)
              << " q_scaled=" << plq::format_g9(result.quality.q_scaled) << "\n";
}

void cmd_calibrate_scale(const Options& opt, const std::string& dir) {
    const plq::EmbeddingModel model = opt.load_model();
    const std::vector<plq::Image> images = load_corpus(dir);
    std::vector<double> qualities(images.size());
    plq::parallel_for(images.size(), opt.threads, [&](std::size_t i) {
        plq::FiqConfig config = opt.fiq();
        config.seed = plq::derive_stream(opt.seed, i);
        const plq::Tensor x =
            plq::stochastic_embed(model, images[i], config.m, config.seed, config.dropout_p);
        qualities[i] = plq::quality_raw(x, config.normalize_embeddings);
    });
    const plq::ScalingParams params = plq::calibrate_scaling(qualities);
    std::cout << "alpha=" << plq::format_g9(params.alpha) << " r=" << plq::format_g9(params.r)
              << "\n";
}

void cmd_calibrate_gamma(const Options& opt, const std::vector<std::string>& image_paths,
                         const std::vector<int>& box) {
    const plq::EmbeddingModel model = opt.load_model();
    std::vector<plq::Tensor> merged(image_paths.size());
    plq::parallel_for(image_paths.size(), opt.threads, [&](std::size_t i) {
        const plq::Image image = plq::read_image(image_paths[i]);
        const plq::QualityResult q = plq::quality(model, image, opt.fiq());
        const plq::Tensor embedding = plq::embed(model, image);
        const plq::QualityHead head = plq::build_head(embedding, q.q_scaled, opt.mode());
        merged[i] = plq::merge_channels(plq::saliency(model, image, head, opt.clip()));
    });
    const plq::Rect face_box{box[0], box[1], box[2], box[3]};
    std::cout << "gamma=" << plq::format_g9(plq::calibrate_gamma(merged, face_box)) << "\n";
}

void cmd_mask_exp(const Options& opt, const std::string& dir, const std::vector<int>& sizes,
                  int per_size_count, double fill_value) {
    const plq::EmbeddingModel model = opt.load_model();
    const std::vector<plq::Image> images = load_corpus(dir);
    const std::string out = opt.out_or_fail();

    plq::MaskExperimentConfig config;
    config.sizes = sizes;
    config.per_size_count = per_size_count;
    config.fiq = opt.fiq();
    config.gamma = opt.gamma;
    config.mode = opt.mode();
    config.clip_norm = opt.clip();
    config.fill_value = fill_value;
    config.seed = opt.seed;
    config.threads = opt.threads;

    const plq::MaskExperimentResult result = plq::run_mask_experiment(model, images, config);
    plq::write_text_file(out + "_records.csv", plq::records_csv(result.records));
    plq::write_text_file(out + "_summary.csv",
                         plq::summary_csv(plq::summarize_mask_records(result.records)));
    std::cout << "records=" << result.records.size();
    for (int s : result.skipped_sizes) std::cout << " skipped_size=" << s;
    std::cout << "\n";
}

void cmd_restore_exp(const Options& opt, const std::string& dir, const std::vector<int>& sizes,
                     int repeats, const std::string& fill) {
    const plq::EmbeddingModel model = opt.load_model();
    const std::vector<plq::Image> images = load_corpus(dir);
    const std::string out = opt.out_or_fail();

    plq::RestorationConfig config;
    config.sizes = sizes;
    config.fiq = opt.fiq();
    config.gamma = opt.gamma;
    config.mode = opt.mode();
    config.clip_norm = opt.clip();
    config.repeats = repeats;
    config.seed = opt.seed;
    config.threads = opt.threads;
    if (fill == "mean") {
        config.fill = plq::FillMode::MeanFill;
    } else if (fill == "blur") {
        config.fill = plq::FillMode::BlurFill;
    } else {
        throw std::invalid_argument("--fill must be mean or blur");
    }

    const plq::RestorationResult result = plq::run_restoration_experiment(model, images, config);
    plq::write_text_file(out + "_records.csv", plq::restoration_records_csv(result.records));
    plq::write_text_file(out + "_summary.csv",
                         plq::restoration_summary_csv(plq::summarize_restoration(result.records)));
    std::cout << "records=" << result.records.size();
    for (int s : result.skipped_sizes) std::cout << " skipped_size=" << s;
    std::cout << "\n";
}

void cmd_train_toy(const Options& opt, int identities, int samples, int epochs, double lr,
                   int batch) {
    const std::string out = opt.out_or_fail();
    const std::vector<plq::LabeledImage> dataset =
        plq::make_synthetic_dataset(identities, samples, opt.seed);
    plq::TrainConfig config;
    config.epochs = epochs;
    config.lr = lr;
    config.seed = opt.seed;
    config.batch_size = batch;
    config.dropout_p = opt.dropout;
    const plq::TrainResult result = plq::train_toy(dataset, config);
    plq::save_model(result.model, out);
    std::cout << "final_accuracy=" << plq::format_g9(result.final_accuracy) << "\n";
}

void cmd_gen_synthetic(const Options& opt, int identities, int samples, int canvas) {
    const std::string out = opt.out_or_fail();
    fs::create_directories(out);
    for (int id = 0; id < identities; ++id) {
        plq::SyntheticFaceSpec spec;
        spec.identity_seed = plq::derive_stream(opt.seed, static_cast<std::uint64_t>(id));
        spec.height = canvas;
        spec.width = canvas;
        for (int s = 0; s < samples; ++s) {
            char name[48];
            std::snprintf(name, sizeof name, "id%03d_s%02d.ppm", id, s);
            plq::write_ppm((fs::path(out) / name).string(),
                           plq::render_synthetic_face(spec, static_cast<std::uint64_t>(s)));
        }
    }
    std::cout << "wrote " << identities * samples << " images to " << out << "\n";
}

void cmd_render(const Options& opt, const std::string& csv_path) {
    const std::string out = opt.out_or_fail();
    plq::write_rendered(out, plq::render_heatmap(plq::read_plq_csv(csv_path)));
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"model-specific image quality and pixel-level quality (PLQ) maps"};
    app.require_subcommand(1);

    Options opt;
    app.add_option("--model", opt.model_path, "PLQM weight file");
    app.add_option("--seed", opt.seed, "base seed for all randomness")->capture_default_str();
    app.add_option("--m", opt.m, "stochastic pass count")->check(CLI::Range(2, 1000000))
        ->capture_default_str();
    app.add_option("--dropout", opt.dropout, "drop probability at the dropout site")
        ->check(CLI::Range(0.0, 0.999999))->capture_default_str();
    app.add_option("--alpha", opt.alpha, "quality scaling steepness")->capture_default_str();
    app.add_option("--r", opt.r, "quality scaling center")->capture_default_str();
    app.add_option("--gamma", opt.gamma, "PLQ visualization gamma")->capture_default_str();
    app.add_option("--clip-norm", opt.clip_norm, "gradient clipping threshold")
        ->capture_default_str();
    app.add_flag("--no-clip", opt.no_clip, "disable gradient clipping");
    app.add_option("--weight-mode", opt.weight_mode, "paper-literal or sign-corrected")
        ->check(CLI::IsMember({"paper-literal", "sign-corrected"}))->capture_default_str();
    app.add_flag("--normalize-embeddings", opt.normalize,
                 "L2-normalize stochastic embeddings before distances");
    app.add_option("--threads", opt.threads, "worker threads for batch commands")
        ->check(CLI::Range(1, 256))->capture_default_str();
    app.add_option("--out", opt.out, "output path or prefix");

    std::string image_path, corpus_dir, csv_path;
    std::vector<std::string> reference_paths;
    std::vector<int> face_box, sizes;
    int repeats = 0, per_size_count = 1, restore_repeats = 10;
    int identities = 8, samples = 6, epochs = 60, batch = 8, canvas = 32;
    double lr = 0.005, mask_fill_value = 0.0;
    std::string fill = "mean";

    CLI::App* quality = app.add_subcommand("quality", "image quality q_raw and q_scaled");
    quality->add_option("image", image_path, "input image")->required();
    quality->add_option("--repeats", repeats, "also report mean/std over seeded repeats");
    quality->fallthrough();

    CLI::App* map = app.add_subcommand("map", "PLQ map as CSV plus rendered heatmap");
    map->add_option("image", image_path, "input image")->required();
    map->fallthrough();

    CLI::App* cal_scale =
        app.add_subcommand("calibrate-scale", "fit (alpha, r) on a development image directory");
    cal_scale->add_option("dir", corpus_dir, "directory of development images")->required();
    cal_scale->fallthrough();

    CLI::App* cal_gamma =
        app.add_subcommand("calibrate-gamma", "fit gamma from reference images and a face box");
    cal_gamma->add_option("images", reference_paths, "reference images")->required();
    cal_gamma->add_option("--face-box", face_box, "top left height width")->expected(4)
        ->required();
    cal_gamma->fallthrough();

    CLI::App* mask_exp =
        app.add_subcommand("mask-exp", "random-mask degradation experiment over a corpus");
    mask_exp->add_option("dir", corpus_dir, "directory of corpus images")->required();
    mask_exp->add_option("--sizes", sizes, "mask sizes in pixels (default: from image size)");
    mask_exp->add_option("--per-size-count", per_size_count, "masks per (image, size)")
        ->check(CLI::Range(1, 1000));
    mask_exp->add_option("--fill-value", mask_fill_value, "mask intensity (0 = black)")
        ->check(CLI::Range(0.0, 1.0));
    mask_exp->fallthrough();

    CLI::App* restore_exp =
        app.add_subcommand("restore-exp", "mask-then-fill restoration experiment");
    restore_exp->add_option("dir", corpus_dir, "directory of corpus images")->required();
    restore_exp->add_option("--sizes", sizes, "mask sizes in pixels");
    restore_exp->add_option("--repeats", restore_repeats, "quality_stats repeats")
        ->check(CLI::Range(2, 1000));
    restore_exp->add_option("--fill", fill, "mean or blur")
        ->check(CLI::IsMember({"mean", "blur"}));
    restore_exp->fallthrough();

    CLI::App* train =
        app.add_subcommand("train-toy", "train the reference model on synthetic identities");
    train->add_option("--identities", identities)->check(CLI::Range(2, 10000));
    train->add_option("--samples", samples)->check(CLI::Range(4, 10000));
    train->add_option("--epochs", epochs)->check(CLI::Range(0, 100000));
    train->add_option("--lr", lr);
    train->add_option("--batch", batch)->check(CLI::Range(1, 10000));
    train->fallthrough();

    CLI::App* gen =
        app.add_subcommand("gen-synthetic", "write a synthetic identity corpus as PPM");
    gen->add_option("--identities", identities)->check(CLI::Range(1, 100000));
    gen->add_option("--samples", samples)->check(CLI::Range(1, 10000));
    gen->add_option("--size", canvas, "canvas side in pixels")->check(CLI::Range(8, 4096));
    gen->fallthrough();

    CLI::App* render = app.add_subcommand("render", "render a PLQ CSV as a heatmap image");
    render->add_option("csv", csv_path, "PLQ CSV file")->required();
    render->fallthrough();

    try {
        app.parse(argc, argv);

        if (quality->parsed()) {
            cmd_quality(opt, image_path, repeats);
        } else if (map->parsed()) {
            cmd_map(opt, image_path);
        } else if (cal_scale->parsed()) {
            cmd_calibrate_scale(opt, corpus_dir);
        } else if (cal_gamma->parsed()) {
            cmd_calibrate_gamma(opt, reference_paths, face_box);
        } else if (mask_exp->parsed()) {
            cmd_mask_exp(opt, corpus_dir, sizes, per_size_count, mask_fill_value);
        } else if (restore_exp->parsed()) {
            cmd_restore_exp(opt, corpus_dir, sizes, restore_repeats, fill);
        } else if (train->parsed()) {
            cmd_train_toy(opt, identities, samples, epochs, lr, batch);
        } else if (gen->parsed()) {
            cmd_gen_synthetic(opt, identities, samples, canvas);
        } else if (render->parsed()) {
            cmd_render(opt, csv_path);
        }
        return 0;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            return app.exit(e); // --help / --version
        }
        std::cerr << "error: " << e.what() << "\n\n" << app.help() << std::flush;
        return 1;
    } catch (const plq::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const plq::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
