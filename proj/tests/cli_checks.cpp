// Exercises the CLI surface through real process invocations: exit codes,
// output formats and file artifacts.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

int g_failures = 0;
std::string g_cli;
fs::path g_work;

void check(bool ok, const std::string& what) {
    if (ok) {
        std::cout << "[ok] " << what << "\n";
    } else {
        std::cout << "[FAIL] " << what << "\n";
        ++g_failures;
    }
}

int run(const std::string& args, const std::string& stdout_file = "") {
    std::string cmd = g_cli + " " + args;
    if (!stdout_file.empty()) {
        cmd += " > " + (g_work / stdout_file).string();
    } else {
        cmd += " > /dev/null";
    }
    cmd += " 2> " + (g_work / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

std::size_t count_lines(const std::string& text) {
    std::size_t n = 0;
    for (char c : text) n += c == '\n' ? 1 : 0;
    return n;
}

} // namespace

int main(int argc, char** argv) {
    if (argc < 3) {
        std::cerr << "usage: cli_checks <plq-cli> <workdir>\n";
        return 2;
    }
    g_cli = argv[1];
    g_work = argv[2];
    fs::remove_all(g_work);
    fs::create_directories(g_work);

    const std::string corpus = (g_work / "corpus").string();
    const std::string model = (g_work / "model.plqm").string();

    check(run("--definitely-not-a-flag quality x.ppm") == 1, "unknown flag exits 1");
    check(run("quality " + (g_work / "missing.ppm").string()) == 1,
          "quality without --model exits 1");
    check(run("") == 1, "missing subcommand exits 1");
    check(run("--help") == 0, "--help exits 0");

    check(run("gen-synthetic --identities 3 --samples 1 --seed 4 --out " + corpus) == 0,
          "gen-synthetic succeeds");
    check(fs::exists(fs::path(corpus) / "id000_s00.ppm") &&
              fs::exists(fs::path(corpus) / "id002_s00.ppm"),
          "gen-synthetic writes the expected corpus files");

    check(run("train-toy --identities 2 --samples 4 --epochs 0 --seed 4 --out " + model) == 0,
          "train-toy with zero epochs produces a model");

    const std::string image = (fs::path(corpus) / "id000_s00.ppm").string();
    check(run("quality --model " + model + " --seed 3 --m 16 " + image, "q.txt") == 0,
          "quality runs");
    {
        const std::string out = slurp(g_work / "q.txt");
        check(out.rfind("q_raw=0.", 0) == 0 && out.find(" q_scaled=0.") != std::string::npos,
              "quality prints q_raw=<...> q_scaled=<...>");
    }
    check(run("quality --model " + model + " --seed 3 --m 16 --repeats 3 " + image, "qr.txt") ==
              0,
          "quality --repeats runs");
    check(slurp(g_work / "qr.txt").find("q_scaled_mean=") != std::string::npos,
          "quality --repeats adds mean/std");

    check(run("quality --model " + (g_work / "nope.plqm").string() + " " + image) == 2,
          "missing model file exits 2");
    {
        std::ofstream(g_work / "garbage.plqm", std::ios::binary) << "XXXXGARBAGE";
        check(run("quality --model " + (g_work / "garbage.plqm").string() + " " + image) == 2,
              "malformed model file exits 2");
    }

    const std::string map_base = (g_work / "map").string();
    check(run("map --model " + model + " --seed 3 --m 16 --out " + map_base + " " + image) == 0,
          "map runs");
    check(fs::exists(map_base + ".csv") && fs::exists(map_base + ".ppm"),
          "map writes CSV and heatmap");
    check(run("render --out " + (g_work / "re.png").string() + " " + map_base + ".csv") == 0,
          "render accepts the map CSV");
    check(fs::exists(g_work / "re.png"), "render writes the requested PNG");

    // Zero dropout collapses every stochastic pass, so the development
    // qualities have zero variance: a numeric failure, exit 3.
    check(run("calibrate-scale --model " + model + " --dropout 0 --m 4 " + corpus) == 3,
          "zero-variance calibration exits 3");

    check(run("calibrate-scale --model " + model + " --m 16 " + corpus, "cal.txt") == 0,
          "calibrate-scale runs");
    check(slurp(g_work / "cal.txt").rfind("alpha=", 0) == 0,
          "calibrate-scale prints alpha=<...> r=<...>");

    check(run("calibrate-gamma --model " + model + " --m 16 --face-box 8 8 16 16 " + image,
              "gamma.txt") == 0,
          "calibrate-gamma runs");
    check(slurp(g_work / "gamma.txt").rfind("gamma=", 0) == 0, "calibrate-gamma prints gamma");

    const std::string exp_base = (g_work / "exp").string();
    check(run("mask-exp --model " + model + " --seed 5 --m 8 --out " + exp_base + " " + corpus) ==
              0,
          "mask-exp runs");
    {
        const std::string records = slurp(exp_base + "_records.csv");
        // 3 corpus images x 5 fraction-mode sizes, plus the header line.
        check(count_lines(records) == 16, "mask-exp writes 3 x 5 = 15 data rows");
        check(records.rfind("image_id,size,top,left,q_org,q_mod,delta_q,delta_p", 0) == 0,
              "records CSV carries the pinned header");
        check(fs::exists(exp_base + "_summary.csv"), "mask-exp writes the summary CSV");
    }

    const std::string rest_base = (g_work / "rest").string();
    check(run("restore-exp --model " + model + " --seed 5 --m 8 --repeats 3 --sizes 10 --out " +
              rest_base + " " + corpus) == 0,
          "restore-exp runs");
    check(count_lines(slurp(rest_base + "_records.csv")) == 4,
          "restore-exp writes 3 x 1 records");

    std::cout << (g_failures == 0 ? "all cli checks passed\n"
                                  : std::to_string(g_failures) + " cli checks failed\n");
    return g_failures == 0 ? 0 : 1;
}
