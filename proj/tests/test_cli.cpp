// End-to-end smoke test of every CLI subcommand on a small synthetic
// dataset. FI_CLI_PATH points at the finterp binary.

#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

fs::path work_dir() {
    auto dir = fs::temp_directory_path() / "fi_cli_smoke";
    return dir;
}

int run(const std::string& args) {
    std::string cmd = std::string(FI_CLI_PATH) + " " + args + " >> " +
                      (work_dir() / "cli_output.log").string() + " 2>&1";
    int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

}  // namespace

TEST_CASE("cli end-to-end smoke", "[cli]") {
    auto dir = work_dir();
    fs::remove_all(dir);
    fs::create_directories(dir);
    auto in_dir = [&](const std::string& rel) { return (dir / rel).string(); };

    // synth
    {
        std::ofstream spec(dir / "spec.json");
        spec << R"({"width": 32, "height": 32, "frames": 5, "clips": 2,)"
             << R"( "shapes_per_clip": 2, "max_speed": 2.5, "seed": 11})";
    }
    REQUIRE(run("synth --spec " + in_dir("spec.json") + " --out " + in_dir("data")) == 0);
    REQUIRE(fs::exists(dir / "data" / "frames.txt"));
    REQUIRE(fs::exists(dir / "data" / "flows.txt"));
    REQUIRE(fs::exists(dir / "data" / "run_header.txt"));

    // deterministic re-run: byte-identical dataset
    REQUIRE(run("synth --spec " + in_dir("spec.json") + " --out " + in_dir("data_again")) == 0);
    REQUIRE(slurp(dir / "data" / "seq000_f000.ppm") == slurp(dir / "data_again" / "seq000_f000.ppm"));
    REQUIRE(slurp(dir / "data" / "run_header.txt") == slurp(dir / "data_again" / "run_header.txt"));

    // train (every regime, tiny budgets), config file + flag override
    {
        std::ofstream cfg(dir / "train.cfg");
        cfg << "mode = mse\n"
            << "channels = 8,16,24\n"
            << "batch = 1\n"
            << "steps = 999\n"  // overridden by the flag below
            << "lr = 0.003\n"
            << "seed = 5\n"
            << "dataset = " << in_dir("data/frames.txt") << "\n"
            << "checkpoint = " << in_dir("run_mse/model.ck") << "\n";
    }
    REQUIRE(run("train --config " + in_dir("train.cfg") + " --steps 12") == 0);
    REQUIRE(fs::exists(dir / "run_mse" / "model.ck"));
    {
        std::ifstream log(dir / "run_mse" / "train_log.tsv");
        std::string line;
        int lines = 0;
        while (std::getline(log, line)) ++lines;
        REQUIRE(lines == 12);  // flag wins over the config file
    }

    REQUIRE(run("train --dataset " + in_dir("data/frames.txt") + " --checkpoint " +
                in_dir("run_adv/model.ck") +
                " --mode adversarial --channels 8,16,24 --batch 1 --steps 6 --seed 5") == 0);
    REQUIRE(run("train --dataset " + in_dir("data/frames.txt") + " --flows " +
                in_dir("data/flows.txt") + " --checkpoint " + in_dir("run_ext/model.ck") +
                " --mode adversarial+flow-external --channels 8,16,24 --batch 1 --steps 6 "
                "--seed 5") == 0);
    REQUIRE(run("train --dataset " + in_dir("data/frames.txt") + " --checkpoint " +
                in_dir("run_imp/model.ck") +
                " --mode adversarial+flow-implicit --channels 8,16,24 --batch 1 --steps 6 "
                "--seed 5") == 0);

    // interpolate from the mse checkpoint (plain) and the implicit one
    REQUIRE(run("interpolate --ckpt " + in_dir("run_mse/model.ck") + " --first " +
                in_dir("data/seq000_f000.ppm") + " --second " + in_dir("data/seq000_f002.ppm") +
                " --out " + in_dir("interp/mid.ppm")) == 0);
    REQUIRE(fs::exists(dir / "interp" / "mid.ppm"));
    REQUIRE(fs::exists(dir / "interp" / "mid_panel.ppm"));
    REQUIRE(run("interpolate --ckpt " + in_dir("run_imp/model.ck") + " --first " +
                in_dir("data/seq000_f000.ppm") + " --second " + in_dir("data/seq000_f002.ppm") +
                " --out " + in_dir("interp/mid_imp.ppm")) == 0);
    // external-flow model without --flow is a usage error (exit 1)
    REQUIRE(run("interpolate --ckpt " + in_dir("run_ext/model.ck") + " --first " +
                in_dir("data/seq000_f000.ppm") + " --second " + in_dir("data/seq000_f002.ppm") +
                " --out " + in_dir("interp/mid_ext.ppm")) == 1);

    // baselines: dataset mode (average + warp) and single-pair mode
    REQUIRE(run("baseline --method average --manifest " + in_dir("data/frames.txt") + " --out " +
                in_dir("base_avg")) == 0);
    REQUIRE(run("baseline --method warp --manifest " + in_dir("data/frames.txt") +
                " --flow-manifest " + in_dir("data/flows.txt") + " --out " + in_dir("base_warp")) ==
            0);
    REQUIRE(run("baseline --method average --first " + in_dir("data/seq000_f000.ppm") +
                " --second " + in_dir("data/seq000_f002.ppm") + " --out " +
                in_dir("pair_avg.ppm")) == 0);
    REQUIRE(run("baseline --method bogus --manifest x --out y") == 1);

    // evaluate the warp baseline against the ground-truth middles
    REQUIRE(run("evaluate --pred-manifest " + in_dir("base_warp/pred_manifest.txt") +
                " --truth-manifest " + in_dir("base_warp/truth_manifest.txt") + " --out " +
                in_dir("eval_warp")) == 0);
    REQUIRE(fs::exists(dir / "eval_warp" / "report.txt"));
    // identical streams score mse 0 / ssim 1
    REQUIRE(run("evaluate --pred-manifest " + in_dir("base_warp/truth_manifest.txt") +
                " --truth-manifest " + in_dir("base_warp/truth_manifest.txt") + " --out " +
                in_dir("eval_self")) == 0);
    {
        std::string report = slurp(dir / "eval_self" / "report.txt");
        REQUIRE(report.find("mse 0\n") != std::string::npos);
        REQUIRE(report.find("ssim 1\n") != std::string::npos);
    }

    // gradcheck
    REQUIRE(run("gradcheck") == 0);

    // nonexistent input: runtime failure (exit 2)
    REQUIRE(run("evaluate --pred-manifest missing.txt --truth-manifest missing.txt") == 2);
}

TEST_CASE("uniform 0.5 average of black and white frames", "[cli]") {
    auto dir = work_dir();
    fs::create_directories(dir);
    auto in_dir = [&](const std::string& rel) { return (dir / rel).string(); };
    // write black and white 8x8 PPMs
    {
        std::ofstream b(dir / "black.ppm", std::ios::binary);
        b << "P6\n8 8\n255\n";
        for (int i = 0; i < 8 * 8 * 3; ++i) b.put('\0');
        std::ofstream w(dir / "white.ppm", std::ios::binary);
        w << "P6\n8 8\n255\n";
        for (int i = 0; i < 8 * 8 * 3; ++i) w.put('\xff');
    }
    REQUIRE(run("baseline --method average --first " + in_dir("black.ppm") + " --second " +
                in_dir("white.ppm") + " --out " + in_dir("gray.ppm")) == 0);
    std::string bytes = slurp(dir / "gray.ppm");
    // payload must be uniform mid-gray (0.5 * 255 rounds to 128)
    size_t header_end = bytes.find("255\n") + 4;
    for (size_t i = header_end; i < bytes.size(); ++i)
        REQUIRE(static_cast<unsigned char>(bytes[i]) == 128);
}
