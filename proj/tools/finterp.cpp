// finterp: synthesize datasets, train interpolation models, interpolate
// frame pairs, evaluate predictions, run the non-learned baselines, and
// check every layer's gradients against finite differences.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "fi/data.hpp"
#include "fi/gradcheck.hpp"
#include "fi/metrics.hpp"
#include "fi/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

// Every run drops a reproducibility header next to its outputs. No
// timestamps: identical invocations produce byte-identical trees.
void write_run_header(const fs::path& dir, std::uint64_t seed, const std::string& config_text) {
    fs::create_directories(dir);
    std::ofstream os(dir / "run_header.txt");
    os << "version = " << kVersion << "\n";
    os << "seed = " << seed << "\n";
    char digest[32];
    std::snprintf(digest, sizeof(digest), "%016llx",
                  static_cast<unsigned long long>(fi::fnv1a(config_text)));
    os << "config_digest = " << digest << "\n";
}

std::string slurp(const std::string& path) {
    std::ifstream is(path);
    if (!is.good()) throw fi::RuntimeError("cannot open: " + path);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

fi::SynthSpec spec_from_json(const json& j) {
    fi::SynthSpec spec;
    spec.width = j.value("width", 64);
    spec.height = j.value("height", 64);
    spec.frames = j.value("frames", 3);
    spec.seed = j.value("seed", 1);
    if (j.contains("background")) {
        auto bg = j.at("background");
        for (int c = 0; c < 3; ++c) spec.background[c] = bg.at(c).get<double>();
    }
    for (const auto& js : j.value("shapes", json::array())) {
        fi::SynthShape s;
        std::string kind = js.value("kind", "rect");
        if (kind == "rect") s.kind = fi::SynthShape::Kind::Rect;
        else if (kind == "disk") s.kind = fi::SynthShape::Kind::Disk;
        else throw fi::ValueError("synth spec: unknown shape kind '" + kind + "'");
        s.x = js.at("x").get<double>();
        s.y = js.at("y").get<double>();
        s.w = js.at("w").get<double>();
        s.h = js.value("h", s.w);
        s.vx = js.value("vx", 0.0);
        s.vy = js.value("vy", 0.0);
        if (js.contains("color"))
            for (int c = 0; c < 3; ++c) s.color[c] = js.at("color").at(c).get<double>();
        spec.shapes.push_back(s);
    }
    return spec;
}

// Writes one clip's frames and per-pair flows; appends to the manifests.
void write_clip(const fi::SynthResult& r, const fs::path& dir, int clip_idx,
                std::ostream& frame_manifest, std::ostream& flow_manifest) {
    char buf[64];
    for (size_t k = 0; k < r.frames.size(); ++k) {
        std::snprintf(buf, sizeof(buf), "seq%03d_f%03zu.ppm", clip_idx, k);
        fi::save_image(r.frames[k], (dir / buf).string());
        frame_manifest << buf << "\n";
    }
    for (size_t k = 0; k < r.flows.size(); ++k) {
        std::snprintf(buf, sizeof(buf), "seq%03d_p%03zu.flo", clip_idx, k);
        fi::save_flo(r.flows[k], (dir / buf).string());
        flow_manifest << buf << "\n";
    }
}

int cmd_synth(const std::string& spec_path, const std::string& out_dir) {
    json j = json::parse(slurp(spec_path));
    fs::path dir(out_dir);
    fs::create_directories(dir);
    std::ofstream frames_m(dir / "frames.txt");
    std::ofstream flows_m(dir / "flows.txt");

    int clips = j.value("clips", 0);
    std::uint64_t seed = j.value("seed", 1);
    if (clips > 0) {
        // random clips: shapes_per_clip shapes, speeds up to max_speed
        int w = j.value("width", 64);
        int h = j.value("height", 64);
        int frames = j.value("frames", 7);
        int n_shapes = j.value("shapes_per_clip", 3);
        double max_speed = j.value("max_speed", 6.0);
        fi::Rng rng(seed);
        for (int c = 0; c < clips; ++c) {
            fi::SynthSpec spec = fi::random_scene(w, h, frames, n_shapes, max_speed, rng);
            fi::SynthResult r = fi::synth_sequence(spec);
            if (c) {
                frames_m << "\n";
                flows_m << "\n";
            }
            write_clip(r, dir, c, frames_m, flows_m);
        }
    } else {
        fi::SynthSpec spec = spec_from_json(j);
        fi::SynthResult r = fi::synth_sequence(spec);
        write_clip(r, dir, 0, frames_m, flows_m);
    }
    write_run_header(dir, seed, j.dump());
    std::cout << "synthesized dataset in " << out_dir << "\n";
    return 0;
}

struct TrainFlags {
    std::string config, mode, flow, dataset, flows, checkpoint, log_path;
    double lr = -1, gamma = -1, disc_lr = -1;
    int batch = -1, steps = -1, crop = -1, depth = -1, disc_layers = -1;
    long long seed = -1;
    std::string channels;
};

int cmd_train(const TrainFlags& f) {
    fi::TrainConfig cfg;
    if (!f.config.empty()) {
        std::istringstream is(slurp(f.config));
        cfg = fi::parse_train_config(is);
    }
    // flags win over the config file
    if (!f.mode.empty()) {
        // combined regimes: adversarial+flow-external, adversarial+flow-implicit
        auto plus = f.mode.find('+');
        if (plus == std::string::npos) {
            cfg.mode = f.mode;
        } else {
            cfg.mode = f.mode.substr(0, plus);
            std::string rest = f.mode.substr(plus + 1);
            if (rest == "flow-external") cfg.flow = "external";
            else if (rest == "flow-implicit") cfg.flow = "implicit";
            else throw fi::ValueError("unknown training regime: " + f.mode);
        }
    }
    if (!f.flow.empty()) cfg.flow = f.flow;
    if (!f.dataset.empty()) cfg.dataset = f.dataset;
    if (!f.flows.empty()) cfg.flows = f.flows;
    if (!f.checkpoint.empty()) cfg.checkpoint = f.checkpoint;
    if (f.lr >= 0) cfg.lr = f.lr;
    if (f.gamma >= 0) cfg.gamma = f.gamma;
    if (f.disc_lr >= 0) cfg.disc_lr = f.disc_lr;
    if (f.batch >= 0) cfg.batch = f.batch;
    if (f.steps >= 0) cfg.steps = f.steps;
    if (f.crop >= 0) cfg.crop = f.crop;
    if (f.depth >= 0) cfg.depth = f.depth;
    if (f.disc_layers >= 0) cfg.disc_layers = f.disc_layers;
    if (f.seed >= 0) cfg.seed = static_cast<std::uint64_t>(f.seed);
    if (!f.channels.empty()) {
        cfg.channels.clear();
        std::stringstream ss(f.channels);
        std::string tok;
        while (std::getline(ss, tok, ',')) cfg.channels.push_back(std::stoi(tok));
    }
    cfg.validate();
    if (cfg.dataset.empty()) throw fi::ValueError("train: no dataset given");
    if (cfg.checkpoint.empty()) throw fi::ValueError("train: no checkpoint path given");

    fi::Manifest frames = fi::read_manifest(cfg.dataset);
    std::optional<fi::Manifest> flows;
    if (!cfg.flows.empty()) flows = fi::read_manifest(cfg.flows);
    if (cfg.flow == "external" && !flows)
        throw fi::ValueError("train: external flow mode needs --flows");
    auto data = fi::load_triplets(frames, flows ? &*flows : nullptr);
    std::cout << "loaded " << data.size() << " triplets\n";

    fs::path ckpt_dir = fs::path(cfg.checkpoint).parent_path();
    if (ckpt_dir.empty()) ckpt_dir = ".";
    fs::create_directories(ckpt_dir);
    std::string log_path = f.log_path.empty() ? (ckpt_dir / "train_log.tsv").string() : f.log_path;
    std::ofstream log(log_path);

    auto result = fi::train_run(data, cfg, &log);
    write_run_header(ckpt_dir, cfg.seed, fi::serialize_train_config(cfg));
    std::cout << "trained " << result.logs.size() << " steps; final loss "
              << (result.logs.empty() ? 0.0 : result.logs.back().total) << "\n";
    std::cout << "checkpoint: " << cfg.checkpoint << "\nlog: " << log_path << "\n";
    return 0;
}

fi::Tensor side_by_side(const std::vector<fi::Tensor>& imgs) {
    int C = imgs[0].dim(0), H = imgs[0].dim(1);
    int W = 0;
    for (const auto& im : imgs) W += im.dim(2);
    fi::Tensor panel = fi::Tensor::zeros({C, H, W});
    int x0 = 0;
    for (const auto& im : imgs) {
        for (int c = 0; c < C; ++c)
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < im.dim(2); ++x) panel.at(c, y, x0 + x) = im.at(c, y, x);
        x0 += im.dim(2);
    }
    return panel;
}

int cmd_interpolate(const std::string& ckpt, const std::string& first_path,
                    const std::string& second_path, const std::string& flow_path,
                    const std::string& out_path) {
    fi::Model model = fi::load_model(ckpt);
    fi::Tensor first = fi::load_image(first_path);
    fi::Tensor second = fi::load_image(second_path);
    fi::Tensor pred;
    if (model.cfg.flow == "external") {
        if (flow_path.empty())
            throw fi::ValueError("interpolate: this model needs --flow <field.flo>");
        fi::FlowField f = fi::load_flo(flow_path);
        pred = model.predict(first, second, &f);
    } else {
        pred = model.predict(first, second);
    }
    fs::path out(out_path);
    fs::create_directories(out.parent_path().empty() ? "." : out.parent_path());
    fi::save_image(pred, out_path);
    fs::path panel_path = out.parent_path() / (out.stem().string() + "_panel" + out.extension().string());
    fi::save_image(side_by_side({first, pred, second}), panel_path.string());
    write_run_header(out.parent_path().empty() ? "." : out.parent_path(), model.cfg.seed,
                     ckpt + "|" + first_path + "|" + second_path);
    std::cout << "wrote " << out_path << " and " << panel_path.string() << "\n";
    return 0;
}

std::vector<std::string> flat_paths(const fi::Manifest& m) {
    std::vector<std::string> out;
    for (const auto& clip : m.clips) out.insert(out.end(), clip.begin(), clip.end());
    return out;
}

int cmd_evaluate(const std::string& pred_manifest, const std::string& truth_manifest,
                 const std::string& out_dir, int jobs) {
    auto preds_paths = flat_paths(fi::read_manifest(pred_manifest));
    auto truth_paths = flat_paths(fi::read_manifest(truth_manifest));
    if (preds_paths.size() != truth_paths.size())
        throw fi::ValueError("evaluate: manifests differ in length");
    if (preds_paths.empty()) throw fi::ValueError("evaluate: empty manifests");
    if (jobs < 1) throw fi::ValueError("evaluate: --jobs must be at least 1");

    // fan out per-image loading and scoring; the reduction below is a fixed
    // sequential sum, so the report is independent of the worker count
    size_t n = preds_paths.size();
    std::vector<double> mses(n), ssims(n);
    std::vector<std::string> errors(n);
    auto worker = [&](size_t begin, size_t end) {
        for (size_t i = begin; i < end; ++i) {
            try {
                fi::Tensor p = fi::load_image(preds_paths[i]);
                fi::Tensor t = fi::load_image(truth_paths[i]);
                mses[i] = fi::mse_metric(p, t);
                ssims[i] = fi::ssim(p, t);
            } catch (const std::exception& e) {
                errors[i] = e.what();
            }
        }
    };
    if (jobs == 1) {
        worker(0, n);
    } else {
        std::vector<std::thread> pool;
        size_t chunk = (n + jobs - 1) / jobs;
        for (int j = 0; j < jobs; ++j) {
            size_t begin = std::min(n, static_cast<size_t>(j) * chunk);
            size_t end = std::min(n, begin + chunk);
            if (begin < end) pool.emplace_back(worker, begin, end);
        }
        for (auto& th : pool) th.join();
    }
    for (const auto& e : errors)
        if (!e.empty()) throw fi::RuntimeError(e);

    fi::EvalReport r;
    for (size_t i = 0; i < n; ++i) {
        r.mse += mses[i];
        r.ssim += ssims[i];
    }
    r.count = static_cast<int>(n);
    r.mse /= r.count;
    r.ssim /= r.count;
    r.psnr = fi::psnr(r.mse);

    fi::print_report(std::cout, "prediction", r);
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        std::ofstream os(fs::path(out_dir) / "report.txt");
        fi::print_report(os, "prediction", r);
        write_run_header(out_dir, 0, pred_manifest + "|" + truth_manifest);
    }
    return 0;
}

int cmd_baseline(const std::string& method, const std::string& first_path,
                 const std::string& second_path, const std::string& flo_path,
                 const std::string& manifest_path, const std::string& flow_manifest_path,
                 const std::string& out_path) {
    if (method != "average" && method != "warp")
        throw fi::ValueError("baseline: method must be 'average' or 'warp'");

    if (!first_path.empty()) {  // single-pair mode
        fi::Tensor first = fi::load_image(first_path);
        fi::Tensor second = fi::load_image(second_path);
        fi::Tensor out;
        if (method == "average") {
            out = fi::average_frames(first, second);
        } else {
            if (flo_path.empty()) throw fi::ValueError("baseline warp: needs --flo <field.flo>");
            out = fi::warp_middle(first, second, fi::load_flo(flo_path));
        }
        fs::path out_file(out_path);
        if (!out_file.parent_path().empty()) fs::create_directories(out_file.parent_path());
        fi::save_image(out, out_path);
        std::cout << "wrote " << out_path << "\n";
        return 0;
    }

    if (manifest_path.empty())
        throw fi::ValueError("baseline: give either --first/--second or --manifest");
    fi::Manifest frames = fi::read_manifest(manifest_path);
    std::optional<fi::Manifest> flows;
    if (!flow_manifest_path.empty()) flows = fi::read_manifest(flow_manifest_path);
    if (method == "warp" && !flows)
        throw fi::ValueError("baseline warp: needs --flow-manifest");
    auto data = fi::load_triplets(frames, flows ? &*flows : nullptr);

    fs::path dir(out_path);
    fs::create_directories(dir);
    std::ofstream pred_m(dir / "pred_manifest.txt");
    std::ofstream truth_m(dir / "truth_manifest.txt");
    char buf[64];
    int truth_idx = 0;
    for (size_t i = 0; i < data.size(); ++i) {
        fi::Tensor out = method == "average"
                             ? fi::average_frames(data[i].first, data[i].second)
                             : fi::warp_middle(data[i].first, data[i].second, data[i].flow_1_to_2);
        std::snprintf(buf, sizeof(buf), "pred_%05zu.ppm", i);
        fi::save_image(out, (dir / buf).string());
        pred_m << buf << "\n";
        std::snprintf(buf, sizeof(buf), "truth_%05d.ppm", truth_idx++);
        fi::save_image(data[i].middle_truth, (dir / buf).string());
        truth_m << buf << "\n";
    }
    write_run_header(dir, 0, method + "|" + manifest_path);
    std::cout << "wrote " << data.size() << " baseline predictions to " << out_path << "\n";
    return 0;
}

struct OpCheck {
    std::string name;
    double err;
};

int cmd_gradcheck() {
    using namespace fi;
    std::vector<OpCheck> checks;
    Rng rng(2024);

    auto run_check = [&](const std::string& name, Tensor& param, const real* analytic,
                         const std::function<double()>& loss) {
        checks.push_back({name, fd_max_rel_error(param, analytic, loss)});
    };

    {  // conv2d
        Tensor x = Tensor::uniform({2, 5, 5}, rng).set_requires_grad();
        Tensor w = Tensor::uniform({3, 2, 3, 3}, rng, -0.7, 0.7).set_requires_grad();
        Tensor b = Tensor::uniform({3}, rng, -0.2, 0.2).set_requires_grad();
        Tensor proj = Tensor::uniform({3, 3, 3}, rng);
        auto fwd = [&]() { return reduce_sum(mul(conv2d(x, w, b, 2, 1), proj)); };
        {
            Tape tape;
            tape.backward(fwd());
        }
        auto loss = [&]() { return static_cast<double>(fwd().item()); };
        run_check("conv2d/input", x, x.grad(), loss);
        run_check("conv2d/weights", w, w.grad(), loss);
        run_check("conv2d/bias", b, b.grad(), loss);
    }
    {  // transposed conv2d
        Tensor x = Tensor::uniform({3, 3, 3}, rng).set_requires_grad();
        Tensor w = Tensor::uniform({3, 2, 3, 3}, rng, -0.7, 0.7).set_requires_grad();
        Tensor b = Tensor::uniform({2}, rng, -0.2, 0.2).set_requires_grad();
        Tensor proj = Tensor::uniform({2, 5, 5}, rng);
        auto fwd = [&]() { return reduce_sum(mul(transposed_conv2d(x, w, b, 2, 1, 5, 5), proj)); };
        {
            Tape tape;
            tape.backward(fwd());
        }
        auto loss = [&]() { return static_cast<double>(fwd().item()); };
        run_check("transposed_conv2d/input", x, x.grad(), loss);
        run_check("transposed_conv2d/weights", w, w.grad(), loss);
        run_check("transposed_conv2d/bias", b, b.grad(), loss);
    }
    {  // displacement conv: all four gradients
        Tensor x = Tensor::uniform({1, 5, 5}, rng).set_requires_grad();
        Tensor w = Tensor::uniform({2, 1, 3, 3}, rng, -0.7, 0.7).set_requires_grad();
        Tensor b = Tensor::uniform({2}, rng, -0.2, 0.2).set_requires_grad();
        Tensor flow = Tensor::zeros({2, 5, 5});
        for (int i = 0; i < flow.size(); ++i) {
            double v;
            do {
                v = rng.uniform(-1.4, 1.4);
            } while (std::abs(v - std::round(v)) < 1e-3);
            flow.data()[i] = static_cast<real>(v);
        }
        flow.set_requires_grad();
        Tensor proj = Tensor::uniform({2, 5, 5}, rng);
        auto fwd = [&]() { return reduce_sum(mul(disp_conv2d(x, w, b, flow), proj)); };
        {
            Tape tape;
            tape.backward(fwd());
        }
        auto loss = [&]() { return static_cast<double>(fwd().item()); };
        run_check("disp_conv2d/input", x, x.grad(), loss);
        run_check("disp_conv2d/weights", w, w.grad(), loss);
        run_check("disp_conv2d/bias", b, b.grad(), loss);
        run_check("disp_conv2d/flow", flow, flow.grad(), loss);
    }
    {  // dense
        Tensor x = Tensor::uniform({2, 4, 4}, rng).set_requires_grad();
        Tensor w = Tensor::uniform({3, 32}, rng, -0.5, 0.5).set_requires_grad();
        Tensor b = Tensor::uniform({3}, rng).set_requires_grad();
        Tensor proj = Tensor::uniform({3}, rng);
        auto fwd = [&]() { return reduce_sum(mul(dense(x, w, b), proj)); };
        {
            Tape tape;
            tape.backward(fwd());
        }
        auto loss = [&]() { return static_cast<double>(fwd().item()); };
        run_check("dense/input", x, x.grad(), loss);
        run_check("dense/weights", w, w.grad(), loss);
        run_check("dense/bias", b, b.grad(), loss);
    }
    {  // pooled composite
        Tensor x = Tensor::uniform({1, 6, 6}, rng).set_requires_grad();
        Tensor w = Tensor::uniform({2, 1, 3, 3}, rng, -0.7, 0.7).set_requires_grad();
        Tensor b = Tensor::zeros({2}).set_requires_grad();
        auto fwd = [&]() {
            return reduce_sum(square(maxpool2d(relu(conv2d(x, w, b, 1, 1)))));
        };
        {
            Tape tape;
            tape.backward(fwd());
        }
        auto loss = [&]() { return static_cast<double>(fwd().item()); };
        run_check("maxpool_composite/input", x, x.grad(), loss);
        run_check("maxpool_composite/weights", w, w.grad(), loss);
    }
    {  // elementwise composite
        Tensor a = Tensor::uniform({3, 4}, rng, 0.2, 1.2).set_requires_grad();
        auto fwd = [&]() {
            return reduce_sum(mul(fi::tanh(square(a)), sigmoid(fi::log(add_scalar(a, 1.0)))));
        };
        {
            Tape tape;
            tape.backward(fwd());
        }
        auto loss = [&]() { return static_cast<double>(fwd().item()); };
        run_check("elementwise_composite/input", a, a.grad(), loss);
    }

    bool all_ok = true;
    std::printf("%-32s %14s  %s\n", "op", "max_rel_err", "status");
    for (const auto& c : checks) {
        bool ok = c.err < 1e-4;
        all_ok = all_ok && ok;
        std::printf("%-32s %14.3e  %s\n", c.name.c_str(), c.err, ok ? "PASS" : "FAIL");
    }
    if (!all_ok) throw fi::RuntimeError("gradient check failed");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"frame interpolation engine"};
    app.require_subcommand(1);

    auto* synth = app.add_subcommand("synth", "render a synthetic dataset with ground-truth flow");
    std::string synth_spec, synth_out;
    synth->add_option("--spec", synth_spec, "scene description (json)")->required();
    synth->add_option("--out", synth_out, "output directory")->required();

    auto* train = app.add_subcommand("train", "train an interpolation model");
    TrainFlags tf;
    train->add_option("--config", tf.config, "key-value config file");
    train->add_option("--mode", tf.mode,
                      "mse | adversarial | adversarial+flow-external | adversarial+flow-implicit");
    train->add_option("--flow", tf.flow, "none | external | implicit");
    train->add_option("--dataset", tf.dataset, "frame manifest");
    train->add_option("--flows", tf.flows, ".flo manifest");
    train->add_option("--checkpoint", tf.checkpoint, "output checkpoint path");
    train->add_option("--log", tf.log_path, "training log path (tsv)");
    train->add_option("--lr", tf.lr, "learning rate");
    train->add_option("--gamma", tf.gamma, "alpha decay constant");
    train->add_option("--disc-lr", tf.disc_lr, "discriminator learning rate");
    train->add_option("--batch", tf.batch, "minibatch size");
    train->add_option("--steps", tf.steps, "generator updates");
    train->add_option("--crop", tf.crop, "random crop size (0 = off)");
    train->add_option("--depth", tf.depth, "encoder levels");
    train->add_option("--channels", tf.channels, "comma-separated channel list");
    train->add_option("--disc-layers", tf.disc_layers, "discriminator preset (8 or 16)");
    train->add_option("--seed", tf.seed, "rng seed");

    auto* interp = app.add_subcommand("interpolate", "predict the middle frame of a pair");
    std::string i_ckpt, i_first, i_second, i_flow, i_out;
    interp->add_option("--ckpt", i_ckpt, "model checkpoint")->required();
    interp->add_option("--first", i_first, "first frame image")->required();
    interp->add_option("--second", i_second, "second frame image")->required();
    interp->add_option("--flow", i_flow, "first-to-second flow (.flo), external-flow models");
    interp->add_option("--out", i_out, "output image path")->required();

    auto* eval = app.add_subcommand("evaluate", "score predictions against ground truth");
    std::string e_pred, e_truth, e_out;
    int e_jobs = 1;
    eval->add_option("--pred-manifest", e_pred, "predicted-image manifest")->required();
    eval->add_option("--truth-manifest", e_truth, "ground-truth manifest")->required();
    eval->add_option("--out", e_out, "optional report directory");
    eval->add_option("--jobs", e_jobs, "parallel evaluation workers");

    auto* base = app.add_subcommand("baseline", "non-learned baselines: average | warp");
    std::string b_method, b_first, b_second, b_flo, b_manifest, b_flow_manifest, b_out;
    base->add_option("--method", b_method, "average | warp")->required();
    base->add_option("--first", b_first, "first frame (single-pair mode)");
    base->add_option("--second", b_second, "second frame (single-pair mode)");
    base->add_option("--flo", b_flo, "flow field for warp (single-pair mode)");
    base->add_option("--manifest", b_manifest, "frame manifest (dataset mode)");
    base->add_option("--flow-manifest", b_flow_manifest, ".flo manifest (dataset mode)");
    base->add_option("--out", b_out, "output file (pair mode) or directory (dataset mode)")
        ->required();

    auto* grad = app.add_subcommand("gradcheck", "finite-difference check of every layer op");
    (void)grad;

    try {
        app.parse(argc, argv);
        if (synth->parsed()) return cmd_synth(synth_spec, synth_out);
        if (train->parsed()) return cmd_train(tf);
        if (interp->parsed()) return cmd_interpolate(i_ckpt, i_first, i_second, i_flow, i_out);
        if (eval->parsed()) return cmd_evaluate(e_pred, e_truth, e_out, e_jobs);
        if (base->parsed())
            return cmd_baseline(b_method, b_first, b_second, b_flo, b_manifest, b_flow_manifest,
                                b_out);
        if (grad->parsed()) return cmd_gradcheck();
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const fi::ValueError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
