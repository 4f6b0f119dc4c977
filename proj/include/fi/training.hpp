#pragma once

#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "fi/data.hpp"
#include "fi/network.hpp"

namespace fi {

inline constexpr double kProbEps = 1e-8;

// ---------------------------------------------------------------------------
// Losses and the alpha schedule
// ---------------------------------------------------------------------------

/// Training loss: SUM of squared differences over all pixels and channels.
/// (The evaluation metric in metrics.hpp is the mean; the two are distinct.)
inline Tensor mse_loss(const Tensor& a, const Tensor& b) {
    detail::require(a.same_shape(b), "mse_loss: shape mismatch");
    return reduce_sum(square(sub(a, b)));
}

/// Exponentially decaying weight of the pixel loss inside the adversarial
/// objective: alpha = exp(-gamma * n), strictly decreasing, in (0, 1].
inline double alpha_schedule(double gamma, std::uint64_t n) {
    detail::require(gamma > 0, "alpha_schedule: gamma must be positive");
    return std::exp(-gamma * static_cast<double>(n));
}

/// Per-step loss breakdown. In adversarial mode
/// total == alpha * mse_term + adversarial_term.
struct LossReport {
    double total = 0;
    double mse_term = 0;
    double adversarial_term = 0;
    double alpha = 1;
};

/// Combined generator objective: the alpha-weighted pixel sum plus the
/// adversarial term -log(1 - p + eps), where p is the discriminator's
/// probability that the frame is generated (the generator drives p down).
inline LossReport generator_loss(const Tensor& gen_out, const Tensor& truth, double disc_prob,
                                 double alpha) {
    detail::require(disc_prob > 0 && disc_prob < 1, "generator_loss: disc_prob must be in (0,1)");
    detail::require(gen_out.same_shape(truth), "generator_loss: shape mismatch");
    LossReport r;
    r.alpha = alpha;
    double acc = 0;
    for (int i = 0; i < gen_out.size(); ++i) {
        double d = static_cast<double>(gen_out.data()[i]) - static_cast<double>(truth.data()[i]);
        acc += d * d;
    }
    r.mse_term = acc;
    r.adversarial_term = -std::log(1.0 - disc_prob + kProbEps);
    r.total = alpha * r.mse_term + r.adversarial_term;
    return r;
}

/// Binary cross-entropy for a discriminator that outputs the probability a
/// frame IS generated: real frames should score 0, generated frames 1.
inline double discriminator_loss(double prob_on_real, double prob_on_generated) {
    detail::require(prob_on_real > 0 && prob_on_real < 1,
                    "discriminator_loss: prob_on_real out of range");
    detail::require(prob_on_generated > 0 && prob_on_generated < 1,
                    "discriminator_loss: prob_on_generated out of range");
    return -std::log(1.0 - prob_on_real + kProbEps) - std::log(prob_on_generated + kProbEps);
}

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

/// In-place parameter update from accumulated gradients. Adam (default) or
/// plain SGD per state.optimizer; moments live in the state keyed by
/// parameter name. `t` is the 1-based count of updates applied to this store
/// (drives Adam's bias correction). Gradients are left untouched.
inline void sgd_adam_update(ParamStore& store, TrainState& state, std::uint64_t t,
                            double lr_override = -1) {
    double lr = lr_override >= 0 ? lr_override : state.learning_rate;
    detail::require(t >= 1, "sgd_adam_update: update count must be 1-based");
    for (auto& [name, p] : store) {
        detail::require(p.has_grad(), "sgd_adam_update: missing gradient for " + name);
        const real* g = p.grad();
        if (state.optimizer == 1) {  // sgd
            for (int i = 0; i < p.size(); ++i)
                p.data()[i] -= static_cast<real>(lr) * g[i];
            continue;
        }
        auto it = state.moments.find(name);
        if (it == state.moments.end()) {
            it = state.moments
                     .emplace(name, std::make_pair(Tensor::zeros(p.shape()), Tensor::zeros(p.shape())))
                     .first;
        }
        Tensor& m = it->second.first;
        Tensor& v = it->second.second;
        double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(t));
        double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(t));
        for (int i = 0; i < p.size(); ++i) {
            double gi = static_cast<double>(g[i]);
            double mi = kAdamBeta1 * static_cast<double>(m.data()[i]) + (1 - kAdamBeta1) * gi;
            double vi = kAdamBeta2 * static_cast<double>(v.data()[i]) + (1 - kAdamBeta2) * gi * gi;
            m.data()[i] = static_cast<real>(mi);
            v.data()[i] = static_cast<real>(vi);
            double step = lr * (mi / bc1) / (std::sqrt(vi / bc2) + kAdamEps);
            p.data()[i] -= static_cast<real>(step);
        }
    }
}

// ---------------------------------------------------------------------------
// Training configuration (flat key-value text) and the model bundle
// ---------------------------------------------------------------------------

struct TrainConfig {
    std::string mode = "mse";       // mse | adversarial
    std::string flow = "none";      // none | external | implicit
    int depth = 3;
    std::vector<int> channels = {16, 32, 64};
    double lr = 1e-3;
    double gamma = 0.001;
    int batch = 4;
    int steps = 500;
    std::uint64_t seed = 1;
    std::string dataset;            // frame manifest path
    std::string flows;              // optional .flo manifest path
    std::string checkpoint;         // output checkpoint path
    std::string optimizer = "adam"; // adam | sgd
    int disc_layers = 8;
    bool disc_conditioned = false;
    int crop = 0;                   // random-crop size, 0 = off
    double disc_lr = -1;            // defaults to lr
    int image_size = 64;            // discriminator build extent

    void validate() const {
        detail::require(mode == "mse" || mode == "adversarial", "config: bad mode '" + mode + "'");
        detail::require(flow == "none" || flow == "external" || flow == "implicit",
                        "config: bad flow mode '" + flow + "'");
        detail::require(optimizer == "adam" || optimizer == "sgd",
                        "config: bad optimizer '" + optimizer + "'");
        detail::require(lr > 0 && gamma > 0 && batch >= 1 && steps >= 0, "config: bad numbers");
        detail::require(depth >= 2 && static_cast<int>(channels.size()) == depth,
                        "config: depth/channels mismatch");
    }
};

inline std::string serialize_train_config(const TrainConfig& c) {
    std::ostringstream os;
    os << "mode = " << c.mode << "\n";
    os << "flow = " << c.flow << "\n";
    os << "depth = " << c.depth << "\n";
    os << "channels = ";
    for (size_t i = 0; i < c.channels.size(); ++i) os << (i ? "," : "") << c.channels[i];
    os << "\n";
    os << "lr = " << std::setprecision(17) << c.lr << "\n";
    os << "gamma = " << std::setprecision(17) << c.gamma << "\n";
    os << "batch = " << c.batch << "\n";
    os << "steps = " << c.steps << "\n";
    os << "seed = " << c.seed << "\n";
    os << "dataset = " << c.dataset << "\n";
    if (!c.flows.empty()) os << "flows = " << c.flows << "\n";
    os << "checkpoint = " << c.checkpoint << "\n";
    os << "optimizer = " << c.optimizer << "\n";
    os << "disc_layers = " << c.disc_layers << "\n";
    os << "disc_conditioned = " << (c.disc_conditioned ? 1 : 0) << "\n";
    os << "crop = " << c.crop << "\n";
    if (c.disc_lr >= 0) os << "disc_lr = " << std::setprecision(17) << c.disc_lr << "\n";
    os << "image_size = " << c.image_size << "\n";
    return os.str();
}

/// Parses `key = value` lines ('#' comments, blank lines ignored). Unknown
/// keys are errors.
inline TrainConfig parse_train_config(std::istream& is) {
    TrainConfig c;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto trim = [](std::string s) {
            size_t a = s.find_first_not_of(" \t\r");
            size_t b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        std::string t = trim(line);
        if (t.empty()) continue;
        auto eq = t.find('=');
        std::string key, value;
        if (eq != std::string::npos) {
            key = trim(t.substr(0, eq));
            value = trim(t.substr(eq + 1));
        } else {
            auto sp = t.find_first_of(" \t");
            detail::require(sp != std::string::npos,
                            "config line " + std::to_string(lineno) + ": expected 'key = value'");
            key = trim(t.substr(0, sp));
            value = trim(t.substr(sp + 1));
        }
        try {
            if (key == "mode") {
                // combined regime names map onto the (mode, flow) pair
                auto plus = value.find('+');
                if (plus == std::string::npos) {
                    c.mode = value;
                } else {
                    c.mode = value.substr(0, plus);
                    std::string rest = value.substr(plus + 1);
                    if (rest == "flow-external") c.flow = "external";
                    else if (rest == "flow-implicit") c.flow = "implicit";
                    else throw ValueError("config: unknown training regime '" + value + "'");
                }
            }
            else if (key == "flow") c.flow = value;
            else if (key == "depth") c.depth = std::stoi(value);
            else if (key == "channels") {
                c.channels.clear();
                std::stringstream ss(value);
                std::string tok;
                while (std::getline(ss, tok, ',')) c.channels.push_back(std::stoi(tok));
            } else if (key == "lr") c.lr = std::stod(value);
            else if (key == "gamma") c.gamma = std::stod(value);
            else if (key == "batch") c.batch = std::stoi(value);
            else if (key == "steps") c.steps = std::stoi(value);
            else if (key == "seed") c.seed = std::stoull(value);
            else if (key == "dataset") c.dataset = value;
            else if (key == "flows") c.flows = value;
            else if (key == "checkpoint") c.checkpoint = value;
            else if (key == "optimizer") c.optimizer = value;
            else if (key == "disc_layers") c.disc_layers = std::stoi(value);
            else if (key == "disc_conditioned") c.disc_conditioned = std::stoi(value) != 0;
            else if (key == "crop") c.crop = std::stoi(value);
            else if (key == "disc_lr") c.disc_lr = std::stod(value);
            else if (key == "image_size") c.image_size = std::stoi(value);
            else throw ValueError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        } catch (const std::invalid_argument&) {
            throw ValueError("config line " + std::to_string(lineno) + ": bad value for '" + key + "'");
        } catch (const std::out_of_range&) {
            throw ValueError("config line " + std::to_string(lineno) + ": value out of range for '" + key + "'");
        }
    }
    return c;
}

/// Generator plus (when implicit) the flow predictor: everything needed to
/// interpolate a frame outside of training.
struct Model {
    TrainConfig cfg;
    NetworkSpec gen_spec;
    ParamStore gen_params;
    NetworkSpec pred_spec;
    ParamStore pred_params;

    bool uses_flow() const { return cfg.flow != "none"; }
    bool implicit_flow() const { return cfg.flow == "implicit"; }

    /// Evaluation-time interpolation (no tape). External-flow models require
    /// the flow from the first to the second frame.
    Tensor predict(const Tensor& first, const Tensor& second,
                   const FlowField* external_flow = nullptr) const {
        if (cfg.flow == "external") {
            detail::require(external_flow != nullptr, "this model requires an external flow field");
            Tensor f = flow_to_tensor(*external_flow);
            return generator_forward(gen_spec, gen_params, first, second, &f);
        }
        if (cfg.flow == "implicit") {
            Tensor f = flow_predictor_forward(pred_spec, pred_params, first, second);
            return generator_forward(gen_spec, gen_params, first, second, &f);
        }
        return generator_forward(gen_spec, gen_params, first, second);
    }

    /// Predicted flow field (implicit models only).
    FlowField predict_flow(const Tensor& first, const Tensor& second) const {
        detail::require(implicit_flow(), "model has no flow predictor");
        return tensor_to_flow(flow_predictor_forward(pred_spec, pred_params, first, second));
    }
};

inline Model build_model(const TrainConfig& cfg, Rng& rng) {
    cfg.validate();
    Model m;
    m.cfg = cfg;
    GeneratorConfig g;
    g.levels = cfg.depth;
    g.channels = cfg.channels;
    g.flow_prior = cfg.flow != "none";
    auto [gs, gp] = build_generator(g, rng);
    m.gen_spec = std::move(gs);
    m.gen_params = std::move(gp);
    if (cfg.flow == "implicit") {
        FlowPredictorConfig f;
        f.levels = cfg.depth;
        f.channels = cfg.channels;
        auto [ps, pp] = build_flow_predictor(f, rng);
        m.pred_spec = std::move(ps);
        m.pred_params = std::move(pp);
    }
    return m;
}

/// Rebuilds a model from a checkpoint: the stored config text defines the
/// architecture, then parameters are loaded bit-exactly.
inline Model load_model(const std::string& checkpoint_path) {
    TrainState peek = checkpoint_peek(checkpoint_path);
    std::istringstream cfg_text(peek.config);
    TrainConfig cfg = parse_train_config(cfg_text);
    Rng rng(cfg.seed);
    Model m = build_model(cfg, rng);
    ParamStore merged;
    merged.absorb("gen.", m.gen_params);
    if (cfg.flow == "implicit") merged.absorb("pred.", m.pred_params);
    // discriminator parameters ride along in adversarial checkpoints
    if (cfg.mode == "adversarial") {
        DiscriminatorConfig d;
        d.input_size = cfg.image_size;
        d.layers = cfg.disc_layers;
        d.conditioned = cfg.disc_conditioned;
        auto [ds, dp] = build_discriminator(d, rng);
        merged.absorb("disc.", dp);
    }
    checkpoint_load(checkpoint_path, merged);
    return m;
}

// ---------------------------------------------------------------------------
// Training loops
// ---------------------------------------------------------------------------

struct StepLog {
    std::uint64_t n = 0;
    double alpha = 1, mse_term = 0, adv_term = 0, total = 0;
};

struct TrainResult {
    Model model;
    TrainState state;
    std::vector<StepLog> logs;
};

namespace detail {

inline void write_log_line(std::ostream* log, const StepLog& l) {
    if (!log) return;
    (*log) << l.n << '\t' << std::setprecision(9) << l.alpha << '\t' << l.mse_term << '\t'
           << l.adv_term << '\t' << l.total << '\n';
}

// -log(1 - p + eps) as a tape expression over the scalar probability.
inline Tensor adversarial_term(const Tensor& prob) {
    return scale(fi::log(add_scalar(scale(prob, -1), real(1.0 + kProbEps))), -1);
}

}  // namespace detail

/// Shared trainer behind the three regimes. Per step: in adversarial mode
/// one discriminator update on (real middle, generated middle) pairs, then
/// one generator update with the alpha-scheduled combined loss; in mse mode
/// just the generator update. All randomness comes from one seeded stream,
/// so fixed seeds give identical runs.
inline TrainResult train_run(const std::vector<FrameTriplet>& data, const TrainConfig& cfg,
                             std::ostream* log = nullptr) {
    cfg.validate();
    detail::require(!data.empty(), "training needs a non-empty dataset");
    if (cfg.flow == "external")
        for (const auto& t : data)
            detail::require(t.has_flow(), "external-flow training needs flow fields on every triplet");

    TrainConfig cfg_resolved = cfg;
    {
        int h = data.front().first.dim(1);
        int w = data.front().first.dim(2);
        detail::require(h == w, "training frames must be square");
        cfg_resolved.image_size = cfg.crop > 0 ? cfg.crop : h;
    }

    Rng rng(cfg.seed);
    TrainResult result;
    result.model = build_model(cfg_resolved, rng);
    Model& model = result.model;

    NetworkSpec disc_spec;
    ParamStore disc_params;
    const bool adversarial = cfg_resolved.mode == "adversarial";
    if (adversarial) {
        DiscriminatorConfig d;
        d.input_size = cfg_resolved.image_size;
        d.layers = cfg_resolved.disc_layers;
        d.conditioned = cfg_resolved.disc_conditioned;
        auto [ds, dp] = build_discriminator(d, rng);
        disc_spec = std::move(ds);
        disc_params = std::move(dp);
    }

    TrainState& state = result.state;
    state.gamma = cfg_resolved.gamma;
    state.learning_rate = cfg_resolved.lr;
    state.rng_seed = cfg_resolved.seed;
    state.optimizer = cfg_resolved.optimizer == "sgd" ? 1 : 0;
    state.config = serialize_train_config(cfg_resolved);

    const double disc_lr = cfg_resolved.disc_lr >= 0 ? cfg_resolved.disc_lr : cfg_resolved.lr;
    const real inv_batch = real(1) / static_cast<real>(cfg_resolved.batch);
    int collapse_streak = 0;

    for (int step = 0; step < cfg_resolved.steps; ++step) {
        // assemble the minibatch (sampling with replacement)
        std::vector<FrameTriplet> batch;
        for (int bi = 0; bi < cfg_resolved.batch; ++bi) {
            const FrameTriplet& t = data[static_cast<size_t>(rng.below(data.size()))];
            batch.push_back(cfg_resolved.crop > 0 ? random_crop(t, cfg_resolved.crop, rng) : t);
        }

        try {
            // --- discriminator update ---------------------------------------
            if (adversarial) {
                disc_params.set_requires_grad(true);
                model.gen_params.set_requires_grad(false);
                model.pred_params.set_requires_grad(false);
                double dloss_value = 0;
                for (const auto& t : batch) {
                    Tensor generated;
                    {
                        // detached generator sample
                        Tensor ext;
                        const Tensor* flow_ptr = nullptr;
                        if (cfg_resolved.flow == "external") {
                            ext = flow_to_tensor(t.flow_1_to_2);
                            flow_ptr = &ext;
                        } else if (cfg_resolved.flow == "implicit") {
                            ext = flow_predictor_forward(model.pred_spec, model.pred_params,
                                                         t.first, t.second);
                            flow_ptr = &ext;
                        }
                        generated = cfg_resolved.flow == "none"
                                        ? generator_forward(model.gen_spec, model.gen_params,
                                                            t.first, t.second)
                                        : generator_forward(model.gen_spec, model.gen_params,
                                                            t.first, t.second, flow_ptr);
                    }
                    Tape tape;
                    Tensor p_real = discriminator_forward(disc_spec, disc_params, t.middle_truth,
                                                          &t.first, &t.second);
                    Tensor p_gen = discriminator_forward(disc_spec, disc_params, generated,
                                                         &t.first, &t.second);
                    // -log(1 - p_real + eps) - log(p_gen + eps)
                    Tensor loss = add(detail::adversarial_term(p_real),
                                      scale(fi::log(add_scalar(p_gen, real(kProbEps))), -1));
                    dloss_value += loss.item();
                    tape.backward(scale(loss, inv_batch));
                }
                state.aux_step += 1;
                sgd_adam_update(disc_params, state, state.aux_step, disc_lr);
                disc_params.zero_grads();
                dloss_value /= cfg_resolved.batch;
                if (dloss_value < 1e-3) {
                    if (++collapse_streak == 100 && log)
                        (*log) << "# discriminator loss below 1e-3 for 100 consecutive steps "
                                  "(possible mode collapse) at step "
                               << state.step << "\n";
                } else {
                    collapse_streak = 0;
                }
            }

            // --- generator update --------------------------------------------
            model.gen_params.set_requires_grad(true);
            model.pred_params.set_requires_grad(true);
            if (adversarial) disc_params.set_requires_grad(false);

            StepLog sl;
            sl.n = state.step;
            sl.alpha = adversarial ? alpha_schedule(state.gamma, state.step) : 1.0;
            for (const auto& t : batch) {
                Tape tape;
                Tensor ext;
                const Tensor* flow_ptr = nullptr;
                if (cfg_resolved.flow == "external") {
                    ext = flow_to_tensor(t.flow_1_to_2);
                    flow_ptr = &ext;
                } else if (cfg_resolved.flow == "implicit") {
                    ext = flow_predictor_forward(model.pred_spec, model.pred_params, t.first,
                                                 t.second);
                    flow_ptr = &ext;
                }
                Tensor out = cfg_resolved.flow == "none"
                                 ? generator_forward(model.gen_spec, model.gen_params, t.first,
                                                     t.second)
                                 : generator_forward(model.gen_spec, model.gen_params, t.first,
                                                     t.second, flow_ptr);
                Tensor pixel = mse_loss(out, t.middle_truth);
                Tensor total;
                if (adversarial) {
                    Tensor p_gen =
                        discriminator_forward(disc_spec, disc_params, out, &t.first, &t.second);
                    Tensor adv = detail::adversarial_term(p_gen);
                    total = add(scale(pixel, static_cast<real>(sl.alpha)), adv);
                    sl.adv_term += adv.item();
                } else {
                    total = pixel;
                }
                sl.mse_term += pixel.item();
                sl.total += total.item();
                tape.backward(scale(total, inv_batch));
            }
            sl.mse_term /= cfg_resolved.batch;
            sl.adv_term /= cfg_resolved.batch;
            sl.total /= cfg_resolved.batch;

            state.step += 1;
            sgd_adam_update(model.gen_params, state, state.step);
            model.gen_params.zero_grads();
            if (cfg_resolved.flow == "implicit") {
                sgd_adam_update(model.pred_params, state, state.step);
                model.pred_params.zero_grads();
            }
            detail::write_log_line(log, sl);
            result.logs.push_back(sl);
        } catch (const RuntimeError& e) {
            throw RuntimeError("training diverged at step " + std::to_string(state.step) + ": " +
                               e.what());
        }
    }

    if (!cfg_resolved.checkpoint.empty()) {
        ParamStore merged;
        merged.absorb("gen.", model.gen_params);
        if (cfg_resolved.flow == "implicit") merged.absorb("pred.", model.pred_params);
        if (adversarial) merged.absorb("disc.", disc_params);
        checkpoint_save(cfg_resolved.checkpoint, merged, state);
    }
    return result;
}

/// Pixel-loss-only regime.
inline TrainResult train_mse(const std::vector<FrameTriplet>& data, TrainConfig cfg,
                             std::ostream* log = nullptr) {
    cfg.mode = "mse";
    return train_run(data, cfg, log);
}

/// Generator/discriminator alternation with the alpha-scheduled pixel term.
inline TrainResult train_adversarial(const std::vector<FrameTriplet>& data, TrainConfig cfg,
                                     std::ostream* log = nullptr) {
    cfg.mode = "adversarial";
    return train_run(data, cfg, log);
}

/// Joint training of the flow predictor and the flow-prior generator: the
/// generator loss reaches the predictor through the displacement layer's
/// flow gradient; both parameter sets update every step. No flow files are
/// needed.
inline TrainResult train_joint_implicit_flow(const std::vector<FrameTriplet>& data,
                                             TrainConfig cfg, std::ostream* log = nullptr) {
    cfg.flow = "implicit";
    return train_run(data, cfg, log);
}

}  // namespace fi
