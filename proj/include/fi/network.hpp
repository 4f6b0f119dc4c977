#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "fi/layers.hpp"

namespace fi {

// ---------------------------------------------------------------------------
// Declarative layer graphs. A NetworkSpec is an ordered list of layer
// descriptors split into an encoder (run once per input branch; branches
// share parameters by construction) and a decoder, plus skip pairs that sum
// equal-resolution encoder features into decoder outputs.
// ---------------------------------------------------------------------------

enum class LayerKind { Conv, DispConv, TConv, MaxPool, Dense };
enum class Act { None, Relu, Sigmoid, Tanh };

struct LayerDesc {
    LayerKind kind = LayerKind::Conv;
    int in_ch = 0, out_ch = 0;
    int kernel = 3, stride = 1, padding = 1;
    Act act = Act::None;
    std::string param;  // parameter base name; empty for MaxPool
};

/// Name -> tensor map of learnable parameters with deterministic iteration
/// order. Parameter sharing is sharing of names: a name is stored once and
/// every layer bound to it sees the same storage.
class ParamStore {
public:
    Tensor& add(const std::string& name, Tensor t) {
        detail::require(!params_.count(name), "duplicate parameter name: " + name);
        return params_[name] = std::move(t);
    }

    Tensor& at(const std::string& name) {
        auto it = params_.find(name);
        detail::require(it != params_.end(), "unknown parameter: " + name);
        return it->second;
    }
    const Tensor& at(const std::string& name) const {
        auto it = params_.find(name);
        detail::require(it != params_.end(), "unknown parameter: " + name);
        return it->second;
    }

    bool has(const std::string& name) const { return params_.count(name) != 0; }
    size_t size() const { return params_.size(); }

    long long total_elements() const {
        long long n = 0;
        for (const auto& [k, v] : params_) n += v.size();
        return n;
    }

    void set_requires_grad(bool on) {
        for (auto& [k, v] : params_) v.set_requires_grad(on);
    }
    void zero_grads() {
        for (auto& [k, v] : params_) v.zero_grad();
    }

    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }

    /// Shallow merge under a name prefix: the merged store shares payloads,
    /// so updates through either store are visible in both.
    void absorb(const std::string& prefix, const ParamStore& other) {
        for (const auto& [k, v] : other.params_) add(prefix + k, v);
    }

private:
    std::map<std::string, Tensor> params_;
};

struct NetworkSpec {
    std::vector<LayerDesc> encoder;
    std::vector<LayerDesc> decoder;
    std::vector<std::pair<int, int>> skips;  // encoder index -> decoder index
    int branches = 1;

    bool has_disp_stem() const {
        return !encoder.empty() && encoder.front().kind == LayerKind::DispConv;
    }

    /// Learnable scalar count: conv / displacement conv and transposed conv
    /// layers contribute out*in*k*k + bias, dense layers out*in + out,
    /// pooling nothing. Shared branches add nothing.
    long long param_count() const {
        long long n = 0;
        auto add = [&n](const LayerDesc& d) {
            switch (d.kind) {
                case LayerKind::Conv:
                case LayerKind::DispConv:
                    n += static_cast<long long>(d.out_ch) * d.in_ch * d.kernel * d.kernel + d.out_ch;
                    break;
                case LayerKind::TConv:
                    // weights follow the mirrored conv [in_ch, out_ch, k, k];
                    // the bias covers the layer's own out_ch outputs
                    n += static_cast<long long>(d.in_ch) * d.out_ch * d.kernel * d.kernel + d.out_ch;
                    break;
                case LayerKind::Dense:
                    n += static_cast<long long>(d.out_ch) * d.in_ch + d.out_ch;
                    break;
                case LayerKind::MaxPool:
                    break;
            }
        };
        for (const auto& d : encoder) add(d);
        for (const auto& d : decoder) add(d);
        return n;
    }
};

namespace detail {

inline Tensor apply_act(const Tensor& x, Act act) {
    switch (act) {
        case Act::None: return x;
        case Act::Relu: return relu(x);
        case Act::Sigmoid: return sigmoid(x);
        case Act::Tanh: return fi::tanh(x);
    }
    return x;
}

inline Tensor glorot_uniform(std::vector<int> shape, int fan_in, int fan_out, Rng& rng,
                             double gain = 1.0) {
    double s = gain * std::sqrt(6.0 / (fan_in + fan_out));
    return Tensor::uniform(std::move(shape), rng, static_cast<real>(-s), static_cast<real>(s));
}

inline void init_layer_params(const LayerDesc& d, ParamStore& store, Rng& rng, double gain = 1.0) {
    int k = d.kernel;
    switch (d.kind) {
        case LayerKind::Conv:
        case LayerKind::DispConv:
            store.add(d.param + ".w", glorot_uniform({d.out_ch, d.in_ch, k, k}, d.in_ch * k * k,
                                                     d.out_ch * k * k, rng, gain));
            store.add(d.param + ".b", Tensor::zeros({d.out_ch}));
            break;
        case LayerKind::TConv:
            store.add(d.param + ".w", glorot_uniform({d.in_ch, d.out_ch, k, k}, d.in_ch * k * k,
                                                     d.out_ch * k * k, rng, gain));
            store.add(d.param + ".b", Tensor::zeros({d.out_ch}));
            break;
        case LayerKind::Dense:
            store.add(d.param + ".w",
                      glorot_uniform({d.out_ch, d.in_ch}, d.in_ch, d.out_ch, rng, gain));
            store.add(d.param + ".b", Tensor::zeros({d.out_ch}));
            break;
        case LayerKind::MaxPool:
            break;
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Generator: two weight-shared encoder branches merged by elementwise sum,
// mirrored transposed-convolution decoder, residual (sum) skips from each
// encoder level into the equal-resolution decoder level, sigmoid head.
// ---------------------------------------------------------------------------

struct GeneratorConfig {
    int levels = 3;
    std::vector<int> channels = {16, 32, 64};
    int kernel = 3;
    bool flow_prior = false;  // first encoder layer is a displacement conv

    void validate() const {
        detail::require(levels >= 2, "generator needs at least 2 encoder levels");
        detail::require(static_cast<int>(channels.size()) == levels,
                        "generator channel list must have one entry per level");
        for (size_t i = 1; i < channels.size(); ++i)
            detail::require(channels[i] > channels[i - 1],
                            "generator channel list must be strictly increasing");
        detail::require(kernel % 2 == 1 && kernel >= 1, "generator kernel must be odd");
    }
};

/// Builds the interpolation generator. The first encoder level preserves
/// resolution (it is the layer the displacement conv replaces in the
/// flow-prior variant); deeper levels downsample by 2.
inline std::pair<NetworkSpec, ParamStore> build_generator(const GeneratorConfig& cfg, Rng& rng) {
    cfg.validate();
    NetworkSpec spec;
    spec.branches = 2;
    int k = cfg.kernel, pad = k / 2;
    for (int i = 0; i < cfg.levels; ++i) {
        LayerDesc d;
        d.kind = (i == 0 && cfg.flow_prior) ? LayerKind::DispConv : LayerKind::Conv;
        d.in_ch = i == 0 ? 3 : cfg.channels[static_cast<size_t>(i - 1)];
        d.out_ch = cfg.channels[static_cast<size_t>(i)];
        d.kernel = k;
        d.stride = i == 0 ? 1 : 2;
        d.padding = pad;
        d.act = Act::Relu;
        d.param = "enc" + std::to_string(i);
        spec.encoder.push_back(d);
    }
    for (int j = 0; j + 1 < cfg.levels; ++j) {
        LayerDesc d;
        d.kind = LayerKind::TConv;
        d.in_ch = cfg.channels[static_cast<size_t>(cfg.levels - 1 - j)];
        d.out_ch = cfg.channels[static_cast<size_t>(cfg.levels - 2 - j)];
        d.kernel = k;
        d.stride = 2;
        d.padding = pad;
        d.act = Act::Relu;
        d.param = "dec" + std::to_string(j);
        spec.decoder.push_back(d);
        spec.skips.emplace_back(cfg.levels - 2 - j, j);
    }
    LayerDesc head;
    head.kind = LayerKind::Conv;
    head.in_ch = cfg.channels[0];
    head.out_ch = 3;
    head.kernel = k;
    head.stride = 1;
    head.padding = pad;
    head.act = Act::Sigmoid;
    head.param = "head";
    spec.decoder.push_back(head);

    ParamStore store;
    for (const auto& d : spec.encoder) detail::init_layer_params(d, store, rng);
    for (const auto& d : spec.decoder) detail::init_layer_params(d, store, rng);
    return {std::move(spec), std::move(store)};
}

/// Same architecture with the first convolutional layer replaced by the
/// displacement layer. `mode` selects where the flow comes from at call time
/// ("external": caller passes a field; "implicit": a flow-predictor network
/// feeds it); the parameters are identical either way.
inline std::pair<NetworkSpec, ParamStore> build_generator_with_flow_prior(GeneratorConfig cfg,
                                                                          Rng& rng) {
    cfg.flow_prior = true;
    return build_generator(cfg, rng);
}

namespace detail {

inline Tensor run_layer(const LayerDesc& d, const ParamStore& store, const Tensor& x,
                        const Tensor* flow, int target_h = -1, int target_w = -1) {
    switch (d.kind) {
        case LayerKind::Conv:
            return apply_act(conv2d(x, store.at(d.param + ".w"), store.at(d.param + ".b"),
                                    d.stride, d.padding),
                             d.act);
        case LayerKind::DispConv:
            require(flow != nullptr, "flow-prior layer requires a flow field");
            return apply_act(
                disp_conv2d(x, store.at(d.param + ".w"), store.at(d.param + ".b"), *flow), d.act);
        case LayerKind::TConv:
            return apply_act(transposed_conv2d(x, store.at(d.param + ".w"),
                                               store.at(d.param + ".b"), d.stride, d.padding,
                                               target_h, target_w),
                             d.act);
        case LayerKind::MaxPool:
            return maxpool2d(x);
        case LayerKind::Dense:
            return apply_act(dense(x, store.at(d.param + ".w"), store.at(d.param + ".b")), d.act);
    }
    throw ValueError("unreachable layer kind");
}

// Encoder sweep for one branch; returns every level's activated output.
inline std::vector<Tensor> run_encoder(const NetworkSpec& spec, const ParamStore& store,
                                       const Tensor& x, const Tensor* flow) {
    std::vector<Tensor> feats;
    Tensor cur = x;
    for (const auto& d : spec.encoder) {
        cur = run_layer(d, store, cur, flow);
        feats.push_back(cur);
    }
    return feats;
}

}  // namespace detail

/// Forward pass of the generator. For flow-prior networks `flow` is the
/// [2,H,W] displacement field from the first to the second frame; branch one
/// samples along +0.5*flow, branch two along -0.5*flow (the linear-motion
/// midpoint). Plain networks must not receive a flow.
inline Tensor generator_forward(const NetworkSpec& spec, const ParamStore& store,
                                const Tensor& first, const Tensor& second,
                                const Tensor* flow = nullptr) {
    detail::require(spec.branches == 2, "generator_forward: spec is not a two-branch network");
    detail::require(first.defined() && second.defined() && first.same_shape(second),
                    "generator_forward: frames must share a shape");
    if (spec.has_disp_stem()) {
        detail::require(flow != nullptr,
                        "generator_forward: flow-prior network requires a flow field");
        detail::require(flow->rank() == 3 && flow->dim(0) == 2 && flow->dim(1) == first.dim(1) &&
                            flow->dim(2) == first.dim(2),
                        "generator_forward: flow extent must match the frames");
    } else {
        detail::require(flow == nullptr, "generator_forward: plain network takes no flow");
    }

    std::vector<Tensor> f1, f2;
    if (spec.has_disp_stem()) {
        Tensor half_fwd = scale(*flow, real(0.5));
        Tensor half_bwd = scale(*flow, real(-0.5));
        f1 = detail::run_encoder(spec, store, first, &half_fwd);
        f2 = detail::run_encoder(spec, store, second, &half_bwd);
    } else {
        f1 = detail::run_encoder(spec, store, first, nullptr);
        f2 = detail::run_encoder(spec, store, second, nullptr);
    }

    std::vector<Tensor> merged(f1.size());
    for (size_t i = 0; i < f1.size(); ++i) merged[i] = add(f1[i], f2[i]);

    Tensor cur = merged.back();
    for (size_t j = 0; j < spec.decoder.size(); ++j) {
        const auto& d = spec.decoder[j];
        const Tensor* skip = nullptr;
        for (const auto& [enc_i, dec_j] : spec.skips)
            if (dec_j == static_cast<int>(j)) skip = &merged[static_cast<size_t>(enc_i)];
        if (d.kind == LayerKind::TConv) {
            detail::require(skip != nullptr, "decoder level without a skip source");
            // target the skip's resolution, then sum it in before activation
            Tensor up = transposed_conv2d(cur, store.at(d.param + ".w"), store.at(d.param + ".b"),
                                          d.stride, d.padding, skip->dim(1), skip->dim(2));
            cur = detail::apply_act(add(up, *skip), d.act);
        } else {
            cur = detail::run_layer(d, store, cur, nullptr);
        }
    }
    return cur;
}

// ---------------------------------------------------------------------------
// Discriminator: LeNet-style conv/pool stack with dense layers and a single
// sigmoid probability output (probability that the frame was generated).
// ---------------------------------------------------------------------------

struct DiscriminatorConfig {
    int input_size = 64;
    int layers = 8;           // 8 = desk preset, 16 = full-scale preset
    bool conditioned = false; // when set, also sees the two outer frames

    void validate() const {
        detail::require(layers == 8 || layers == 16, "discriminator presets: 8 or 16 layers");
        int pools = layers == 8 ? 3 : 4;
        detail::require(input_size % (1 << pools) == 0,
                        "discriminator input size must be divisible by " +
                            std::to_string(1 << pools));
    }
};

/// Layer sequences (counting conv, pool and dense layers):
///   8:  conv pool conv pool conv pool dense dense
///   16: (conv conv pool) x4 dense dense dense dense
inline std::pair<NetworkSpec, ParamStore> build_discriminator(const DiscriminatorConfig& cfg,
                                                              Rng& rng) {
    cfg.validate();
    NetworkSpec spec;
    spec.branches = 1;
    int in_ch = cfg.conditioned ? 9 : 3;
    int idx = 0;
    auto conv = [&](int ic, int oc) {
        LayerDesc d;
        d.kind = LayerKind::Conv;
        d.in_ch = ic;
        d.out_ch = oc;
        d.kernel = 3;
        d.stride = 1;
        d.padding = 1;
        d.act = Act::Relu;
        d.param = "d" + std::to_string(idx++);
        spec.encoder.push_back(d);
    };
    auto pool = [&]() {
        LayerDesc d;
        d.kind = LayerKind::MaxPool;
        spec.encoder.push_back(d);
    };
    auto dense_layer = [&](int in, int out, Act act) {
        LayerDesc d;
        d.kind = LayerKind::Dense;
        d.in_ch = in;
        d.out_ch = out;
        d.act = act;
        d.param = "d" + std::to_string(idx++);
        spec.encoder.push_back(d);
    };

    int s = cfg.input_size;
    if (cfg.layers == 8) {
        conv(in_ch, 8);
        pool();
        conv(8, 16);
        pool();
        conv(16, 32);
        pool();
        int flat = 32 * (s / 8) * (s / 8);
        dense_layer(flat, 64, Act::Relu);
        dense_layer(64, 1, Act::Sigmoid);
    } else {
        conv(in_ch, 8);
        conv(8, 8);
        pool();
        conv(8, 16);
        conv(16, 16);
        pool();
        conv(16, 32);
        conv(32, 32);
        pool();
        conv(32, 64);
        conv(64, 64);
        pool();
        int flat = 64 * (s / 16) * (s / 16);
        dense_layer(flat, 128, Act::Relu);
        dense_layer(128, 64, Act::Relu);
        dense_layer(64, 16, Act::Relu);
        dense_layer(16, 1, Act::Sigmoid);
    }

    ParamStore store;
    for (const auto& d : spec.encoder) detail::init_layer_params(d, store, rng);
    return {std::move(spec), std::move(store)};
}

/// Probability in (0,1) that `img` is a generated frame. Conditioned
/// discriminators take the outer frames as additional channels.
inline Tensor discriminator_forward(const NetworkSpec& spec, const ParamStore& store,
                                    const Tensor& img, const Tensor* first = nullptr,
                                    const Tensor* second = nullptr) {
    detail::require(spec.branches == 1 && !spec.encoder.empty() &&
                        spec.encoder.back().kind == LayerKind::Dense,
                    "discriminator_forward: not a discriminator spec");
    Tensor cur = img;
    if (spec.encoder.front().in_ch == 9) {
        detail::require(first && second, "conditioned discriminator needs the outer frames");
        cur = concat_channels(concat_channels(img, *first), *second);
    }
    detail::require(cur.dim(0) == spec.encoder.front().in_ch,
                    "discriminator_forward: channel mismatch");
    for (const auto& d : spec.encoder) cur = detail::run_layer(d, store, cur, nullptr);
    return cur;  // [1]
}

// ---------------------------------------------------------------------------
// Flow predictor: encoder-decoder over the channel-concatenated frame pair,
// linear two-channel output (dx, dy) at input resolution.
// ---------------------------------------------------------------------------

struct FlowPredictorConfig {
    int levels = 3;
    std::vector<int> channels = {16, 32, 64};
    int kernel = 3;

    void validate() const {
        detail::require(levels >= 2, "flow predictor needs at least 2 levels");
        detail::require(static_cast<int>(channels.size()) == levels,
                        "flow predictor channel list must have one entry per level");
    }
};

inline std::pair<NetworkSpec, ParamStore> build_flow_predictor(const FlowPredictorConfig& cfg,
                                                               Rng& rng) {
    cfg.validate();
    NetworkSpec spec;
    spec.branches = 1;
    int k = cfg.kernel, pad = k / 2;
    for (int i = 0; i < cfg.levels; ++i) {
        LayerDesc d;
        d.kind = LayerKind::Conv;
        d.in_ch = i == 0 ? 6 : cfg.channels[static_cast<size_t>(i - 1)];
        d.out_ch = cfg.channels[static_cast<size_t>(i)];
        d.kernel = k;
        d.stride = i == 0 ? 1 : 2;
        d.padding = pad;
        d.act = Act::Relu;
        d.param = "fenc" + std::to_string(i);
        spec.encoder.push_back(d);
    }
    for (int j = 0; j + 1 < cfg.levels; ++j) {
        LayerDesc d;
        d.kind = LayerKind::TConv;
        d.in_ch = cfg.channels[static_cast<size_t>(cfg.levels - 1 - j)];
        d.out_ch = cfg.channels[static_cast<size_t>(cfg.levels - 2 - j)];
        d.kernel = k;
        d.stride = 2;
        d.padding = pad;
        d.act = Act::Relu;
        d.param = "fdec" + std::to_string(j);
        spec.decoder.push_back(d);
        spec.skips.emplace_back(cfg.levels - 2 - j, j);
    }
    LayerDesc head;
    head.kind = LayerKind::Conv;
    head.in_ch = cfg.channels[0];
    head.out_ch = 2;
    head.kernel = k;
    head.stride = 1;
    head.padding = pad;
    head.act = Act::None;  // displacements are unbounded
    head.param = "fhead";
    spec.decoder.push_back(head);

    ParamStore store;
    for (const auto& d : spec.encoder) detail::init_layer_params(d, store, rng);
    for (const auto& d : spec.decoder)
        detail::init_layer_params(d, store, rng, d.param == "fhead" ? 0.1 : 1.0);
    return {std::move(spec), std::move(store)};
}

/// Predicted [2,H,W] flow from the first to the second frame.
inline Tensor flow_predictor_forward(const NetworkSpec& spec, const ParamStore& store,
                                     const Tensor& first, const Tensor& second) {
    detail::require(spec.branches == 1 && !spec.encoder.empty() && spec.encoder.front().in_ch == 6,
                    "flow_predictor_forward: not a flow-predictor spec");
    detail::require(first.same_shape(second), "flow_predictor_forward: frame shape mismatch");
    Tensor cur = concat_channels(first, second);
    std::vector<Tensor> feats;
    for (const auto& d : spec.encoder) {
        cur = detail::run_layer(d, store, cur, nullptr);
        feats.push_back(cur);
    }
    for (size_t j = 0; j < spec.decoder.size(); ++j) {
        const auto& d = spec.decoder[j];
        const Tensor* skip = nullptr;
        for (const auto& [enc_i, dec_j] : spec.skips)
            if (dec_j == static_cast<int>(j)) skip = &feats[static_cast<size_t>(enc_i)];
        if (d.kind == LayerKind::TConv) {
            detail::require(skip != nullptr, "decoder level without a skip source");
            Tensor up = transposed_conv2d(cur, store.at(d.param + ".w"), store.at(d.param + ".b"),
                                          d.stride, d.padding, skip->dim(1), skip->dim(2));
            cur = detail::apply_act(add(up, *skip), d.act);
        } else {
            cur = detail::run_layer(d, store, cur, nullptr);
        }
    }
    return cur;
}

// ---------------------------------------------------------------------------
// Checkpoints. Binary layout, little-endian:
//   magic "FICK", u32 format version,
//   train-state block: u64 step, u64 aux_step, f64 gamma, f64 learning_rate,
//     u64 rng_seed, u32 optimizer kind, config string, u32 moment-pair count,
//     then per pair (name, m tensor, v tensor),
//   u32 parameter count, then per parameter (name, tensor record).
// Tensors use the "FITN" serialization, so round trips are bit-exact.
// ---------------------------------------------------------------------------

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Optimizer state and schedule position. `step` counts generator updates,
/// `aux_step` discriminator updates (each drives its own Adam bias
/// correction).
struct TrainState {
    std::uint64_t step = 0;
    std::uint64_t aux_step = 0;
    double gamma = 0.001;
    double learning_rate = 1e-3;
    std::uint64_t rng_seed = 1;
    std::uint32_t optimizer = 0;  // 0 = adam, 1 = sgd
    std::string config;           // run configuration (key-value text)
    std::map<std::string, std::pair<Tensor, Tensor>> moments;
};

inline void checkpoint_save(const std::string& path, const ParamStore& store,
                            const TrainState& state) {
    std::ofstream os(path, std::ios::binary);
    detail::require_rt(os.good(), "cannot open checkpoint for writing: " + path);
    os.write("FICK", 4);
    io::write_u32(os, kCheckpointVersion);
    io::write_u64(os, state.step);
    io::write_u64(os, state.aux_step);
    io::write_f64(os, state.gamma);
    io::write_f64(os, state.learning_rate);
    io::write_u64(os, state.rng_seed);
    io::write_u32(os, state.optimizer);
    io::write_string(os, state.config);
    io::write_u32(os, static_cast<std::uint32_t>(state.moments.size()));
    for (const auto& [name, mv] : state.moments) {
        io::write_string(os, name);
        mv.first.serialize(os);
        mv.second.serialize(os);
    }
    io::write_u32(os, static_cast<std::uint32_t>(store.size()));
    for (const auto& [name, t] : store) {
        io::write_string(os, name);
        t.serialize(os);
    }
    detail::require_rt(os.good(), "checkpoint write failed: " + path);
}

/// Reads the header and train state without touching parameters; used to
/// recover the stored run configuration before the stores exist.
inline TrainState checkpoint_peek(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    detail::require_rt(is.good(), "cannot open checkpoint: " + path);
    char magic[4];
    is.read(magic, 4);
    detail::require_rt(is.good() && std::memcmp(magic, "FICK", 4) == 0,
                       "bad checkpoint magic (expected FICK)");
    std::uint32_t version = io::read_u32(is);
    detail::require_rt(version == kCheckpointVersion,
                       "checkpoint format version " + std::to_string(version) + " unsupported");
    TrainState st;
    st.step = io::read_u64(is);
    st.aux_step = io::read_u64(is);
    st.gamma = io::read_f64(is);
    st.learning_rate = io::read_f64(is);
    st.rng_seed = io::read_u64(is);
    st.optimizer = io::read_u32(is);
    st.config = io::read_string(is);
    std::uint32_t n_moments = io::read_u32(is);
    for (std::uint32_t i = 0; i < n_moments; ++i) {
        std::string name = io::read_string(is);
        Tensor m = Tensor::deserialize(is);
        Tensor v = Tensor::deserialize(is);
        st.moments.emplace(name, std::make_pair(std::move(m), std::move(v)));
    }
    return st;
}

/// Loads a checkpoint into an existing store. The name sets must agree: a
/// missing or extra parameter is an error naming the offender.
inline TrainState checkpoint_load(const std::string& path, ParamStore& store) {
    std::ifstream is(path, std::ios::binary);
    detail::require_rt(is.good(), "cannot open checkpoint: " + path);
    char magic[4];
    is.read(magic, 4);
    detail::require_rt(is.good() && std::memcmp(magic, "FICK", 4) == 0,
                       "bad checkpoint magic (expected FICK)");
    std::uint32_t version = io::read_u32(is);
    detail::require_rt(version == kCheckpointVersion,
                       "checkpoint format version " + std::to_string(version) + " unsupported");
    TrainState st;
    st.step = io::read_u64(is);
    st.aux_step = io::read_u64(is);
    st.gamma = io::read_f64(is);
    st.learning_rate = io::read_f64(is);
    st.rng_seed = io::read_u64(is);
    st.optimizer = io::read_u32(is);
    st.config = io::read_string(is);
    std::uint32_t n_moments = io::read_u32(is);
    for (std::uint32_t i = 0; i < n_moments; ++i) {
        std::string name = io::read_string(is);
        Tensor m = Tensor::deserialize(is);
        Tensor v = Tensor::deserialize(is);
        st.moments.emplace(name, std::make_pair(std::move(m), std::move(v)));
    }
    std::uint32_t n_params = io::read_u32(is);
    std::map<std::string, bool> seen;
    for (const auto& [name, t] : store) seen[name] = false;
    for (std::uint32_t i = 0; i < n_params; ++i) {
        std::string name = io::read_string(is);
        Tensor t = Tensor::deserialize(is);
        detail::require_rt(store.has(name), "checkpoint holds unknown parameter: " + name);
        Tensor& dst = store.at(name);
        detail::require_rt(dst.shape() == t.shape(), "checkpoint shape mismatch for: " + name);
        dst.assign_values(std::vector<real>(t.data(), t.data() + t.size()));
        seen[name] = true;
    }
    for (const auto& [name, loaded] : seen)
        detail::require_rt(loaded, "checkpoint is missing parameter: " + name);
    return st;
}

}  // namespace fi
