#pragma once

#include <algorithm>
#include <atomic>
#include <cstring>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "fi/common.hpp"

namespace fi {

class Tape;

/// Dense N-dimensional real array with optional gradient tracking.
///
/// Layout is row-major; images use channels x height x width. A Tensor is a
/// cheap handle onto shared storage: copies alias the same buffer. Values are
/// treated as immutable once an op has consumed the tensor; gradients are the
/// only mutable part.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::vector<int> shape) { return full(std::move(shape), real(0)); }

    static Tensor full(std::vector<int> shape, real value) {
        Tensor t;
        t.init_shape(std::move(shape));
        t.p_ = std::make_shared<Payload>();
        t.p_->value.assign(static_cast<size_t>(t.size_), value);
        return t;
    }

    static Tensor from(std::vector<int> shape, std::vector<real> values) {
        Tensor t;
        t.init_shape(std::move(shape));
        detail::require(static_cast<size_t>(t.size_) == values.size(),
                        "tensor value count " + std::to_string(values.size()) +
                            " does not match shape product " + std::to_string(t.size_));
        t.p_ = std::make_shared<Payload>();
        t.p_->value = std::move(values);
        return t;
    }

    static Tensor scalar(real v) { return from({1}, {v}); }

    static Tensor uniform(std::vector<int> shape, Rng& rng, real lo = -1, real hi = 1) {
        Tensor t = zeros(std::move(shape));
        for (int i = 0; i < t.size(); ++i)
            t.data()[i] = static_cast<real>(rng.uniform(static_cast<double>(lo), static_cast<double>(hi)));
        return t;
    }

    bool defined() const { return static_cast<bool>(p_); }
    const std::vector<int>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
    int size() const { return size_; }

    real* data() { return p_->value.data(); }
    const real* data() const { return p_->value.data(); }

    real item() const {
        detail::require(size_ == 1, "item() requires a scalar tensor");
        return p_->value[0];
    }

    // 3-d (c,y,x) element access, used by image code and tests.
    real& at(int c, int y, int x) {
        return p_->value[static_cast<size_t>((c * shape_[1] + y) * shape_[2] + x)];
    }
    real at(int c, int y, int x) const {
        return p_->value[static_cast<size_t>((c * shape_[1] + y) * shape_[2] + x)];
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    // --- gradient bookkeeping -------------------------------------------

    Tensor& set_requires_grad(bool on = true) {
        p_->requires_grad = on;
        return *this;
    }
    bool requires_grad() const { return p_ && p_->requires_grad; }

    bool has_grad() const { return p_ && !p_->grad.empty(); }

    real* grad() {
        ensure_grad();
        return p_->grad.data();
    }
    const real* grad() const {
        detail::require(has_grad(), "tensor has no gradient buffer");
        return p_->grad.data();
    }

    void ensure_grad() {
        if (p_->grad.empty()) p_->grad.assign(p_->value.size(), real(0));
    }

    void zero_grad() {
        if (p_ && !p_->grad.empty()) std::fill(p_->grad.begin(), p_->grad.end(), real(0));
    }

    // Detached copy of the values (fresh storage, no grad, no tape link).
    Tensor clone_detached() const {
        Tensor t;
        t.shape_ = shape_;
        t.size_ = size_;
        t.p_ = std::make_shared<Payload>();
        t.p_->value = p_->value;
        return t;
    }

    // In-place value overwrite for parameter updates. Must not be called on
    // tensors that are part of a live tape's forward pass.
    void assign_values(const std::vector<real>& v) {
        detail::require(v.size() == p_->value.size(), "assign_values: size mismatch");
        p_->value = v;
    }

    // --- serialization ----------------------------------------------------
    // Binary layout, little-endian: magic "FITN", u32 rank, u32 extents,
    // f64 payload row-major.

    void serialize(std::ostream& os) const {
        os.write("FITN", 4);
        io::write_u32(os, static_cast<std::uint32_t>(shape_.size()));
        for (int e : shape_) io::write_u32(os, static_cast<std::uint32_t>(e));
        for (real v : p_->value) io::write_f64(os, static_cast<double>(v));
    }

    static Tensor deserialize(std::istream& is) {
        char magic[4];
        is.read(magic, 4);
        detail::require_rt(is.good() && std::memcmp(magic, "FITN", 4) == 0,
                           "bad tensor magic (expected FITN)");
        std::uint32_t rank = io::read_u32(is);
        detail::require_rt(rank >= 1 && rank <= 8, "tensor rank out of range");
        std::vector<int> shape(rank);
        for (auto& e : shape) {
            std::uint32_t v = io::read_u32(is);
            detail::require_rt(v > 0 && v < (1u << 30), "tensor extent out of range");
            e = static_cast<int>(v);
        }
        Tensor t = Tensor::zeros(shape);
        for (int i = 0; i < t.size(); ++i) t.data()[i] = static_cast<real>(io::read_f64(is));
        return t;
    }

    // Node handle on a given tape, -1 when not recorded there.
    int node_id(std::uint64_t tape_epoch) const {
        return (p_ && p_->tape_epoch == tape_epoch) ? p_->node : -1;
    }

private:
    friend class Tape;

    struct Payload {
        std::vector<real> value;
        std::vector<real> grad;  // empty until first needed
        bool requires_grad = false;
        int node = -1;                 // node id on the tape identified by epoch
        std::uint64_t tape_epoch = 0;  // which tape the node id belongs to
    };

    void init_shape(std::vector<int> shape) {
        detail::require(!shape.empty(), "tensor shape must not be empty");
        long long n = 1;
        for (int e : shape) {
            detail::require(e > 0, "tensor extents must be positive");
            n *= e;
        }
        detail::require(n < (1ll << 31), "tensor too large");
        shape_ = std::move(shape);
        size_ = static_cast<int>(n);
    }

    std::vector<int> shape_;
    int size_ = 0;
    std::shared_ptr<Payload> p_;
};

/// Every op checks its output for NaN/Inf and throws instead of propagating
/// a non-finite value. Divergence detection in the trainers relies on this.
inline void check_finite(const Tensor& t, const char* op) {
    const real* d = t.data();
    for (int i = 0; i < t.size(); ++i) {
        if (!std::isfinite(static_cast<double>(d[i])))
            throw RuntimeError(std::string("non-finite value produced by op '") + op + "'");
    }
}

/// Reverse-mode tape: an ordered record of executed ops. Constructing a Tape
/// makes it the active tape for the current thread (tapes nest as a stack);
/// ops record themselves when any input is tracked. A tape lives for one
/// forward pass and is dropped after backward(), so no state leaks across
/// iterations.
class Tape {
public:
    Tape() : epoch_(next_epoch().fetch_add(1)), parent_(current_ptr()) { current_ptr() = this; }

    ~Tape() { current_ptr() = parent_; }

    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    static Tape* current() { return current_ptr(); }

    std::uint64_t epoch() const { return epoch_; }
    int size() const { return static_cast<int>(nodes_.size()); }

    const std::vector<int>& node_inputs(int id) const { return nodes_[static_cast<size_t>(id)].inputs; }
    bool node_is_leaf(int id) const { return !nodes_[static_cast<size_t>(id)].pull; }

    /// True when the tensor participates in gradient computation: either a
    /// leaf wanting gradients or an intermediate produced on this tape.
    bool tracked(const Tensor& t) const {
        return t.requires_grad() || t.node_id(epoch_) >= 0;
    }

    /// Node id for a tensor, registering it as a leaf if needed. Returns -1
    /// for constants that do not want gradients.
    int track(const Tensor& t) {
        int id = t.node_id(epoch_);
        if (id >= 0) return id;
        if (!t.requires_grad()) return -1;
        id = static_cast<int>(nodes_.size());
        nodes_.push_back(Node{{}, t.p_, nullptr});
        t.p_->node = id;
        t.p_->tape_epoch = epoch_;
        return id;
    }

    /// Record an op: output tensor plus a pull function that propagates
    /// out-grad into the inputs' grad buffers. Input ids must already exist
    /// (topological order holds by construction).
    void record(std::vector<int> inputs, const Tensor& out, std::function<void()> pull) {
        int id = static_cast<int>(nodes_.size());
        nodes_.push_back(Node{std::move(inputs), out.p_, std::move(pull)});
        out.p_->node = id;
        out.p_->tape_epoch = epoch_;
    }

    /// Reverse sweep from a scalar loss recorded on this tape. Leaf gradients
    /// accumulate across calls; intermediate gradients are reset per call.
    void backward(const Tensor& loss) {
        detail::require(loss.size() == 1, "backward: loss must be a scalar tensor");
        int start = loss.node_id(epoch_);
        detail::require(start >= 0, "backward: loss was not recorded on the active tape");
        for (auto& n : nodes_) {
            if (n.pull) {  // non-leaf: fresh gradient per sweep
                n.out->grad.assign(n.out->value.size(), real(0));
            } else if (n.out->grad.empty()) {
                n.out->grad.assign(n.out->value.size(), real(0));
            }
        }
        nodes_[static_cast<size_t>(start)].out->grad[0] += real(1);
        for (int i = start; i >= 0; --i) {
            if (nodes_[static_cast<size_t>(i)].pull) nodes_[static_cast<size_t>(i)].pull();
        }
    }

private:
    struct Node {
        std::vector<int> inputs;
        std::shared_ptr<Tensor::Payload> out;
        std::function<void()> pull;  // null for leaves
    };

    static std::atomic<std::uint64_t>& next_epoch() {
        static std::atomic<std::uint64_t> counter{1};
        return counter;
    }
    static Tape*& current_ptr() {
        thread_local Tape* current = nullptr;
        return current;
    }

    std::vector<Node> nodes_;
    std::uint64_t epoch_;
    Tape* parent_;
};

/// Free-function form of the reverse sweep; requires an active tape.
inline void backward(const Tensor& loss) {
    detail::require(Tape::current() != nullptr, "backward: no active tape");
    Tape::current()->backward(loss);
}

// ---------------------------------------------------------------------------
// Elementwise ops and reductions.
//
// Each op computes eagerly, validates finiteness, and records itself on the
// active tape when an input is tracked. Binary ops require identical shapes;
// there is no broadcasting.
// ---------------------------------------------------------------------------

namespace detail {

using GradFn = std::function<void()>;

// Record a one- or two-input op if tracking applies.
inline void maybe_record(const char* /*op*/, const Tensor& out,
                         std::initializer_list<const Tensor*> ins,
                         const std::function<void()>& pull) {
    Tape* tape = Tape::current();
    if (!tape) return;
    bool any = false;
    for (const Tensor* t : ins) any = any || tape->tracked(*t);
    if (!any) return;
    std::vector<int> ids;
    for (const Tensor* t : ins) {
        int id = tape->track(*t);
        if (id >= 0) ids.push_back(id);
    }
    tape->record(std::move(ids), out, pull);
}

inline bool wants_grad(const Tensor& t) {
    Tape* tape = Tape::current();
    return tape && tape->tracked(t);
}

}  // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) {
    detail::require(a.same_shape(b), "add: shape mismatch");
    Tensor out = Tensor::zeros(a.shape());
    for (int i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] + b.data()[i];
    check_finite(out, "add");
    bool ga = detail::wants_grad(a), gb = detail::wants_grad(b);
    detail::maybe_record("add", out, {&a, &b}, [a = a, b = b, out = out, ga, gb]() mutable {
        const real* g = out.grad();
        if (ga) {
            real* d = a.grad();
            for (int i = 0; i < a.size(); ++i) d[i] += g[i];
        }
        if (gb) {
            real* d = b.grad();
            for (int i = 0; i < b.size(); ++i) d[i] += g[i];
        }
    });
    return out;
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    detail::require(a.same_shape(b), "sub: shape mismatch");
    Tensor out = Tensor::zeros(a.shape());
    for (int i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] - b.data()[i];
    check_finite(out, "sub");
    bool ga = detail::wants_grad(a), gb = detail::wants_grad(b);
    detail::maybe_record("sub", out, {&a, &b}, [a = a, b = b, out = out, ga, gb]() mutable {
        const real* g = out.grad();
        if (ga) {
            real* d = a.grad();
            for (int i = 0; i < a.size(); ++i) d[i] += g[i];
        }
        if (gb) {
            real* d = b.grad();
            for (int i = 0; i < b.size(); ++i) d[i] -= g[i];
        }
    });
    return out;
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
    detail::require(a.same_shape(b), "mul: shape mismatch");
    Tensor out = Tensor::zeros(a.shape());
    for (int i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] * b.data()[i];
    check_finite(out, "mul");
    bool ga = detail::wants_grad(a), gb = detail::wants_grad(b);
    detail::maybe_record("mul", out, {&a, &b}, [a = a, b = b, out = out, ga, gb]() mutable {
        const real* g = out.grad();
        if (ga) {
            real* d = a.grad();
            for (int i = 0; i < a.size(); ++i) d[i] += g[i] * b.data()[i];
        }
        if (gb) {
            real* d = b.grad();
            for (int i = 0; i < b.size(); ++i) d[i] += g[i] * a.data()[i];
        }
    });
    return out;
}

inline Tensor scale(const Tensor& a, real c) {
    Tensor out = Tensor::zeros(a.shape());
    for (int i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] * c;
    check_finite(out, "scale");
    detail::maybe_record("scale", out, {&a}, [a = a, out = out, c]() mutable {
        const real* g = out.grad();
        real* d = a.grad();
        for (int i = 0; i < a.size(); ++i) d[i] += g[i] * c;
    });
    return out;
}

inline Tensor add_scalar(const Tensor& a, real c) {
    Tensor out = Tensor::zeros(a.shape());
    for (int i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] + c;
    check_finite(out, "add_scalar");
    detail::maybe_record("add_scalar", out, {&a}, [a = a, out = out]() mutable {
        const real* g = out.grad();
        real* d = a.grad();
        for (int i = 0; i < a.size(); ++i) d[i] += g[i];
    });
    return out;
}

inline Tensor relu(const Tensor& a) {
    Tensor out = Tensor::zeros(a.shape());
    for (int i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] > real(0) ? a.data()[i] : real(0);
    check_finite(out, "relu");
    detail::maybe_record("relu", out, {&a}, [a = a, out = out]() mutable {
        const real* g = out.grad();
        real* d = a.grad();
        for (int i = 0; i < a.size(); ++i)
            if (a.data()[i] > real(0)) d[i] += g[i];
    });
    return out;
}

inline Tensor tanh(const Tensor& a) {
    Tensor out = Tensor::zeros(a.shape());
    for (int i = 0; i < a.size(); ++i) out.data()[i] = std::tanh(a.data()[i]);
    check_finite(out, "tanh");
    detail::maybe_record("tanh", out, {&a}, [a = a, out = out]() mutable {
        const real* g = out.grad();
        real* d = a.grad();
        for (int i = 0; i < a.size(); ++i) {
            real t = out.data()[i];
            d[i] += g[i] * (real(1) - t * t);
        }
    });
    return out;
}

inline Tensor sigmoid(const Tensor& a) {
    Tensor out = Tensor::zeros(a.shape());
    for (int i = 0; i < a.size(); ++i) {
        real x = a.data()[i];
        out.data()[i] = x >= real(0) ? real(1) / (real(1) + std::exp(-x))
                                     : std::exp(x) / (real(1) + std::exp(x));
    }
    check_finite(out, "sigmoid");
    detail::maybe_record("sigmoid", out, {&a}, [a = a, out = out]() mutable {
        const real* g = out.grad();
        real* d = a.grad();
        for (int i = 0; i < a.size(); ++i) {
            real s = out.data()[i];
            d[i] += g[i] * s * (real(1) - s);
        }
    });
    return out;
}

inline Tensor exp(const Tensor& a) {
    Tensor out = Tensor::zeros(a.shape());
    for (int i = 0; i < a.size(); ++i) out.data()[i] = std::exp(a.data()[i]);
    check_finite(out, "exp");
    detail::maybe_record("exp", out, {&a}, [a = a, out = out]() mutable {
        const real* g = out.grad();
        real* d = a.grad();
        for (int i = 0; i < a.size(); ++i) d[i] += g[i] * out.data()[i];
    });
    return out;
}

inline Tensor log(const Tensor& a) {
    Tensor out = Tensor::zeros(a.shape());
    for (int i = 0; i < a.size(); ++i) out.data()[i] = std::log(a.data()[i]);
    check_finite(out, "log");
    detail::maybe_record("log", out, {&a}, [a = a, out = out]() mutable {
        const real* g = out.grad();
        real* d = a.grad();
        for (int i = 0; i < a.size(); ++i) d[i] += g[i] / a.data()[i];
    });
    return out;
}

inline Tensor square(const Tensor& a) {
    Tensor out = Tensor::zeros(a.shape());
    for (int i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] * a.data()[i];
    check_finite(out, "square");
    detail::maybe_record("square", out, {&a}, [a = a, out = out]() mutable {
        const real* g = out.grad();
        real* d = a.grad();
        for (int i = 0; i < a.size(); ++i) d[i] += g[i] * real(2) * a.data()[i];
    });
    return out;
}

/// Scalar sum of all elements; gradient distributes 1 to every element.
inline Tensor reduce_sum(const Tensor& a) {
    real s = 0;
    for (int i = 0; i < a.size(); ++i) s += a.data()[i];
    Tensor out = Tensor::scalar(s);
    check_finite(out, "reduce_sum");
    detail::maybe_record("reduce_sum", out, {&a}, [a = a, out = out]() mutable {
        real g = out.grad()[0];
        real* d = a.grad();
        for (int i = 0; i < a.size(); ++i) d[i] += g;
    });
    return out;
}

/// Channel-wise concatenation of two CHW tensors with equal spatial extents.
inline Tensor concat_channels(const Tensor& a, const Tensor& b) {
    detail::require(a.rank() == 3 && b.rank() == 3, "concat_channels: expected CHW tensors");
    detail::require(a.dim(1) == b.dim(1) && a.dim(2) == b.dim(2),
                    "concat_channels: spatial extents differ");
    Tensor out = Tensor::zeros({a.dim(0) + b.dim(0), a.dim(1), a.dim(2)});
    std::memcpy(out.data(), a.data(), sizeof(real) * static_cast<size_t>(a.size()));
    std::memcpy(out.data() + a.size(), b.data(), sizeof(real) * static_cast<size_t>(b.size()));
    check_finite(out, "concat_channels");
    bool ga = detail::wants_grad(a), gb = detail::wants_grad(b);
    detail::maybe_record("concat_channels", out, {&a, &b}, [a = a, b = b, out = out, ga, gb]() mutable {
        const real* g = out.grad();
        if (ga) {
            real* d = a.grad();
            for (int i = 0; i < a.size(); ++i) d[i] += g[i];
        }
        if (gb) {
            real* d = b.grad();
            for (int i = 0; i < b.size(); ++i) d[i] += g[i + a.size()];
        }
    });
    return out;
}

}  // namespace fi
