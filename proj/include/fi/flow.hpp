#pragma once

#include <fstream>
#include <vector>

#include "fi/tensor.hpp"

namespace fi {

/// Per-pixel displacement field in pixel units: pixel (x, y) in the source
/// frame moves to (x + dx(y,x), y + dy(y,x)) in the target frame.
struct FlowField {
    int width = 0, height = 0;
    std::vector<real> u, v;  // dx and dy planes, row-major

    FlowField() = default;
    FlowField(int w, int h)
        : width(w), height(h), u(static_cast<size_t>(w) * h, 0), v(static_cast<size_t>(w) * h, 0) {
        detail::require(w > 0 && h > 0, "flow field extents must be positive");
    }

    real& dx(int y, int x) { return u[static_cast<size_t>(y) * width + x]; }
    real dx(int y, int x) const { return u[static_cast<size_t>(y) * width + x]; }
    real& dy(int y, int x) { return v[static_cast<size_t>(y) * width + x]; }
    real dy(int y, int x) const { return v[static_cast<size_t>(y) * width + x]; }

    bool matches(const Tensor& image) const {
        return image.rank() == 3 && image.dim(1) == height && image.dim(2) == width;
    }
};

// ---------------------------------------------------------------------------
// Middlebury .flo interchange format: little-endian f32 magic 202021.25
// ("PIEH"), i32 width, i32 height, then height x width interleaved f32
// (u, v) pairs row-major.
// ---------------------------------------------------------------------------

inline constexpr float kFloMagic = 202021.25f;

inline void write_flo(const FlowField& f, std::ostream& os) {
    io::write_f32(os, kFloMagic);
    io::write_i32(os, f.width);
    io::write_i32(os, f.height);
    for (int y = 0; y < f.height; ++y) {
        for (int x = 0; x < f.width; ++x) {
            io::write_f32(os, static_cast<float>(f.dx(y, x)));
            io::write_f32(os, static_cast<float>(f.dy(y, x)));
        }
    }
}

inline FlowField read_flo(std::istream& is) {
    float magic = io::read_f32(is);
    detail::require_rt(magic == kFloMagic,
                       "bad .flo magic " + std::to_string(magic) + " (expected 202021.25)");
    std::int32_t w = io::read_i32(is);
    std::int32_t h = io::read_i32(is);
    detail::require_rt(w > 0 && h > 0, ".flo extents must be positive");
    detail::require_rt(w < (1 << 20) && h < (1 << 20), ".flo extents out of range");
    FlowField f(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            f.dx(y, x) = static_cast<real>(io::read_f32(is));
            f.dy(y, x) = static_cast<real>(io::read_f32(is));
        }
    }
    return f;
}

inline void save_flo(const FlowField& f, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    detail::require_rt(os.good(), "cannot open for writing: " + path);
    write_flo(f, os);
    detail::require_rt(os.good(), "write failed: " + path);
}

inline FlowField load_flo(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    detail::require_rt(is.good(), "cannot open: " + path);
    return read_flo(is);
}

// ---------------------------------------------------------------------------
// Bilinear sampling and warping
// ---------------------------------------------------------------------------

namespace kern {

/// Bilinear read of one plane at real coordinates, clamped to the image
/// rectangle first, so out-of-range coordinates reuse border pixels.
inline real sample_clamped(const real* plane, int H, int W, real y, real x) {
    y = std::min(std::max(y, real(0)), real(H - 1));
    x = std::min(std::max(x, real(0)), real(W - 1));
    int y0 = static_cast<int>(std::floor(y));
    int x0 = static_cast<int>(std::floor(x));
    int y1 = std::min(y0 + 1, H - 1);
    int x1 = std::min(x0 + 1, W - 1);
    real fy = y - static_cast<real>(y0);
    real fx = x - static_cast<real>(x0);
    real top = plane[static_cast<size_t>(y0) * W + x0] * (real(1) - fx) +
               plane[static_cast<size_t>(y0) * W + x1] * fx;
    real bot = plane[static_cast<size_t>(y1) * W + x0] * (real(1) - fx) +
               plane[static_cast<size_t>(y1) * W + x1] * fx;
    return top * (real(1) - fy) + bot * fy;
}

}  // namespace kern

/// Bilinear blend of the four neighbors of (x, y) in a CHW image, one value
/// per channel. Coordinates are clamped to [0, W-1] x [0, H-1] first.
inline std::vector<real> bilinear_sample(const Tensor& image, real x, real y) {
    detail::require(image.defined() && image.rank() == 3, "bilinear_sample: image must be CHW");
    int C = image.dim(0), H = image.dim(1), W = image.dim(2);
    std::vector<real> out(static_cast<size_t>(C));
    for (int c = 0; c < C; ++c)
        out[static_cast<size_t>(c)] =
            kern::sample_clamped(image.data() + static_cast<size_t>(c) * H * W, H, W, y, x);
    return out;
}

/// Pixelwise mean of two frames.
inline Tensor average_frames(const Tensor& a, const Tensor& b) {
    detail::require(a.same_shape(b), "average_frames: extent mismatch");
    Tensor out = Tensor::zeros(a.shape());
    for (int i = 0; i < a.size(); ++i) out.data()[i] = (a.data()[i] + b.data()[i]) / real(2);
    return out;
}

/// Symmetric midpoint reconstruction from two frames and the flow from the
/// first to the second: each output pixel gathers half a step backwards into
/// the first frame and half a step forwards into the second,
///   out(p) = 0.5 * I1(p - 0.5 F(p)) + 0.5 * I2(p + 0.5 F(p)),
/// with bilinear, border-clamped sampling. Zero flow reduces to averaging.
inline Tensor warp_middle(const Tensor& first, const Tensor& second, const FlowField& flow) {
    detail::require(first.same_shape(second), "warp_middle: frame extent mismatch");
    detail::require(flow.matches(first), "warp_middle: flow extent mismatch");
    int C = first.dim(0), H = first.dim(1), W = first.dim(2);
    Tensor out = Tensor::zeros(first.shape());
    for (int c = 0; c < C; ++c) {
        const real* p1 = first.data() + static_cast<size_t>(c) * H * W;
        const real* p2 = second.data() + static_cast<size_t>(c) * H * W;
        real* po = out.data() + static_cast<size_t>(c) * H * W;
        for (int y = 0; y < H; ++y) {
            for (int x = 0; x < W; ++x) {
                real fx = flow.dx(y, x), fy = flow.dy(y, x);
                real a = kern::sample_clamped(p1, H, W, static_cast<real>(y) - real(0.5) * fy,
                                              static_cast<real>(x) - real(0.5) * fx);
                real b = kern::sample_clamped(p2, H, W, static_cast<real>(y) + real(0.5) * fy,
                                              static_cast<real>(x) + real(0.5) * fx);
                po[static_cast<size_t>(y) * W + x] = real(0.5) * a + real(0.5) * b;
            }
        }
    }
    check_finite(out, "warp_middle");
    return out;
}

/// Composition of two consecutive flows: result(p) = F1(p) + F2(p + F1(p)),
/// sampling F2 bilinearly. Used to turn per-pair flows into the flow across
/// a frame triplet.
inline FlowField compose_flow(const FlowField& f1, const FlowField& f2) {
    detail::require(f1.width == f2.width && f1.height == f2.height,
                    "compose_flow: extent mismatch");
    FlowField out(f1.width, f1.height);
    int H = f1.height, W = f1.width;
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            real mx = static_cast<real>(x) + f1.dx(y, x);
            real my = static_cast<real>(y) + f1.dy(y, x);
            out.dx(y, x) = f1.dx(y, x) + kern::sample_clamped(f2.u.data(), H, W, my, mx);
            out.dy(y, x) = f1.dy(y, x) + kern::sample_clamped(f2.v.data(), H, W, my, mx);
        }
    }
    return out;
}

/// Flow as a [2,H,W] tensor (channel 0 = dx, channel 1 = dy), the layout the
/// displacement convolution consumes.
inline Tensor flow_to_tensor(const FlowField& f) {
    Tensor t = Tensor::zeros({2, f.height, f.width});
    std::copy(f.u.begin(), f.u.end(), t.data());
    std::copy(f.v.begin(), f.v.end(), t.data() + static_cast<size_t>(f.height) * f.width);
    return t;
}

inline FlowField tensor_to_flow(const Tensor& t) {
    detail::require(t.defined() && t.rank() == 3 && t.dim(0) == 2,
                    "tensor_to_flow: expected [2,H,W]");
    FlowField f(t.dim(2), t.dim(1));
    size_t n = static_cast<size_t>(f.width) * f.height;
    std::copy(t.data(), t.data() + n, f.u.begin());
    std::copy(t.data() + n, t.data() + 2 * n, f.v.begin());
    return f;
}

}  // namespace fi
