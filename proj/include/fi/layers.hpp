#pragma once

#include <cmath>
#include <memory>
#include <vector>

#include "fi/tensor.hpp"

namespace fi {

/// Parameters of a 2-d convolution. Weights are [out_ch, in_ch, k, k] with a
/// square kernel, bias is [out_ch], padding is zeros. The same parameter block
/// drives transposed convolution, which is the exact adjoint of the conv's
/// linear map (input channels out_ch, output channels in_ch, no bias).
struct ConvParams {
    Tensor weights;
    Tensor bias;
    int stride = 1;
    int padding = 0;

    int out_channels() const { return weights.dim(0); }
    int in_channels() const { return weights.dim(1); }
    int kernel() const { return weights.dim(2); }

    void validate(bool require_odd_kernel) const {
        detail::require(weights.defined() && weights.rank() == 4, "conv weights must be [oc,ic,k,k]");
        detail::require(weights.dim(2) == weights.dim(3), "conv kernel must be square");
        detail::require(bias.defined() && bias.rank() == 1 && bias.dim(0) == out_channels(),
                        "conv bias must be [out_ch]");
        detail::require(stride >= 1, "conv stride must be positive");
        detail::require(padding >= 0, "conv padding must be non-negative");
        if (require_odd_kernel)
            detail::require(kernel() % 2 == 1, "conv kernel size must be odd");
    }
};

inline int conv_out_extent(int in, int k, int stride, int padding) {
    return (in + 2 * padding - k) / stride + 1;
}

// ---------------------------------------------------------------------------
// Raw kernels. These accumulate into their destination buffers; callers zero
// or pre-fill as needed. Loop order fixes the floating-point reduction order,
// so results are deterministic. The outermost loop owns disjoint output
// planes in every kernel.
// ---------------------------------------------------------------------------

namespace kern {

// y[oc,oy,ox] += sum_{ic,ky,kx} x[ic, oy*s-p+ky, ox*s-p+kx] * w[oc,ic,ky,kx]
inline void conv_accumulate(const real* x, int C, int H, int W, const real* w, int OC, int K,
                            int s, int p, real* y, int OH, int OW) {
    for (int oc = 0; oc < OC; ++oc) {
        for (int ic = 0; ic < C; ++ic) {
            const real* xplane = x + static_cast<size_t>(ic) * H * W;
            const real* wslab = w + (static_cast<size_t>(oc) * C + ic) * K * K;
            for (int ky = 0; ky < K; ++ky) {
                int ylo_num = p - ky;
                int oy_lo = ylo_num <= 0 ? 0 : (ylo_num + s - 1) / s;
                int yhi_num = H - 1 + p - ky;
                if (yhi_num < 0) continue;
                int oy_hi = std::min(OH, yhi_num / s + 1);
                for (int kx = 0; kx < K; ++kx) {
                    real wv = wslab[ky * K + kx];
                    int xlo_num = p - kx;
                    int ox_lo = xlo_num <= 0 ? 0 : (xlo_num + s - 1) / s;
                    int xhi_num = W - 1 + p - kx;
                    if (xhi_num < 0) continue;
                    int ox_hi = std::min(OW, xhi_num / s + 1);
                    for (int oy = oy_lo; oy < oy_hi; ++oy) {
                        const real* xrow = xplane + static_cast<size_t>(oy * s - p + ky) * W;
                        real* yrow = y + (static_cast<size_t>(oc) * OH + oy) * OW;
                        int off = kx - p;
                        for (int ox = ox_lo; ox < ox_hi; ++ox) yrow[ox] += wv * xrow[ox * s + off];
                    }
                }
            }
        }
    }
}

// xg[ic, oy*s-p+ky, ox*s-p+kx] += sum_oc w[oc,ic,ky,kx] * yg[oc,oy,ox]
// (adjoint of conv_accumulate; also serves as the transposed-conv forward)
inline void conv_scatter(const real* yg, int OC, int OH, int OW, const real* w, int C, int K,
                         int s, int p, real* xg, int H, int W) {
    for (int ic = 0; ic < C; ++ic) {
        real* xplane = xg + static_cast<size_t>(ic) * H * W;
        for (int oc = 0; oc < OC; ++oc) {
            const real* wslab = w + (static_cast<size_t>(oc) * C + ic) * K * K;
            for (int ky = 0; ky < K; ++ky) {
                int ylo_num = p - ky;
                int oy_lo = ylo_num <= 0 ? 0 : (ylo_num + s - 1) / s;
                int yhi_num = H - 1 + p - ky;
                if (yhi_num < 0) continue;
                int oy_hi = std::min(OH, yhi_num / s + 1);
                for (int kx = 0; kx < K; ++kx) {
                    real wv = wslab[ky * K + kx];
                    int xlo_num = p - kx;
                    int ox_lo = xlo_num <= 0 ? 0 : (xlo_num + s - 1) / s;
                    int xhi_num = W - 1 + p - kx;
                    if (xhi_num < 0) continue;
                    int ox_hi = std::min(OW, xhi_num / s + 1);
                    for (int oy = oy_lo; oy < oy_hi; ++oy) {
                        real* xrow = xplane + static_cast<size_t>(oy * s - p + ky) * W;
                        const real* yrow = yg + (static_cast<size_t>(oc) * OH + oy) * OW;
                        int off = kx - p;
                        for (int ox = ox_lo; ox < ox_hi; ++ox) xrow[ox * s + off] += wv * yrow[ox];
                    }
                }
            }
        }
    }
}

// wg[oc,ic,ky,kx] += sum_{oy,ox} yg[oc,oy,ox] * x[ic, oy*s-p+ky, ox*s-p+kx]
inline void conv_weight_grad(const real* yg, int OC, int OH, int OW, const real* x, int C,
                             int H, int W, int K, int s, int p, real* wg) {
    for (int oc = 0; oc < OC; ++oc) {
        for (int ic = 0; ic < C; ++ic) {
            const real* xplane = x + static_cast<size_t>(ic) * H * W;
            real* wslab = wg + (static_cast<size_t>(oc) * C + ic) * K * K;
            for (int ky = 0; ky < K; ++ky) {
                int ylo_num = p - ky;
                int oy_lo = ylo_num <= 0 ? 0 : (ylo_num + s - 1) / s;
                int yhi_num = H - 1 + p - ky;
                if (yhi_num < 0) continue;
                int oy_hi = std::min(OH, yhi_num / s + 1);
                for (int kx = 0; kx < K; ++kx) {
                    int xlo_num = p - kx;
                    int ox_lo = xlo_num <= 0 ? 0 : (xlo_num + s - 1) / s;
                    int xhi_num = W - 1 + p - kx;
                    if (xhi_num < 0) continue;
                    int ox_hi = std::min(OW, xhi_num / s + 1);
                    real acc = 0;
                    int off = kx - p;
                    for (int oy = oy_lo; oy < oy_hi; ++oy) {
                        const real* xrow = xplane + static_cast<size_t>(oy * s - p + ky) * W;
                        const real* yrow = yg + (static_cast<size_t>(oc) * OH + oy) * OW;
                        for (int ox = ox_lo; ox < ox_hi; ++ox) acc += yrow[ox] * xrow[ox * s + off];
                    }
                    wslab[ky * K + kx] += acc;
                }
            }
        }
    }
}

// bg[oc] += sum_{oy,ox} yg[oc,oy,ox]
inline void conv_bias_grad(const real* yg, int OC, int OH, int OW, real* bg) {
    for (int oc = 0; oc < OC; ++oc) {
        const real* plane = yg + static_cast<size_t>(oc) * OH * OW;
        real acc = 0;
        for (int i = 0; i < OH * OW; ++i) acc += plane[i];
        bg[oc] += acc;
    }
}

}  // namespace kern

// ---------------------------------------------------------------------------
// Convolution
// ---------------------------------------------------------------------------

/// Standard cross-correlation with zero padding. Input is CHW.
inline Tensor conv2d_forward(const Tensor& input, const ConvParams& p) {
    p.validate(true);
    detail::require(input.defined() && input.rank() == 3, "conv2d: input must be CHW");
    detail::require(input.dim(0) == p.in_channels(),
                    "conv2d: input has " + std::to_string(input.dim(0)) + " channels, expected " +
                        std::to_string(p.in_channels()));
    int H = input.dim(1), W = input.dim(2), K = p.kernel();
    int OH = conv_out_extent(H, K, p.stride, p.padding);
    int OW = conv_out_extent(W, K, p.stride, p.padding);
    detail::require(OH > 0 && OW > 0, "conv2d: kernel larger than padded input");
    Tensor out = Tensor::zeros({p.out_channels(), OH, OW});
    for (int oc = 0; oc < p.out_channels(); ++oc) {
        real b = p.bias.data()[oc];
        real* plane = out.data() + static_cast<size_t>(oc) * OH * OW;
        for (int i = 0; i < OH * OW; ++i) plane[i] = b;
    }
    kern::conv_accumulate(input.data(), input.dim(0), H, W, p.weights.data(), p.out_channels(),
                          K, p.stride, p.padding, out.data(), OH, OW);
    check_finite(out, "conv2d");
    return out;
}

struct ConvGrads {
    Tensor input, weights, bias;
};

/// Exact gradients of conv2d_forward for a given upstream gradient.
inline ConvGrads conv2d_backward(const Tensor& upstream, const Tensor& input, const ConvParams& p) {
    p.validate(true);
    int H = input.dim(1), W = input.dim(2), K = p.kernel();
    int OH = conv_out_extent(H, K, p.stride, p.padding);
    int OW = conv_out_extent(W, K, p.stride, p.padding);
    detail::require(upstream.rank() == 3 && upstream.dim(0) == p.out_channels() &&
                        upstream.dim(1) == OH && upstream.dim(2) == OW,
                    "conv2d_backward: upstream shape mismatch");
    ConvGrads g;
    g.input = Tensor::zeros(input.shape());
    g.weights = Tensor::zeros(p.weights.shape());
    g.bias = Tensor::zeros(p.bias.shape());
    kern::conv_scatter(upstream.data(), p.out_channels(), OH, OW, p.weights.data(),
                       input.dim(0), K, p.stride, p.padding, g.input.data(), H, W);
    kern::conv_weight_grad(upstream.data(), p.out_channels(), OH, OW, input.data(), input.dim(0),
                           H, W, K, p.stride, p.padding, g.weights.data());
    kern::conv_bias_grad(upstream.data(), p.out_channels(), OH, OW, g.bias.data());
    return g;
}

// ---------------------------------------------------------------------------
// Transposed convolution
// ---------------------------------------------------------------------------

inline int transposed_conv_out_extent(int in, int k, int stride, int padding) {
    return (in - 1) * stride + k - 2 * padding;
}

/// Adjoint of conv2d_forward's linear map with the same parameters: for all
/// x, y it holds that dot(conv(x), y) == dot(x, transposed_conv(y)). Input
/// has p.out_channels() channels, output p.in_channels(); the conv bias plays
/// no role here (it belongs to the forward direction).
///
/// With stride > 1 several input extents map onto the same conv output
/// extent, so the preimage extent is a parameter: out_h/out_w select which
/// conv input the adjoint targets (they must satisfy conv_out_extent(out) ==
/// input extent). The default -1 picks the minimal consistent extent
/// (in-1)*stride + k - 2*padding.
inline Tensor transposed_conv2d_forward(const Tensor& input, const ConvParams& p, int out_h = -1,
                                        int out_w = -1) {
    p.validate(false);
    detail::require(input.defined() && input.rank() == 3, "transposed_conv2d: input must be CHW");
    detail::require(input.dim(0) == p.out_channels(),
                    "transposed_conv2d: input has " + std::to_string(input.dim(0)) +
                        " channels, expected " + std::to_string(p.out_channels()));
    int UH = input.dim(1), UW = input.dim(2), K = p.kernel();
    int OH = out_h > 0 ? out_h : transposed_conv_out_extent(UH, K, p.stride, p.padding);
    int OW = out_w > 0 ? out_w : transposed_conv_out_extent(UW, K, p.stride, p.padding);
    detail::require(OH > 0 && OW > 0, "transposed_conv2d: degenerate output extent");
    detail::require(conv_out_extent(OH, K, p.stride, p.padding) == UH &&
                        conv_out_extent(OW, K, p.stride, p.padding) == UW,
                    "transposed_conv2d: target extent inconsistent with input extent");
    Tensor out = Tensor::zeros({p.in_channels(), OH, OW});
    kern::conv_scatter(input.data(), p.out_channels(), UH, UW, p.weights.data(), p.in_channels(),
                       K, p.stride, p.padding, out.data(), OH, OW);
    check_finite(out, "transposed_conv2d");
    return out;
}

struct TransposedConvGrads {
    Tensor input, weights;
};

inline TransposedConvGrads transposed_conv2d_backward(const Tensor& upstream, const Tensor& input,
                                                      const ConvParams& p) {
    p.validate(false);
    int K = p.kernel();
    detail::require(upstream.rank() == 3 && upstream.dim(0) == p.in_channels(),
                    "transposed_conv2d_backward: upstream shape mismatch");
    int OH = upstream.dim(1), OW = upstream.dim(2);
    detail::require(conv_out_extent(OH, K, p.stride, p.padding) == input.dim(1) &&
                        conv_out_extent(OW, K, p.stride, p.padding) == input.dim(2),
                    "transposed_conv2d_backward: upstream extent inconsistent with input");
    TransposedConvGrads g;
    g.input = Tensor::zeros(input.shape());
    g.weights = Tensor::zeros(p.weights.shape());
    // d/d(input) of A^T u is A applied to the upstream gradient.
    kern::conv_accumulate(upstream.data(), p.in_channels(), OH, OW, p.weights.data(),
                          p.out_channels(), K, p.stride, p.padding, g.input.data(),
                          input.dim(1), input.dim(2));
    // dot(u, A_W g) is the same bilinear form as the conv weight grad with
    // the roles of input and upstream swapped.
    kern::conv_weight_grad(input.data(), p.out_channels(), input.dim(1), input.dim(2),
                           upstream.data(), p.in_channels(), OH, OW, K, p.stride, p.padding,
                           g.weights.data());
    return g;
}

// ---------------------------------------------------------------------------
// Displacement convolution: a convolution whose sampling window is recentered
// per output pixel by a displacement field. The displaced center is clamped
// to the image rectangle; taps around it read zero outside the image, exactly
// like the zero padding of conv2d, so a zero field reduces bit-for-bit to the
// regular convolution. Fractional displacements are sampled bilinearly.
// ---------------------------------------------------------------------------

/// Parameters of the displacement convolution: stride fixed to 1 and padding
/// to k/2, so the output extent equals the input extent.
struct DispConvParams {
    ConvParams conv;

    void validate() const {
        conv.validate(true);
        detail::require(conv.stride == 1, "displacement conv requires stride 1");
        detail::require(conv.padding == conv.kernel() / 2,
                        "displacement conv requires padding k/2");
    }
};

namespace kern {

// Zero-padded pixel read.
inline real read0(const real* plane, int H, int W, int y, int x) {
    return (y >= 0 && y < H && x >= 0 && x < W) ? plane[static_cast<size_t>(y) * W + x] : real(0);
}

struct DispCenter {
    int y0, x0;        // integer base of the bilinear cell
    real fy, fx;       // fractional offsets in [0,1)
    bool clamped_y, clamped_x;
};

inline DispCenter disp_center(int i, int j, real dy, real dx, int H, int W) {
    DispCenter c;
    real cy = static_cast<real>(i) + dy;
    real cx = static_cast<real>(j) + dx;
    c.clamped_y = cy < real(0) || cy > real(H - 1);
    c.clamped_x = cx < real(0) || cx > real(W - 1);
    cy = std::min(std::max(cy, real(0)), real(H - 1));
    cx = std::min(std::max(cx, real(0)), real(W - 1));
    c.y0 = static_cast<int>(std::floor(cy));
    c.x0 = static_cast<int>(std::floor(cx));
    c.fy = cy - static_cast<real>(c.y0);
    c.fx = cx - static_cast<real>(c.x0);
    return c;
}

}  // namespace kern

/// Forward displacement convolution. `flow` is [2,H,W]: channel 0 is the x
/// displacement, channel 1 the y displacement, in pixels.
inline Tensor disp_conv2d_forward(const Tensor& input, const DispConvParams& p, const Tensor& flow) {
    p.validate();
    detail::require(input.defined() && input.rank() == 3, "disp_conv2d: input must be CHW");
    detail::require(input.dim(0) == p.conv.in_channels(), "disp_conv2d: input channel mismatch");
    detail::require(flow.defined() && flow.rank() == 3 && flow.dim(0) == 2 &&
                        flow.dim(1) == input.dim(1) && flow.dim(2) == input.dim(2),
                    "disp_conv2d: flow extent must match input extent");
    int C = input.dim(0), H = input.dim(1), W = input.dim(2);
    int OC = p.conv.out_channels(), K = p.conv.kernel(), w2 = K / 2;
    Tensor out = Tensor::zeros({OC, H, W});
    const real* dx_plane = flow.data();
    const real* dy_plane = flow.data() + static_cast<size_t>(H) * W;
    const real* wts = p.conv.weights.data();
    std::vector<real> window(static_cast<size_t>(C) * K * K);

    for (int i = 0; i < H; ++i) {
        for (int j = 0; j < W; ++j) {
            size_t pix = static_cast<size_t>(i) * W + j;
            auto c = kern::disp_center(i, j, dy_plane[pix], dx_plane[pix], H, W);
            // gather the sampled window once, shared across output channels
            if (c.fy == real(0) && c.fx == real(0)) {
                for (int ic = 0; ic < C; ++ic) {
                    const real* plane = input.data() + static_cast<size_t>(ic) * H * W;
                    real* win = window.data() + static_cast<size_t>(ic) * K * K;
                    for (int ky = 0; ky < K; ++ky)
                        for (int kx = 0; kx < K; ++kx)
                            win[ky * K + kx] =
                                kern::read0(plane, H, W, c.y0 + ky - w2, c.x0 + kx - w2);
                }
            } else {
                real w00 = (real(1) - c.fy) * (real(1) - c.fx);
                real w01 = (real(1) - c.fy) * c.fx;
                real w10 = c.fy * (real(1) - c.fx);
                real w11 = c.fy * c.fx;
                for (int ic = 0; ic < C; ++ic) {
                    const real* plane = input.data() + static_cast<size_t>(ic) * H * W;
                    real* win = window.data() + static_cast<size_t>(ic) * K * K;
                    for (int ky = 0; ky < K; ++ky) {
                        int y = c.y0 + ky - w2;
                        for (int kx = 0; kx < K; ++kx) {
                            int x = c.x0 + kx - w2;
                            win[ky * K + kx] = w00 * kern::read0(plane, H, W, y, x) +
                                               w01 * kern::read0(plane, H, W, y, x + 1) +
                                               w10 * kern::read0(plane, H, W, y + 1, x) +
                                               w11 * kern::read0(plane, H, W, y + 1, x + 1);
                        }
                    }
                }
            }
            for (int oc = 0; oc < OC; ++oc) {
                real acc = p.conv.bias.data()[oc];
                const real* wslab = wts + static_cast<size_t>(oc) * C * K * K;
                for (int t = 0; t < C * K * K; ++t) acc += window[static_cast<size_t>(t)] * wslab[t];
                out.data()[(static_cast<size_t>(oc) * H + i) * W + j] = acc;
            }
        }
    }
    check_finite(out, "disp_conv2d");
    return out;
}

struct DispConvGrads {
    Tensor input, weights, bias, flow;
};

/// Exact gradients of disp_conv2d_forward, including the gradient with
/// respect to the displacement field via the bilinear sampling derivative.
/// Where the displaced center was clamped, the flow gradient is zero in the
/// clamped axis.
inline DispConvGrads disp_conv2d_backward(const Tensor& upstream, const Tensor& input,
                                          const DispConvParams& p, const Tensor& flow) {
    p.validate();
    int C = input.dim(0), H = input.dim(1), W = input.dim(2);
    int OC = p.conv.out_channels(), K = p.conv.kernel(), w2 = K / 2;
    detail::require(upstream.rank() == 3 && upstream.dim(0) == OC && upstream.dim(1) == H &&
                        upstream.dim(2) == W,
                    "disp_conv2d_backward: upstream shape mismatch");
    DispConvGrads g;
    g.input = Tensor::zeros(input.shape());
    g.weights = Tensor::zeros(p.conv.weights.shape());
    g.bias = Tensor::zeros(p.conv.bias.shape());
    g.flow = Tensor::zeros(flow.shape());

    const real* dx_plane = flow.data();
    const real* dy_plane = flow.data() + static_cast<size_t>(H) * W;
    const real* wts = p.conv.weights.data();
    std::vector<real> window(static_cast<size_t>(C) * K * K);
    std::vector<real> tap_pull(static_cast<size_t>(C) * K * K);

    for (int i = 0; i < H; ++i) {
        for (int j = 0; j < W; ++j) {
            size_t pix = static_cast<size_t>(i) * W + j;
            auto c = kern::disp_center(i, j, dy_plane[pix], dx_plane[pix], H, W);
            real w00 = (real(1) - c.fy) * (real(1) - c.fx);
            real w01 = (real(1) - c.fy) * c.fx;
            real w10 = c.fy * (real(1) - c.fx);
            real w11 = c.fy * c.fx;

            for (int ic = 0; ic < C; ++ic) {
                const real* plane = input.data() + static_cast<size_t>(ic) * H * W;
                real* win = window.data() + static_cast<size_t>(ic) * K * K;
                for (int ky = 0; ky < K; ++ky) {
                    int y = c.y0 + ky - w2;
                    for (int kx = 0; kx < K; ++kx) {
                        int x = c.x0 + kx - w2;
                        win[ky * K + kx] = w00 * kern::read0(plane, H, W, y, x) +
                                           w01 * kern::read0(plane, H, W, y, x + 1) +
                                           w10 * kern::read0(plane, H, W, y + 1, x) +
                                           w11 * kern::read0(plane, H, W, y + 1, x + 1);
                    }
                }
            }

            // upstream at this pixel, per output channel
            // bias and weight grads, and the per-tap pull for input/flow grads
            std::fill(tap_pull.begin(), tap_pull.end(), real(0));
            for (int oc = 0; oc < OC; ++oc) {
                real gv = upstream.data()[(static_cast<size_t>(oc) * H + i) * W + j];
                if (gv == real(0)) continue;
                g.bias.data()[oc] += gv;
                const real* wslab = wts + static_cast<size_t>(oc) * C * K * K;
                real* gwslab = g.weights.data() + static_cast<size_t>(oc) * C * K * K;
                for (int t = 0; t < C * K * K; ++t) {
                    gwslab[t] += gv * window[static_cast<size_t>(t)];
                    tap_pull[static_cast<size_t>(t)] += gv * wslab[t];
                }
            }

            real gdx = 0, gdy = 0;
            for (int ic = 0; ic < C; ++ic) {
                const real* plane = input.data() + static_cast<size_t>(ic) * H * W;
                real* gplane = g.input.data() + static_cast<size_t>(ic) * H * W;
                const real* pull = tap_pull.data() + static_cast<size_t>(ic) * K * K;
                for (int ky = 0; ky < K; ++ky) {
                    int y = c.y0 + ky - w2;
                    for (int kx = 0; kx < K; ++kx) {
                        int x = c.x0 + kx - w2;
                        real t = pull[ky * K + kx];
                        if (t == real(0)) continue;
                        real r00 = kern::read0(plane, H, W, y, x);
                        real r01 = kern::read0(plane, H, W, y, x + 1);
                        real r10 = kern::read0(plane, H, W, y + 1, x);
                        real r11 = kern::read0(plane, H, W, y + 1, x + 1);
                        // input gradient through the four bilinear corners
                        if (y >= 0 && y < H) {
                            if (x >= 0 && x < W) gplane[static_cast<size_t>(y) * W + x] += t * w00;
                            if (x + 1 >= 0 && x + 1 < W)
                                gplane[static_cast<size_t>(y) * W + x + 1] += t * w01;
                        }
                        if (y + 1 >= 0 && y + 1 < H) {
                            if (x >= 0 && x < W)
                                gplane[static_cast<size_t>(y + 1) * W + x] += t * w10;
                            if (x + 1 >= 0 && x + 1 < W)
                                gplane[static_cast<size_t>(y + 1) * W + x + 1] += t * w11;
                        }
                        // displacement gradient through the sampling position
                        gdx += t * ((real(1) - c.fy) * (r01 - r00) + c.fy * (r11 - r10));
                        gdy += t * ((real(1) - c.fx) * (r10 - r00) + c.fx * (r11 - r01));
                    }
                }
            }
            if (!c.clamped_x) g.flow.data()[pix] += gdx;
            if (!c.clamped_y) g.flow.data()[static_cast<size_t>(H) * W + pix] += gdy;
        }
    }
    return g;
}

// ---------------------------------------------------------------------------
// Max pooling (2x2, stride 2) and dense layers
// ---------------------------------------------------------------------------

/// 2x2 max pooling with stride 2. Extents must be even. When `argmax` is
/// given it receives the flat input index of each window maximum (first
/// maximum wins on ties), which drives the backward pass.
inline Tensor maxpool2d_forward(const Tensor& input, std::vector<int>* argmax = nullptr) {
    detail::require(input.defined() && input.rank() == 3, "maxpool2d: input must be CHW");
    detail::require(input.dim(1) % 2 == 0 && input.dim(2) % 2 == 0,
                    "maxpool2d: spatial extents must be even");
    int C = input.dim(0), H = input.dim(1), W = input.dim(2);
    int OH = H / 2, OW = W / 2;
    Tensor out = Tensor::zeros({C, OH, OW});
    if (argmax) argmax->assign(static_cast<size_t>(C) * OH * OW, 0);
    for (int c = 0; c < C; ++c) {
        const real* plane = input.data() + static_cast<size_t>(c) * H * W;
        for (int oy = 0; oy < OH; ++oy) {
            for (int ox = 0; ox < OW; ++ox) {
                int base = (2 * oy) * W + 2 * ox;
                int idx[4] = {base, base + 1, base + W, base + W + 1};
                int best = idx[0];
                real bv = plane[idx[0]];
                for (int k = 1; k < 4; ++k) {
                    if (plane[idx[k]] > bv) {
                        bv = plane[idx[k]];
                        best = idx[k];
                    }
                }
                out.data()[(static_cast<size_t>(c) * OH + oy) * OW + ox] = bv;
                if (argmax)
                    (*argmax)[(static_cast<size_t>(c) * OH + oy) * OW + ox] = c * H * W + best;
            }
        }
    }
    check_finite(out, "maxpool2d");
    return out;
}

inline Tensor maxpool2d_backward(const Tensor& upstream, const std::vector<int>& argmax,
                                 const std::vector<int>& input_shape) {
    Tensor g = Tensor::zeros(input_shape);
    detail::require(static_cast<size_t>(upstream.size()) == argmax.size(),
                    "maxpool2d_backward: upstream/argmax size mismatch");
    for (int i = 0; i < upstream.size(); ++i)
        g.data()[argmax[static_cast<size_t>(i)]] += upstream.data()[i];
    return g;
}

/// Fully connected layer: flattens the input, returns weights * x + bias.
/// weights is [out, in], bias [out].
inline Tensor dense_forward(const Tensor& input, const Tensor& weights, const Tensor& bias) {
    detail::require(weights.defined() && weights.rank() == 2, "dense: weights must be [out,in]");
    detail::require(weights.dim(1) == input.size(),
                    "dense: weights expect input of length " + std::to_string(weights.dim(1)) +
                        ", got " + std::to_string(input.size()));
    detail::require(bias.defined() && bias.rank() == 1 && bias.dim(0) == weights.dim(0),
                    "dense: bias shape mismatch");
    int O = weights.dim(0), N = weights.dim(1);
    Tensor out = Tensor::zeros({O});
    for (int o = 0; o < O; ++o) {
        const real* wrow = weights.data() + static_cast<size_t>(o) * N;
        real acc = bias.data()[o];
        for (int i = 0; i < N; ++i) acc += wrow[i] * input.data()[i];
        out.data()[o] = acc;
    }
    check_finite(out, "dense");
    return out;
}

struct DenseGrads {
    Tensor input, weights, bias;
};

inline DenseGrads dense_backward(const Tensor& upstream, const Tensor& input,
                                 const Tensor& weights) {
    int O = weights.dim(0), N = weights.dim(1);
    detail::require(upstream.size() == O, "dense_backward: upstream size mismatch");
    DenseGrads g;
    g.input = Tensor::zeros(input.shape());
    g.weights = Tensor::zeros(weights.shape());
    g.bias = Tensor::zeros({O});
    for (int o = 0; o < O; ++o) {
        real gv = upstream.data()[o];
        g.bias.data()[o] = gv;
        const real* wrow = weights.data() + static_cast<size_t>(o) * N;
        real* gwrow = g.weights.data() + static_cast<size_t>(o) * N;
        for (int i = 0; i < N; ++i) {
            g.input.data()[i] += gv * wrow[i];
            gwrow[i] += gv * input.data()[i];
        }
    }
    return g;
}

// ---------------------------------------------------------------------------
// Tape-recorded layer ops. These are what the networks call: each runs the
// forward kernel and registers a pull that adds the exact gradients into the
// tracked inputs.
// ---------------------------------------------------------------------------

namespace detail {

inline void add_into(real* dst, const Tensor& src) {
    for (int i = 0; i < src.size(); ++i) dst[i] += src.data()[i];
}

}  // namespace detail

inline Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int padding) {
    ConvParams p{w, b, stride, padding};
    Tensor out = conv2d_forward(x, p);
    bool gx = detail::wants_grad(x), gw = detail::wants_grad(w), gb = detail::wants_grad(b);
    detail::maybe_record("conv2d", out, {&x, &w, &b}, [x = x, w = w, b = b, out = out, p, gx, gw, gb]() mutable {
        int K = p.kernel(), OH = out.dim(1), OW = out.dim(2);
        if (gx)
            kern::conv_scatter(out.grad(), p.out_channels(), OH, OW, w.data(), x.dim(0), K,
                               p.stride, p.padding, x.grad(), x.dim(1), x.dim(2));
        if (gw)
            kern::conv_weight_grad(out.grad(), p.out_channels(), OH, OW, x.data(), x.dim(0),
                                   x.dim(1), x.dim(2), K, p.stride, p.padding, w.grad());
        if (gb) kern::conv_bias_grad(out.grad(), p.out_channels(), OH, OW, b.grad());
    });
    return out;
}

/// Transposed convolution as a layer: adjoint linear map plus a bias over the
/// layer's own output channels (which are the conv parameters' in-channels).
inline Tensor transposed_conv2d(const Tensor& x, const Tensor& w, const Tensor& bias_out,
                                int stride, int padding, int out_h = -1, int out_w = -1) {
    ConvParams p{w, Tensor::zeros({w.dim(0)}), stride, padding};
    Tensor out = transposed_conv2d_forward(x, p, out_h, out_w);
    detail::require(bias_out.defined() && bias_out.rank() == 1 && bias_out.dim(0) == out.dim(0),
                    "transposed_conv2d: output bias must be [in_ch of weights]");
    for (int c = 0; c < out.dim(0); ++c) {
        real* plane = out.data() + static_cast<size_t>(c) * out.dim(1) * out.dim(2);
        real bv = bias_out.data()[c];
        for (int i = 0; i < out.dim(1) * out.dim(2); ++i) plane[i] += bv;
    }
    check_finite(out, "transposed_conv2d");
    bool gx = detail::wants_grad(x), gw = detail::wants_grad(w), gb = detail::wants_grad(bias_out);
    detail::maybe_record(
        "transposed_conv2d", out, {&x, &w, &bias_out},
        [x = x, w = w, bias_out = bias_out, out = out, p, gx, gw, gb]() mutable {
            int K = p.kernel(), OH = out.dim(1), OW = out.dim(2);
            if (gx)
                kern::conv_accumulate(out.grad(), p.in_channels(), OH, OW, w.data(),
                                      p.out_channels(), K, p.stride, p.padding, x.grad(),
                                      x.dim(1), x.dim(2));
            if (gw)
                kern::conv_weight_grad(x.data(), p.out_channels(), x.dim(1), x.dim(2), out.grad(),
                                       p.in_channels(), OH, OW, K, p.stride, p.padding, w.grad());
            if (gb) kern::conv_bias_grad(out.grad(), out.dim(0), OH, OW, bias_out.grad());
        });
    return out;
}

inline Tensor disp_conv2d(const Tensor& x, const Tensor& w, const Tensor& b, const Tensor& flow) {
    DispConvParams p{ConvParams{w, b, 1, w.dim(2) / 2}};
    Tensor out = disp_conv2d_forward(x, p, flow);
    bool gx = detail::wants_grad(x), gw = detail::wants_grad(w), gb = detail::wants_grad(b),
         gf = detail::wants_grad(flow);
    detail::maybe_record("disp_conv2d", out, {&x, &w, &b, &flow},
                         [x = x, w = w, b = b, flow = flow, out = out, p, gx, gw, gb, gf]() mutable {
                             Tensor up = Tensor::from(out.shape(),
                                                      std::vector<real>(out.grad(),
                                                                        out.grad() + out.size()));
                             DispConvGrads g = disp_conv2d_backward(up, x, p, flow);
                             if (gx) detail::add_into(x.grad(), g.input);
                             if (gw) detail::add_into(w.grad(), g.weights);
                             if (gb) detail::add_into(b.grad(), g.bias);
                             if (gf) detail::add_into(flow.grad(), g.flow);
                         });
    return out;
}

inline Tensor maxpool2d(const Tensor& x) {
    auto argmax = std::make_shared<std::vector<int>>();
    Tensor out = maxpool2d_forward(x, argmax.get());
    detail::maybe_record("maxpool2d", out, {&x}, [x = x, out = out, argmax]() mutable {
        const real* g = out.grad();
        real* d = x.grad();
        for (int i = 0; i < out.size(); ++i) d[(*argmax)[static_cast<size_t>(i)]] += g[i];
    });
    return out;
}

inline Tensor dense(const Tensor& x, const Tensor& w, const Tensor& b) {
    Tensor out = dense_forward(x, w, b);
    bool gx = detail::wants_grad(x), gw = detail::wants_grad(w), gb = detail::wants_grad(b);
    detail::maybe_record("dense", out, {&x, &w, &b}, [x = x, w = w, b = b, out = out, gx, gw, gb]() mutable {
        int O = w.dim(0), N = w.dim(1);
        const real* g = out.grad();
        for (int o = 0; o < O; ++o) {
            real gv = g[o];
            if (gb) b.grad()[o] += gv;
            const real* wrow = w.data() + static_cast<size_t>(o) * N;
            for (int i = 0; i < N; ++i) {
                if (gx) x.grad()[i] += gv * wrow[i];
                if (gw) w.grad()[static_cast<size_t>(o) * N + i] += gv * x.data()[i];
            }
        }
    });
    return out;
}

}  // namespace fi
