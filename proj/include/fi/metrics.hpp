#pragma once

#include <cmath>
#include <limits>
#include <ostream>
#include <vector>

#include "fi/tensor.hpp"

namespace fi {

/// Aggregated image-quality metrics over an evaluation stream. Values assume
/// unit dynamic range: psnr == 10*log10(1/mse) whenever mse > 0, and psnr is
/// +infinity when the mean MSE is exactly zero (the sentinel convention).
/// PSNR derives from the mean MSE, not from averaging per-image PSNRs.
struct EvalReport {
    double mse = 0;
    double psnr = 0;
    double ssim = 0;
    int count = 0;
};

/// Mean squared error over all elements (evaluation metric; distinct from the
/// sum-form training loss).
inline double mse_metric(const Tensor& a, const Tensor& b) {
    detail::require(a.same_shape(b), "mse_metric: shape mismatch");
    double acc = 0;
    for (int i = 0; i < a.size(); ++i) {
        double d = static_cast<double>(a.data()[i]) - static_cast<double>(b.data()[i]);
        acc += d * d;
    }
    return acc / static_cast<double>(a.size());
}

/// Peak signal-to-noise ratio in dB for unit peak value.
inline double psnr(double mse) {
    detail::require(mse >= 0, "psnr: mse must be non-negative");
    if (mse == 0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

namespace detail {

inline std::vector<double> gaussian_kernel(int size, double sigma) {
    std::vector<double> k(static_cast<size_t>(size));
    int half = size / 2;
    double sum = 0;
    for (int i = 0; i < size; ++i) {
        double d = i - half;
        k[static_cast<size_t>(i)] = std::exp(-d * d / (2 * sigma * sigma));
        sum += k[static_cast<size_t>(i)];
    }
    for (auto& v : k) v /= sum;
    return k;
}

// Valid-mode separable blur: output is (H - size + 1) x (W - size + 1).
inline std::vector<double> blur_valid(const std::vector<double>& img, int H, int W,
                                      const std::vector<double>& k) {
    int size = static_cast<int>(k.size());
    int OW = W - size + 1, OH = H - size + 1;
    std::vector<double> tmp(static_cast<size_t>(H) * OW);
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < OW; ++x) {
            double acc = 0;
            for (int i = 0; i < size; ++i) acc += k[static_cast<size_t>(i)] * img[static_cast<size_t>(y) * W + x + i];
            tmp[static_cast<size_t>(y) * OW + x] = acc;
        }
    }
    std::vector<double> out(static_cast<size_t>(OH) * OW);
    for (int y = 0; y < OH; ++y) {
        for (int x = 0; x < OW; ++x) {
            double acc = 0;
            for (int i = 0; i < size; ++i) acc += k[static_cast<size_t>(i)] * tmp[static_cast<size_t>(y + i) * OW + x];
            out[static_cast<size_t>(y) * OW + x] = acc;
        }
    }
    return out;
}

// Luma plane of a CHW image (grayscale passes through).
inline std::vector<double> luma_plane(const Tensor& img) {
    int C = img.dim(0), H = img.dim(1), W = img.dim(2);
    require(C == 1 || C == 3, "ssim: expected 1- or 3-channel image");
    std::vector<double> g(static_cast<size_t>(H) * W);
    if (C == 1) {
        for (int i = 0; i < H * W; ++i) g[static_cast<size_t>(i)] = static_cast<double>(img.data()[i]);
    } else {
        const real* r = img.data();
        const real* gg = img.data() + static_cast<size_t>(H) * W;
        const real* b = img.data() + 2 * static_cast<size_t>(H) * W;
        for (int i = 0; i < H * W; ++i)
            g[static_cast<size_t>(i)] = 0.299 * static_cast<double>(r[i]) +
                                        0.587 * static_cast<double>(gg[i]) +
                                        0.114 * static_cast<double>(b[i]);
    }
    return g;
}

}  // namespace detail

/// Structural similarity: 11x11 Gaussian window (sigma 1.5), K1 = 0.01,
/// K2 = 0.03, dynamic range 1, averaged over valid window positions.
/// 3-channel images are converted to luma (0.299/0.587/0.114) first.
inline double ssim(const Tensor& a, const Tensor& b) {
    detail::require(a.same_shape(b), "ssim: shape mismatch");
    detail::require(a.rank() == 3, "ssim: expected CHW image");
    constexpr int kWindow = 11;
    constexpr double kSigma = 1.5;
    constexpr double kC1 = 0.01 * 0.01;
    constexpr double kC2 = 0.03 * 0.03;
    int H = a.dim(1), W = a.dim(2);
    detail::require(H >= kWindow && W >= kWindow, "ssim: image smaller than the 11x11 window");

    std::vector<double> x = detail::luma_plane(a);
    std::vector<double> y = detail::luma_plane(b);
    size_t n = x.size();
    std::vector<double> xx(n), yy(n), xy(n);
    for (size_t i = 0; i < n; ++i) {
        xx[i] = x[i] * x[i];
        yy[i] = y[i] * y[i];
        xy[i] = x[i] * y[i];
    }
    auto k = detail::gaussian_kernel(kWindow, kSigma);
    auto mu_x = detail::blur_valid(x, H, W, k);
    auto mu_y = detail::blur_valid(y, H, W, k);
    auto m_xx = detail::blur_valid(xx, H, W, k);
    auto m_yy = detail::blur_valid(yy, H, W, k);
    auto m_xy = detail::blur_valid(xy, H, W, k);

    double acc = 0;
    for (size_t i = 0; i < mu_x.size(); ++i) {
        double mx = mu_x[i], my = mu_y[i];
        double vx = m_xx[i] - mx * mx;
        double vy = m_yy[i] - my * my;
        double cxy = m_xy[i] - mx * my;
        acc += ((2 * mx * my + kC1) * (2 * cxy + kC2)) /
               ((mx * mx + my * my + kC1) * (vx + vy + kC2));
    }
    return acc / static_cast<double>(mu_x.size());
}

/// Mean squared forward-difference magnitude. A sharpness statistic: blurry
/// reconstructions score well below their ground truth.
inline double gradient_energy(const Tensor& img) {
    detail::require(img.defined() && img.rank() == 3, "gradient_energy: expected CHW image");
    int C = img.dim(0), H = img.dim(1), W = img.dim(2);
    double acc = 0;
    long long terms = 0;
    for (int c = 0; c < C; ++c) {
        const real* p = img.data() + static_cast<size_t>(c) * H * W;
        for (int y = 0; y < H; ++y) {
            for (int x = 0; x < W; ++x) {
                if (x + 1 < W) {
                    double d = static_cast<double>(p[y * W + x + 1]) - static_cast<double>(p[y * W + x]);
                    acc += d * d;
                    ++terms;
                }
                if (y + 1 < H) {
                    double d = static_cast<double>(p[(y + 1) * W + x]) - static_cast<double>(p[y * W + x]);
                    acc += d * d;
                    ++terms;
                }
            }
        }
    }
    return acc / static_cast<double>(terms);
}

/// Per-image metrics averaged over two equal-length streams; PSNR computed
/// from the mean MSE.
inline EvalReport evaluate(const std::vector<Tensor>& predictions,
                           const std::vector<Tensor>& truths) {
    detail::require(predictions.size() == truths.size(), "evaluate: stream length mismatch");
    detail::require(!predictions.empty(), "evaluate: empty streams");
    EvalReport r;
    for (size_t i = 0; i < predictions.size(); ++i) {
        r.mse += mse_metric(predictions[i], truths[i]);
        r.ssim += ssim(predictions[i], truths[i]);
    }
    r.count = static_cast<int>(predictions.size());
    r.mse /= r.count;
    r.ssim /= r.count;
    r.psnr = psnr(r.mse);
    return r;
}

/// Tab-separated report: one table row plus a machine-readable key-value
/// block.
inline void print_report(std::ostream& os, const std::string& method, const EvalReport& r) {
    os << "method\tmse\tpsnr\tssim\tcount\n";
    os << method << "\t" << r.mse << "\t" << r.psnr << "\t" << r.ssim << "\t" << r.count << "\n";
    os << "mse " << r.mse << "\n";
    os << "psnr " << r.psnr << "\n";
    os << "ssim " << r.ssim << "\n";
    os << "count " << r.count << "\n";
}

}  // namespace fi
