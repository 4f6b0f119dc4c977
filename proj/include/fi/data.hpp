#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fi/flow.hpp"
#include "fi/tensor.hpp"

#if defined(FI_WITH_PNG)
#include <png.h>
#endif

namespace fi {

// ---------------------------------------------------------------------------
// Image I/O. Images are [3,H,W] tensors in [0,1]; 8-bit files are scaled by
// 1/255 on load. Binary PPM (P6) is handled natively; PNG goes through
// libpng when the build found it.
// ---------------------------------------------------------------------------

namespace detail {

inline std::string ppm_token(std::istream& is) {
    std::string tok;
    int c;
    while ((c = is.get()) != EOF) {
        if (c == '#') {  // comment to end of line
            while ((c = is.get()) != EOF && c != '\n') {
            }
            continue;
        }
        if (std::isspace(c)) {
            if (!tok.empty()) break;
            continue;
        }
        tok.push_back(static_cast<char>(c));
    }
    require_rt(!tok.empty(), "truncated image header");
    return tok;
}

inline Tensor image_from_rgb8(const unsigned char* rgb, int w, int h) {
    Tensor img = Tensor::zeros({3, h, w});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                img.at(c, y, x) =
                    static_cast<real>(rgb[(static_cast<size_t>(y) * w + x) * 3 + c]) / real(255);
    return img;
}

inline std::vector<unsigned char> rgb8_from_image(const Tensor& img) {
    int h = img.dim(1), w = img.dim(2);
    std::vector<unsigned char> rgb(static_cast<size_t>(w) * h * 3);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) {
                real v = img.at(c, y, x);
                v = std::min(std::max(v, real(0)), real(1));
                rgb[(static_cast<size_t>(y) * w + x) * 3 + c] =
                    static_cast<unsigned char>(std::lround(static_cast<double>(v) * 255.0));
            }
    return rgb;
}

}  // namespace detail

inline Tensor load_ppm(std::istream& is) {
    std::string magic = detail::ppm_token(is);
    detail::require_rt(magic == "P6", "unsupported PPM variant '" + magic + "' (expected P6)");
    int w = std::stoi(detail::ppm_token(is));
    int h = std::stoi(detail::ppm_token(is));
    int maxval = std::stoi(detail::ppm_token(is));
    detail::require_rt(w > 0 && h > 0, "PPM extents must be positive");
    detail::require_rt(maxval == 255, "only 8-bit PPM supported");
    std::vector<unsigned char> rgb(static_cast<size_t>(w) * h * 3);
    is.read(reinterpret_cast<char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
    detail::require_rt(is.gcount() == static_cast<std::streamsize>(rgb.size()),
                       "truncated PPM payload");
    return detail::image_from_rgb8(rgb.data(), w, h);
}

inline void save_ppm(const Tensor& img, std::ostream& os) {
    detail::require(img.defined() && img.rank() == 3 && img.dim(0) == 3,
                    "save_ppm: expected [3,H,W] image");
    auto rgb = detail::rgb8_from_image(img);
    os << "P6\n" << img.dim(2) << " " << img.dim(1) << "\n255\n";
    os.write(reinterpret_cast<const char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
}

#if defined(FI_WITH_PNG)
inline Tensor load_png(const std::string& path) {
    png_image image;
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
    detail::require_rt(png_image_begin_read_from_file(&image, path.c_str()) != 0,
                       "cannot read PNG: " + path);
    image.format = PNG_FORMAT_RGB;
    std::vector<unsigned char> rgb(PNG_IMAGE_SIZE(image));
    if (png_image_finish_read(&image, nullptr, rgb.data(), 0, nullptr) == 0) {
        std::string msg = image.message;
        png_image_free(&image);
        throw RuntimeError("PNG decode failed: " + path + ": " + msg);
    }
    Tensor out = detail::image_from_rgb8(rgb.data(), static_cast<int>(image.width),
                                         static_cast<int>(image.height));
    png_image_free(&image);
    return out;
}

inline void save_png(const Tensor& img, const std::string& path) {
    detail::require(img.defined() && img.rank() == 3 && img.dim(0) == 3,
                    "save_png: expected [3,H,W] image");
    auto rgb = detail::rgb8_from_image(img);
    png_image image;
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(img.dim(2));
    image.height = static_cast<png_uint_32>(img.dim(1));
    image.format = PNG_FORMAT_RGB;
    detail::require_rt(
        png_image_write_to_file(&image, path.c_str(), 0, rgb.data(), 0, nullptr) != 0,
        "PNG encode failed: " + path);
}
#endif

/// Loads a PPM or PNG image by sniffing the file magic.
inline Tensor load_image(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    detail::require_rt(is.good(), "cannot open image: " + path);
    char magic[2] = {0, 0};
    is.read(magic, 2);
    detail::require_rt(is.gcount() == 2, "truncated image file: " + path);
    is.seekg(0);
    if (magic[0] == 'P' && magic[1] == '6') return load_ppm(is);
    if (static_cast<unsigned char>(magic[0]) == 0x89 && magic[1] == 'P') {
#if defined(FI_WITH_PNG)
        is.close();
        return load_png(path);
#else
        throw RuntimeError("PNG support not built: " + path);
#endif
    }
    throw RuntimeError("unsupported image format: " + path);
}

/// Writes PPM or PNG depending on the file extension (.ppm default).
inline void save_image(const Tensor& img, const std::string& path) {
    auto ext = std::filesystem::path(path).extension().string();
    if (ext == ".png") {
#if defined(FI_WITH_PNG)
        save_png(img, path);
        return;
#else
        throw RuntimeError("PNG support not built: " + path);
#endif
    }
    std::ofstream os(path, std::ios::binary);
    detail::require_rt(os.good(), "cannot open for writing: " + path);
    save_ppm(img, os);
    detail::require_rt(os.good(), "write failed: " + path);
}

// ---------------------------------------------------------------------------
// Frame triplets and manifests
// ---------------------------------------------------------------------------

/// One training sample: two outer frames, the ground-truth middle, and
/// optionally the flow from the first to the second frame.
struct FrameTriplet {
    Tensor first, middle_truth, second;
    FlowField flow_1_to_2;  // width == 0 when absent

    bool has_flow() const { return flow_1_to_2.width > 0; }
};

/// Frame manifest: one path per line, ordered; blank lines separate
/// independent clips (triplets never span a clip boundary). '#' starts a
/// comment line.
struct Manifest {
    std::vector<std::vector<std::string>> clips;

    int frame_count() const {
        int n = 0;
        for (const auto& c : clips) n += static_cast<int>(c.size());
        return n;
    }
};

inline Manifest read_manifest(const std::string& path) {
    std::ifstream is(path);
    detail::require_rt(is.good(), "cannot open manifest: " + path);
    auto dir = std::filesystem::path(path).parent_path();
    Manifest m;
    std::vector<std::string> current;
    std::string line;
    while (std::getline(is, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (line.empty()) {
            if (!current.empty()) m.clips.push_back(std::move(current));
            current.clear();
            continue;
        }
        if (line[0] == '#') continue;
        std::filesystem::path p(line);
        current.push_back(p.is_absolute() ? p.string() : (dir / p).string());
    }
    if (!current.empty()) m.clips.push_back(std::move(current));
    detail::require_rt(!m.clips.empty(), "manifest is empty: " + path);
    return m;
}

/// Index of one triplet inside a clip's path list.
struct TripletPaths {
    const std::vector<std::string>* frames = nullptr;
    const std::vector<std::string>* flows = nullptr;  // per-pair .flo paths, may be null
    int base = 0;                                     // triplet = frames[base .. base+2]
};

/// Sliding-window triplet extraction over one ordered clip: frames
/// (k, k+1, k+2) for every k, giving N-2 triplets. Pure index arithmetic; no
/// files are touched.
inline std::vector<TripletPaths> triplet_index(const std::vector<std::string>& frames,
                                               const std::vector<std::string>* flows = nullptr) {
    detail::require(frames.size() >= 3, "need at least 3 frames to form a triplet, got " +
                                            std::to_string(frames.size()));
    if (flows)
        detail::require(flows->size() == frames.size() - 1,
                        "flow manifest must hold one entry per consecutive frame pair");
    std::vector<TripletPaths> out;
    out.reserve(frames.size() - 2);
    for (size_t k = 0; k + 2 < frames.size(); ++k)
        out.push_back(TripletPaths{&frames, flows, static_cast<int>(k)});
    return out;
}

inline int triplet_count(const Manifest& m) {
    int n = 0;
    for (const auto& clip : m.clips)
        n += static_cast<int>(triplet_index(clip).size());
    return n;
}

/// In-memory dataset loader. Frames are loaded once per clip and shared by
/// the overlapping triplets; per-pair flows are composed into the triplet's
/// first-to-second flow.
inline std::vector<FrameTriplet> load_triplets(const Manifest& frames,
                                               const Manifest* flows = nullptr) {
    if (flows)
        detail::require(flows->clips.size() == frames.clips.size(),
                        "flow manifest clip count differs from frame manifest");
    std::vector<FrameTriplet> out;
    for (size_t ci = 0; ci < frames.clips.size(); ++ci) {
        const auto& clip = frames.clips[ci];
        detail::require(clip.size() >= 3, "clip has fewer than 3 frames");
        std::vector<Tensor> imgs;
        imgs.reserve(clip.size());
        for (const auto& p : clip) {
            imgs.push_back(load_image(p));
            detail::require_rt(imgs.back().same_shape(imgs.front()),
                               "frame extent mismatch at " + p);
        }
        std::vector<FlowField> pair_flows;
        if (flows) {
            const auto& fclip = flows->clips[ci];
            detail::require(fclip.size() == clip.size() - 1,
                            "flow clip must hold one .flo per consecutive frame pair");
            for (const auto& p : fclip) pair_flows.push_back(load_flo(p));
        }
        for (size_t k = 0; k + 2 < clip.size(); ++k) {
            FrameTriplet t;
            t.first = imgs[k];
            t.middle_truth = imgs[k + 1];
            t.second = imgs[k + 2];
            if (flows) t.flow_1_to_2 = compose_flow(pair_flows[k], pair_flows[k + 1]);
            out.push_back(std::move(t));
        }
    }
    return out;
}

/// Deterministic shuffled split: disjoint, union complete, same seed gives
/// the same split.
inline std::pair<std::vector<FrameTriplet>, std::vector<FrameTriplet>> split_dataset(
    const std::vector<FrameTriplet>& triplets, double ratio, std::uint64_t seed) {
    detail::require(!triplets.empty(), "split_dataset: empty input");
    detail::require(ratio > 0 && ratio < 1, "split_dataset: ratio must be in (0,1)");
    std::vector<size_t> idx(triplets.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    Rng rng(seed);
    for (size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
    size_t train_n = static_cast<size_t>(std::llround(ratio * static_cast<double>(idx.size())));
    train_n = std::min(std::max<size_t>(train_n, 1), idx.size() - 1);
    std::pair<std::vector<FrameTriplet>, std::vector<FrameTriplet>> out;
    for (size_t i = 0; i < idx.size(); ++i)
        (i < train_n ? out.first : out.second).push_back(triplets[idx[i]]);
    return out;
}

/// Same random crop window applied to all three frames and the flow.
inline FrameTriplet random_crop(const FrameTriplet& t, int size, Rng& rng) {
    int H = t.first.dim(1), W = t.first.dim(2);
    detail::require(size > 0 && size <= H && size <= W, "random_crop: bad crop size");
    int y0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(H - size + 1)));
    int x0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(W - size + 1)));
    auto crop_img = [&](const Tensor& img) {
        Tensor out = Tensor::zeros({img.dim(0), size, size});
        for (int c = 0; c < img.dim(0); ++c)
            for (int y = 0; y < size; ++y)
                for (int x = 0; x < size; ++x) out.at(c, y, x) = img.at(c, y0 + y, x0 + x);
        return out;
    };
    FrameTriplet out;
    out.first = crop_img(t.first);
    out.middle_truth = crop_img(t.middle_truth);
    out.second = crop_img(t.second);
    if (t.has_flow()) {
        out.flow_1_to_2 = FlowField(size, size);
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x) {
                out.flow_1_to_2.dx(y, x) = t.flow_1_to_2.dx(y0 + y, x0 + x);
                out.flow_1_to_2.dy(y, x) = t.flow_1_to_2.dy(y0 + y, x0 + x);
            }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Synthetic moving-shape sequences with analytic ground-truth flow.
// ---------------------------------------------------------------------------

struct SynthShape {
    enum class Kind { Rect, Disk };
    Kind kind = Kind::Rect;
    double x = 0, y = 0;   // top-left corner (rect) or center (disk) at t = 0
    double w = 8, h = 8;   // rect extents; disks use w as the radius
    double vx = 0, vy = 0; // pixels per frame
    double color[3] = {1, 1, 1};
};

/// Scene description: shapes moving with constant velocity over a flat
/// background. Rendering is anti-aliased (exact pixel coverage for
/// rectangles, supersampled coverage for disks) so sub-pixel velocities
/// produce well-posed interpolation targets.
struct SynthSpec {
    int width = 64, height = 64;
    int frames = 3;
    double background[3] = {0.1, 0.1, 0.1};
    std::uint64_t seed = 1;
    std::vector<SynthShape> shapes;
};

struct SynthResult {
    std::vector<Tensor> frames;
    std::vector<FlowField> flows;  // flows[k] maps frame k to frame k+1
};

namespace detail {

// Coverage of pixel cell [px,px+1) x [py,py+1) by the shape at time t.
inline double shape_coverage(const SynthShape& s, double t, int px, int py) {
    double sx = s.x + t * s.vx;
    double sy = s.y + t * s.vy;
    if (s.kind == SynthShape::Kind::Rect) {
        double ox = std::min(sx + s.w, static_cast<double>(px + 1)) -
                    std::max(sx, static_cast<double>(px));
        double oy = std::min(sy + s.h, static_cast<double>(py + 1)) -
                    std::max(sy, static_cast<double>(py));
        return std::max(0.0, ox) * std::max(0.0, oy);
    }
    // disk: 8x8 supersampling
    double r2 = s.w * s.w;
    int inside = 0;
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j) {
            double qx = px + (j + 0.5) / 8.0 - sx;
            double qy = py + (i + 0.5) / 8.0 - sy;
            if (qx * qx + qy * qy <= r2) ++inside;
        }
    return inside / 64.0;
}

inline void shape_bounds(const SynthShape& s, double t, double& x0, double& y0, double& x1,
                         double& y1) {
    double sx = s.x + t * s.vx;
    double sy = s.y + t * s.vy;
    if (s.kind == SynthShape::Kind::Rect) {
        x0 = sx;
        y0 = sy;
        x1 = sx + s.w;
        y1 = sy + s.h;
    } else {
        x0 = sx - s.w;
        y0 = sy - s.w;
        x1 = sx + s.w;
        y1 = sy + s.w;
    }
}

}  // namespace detail

/// Renders the scene at positions p0 + t*v and emits the exact flow between
/// consecutive frames: the shape's velocity inside the shape (topmost shape
/// wins where they overlap), zero on the background.
inline SynthResult synth_sequence(const SynthSpec& spec) {
    detail::require(spec.width > 0 && spec.height > 0 && spec.frames >= 1, "bad synth spec");
    for (const auto& s : spec.shapes) {
        for (int t = 0; t < spec.frames; ++t) {
            double x0, y0, x1, y1;
            detail::shape_bounds(s, t, x0, y0, x1, y1);
            detail::require(x0 >= 0 && y0 >= 0 && x1 <= spec.width && y1 <= spec.height,
                            "shape leaves the canvas at frame " + std::to_string(t));
        }
    }
    SynthResult out;
    for (int t = 0; t < spec.frames; ++t) {
        Tensor frame = Tensor::zeros({3, spec.height, spec.width});
        for (int c = 0; c < 3; ++c)
            for (int i = 0; i < spec.height * spec.width; ++i)
                frame.data()[static_cast<size_t>(c) * spec.height * spec.width + i] =
                    static_cast<real>(spec.background[c]);
        for (const auto& s : spec.shapes) {
            double x0, y0, x1, y1;
            detail::shape_bounds(s, t, x0, y0, x1, y1);
            int px0 = std::max(0, static_cast<int>(std::floor(x0)));
            int py0 = std::max(0, static_cast<int>(std::floor(y0)));
            int px1 = std::min(spec.width - 1, static_cast<int>(std::ceil(x1)));
            int py1 = std::min(spec.height - 1, static_cast<int>(std::ceil(y1)));
            for (int py = py0; py <= py1; ++py)
                for (int px = px0; px <= px1; ++px) {
                    double cov = detail::shape_coverage(s, t, px, py);
                    if (cov <= 0) continue;
                    for (int c = 0; c < 3; ++c) {
                        real& v = frame.at(c, py, px);
                        v = static_cast<real>((1.0 - cov) * static_cast<double>(v) +
                                              cov * s.color[c]);
                    }
                }
        }
        out.frames.push_back(std::move(frame));
    }
    for (int t = 0; t + 1 < spec.frames; ++t) {
        FlowField f(spec.width, spec.height);
        for (const auto& s : spec.shapes) {  // later shapes overwrite earlier ones
            double x0, y0, x1, y1;
            detail::shape_bounds(s, t, x0, y0, x1, y1);
            int px0 = std::max(0, static_cast<int>(std::floor(x0)));
            int py0 = std::max(0, static_cast<int>(std::floor(y0)));
            int px1 = std::min(spec.width - 1, static_cast<int>(std::ceil(x1)));
            int py1 = std::min(spec.height - 1, static_cast<int>(std::ceil(y1)));
            for (int py = py0; py <= py1; ++py)
                for (int px = px0; px <= px1; ++px)
                    if (detail::shape_coverage(s, t, px, py) > 0.5) {
                        f.dx(py, px) = static_cast<real>(s.vx);
                        f.dy(py, px) = static_cast<real>(s.vy);
                    }
        }
        out.flows.push_back(std::move(f));
    }
    return out;
}

/// Random scene of mixed rectangles and disks with speeds up to `max_speed`,
/// placed so that every shape stays inside the canvas for the whole clip.
inline SynthSpec random_scene(int width, int height, int frames, int n_shapes, double max_speed,
                              Rng& rng) {
    SynthSpec spec;
    spec.width = width;
    spec.height = height;
    spec.frames = frames;
    for (int c = 0; c < 3; ++c) spec.background[c] = rng.uniform(0.05, 0.25);
    for (int si = 0; si < n_shapes; ++si) {
        SynthShape s;
        s.kind = rng.below(2) ? SynthShape::Kind::Disk : SynthShape::Kind::Rect;
        double speed = rng.uniform(0.25, max_speed);
        double angle = rng.uniform(0, 2 * M_PI);
        s.vx = speed * std::cos(angle);
        s.vy = speed * std::sin(angle);
        double travel_x = s.vx * (frames - 1);
        double travel_y = s.vy * (frames - 1);
        if (s.kind == SynthShape::Kind::Rect) {
            s.w = rng.uniform(6, std::max(7.0, width / 3.0));
            s.h = rng.uniform(6, std::max(7.0, height / 3.0));
            double lo_x = std::max(0.0, -travel_x);
            double hi_x = std::min<double>(width - s.w, width - s.w - travel_x);
            double lo_y = std::max(0.0, -travel_y);
            double hi_y = std::min<double>(height - s.h, height - s.h - travel_y);
            if (hi_x <= lo_x || hi_y <= lo_y) continue;  // too fast for the canvas, skip
            s.x = rng.uniform(lo_x, hi_x);
            s.y = rng.uniform(lo_y, hi_y);
        } else {
            s.w = rng.uniform(3, std::max(4.0, width / 6.0));  // radius
            double lo_x = std::max(s.w, s.w - travel_x);
            double hi_x = std::min<double>(width - s.w, width - s.w - travel_x);
            double lo_y = std::max(s.w, s.w - travel_y);
            double hi_y = std::min<double>(height - s.w, height - s.w - travel_y);
            if (hi_x <= lo_x || hi_y <= lo_y) continue;
            s.x = rng.uniform(lo_x, hi_x);
            s.y = rng.uniform(lo_y, hi_y);
        }
        for (int c = 0; c < 3; ++c) s.color[c] = rng.uniform(0.3, 1.0);
        spec.shapes.push_back(s);
    }
    return spec;
}

}  // namespace fi
