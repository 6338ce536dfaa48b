#include "cssr/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>

namespace cssr {

Dataset gen_gaussian_2d(const Gaussian2dSpec& spec, std::vector<std::string>* warnings) {
    if (spec.means.size() < 2) throw ConfigError("gen_gaussian_2d: need at least 2 class means");
    if (spec.sigma <= 0.0) throw ConfigError("gen_gaussian_2d: sigma must be positive");
    if (spec.n_per_class < 1) throw ConfigError("gen_gaussian_2d: n_per_class must be >= 1");
    for (size_t i = 0; i < spec.means.size(); ++i) {
        for (size_t j = i + 1; j < spec.means.size(); ++j) {
            if (spec.means[i] == spec.means[j] && warnings) {
                warnings->push_back("duplicate class means at indices " + std::to_string(i) + " and " +
                                    std::to_string(j));
            }
        }
    }
    Dataset out;
    out.reserve(spec.means.size() * static_cast<size_t>(spec.n_per_class));
    Rng rng(mix_seed(spec.seed, 0x6a55ULL));
    for (size_t c = 0; c < spec.means.size(); ++c) {
        for (int i = 0; i < spec.n_per_class; ++i) {
            Tensor p({2});
            p[0] = spec.means[c][0] + spec.sigma * rng.gaussian();
            p[1] = spec.means[c][1] + spec.sigma * rng.gaussian();
            out.push_back({std::move(p), static_cast<int>(c)});
        }
    }
    return out;
}

Gaussian2dSpec four_gaussians(double sigma, int n_per_class, uint64_t seed) {
    Gaussian2dSpec s;
    s.means = {{2.0, 2.0}, {-2.0, 2.0}, {-2.0, -2.0}, {2.0, -2.0}};
    s.sigma = sigma;
    s.n_per_class = n_per_class;
    s.seed = seed;
    return s;
}

// ---- IDX ----

namespace {

uint32_t read_u32_be(std::ifstream& f, const std::string& path, int64_t& offset) {
    unsigned char b[4];
    f.read(reinterpret_cast<char*>(b), 4);
    if (f.gcount() != 4)
        throw DataError(path + ": truncated at byte offset " + std::to_string(offset));
    offset += 4;
    return (static_cast<uint32_t>(b[0]) << 24) | (static_cast<uint32_t>(b[1]) << 16) |
           (static_cast<uint32_t>(b[2]) << 8) | static_cast<uint32_t>(b[3]);
}

void write_u32_be(std::ofstream& f, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    f.write(reinterpret_cast<char*>(b), 4);
}

} // namespace

ImageSet load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream fi(images_path, std::ios::binary);
    if (!fi) throw DataError("cannot open " + images_path);
    int64_t off = 0;
    uint32_t magic = read_u32_be(fi, images_path, off);
    if (magic != 0x00000803u)
        throw DataError(images_path + ": bad image magic at byte offset 0 (got " + std::to_string(magic) + ")");
    uint32_t count = read_u32_be(fi, images_path, off);
    uint32_t rows = read_u32_be(fi, images_path, off);
    uint32_t cols = read_u32_be(fi, images_path, off);
    if (rows == 0 || cols == 0) throw DataError(images_path + ": zero image dimensions");

    ImageSet set;
    set.rows = static_cast<int>(rows);
    set.cols = static_cast<int>(cols);
    std::vector<unsigned char> buf(static_cast<size_t>(rows) * cols);
    for (uint32_t i = 0; i < count; ++i) {
        fi.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
        if (fi.gcount() != static_cast<std::streamsize>(buf.size()))
            throw DataError(images_path + ": truncated image " + std::to_string(i) + " at byte offset " +
                            std::to_string(off + fi.gcount()));
        off += static_cast<int64_t>(buf.size());
        Tensor img({static_cast<int>(rows), static_cast<int>(cols), 1});
        for (size_t j = 0; j < buf.size(); ++j) img[static_cast<int64_t>(j)] = buf[j] / 255.0;
        set.images.push_back(std::move(img));
    }

    std::ifstream fl(labels_path, std::ios::binary);
    if (!fl) throw DataError("cannot open " + labels_path);
    int64_t loff = 0;
    uint32_t lmagic = read_u32_be(fl, labels_path, loff);
    if (lmagic != 0x00000801u)
        throw DataError(labels_path + ": bad label magic at byte offset 0 (got " + std::to_string(lmagic) + ")");
    uint32_t lcount = read_u32_be(fl, labels_path, loff);
    if (lcount != count)
        throw DataError(labels_path + ": label count " + std::to_string(lcount) + " does not match image count " +
                        std::to_string(count));
    for (uint32_t i = 0; i < lcount; ++i) {
        char b;
        fl.read(&b, 1);
        if (fl.gcount() != 1)
            throw DataError(labels_path + ": truncated at byte offset " + std::to_string(loff));
        ++loff;
        set.labels.push_back(static_cast<unsigned char>(b));
    }
    return set;
}

void save_idx(const ImageSet& set, const std::string& images_path, const std::string& labels_path) {
    if (set.images.size() != set.labels.size())
        throw ConfigError("save_idx: image/label count mismatch");
    std::ofstream fi(images_path, std::ios::binary);
    if (!fi) throw DataError("cannot write " + images_path);
    write_u32_be(fi, 0x00000803u);
    write_u32_be(fi, static_cast<uint32_t>(set.images.size()));
    write_u32_be(fi, static_cast<uint32_t>(set.rows));
    write_u32_be(fi, static_cast<uint32_t>(set.cols));
    for (const Tensor& img : set.images) {
        for (int64_t j = 0; j < img.size(); ++j) {
            double v = std::clamp(img[j], 0.0, 1.0);
            auto byte = static_cast<unsigned char>(std::lround(v * 255.0));
            fi.write(reinterpret_cast<char*>(&byte), 1);
        }
    }
    std::ofstream fl(labels_path, std::ios::binary);
    if (!fl) throw DataError("cannot write " + labels_path);
    write_u32_be(fl, 0x00000801u);
    write_u32_be(fl, static_cast<uint32_t>(set.labels.size()));
    for (int label : set.labels) {
        auto byte = static_cast<unsigned char>(label);
        fl.write(reinterpret_cast<char*>(&byte), 1);
    }
}

int ImageSet::num_classes() const {
    int m = 0;
    for (int l : labels) m = std::max(m, l + 1);
    return m;
}

Dataset ImageSet::to_dataset() const {
    Dataset out;
    out.reserve(images.size());
    for (size_t i = 0; i < images.size(); ++i) out.push_back({images[i], labels[i]});
    return out;
}

// ---- splits ----

int OpenSetSplit::remap(int original) const {
    auto it = std::lower_bound(known.begin(), known.end(), original);
    if (it == known.end() || *it != original) return -1;
    return static_cast<int>(it - known.begin());
}

OpenSetSplit make_open_split(int class_count, int n_known, uint64_t trial_seed) {
    if (n_known < 1 || n_known >= class_count)
        throw ConfigError("make_open_split: n_known must be in [1, class_count), got " +
                          std::to_string(n_known) + " of " + std::to_string(class_count));
    Rng rng(trial_seed);
    std::vector<int> order = random_permutation(class_count, rng);
    OpenSetSplit split;
    split.trial_seed = trial_seed;
    split.known.assign(order.begin(), order.begin() + n_known);
    split.unknown.assign(order.begin() + n_known, order.end());
    std::sort(split.known.begin(), split.known.end());
    std::sort(split.unknown.begin(), split.unknown.end());
    return split;
}

// ---- augmentation ----

const char* augment_op_name(AugmentOp op) {
    switch (op) {
        case AugmentOp::Brightness: return "brightness";
        case AugmentOp::Contrast: return "contrast";
        case AugmentOp::Rotate: return "rotate";
        case AugmentOp::Shear: return "shear";
        case AugmentOp::Equalize: return "equalize";
    }
    return "?";
}

AugmentSpec AugmentSpec::all(uint64_t seed) {
    AugmentSpec s;
    s.enabled = {AugmentOp::Brightness, AugmentOp::Contrast, AugmentOp::Rotate, AugmentOp::Shear,
                 AugmentOp::Equalize};
    s.seed = seed;
    return s;
}

namespace {

void require_image(const Tensor& t, const char* op) {
    if (t.rank() != 3 || t.dim(2) != 1)
        throw ShapeError(std::string(op) + ": need an HxWx1 image, got " + t.shape_str());
}

Tensor clamp01(Tensor t) {
    for (int64_t i = 0; i < t.size(); ++i) t[i] = std::clamp(t[i], 0.0, 1.0);
    return t;
}

// Bilinear sample with zero fill outside bounds.
double sample_bilinear(const Tensor& img, double y, double x) {
    int h = img.dim(0), w = img.dim(1);
    int y0 = static_cast<int>(std::floor(y)), x0 = static_cast<int>(std::floor(x));
    double fy = y - y0, fx = x - x0;
    auto px = [&](int yy, int xx) -> double {
        if (yy < 0 || yy >= h || xx < 0 || xx >= w) return 0.0;
        return img.at(yy, xx, 0);
    };
    return px(y0, x0) * (1 - fy) * (1 - fx) + px(y0, x0 + 1) * (1 - fy) * fx +
           px(y0 + 1, x0) * fy * (1 - fx) + px(y0 + 1, x0 + 1) * fy * fx;
}

Tensor warp(const Tensor& img, double m00, double m01, double m10, double m11) {
    // inverse-maps output pixels through the 2x2 matrix about the center
    int h = img.dim(0), w = img.dim(1);
    double cy = (h - 1) / 2.0, cx = (w - 1) / 2.0;
    Tensor out({h, w, 1});
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double dy = y - cy, dx = x - cx;
            double sy = m00 * dy + m01 * dx + cy;
            double sx = m10 * dy + m11 * dx + cx;
            out.at(y, x, 0) = sample_bilinear(img, sy, sx);
        }
    }
    return out;
}

} // namespace

Tensor adjust_brightness(const Tensor& image, double delta) {
    require_image(image, "brightness");
    Tensor out = image;
    for (int64_t i = 0; i < out.size(); ++i) out[i] += delta;
    return clamp01(std::move(out));
}

Tensor adjust_contrast(const Tensor& image, double factor) {
    require_image(image, "contrast");
    double mean = 0.0;
    for (int64_t i = 0; i < image.size(); ++i) mean += image[i];
    mean /= static_cast<double>(image.size());
    Tensor out = image;
    for (int64_t i = 0; i < out.size(); ++i) out[i] = mean + (out[i] - mean) * factor;
    return clamp01(std::move(out));
}

Tensor rotate_image(const Tensor& image, double degrees) {
    require_image(image, "rotate");
    double rad = degrees * 3.14159265358979323846 / 180.0;
    double c = std::cos(rad), s = std::sin(rad);
    // inverse rotation matrix in (y, x) coordinates
    return clamp01(warp(image, c, -s, s, c));
}

Tensor shear_image(const Tensor& image, double factor) {
    require_image(image, "shear");
    // forward x' = x + factor*(y - cy); inverse subtracts
    return clamp01(warp(image, 1.0, 0.0, -factor, 1.0));
}

Tensor equalize_image(const Tensor& image) {
    require_image(image, "equalize");
    std::array<int64_t, 256> hist{};
    for (int64_t i = 0; i < image.size(); ++i) {
        int b = static_cast<int>(std::lround(std::clamp(image[i], 0.0, 1.0) * 255.0));
        ++hist[static_cast<size_t>(b)];
    }
    std::array<int64_t, 256> cdf{};
    int64_t acc = 0;
    int64_t cdf_min = -1;
    for (int b = 0; b < 256; ++b) {
        acc += hist[static_cast<size_t>(b)];
        cdf[static_cast<size_t>(b)] = acc;
        if (cdf_min < 0 && hist[static_cast<size_t>(b)] > 0) cdf_min = acc;
    }
    int64_t total = image.size();
    if (cdf_min < 0 || total == cdf_min) return image; // constant image
    Tensor out = image;
    for (int64_t i = 0; i < out.size(); ++i) {
        int b = static_cast<int>(std::lround(std::clamp(out[i], 0.0, 1.0) * 255.0));
        double mapped = static_cast<double>(cdf[static_cast<size_t>(b)] - cdf_min) /
                        static_cast<double>(total - cdf_min);
        out[i] = mapped;
    }
    return out;
}

Tensor augment_image(const Tensor& image, const AugmentSpec& spec, uint64_t draw_seed) {
    if (image.rank() == 1) return image; // 2-d points have no image transforms
    require_image(image, "augment");
    if (spec.max_ops < 0) throw ConfigError("augment: max_ops must be >= 0");
    if (spec.identity()) return image;

    Rng rng(mix_seed(spec.seed, draw_seed));
    int k = rng.uniform_int(spec.max_ops + 1);
    k = std::min<int>(k, static_cast<int>(spec.enabled.size()));

    // partial Fisher-Yates draw without replacement, in sampled order
    std::vector<AugmentOp> pool = spec.enabled;
    Tensor out = image;
    for (int i = 0; i < k; ++i) {
        int j = i + rng.uniform_int(static_cast<int>(pool.size()) - i);
        std::swap(pool[static_cast<size_t>(i)], pool[static_cast<size_t>(j)]);
        switch (pool[static_cast<size_t>(i)]) {
            case AugmentOp::Brightness:
                out = adjust_brightness(out, rng.uniform(spec.brightness_lo, spec.brightness_hi));
                break;
            case AugmentOp::Contrast:
                out = adjust_contrast(out, rng.uniform(spec.contrast_lo, spec.contrast_hi));
                break;
            case AugmentOp::Rotate:
                out = rotate_image(out, rng.uniform(spec.rotate_lo, spec.rotate_hi));
                break;
            case AugmentOp::Shear:
                out = shear_image(out, rng.uniform(spec.shear_lo, spec.shear_hi));
                break;
            case AugmentOp::Equalize:
                out = equalize_image(out);
                break;
        }
    }
    return out;
}

// ---- glyphs ----

namespace {

double sd_box(double py, double px, double by, double bx) {
    double qy = std::fabs(py) - by, qx = std::fabs(px) - bx;
    double ay = std::max(qy, 0.0), ax = std::max(qx, 0.0);
    return std::sqrt(ay * ay + ax * ax) + std::min(std::max(qy, qx), 0.0);
}

double sd_circle(double py, double px, double r) { return std::hypot(py, px) - r; }

double sd_equilateral_triangle(double py, double px, double r) {
    const double k = std::sqrt(3.0);
    px = std::fabs(px) - r;
    py = py + r / k;
    if (px + k * py > 0.0) {
        double nx = (px - k * py) / 2.0;
        double ny = (-k * px - py) / 2.0;
        px = nx;
        py = ny;
    }
    px -= std::clamp(px, -2.0 * r, 0.0);
    double len = std::hypot(px, py);
    return py > 0.0 ? -len : len;
}

double glyph_sdf(int cls, double py, double px, double s, double hw) {
    switch (cls) {
        case 0: return sd_circle(py, px, 0.80 * s);
        case 1: return std::fabs(sd_circle(py, px, 0.76 * s)) - hw;
        case 2: return sd_box(py, px, 0.70 * s, 0.70 * s);
        case 3: return std::fabs(sd_box(py, px, 0.72 * s, 0.72 * s)) - hw;
        case 4: return std::min(sd_box(py, px, hw, 0.85 * s), sd_box(py, px, 0.85 * s, hw));
        case 5: {
            const double r = std::sqrt(0.5);
            double ry = r * (py - px), rx = r * (py + px); // rotate 45 degrees
            return std::min(sd_box(ry, rx, hw, 0.85 * s), sd_box(ry, rx, 0.85 * s, hw));
        }
        case 6: {
            double d = 1e9;
            for (double dy : {-0.65, 0.0, 0.65}) d = std::min(d, sd_box(py - dy * s, px, 0.9 * hw, 0.82 * s));
            return d;
        }
        case 7: {
            double d = 1e9;
            for (double dx : {-0.65, 0.0, 0.65}) d = std::min(d, sd_box(py, px - dx * s, 0.82 * s, 0.9 * hw));
            return d;
        }
        case 8: return std::fabs(sd_equilateral_triangle(py, px, 0.90 * s)) - hw;
        default: {
            const double r = std::sqrt(0.5);
            double ry = r * (py - px), rx = r * (py + px);
            return sd_box(ry, rx, 0.66 * s, 0.66 * s);
        }
    }
}

} // namespace

ImageSet gen_glyphs(int n_per_class, uint64_t seed) {
    if (n_per_class < 1) throw ConfigError("gen_glyphs: n_per_class must be >= 1");
    ImageSet set;
    set.rows = kGlyphSize;
    set.cols = kGlyphSize;
    const double aa = 1.2; // edge softness in pixels
    for (int cls = 0; cls < kGlyphClasses; ++cls) {
        for (int idx = 0; idx < n_per_class; ++idx) {
            Rng rng(mix_seed(seed, static_cast<uint64_t>(cls), static_cast<uint64_t>(idx)));
            double cy = (kGlyphSize - 1) / 2.0 + rng.uniform(-1.8, 1.8);
            double cx = (kGlyphSize - 1) / 2.0 + rng.uniform(-1.8, 1.8);
            double s = rng.uniform(8.0, 11.0);
            double theta = rng.uniform(-12.0, 12.0) * 3.14159265358979323846 / 180.0;
            double hw = rng.uniform(1.6, 2.6) / 2.0;
            double amp = rng.uniform(0.65, 1.0);
            double ct = std::cos(theta), st = std::sin(theta);
            Tensor img({kGlyphSize, kGlyphSize, 1});
            for (int y = 0; y < kGlyphSize; ++y) {
                for (int x = 0; x < kGlyphSize; ++x) {
                    double dy = y - cy, dx = x - cx;
                    double py = ct * dy - st * dx;
                    double px = st * dy + ct * dx;
                    double d = glyph_sdf(cls, py, px, s, hw);
                    double coverage = std::clamp(0.5 - d / aa, 0.0, 1.0);
                    double v = amp * coverage + 0.08 * rng.gaussian();
                    img.at(y, x, 0) = std::clamp(v, 0.0, 1.0);
                }
            }
            set.images.push_back(std::move(img));
            set.labels.push_back(cls);
        }
    }
    return set;
}

} // namespace cssr
