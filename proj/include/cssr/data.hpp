#pragma once

#include <array>
#include <string>
#include <vector>

#include "cssr/tensor.hpp"

namespace cssr {

struct Sample {
    Tensor input; // {2} point or {H,W,1} image
    int label = -1;
};
using Dataset = std::vector<Sample>;

// ---- synthetic 2-d data ----

struct Gaussian2dSpec {
    std::vector<std::array<double, 2>> means;
    double sigma = 0.4;
    int n_per_class = 500;
    uint64_t seed = 0;
};

// Isotropic Gaussian blob per class; duplicate means are allowed but noted.
Dataset gen_gaussian_2d(const Gaussian2dSpec& spec, std::vector<std::string>* warnings = nullptr);

// The four-blob layout at (+-2, +-2).
Gaussian2dSpec four_gaussians(double sigma = 0.4, int n_per_class = 500, uint64_t seed = 0);

// ---- IDX image files (big-endian; magic 0x803 images / 0x801 labels) ----

struct ImageSet {
    std::vector<Tensor> images; // {H,W,1}, values in [0,1]
    std::vector<int> labels;
    int rows = 0, cols = 0;
    int num_classes() const;
    Dataset to_dataset() const;
};

ImageSet load_idx(const std::string& images_path, const std::string& labels_path);
void save_idx(const ImageSet& set, const std::string& images_path, const std::string& labels_path);

// ---- open-set class splits ----

struct OpenSetSplit {
    std::vector<int> known;   // original class ids, ascending
    std::vector<int> unknown; // remainder, ascending
    uint64_t trial_seed = 0;

    int num_known() const { return static_cast<int>(known.size()); }
    // original label -> training label in [0, m), or -1 when unknown
    int remap(int original) const;
};

// Shuffles class ids 0..class_count-1 by Fisher-Yates over a splitmix64
// stream seeded with trial_seed; the first n_known ids become the known
// classes. Both sides are reported sorted ascending.
OpenSetSplit make_open_split(int class_count, int n_known, uint64_t trial_seed);

// ---- augmentation ----

enum class AugmentOp { Brightness, Contrast, Rotate, Shear, Equalize };
const char* augment_op_name(AugmentOp op);

struct AugmentSpec {
    std::vector<AugmentOp> enabled;
    int max_ops = 2;
    double brightness_lo = -0.3, brightness_hi = 0.3; // additive delta
    double contrast_lo = 0.7, contrast_hi = 1.3;      // factor about the image mean
    double rotate_lo = -30.0, rotate_hi = 30.0;       // degrees
    double shear_lo = -0.3, shear_hi = 0.3;           // horizontal shear factor
    uint64_t seed = 0;

    static AugmentSpec all(uint64_t seed = 0);
    static AugmentSpec none() { return AugmentSpec{}; }
    bool identity() const { return enabled.empty() || max_ops == 0; }
};

// Draws k in {0..max_ops} transforms without replacement, applies them in
// sampled order, clamps to [0,1]. Deterministic in (spec.seed, draw_seed).
// Only meaningful for {H,W,1} images; 2-d points pass through untouched.
Tensor augment_image(const Tensor& image, const AugmentSpec& spec, uint64_t draw_seed);

// Individual transforms (exposed for tests).
Tensor adjust_brightness(const Tensor& image, double delta);
Tensor adjust_contrast(const Tensor& image, double factor);
Tensor rotate_image(const Tensor& image, double degrees);
Tensor shear_image(const Tensor& image, double factor);
Tensor equalize_image(const Tensor& image);

// ---- synthetic glyph images (MNIST-shaped desk dataset) ----

inline constexpr int kGlyphClasses = 10;
inline constexpr int kGlyphSize = 28;

// Ten 28x28 grayscale glyph classes (disk, ring, square, square outline,
// plus, diagonal cross, horizontal bars, vertical bars, triangle outline,
// diamond) rendered from signed distance fields with per-sample pose,
// stroke, intensity and noise jitter. Deterministic under seed.
ImageSet gen_glyphs(int n_per_class, uint64_t seed);

} // namespace cssr
