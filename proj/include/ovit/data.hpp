#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ovit/random.hpp"

namespace ovit {

// Height x width x channels pixels in [0, 1], stored HWC row-major.
struct Image {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 1;
    std::vector<double> pixels;

    Image() = default;
    Image(std::size_t h, std::size_t w, std::size_t c = 1)
        : height(h), width(w), channels(c), pixels(h * w * c, 0.0) {}

    double at(std::size_t y, std::size_t x, std::size_t c = 0) const {
        return pixels[(y * width + x) * channels + c];
    }
    double& at(std::size_t y, std::size_t x, std::size_t c = 0) {
        return pixels[(y * width + x) * channels + c];
    }

    friend bool operator==(const Image&, const Image&) = default;
};

struct Dataset {
    std::size_t side = 0;
    std::size_t channels = 1;
    std::size_t classes = 0;
    std::vector<Image> images;
    std::vector<int> labels;

    std::size_t size() const noexcept { return images.size(); }
    // Throws ConfigError on a count mismatch, a wrongly shaped image, a pixel
    // outside [0, 1], or a label outside [0, classes).
    void validate() const;
};

// Per-class oriented stripe template in [0, 1]: class c has its own
// frequency and angle.
Image stripe_template(int label, std::size_t classes, std::size_t side);

// samples_per_class noisy copies of each class template, noise clamped to
// [0, 1]. Requires classes >= 2 and side >= 8. Samples are interleaved by
// class (0, 1, ..., classes-1, 0, 1, ...).
Dataset generate_synthetic(std::size_t classes, std::size_t samples_per_class, std::size_t side,
                           double noise_std, std::uint64_t seed);

// Raw contents of an IDX file with unsigned-byte payload.
struct IdxArray {
    std::vector<std::uint32_t> dims;
    std::vector<std::uint8_t> bytes;

    std::size_t element_count() const;
};

// Parses big-endian IDX: 0x00 0x00, type 0x08, dimension count, u32 sizes,
// payload. Throws FormatError naming the offending byte, LengthError on a
// truncated or oversized payload.
IdxArray parse_idx(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> serialize_idx(const IdxArray& array);

IdxArray read_idx(const std::filesystem::path& path);
void write_idx(const std::filesystem::path& path, const IdxArray& array);

// dims (n, h, w) or (n, h, w, c); pixels divided by 255.
std::vector<Image> idx_to_images(const IdxArray& array);
// dims (n).
std::vector<int> idx_to_labels(const IdxArray& array);
// Quantizes to bytes (round(255 p)).
IdxArray images_to_idx(std::span<const Image> images);
IdxArray labels_to_idx(std::span<const int> labels);

Dataset load_idx_dataset(const std::filesystem::path& images, const std::filesystem::path& labels,
                         std::size_t classes);

// One concrete draw of the augmentation pipeline.
struct AugmentChoice {
    bool flip = false;
    // Crop origin inside the 2-pixel zero-padded image, each in [0, 4].
    std::size_t crop_y = 2;
    std::size_t crop_x = 2;
    // Counter-clockwise quarter turns, in [0, 3].
    int quarter_turns = 0;
};

inline constexpr std::size_t kAugmentPad = 2;

AugmentChoice draw_augment(Rng& rng);
// Horizontal flip, then pad-and-crop, then rotation.
Image apply_augment(const Image& image, const AugmentChoice& choice);
Image augment(const Image& image, Rng& rng);

Image flip_horizontal(const Image& image);
Image rotate_quarter(const Image& image, int quarter_turns);

} // namespace ovit
