#include "ovit/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>

#include <fmt/format.h>

#include "ovit/errors.hpp"

namespace ovit {

void Dataset::validate() const {
    if (images.size() != labels.size())
        throw ConfigError(fmt::format("dataset has {} images but {} labels", images.size(),
                                      labels.size()));
    for (std::size_t i = 0; i < images.size(); ++i) {
        const Image& im = images[i];
        if (im.height != side || im.width != side || im.channels != channels ||
            im.pixels.size() != side * side * channels)
            throw ConfigError(fmt::format("image {} is {}x{}x{}, dataset expects {}x{}x{}", i,
                                          im.height, im.width, im.channels, side, side, channels));
        for (double p : im.pixels)
            if (!(p >= 0.0 && p <= 1.0))
                throw ConfigError(fmt::format("image {} has pixel {} outside [0, 1]", i, p));
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes)
            throw ConfigError(fmt::format("label {} at index {} outside [0, {})", labels[i], i,
                                          classes));
    }
}

Image stripe_template(int label, std::size_t classes, std::size_t side) {
    const double c = static_cast<double>(label);
    const double span = static_cast<double>(std::max<std::size_t>(classes - 1, 1));
    // Frequencies spread over [1, side/2 - 1] cycles per image side.
    const double max_freq = std::max(2.0, static_cast<double>(side) / 2.0 - 1.0);
    const double freq = 1.0 + c * (max_freq - 1.0) / span;
    const double angle = std::numbers::pi * (c + 0.25) / static_cast<double>(classes);
    const double kx = std::cos(angle), ky = std::sin(angle);
    const double s = static_cast<double>(side);

    Image im(side, side, 1);
    for (std::size_t y = 0; y < side; ++y)
        for (std::size_t x = 0; x < side; ++x) {
            const double t = (static_cast<double>(x) * kx + static_cast<double>(y) * ky) / s;
            im.at(y, x) = 0.5 + 0.5 * std::cos(2.0 * std::numbers::pi * freq * t);
        }
    return im;
}

Dataset generate_synthetic(std::size_t classes, std::size_t samples_per_class, std::size_t side,
                           double noise_std, std::uint64_t seed) {
    if (classes < 2) throw ConfigError("generate_synthetic: classes must be at least 2");
    if (side < 8) throw ConfigError("generate_synthetic: side must be at least 8");
    if (noise_std < 0.0) throw ArgumentError("generate_synthetic: noise_std must be non-negative");

    std::vector<Image> templates;
    for (std::size_t c = 0; c < classes; ++c)
        templates.push_back(stripe_template(static_cast<int>(c), classes, side));

    Dataset ds;
    ds.side = side;
    ds.channels = 1;
    ds.classes = classes;
    Rng rng(seed);
    for (std::size_t i = 0; i < samples_per_class; ++i)
        for (std::size_t c = 0; c < classes; ++c) {
            Image im = templates[c];
            if (noise_std > 0.0)
                for (double& p : im.pixels) p = std::clamp(p + noise_std * rng.normal(), 0.0, 1.0);
            ds.images.push_back(std::move(im));
            ds.labels.push_back(static_cast<int>(c));
        }
    return ds;
}

std::size_t IdxArray::element_count() const {
    std::size_t n = 1;
    for (std::uint32_t d : dims) n *= d;
    return n;
}

IdxArray parse_idx(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4)
        throw LengthError(fmt::format("idx: header needs 4 bytes, file has {}", bytes.size()));
    for (std::size_t i = 0; i < 2; ++i)
        if (bytes[i] != 0x00)
            throw FormatError(
                fmt::format("idx: magic byte {} is 0x{:02x}, expected 0x00", i, bytes[i]));
    if (bytes[2] != 0x08)
        throw FormatError(fmt::format(
            "idx: type byte (offset 2) is 0x{:02x}, only 0x08 (unsigned byte) is supported",
            bytes[2]));
    const std::size_t ndims = bytes[3];
    if (ndims == 0) throw FormatError("idx: dimension-count byte (offset 3) is 0x00");

    const std::size_t header = 4 + 4 * ndims;
    if (bytes.size() < header)
        throw LengthError(fmt::format("idx: header declares {} dimensions ({} bytes), file has {}",
                                      ndims, header, bytes.size()));
    IdxArray out;
    for (std::size_t d = 0; d < ndims; ++d) {
        const std::uint8_t* p = bytes.data() + 4 + 4 * d;
        out.dims.push_back((std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) |
                           (std::uint32_t{p[2]} << 8) | std::uint32_t{p[3]});
    }
    const std::size_t expected = out.element_count();
    const std::size_t payload = bytes.size() - header;
    if (payload != expected)
        throw LengthError(fmt::format("idx: payload has {} bytes, dimensions require {}", payload,
                                      expected));
    out.bytes.assign(bytes.begin() + static_cast<std::ptrdiff_t>(header), bytes.end());
    return out;
}

std::vector<std::uint8_t> serialize_idx(const IdxArray& array) {
    if (array.dims.empty() || array.dims.size() > 255)
        throw ArgumentError("idx: dimension count must be in [1, 255]");
    if (array.bytes.size() != array.element_count())
        throw LengthError(fmt::format("idx: {} payload bytes for {} elements", array.bytes.size(),
                                      array.element_count()));
    std::vector<std::uint8_t> out{0x00, 0x00, 0x08, static_cast<std::uint8_t>(array.dims.size())};
    for (std::uint32_t d : array.dims)
        for (int shift = 24; shift >= 0; shift -= 8)
            out.push_back(static_cast<std::uint8_t>((d >> shift) & 0xff));
    out.insert(out.end(), array.bytes.begin(), array.bytes.end());
    return out;
}

IdxArray read_idx(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ArgumentError(fmt::format("idx: cannot open {}", path.string()));
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return parse_idx(bytes);
}

void write_idx(const std::filesystem::path& path, const IdxArray& array) {
    const auto bytes = serialize_idx(array);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ArgumentError(fmt::format("idx: cannot write {}", path.string()));
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<Image> idx_to_images(const IdxArray& array) {
    if (array.dims.size() != 3 && array.dims.size() != 4)
        throw FormatError(fmt::format("idx: image arrays need 3 or 4 dimensions, got {}",
                                      array.dims.size()));
    const std::size_t n = array.dims[0], h = array.dims[1], w = array.dims[2];
    const std::size_t c = array.dims.size() == 4 ? array.dims[3] : 1;
    std::vector<Image> images;
    images.reserve(n);
    const std::size_t stride = h * w * c;
    for (std::size_t i = 0; i < n; ++i) {
        Image im(h, w, c);
        for (std::size_t k = 0; k < stride; ++k)
            im.pixels[k] = static_cast<double>(array.bytes[i * stride + k]) / 255.0;
        images.push_back(std::move(im));
    }
    return images;
}

std::vector<int> idx_to_labels(const IdxArray& array) {
    if (array.dims.size() != 1)
        throw FormatError(
            fmt::format("idx: label arrays need 1 dimension, got {}", array.dims.size()));
    return {array.bytes.begin(), array.bytes.end()};
}

IdxArray images_to_idx(std::span<const Image> images) {
    if (images.empty()) throw ArgumentError("idx: no images to encode");
    const Image& first = images.front();
    IdxArray out;
    out.dims = {static_cast<std::uint32_t>(images.size()), static_cast<std::uint32_t>(first.height),
                static_cast<std::uint32_t>(first.width)};
    if (first.channels != 1) out.dims.push_back(static_cast<std::uint32_t>(first.channels));
    for (const Image& im : images) {
        if (im.height != first.height || im.width != first.width || im.channels != first.channels)
            throw ShapeError("idx: images differ in shape");
        for (double p : im.pixels)
            out.bytes.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(p, 0.0, 1.0) * 255.0)));
    }
    return out;
}

IdxArray labels_to_idx(std::span<const int> labels) {
    IdxArray out;
    out.dims = {static_cast<std::uint32_t>(labels.size())};
    for (int l : labels) {
        if (l < 0 || l > 255) throw LabelError(fmt::format("idx: label {} does not fit a byte", l));
        out.bytes.push_back(static_cast<std::uint8_t>(l));
    }
    return out;
}

Dataset load_idx_dataset(const std::filesystem::path& images, const std::filesystem::path& labels,
                         std::size_t classes) {
    Dataset ds;
    ds.images = idx_to_images(read_idx(images));
    ds.labels = idx_to_labels(read_idx(labels));
    if (ds.images.empty()) throw ConfigError("idx dataset is empty");
    if (ds.images.front().height != ds.images.front().width)
        throw ConfigError("idx dataset images must be square");
    ds.side = ds.images.front().height;
    ds.channels = ds.images.front().channels;
    ds.classes = classes;
    ds.validate();
    return ds;
}

AugmentChoice draw_augment(Rng& rng) {
    AugmentChoice c;
    c.flip = rng.bernoulli(0.5);
    c.crop_y = rng.below(2 * kAugmentPad + 1);
    c.crop_x = rng.below(2 * kAugmentPad + 1);
    c.quarter_turns = static_cast<int>(rng.below(4));
    return c;
}

Image flip_horizontal(const Image& image) {
    Image out(image.height, image.width, image.channels);
    for (std::size_t y = 0; y < image.height; ++y)
        for (std::size_t x = 0; x < image.width; ++x)
            for (std::size_t c = 0; c < image.channels; ++c)
                out.at(y, x, c) = image.at(y, image.width - 1 - x, c);
    return out;
}

Image rotate_quarter(const Image& image, int quarter_turns) {
    if (image.height != image.width) throw ShapeError("rotate_quarter: image must be square");
    const std::size_t n = image.height;
    Image out = image;
    for (int t = 0; t < ((quarter_turns % 4) + 4) % 4; ++t) {
        Image next(n, n, image.channels);
        // Counter-clockwise: the right column becomes the top row.
        for (std::size_t y = 0; y < n; ++y)
            for (std::size_t x = 0; x < n; ++x)
                for (std::size_t c = 0; c < image.channels; ++c)
                    next.at(y, x, c) = out.at(x, n - 1 - y, c);
        out = std::move(next);
    }
    return out;
}

Image apply_augment(const Image& image, const AugmentChoice& choice) {
    if (image.height != image.width) throw ShapeError("augment: image must be square");
    if (choice.crop_y > 2 * kAugmentPad || choice.crop_x > 2 * kAugmentPad)
        throw ArgumentError("augment: crop origin outside the padded image");
    const Image src = choice.flip ? flip_horizontal(image) : image;
    const std::size_t n = src.height;
    Image cropped(n, n, src.channels);
    for (std::size_t y = 0; y < n; ++y)
        for (std::size_t x = 0; x < n; ++x) {
            // Position in the padded image, shifted back to source coordinates.
            const auto sy = static_cast<std::ptrdiff_t>(y + choice.crop_y) - static_cast<std::ptrdiff_t>(kAugmentPad);
            const auto sx = static_cast<std::ptrdiff_t>(x + choice.crop_x) - static_cast<std::ptrdiff_t>(kAugmentPad);
            if (sy < 0 || sx < 0 || sy >= static_cast<std::ptrdiff_t>(n) || sx >= static_cast<std::ptrdiff_t>(n))
                continue;
            for (std::size_t c = 0; c < src.channels; ++c)
                cropped.at(y, x, c) = src.at(static_cast<std::size_t>(sy), static_cast<std::size_t>(sx), c);
        }
    return rotate_quarter(cropped, choice.quarter_turns);
}

Image augment(const Image& image, Rng& rng) { return apply_augment(image, draw_augment(rng)); }

} // namespace ovit
