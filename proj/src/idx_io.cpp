#include "pfl/idx_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "pfl/errors.hpp"

namespace pfl {

namespace {
constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::uint32_t read_be32(std::istream& in, const std::string& path) {
    unsigned char buf[4];
    in.read(reinterpret_cast<char*>(buf), 4);
    if (!in) throw DataError("IDX: truncated header in " + path);
    return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) |
           (std::uint32_t(buf[2]) << 8) | std::uint32_t(buf[3]);
}

void write_be32(std::ostream& out, std::uint32_t v) {
    const unsigned char buf[4] = {static_cast<unsigned char>(v >> 24),
                                  static_cast<unsigned char>(v >> 16),
                                  static_cast<unsigned char>(v >> 8),
                                  static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(buf), 4);
}
}  // namespace

IdxImages read_idx_images(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("IDX: cannot open " + path);
    if (read_be32(in, path) != kImageMagic)
        throw DataError("IDX: bad image magic in " + path);
    const std::uint32_t count = read_be32(in, path);
    const std::uint32_t rows = read_be32(in, path);
    const std::uint32_t cols = read_be32(in, path);
    IdxImages out;
    out.rows = static_cast<int>(rows);
    out.cols = static_cast<int>(cols);
    const std::size_t px = static_cast<std::size_t>(rows) * cols;
    std::vector<unsigned char> raw(px);
    out.images.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(px));
        if (!in) throw DataError("IDX: truncated image data in " + path);
        std::vector<double> img(px);
        for (std::size_t j = 0; j < px; ++j) img[j] = raw[j] / 255.0;
        out.images.push_back(std::move(img));
    }
    return out;
}

std::vector<int> read_idx_labels(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("IDX: cannot open " + path);
    if (read_be32(in, path) != kLabelMagic)
        throw DataError("IDX: bad label magic in " + path);
    const std::uint32_t count = read_be32(in, path);
    std::vector<unsigned char> raw(count);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(count));
    if (!in) throw DataError("IDX: truncated label data in " + path);
    return std::vector<int>(raw.begin(), raw.end());
}

void write_idx_images(const std::string& path, int rows, int cols,
                      const std::vector<std::vector<double>>& images) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("IDX: cannot write " + path);
    write_be32(out, kImageMagic);
    write_be32(out, static_cast<std::uint32_t>(images.size()));
    write_be32(out, static_cast<std::uint32_t>(rows));
    write_be32(out, static_cast<std::uint32_t>(cols));
    const std::size_t px = static_cast<std::size_t>(rows) * cols;
    std::vector<unsigned char> raw(px);
    for (const auto& img : images) {
        if (img.size() != px) throw DataError("IDX: image size mismatch while writing " + path);
        for (std::size_t j = 0; j < px; ++j) {
            const double v = std::clamp(img[j], 0.0, 1.0);
            raw[j] = static_cast<unsigned char>(std::lround(v * 255.0));
        }
        out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(px));
    }
}

void write_idx_labels(const std::string& path, const std::vector<int>& labels) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("IDX: cannot write " + path);
    write_be32(out, kLabelMagic);
    write_be32(out, static_cast<std::uint32_t>(labels.size()));
    for (int l : labels) {
        if (l < 0 || l > 255) throw DataError("IDX: label out of byte range");
        const unsigned char b = static_cast<unsigned char>(l);
        out.write(reinterpret_cast<const char*>(&b), 1);
    }
}

std::vector<Sample> load_idx_dataset(const std::string& images_path,
                                     const std::string& labels_path) {
    IdxImages imgs = read_idx_images(images_path);
    const std::vector<int> labels = read_idx_labels(labels_path);
    if (imgs.images.size() != labels.size())
        throw DataError("IDX: image/label count mismatch");
    std::vector<Sample> out;
    out.reserve(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        Sample s;
        s.x = std::move(imgs.images[i]);
        s.label = labels[i];
        s.key = i;
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace pfl
