#include <reltrack/features.hpp>
#include <reltrack/error.hpp>
#include <reltrack/fs.hpp>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

namespace reltrack {

namespace {

constexpr char kFeatureMagic[4] = {'P', '2', 'I', 'F'};

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

void write_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }

std::uint32_t read_u32(std::istream& in, const std::filesystem::path& path) {
    std::uint32_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) {
        throw Error(ErrorKind::DimMismatch, path.string() + ": truncated header");
    }
    return v;
}

std::string frame_name(int frame, const char* ext) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%06d.%s", frame, ext);
    return buf;
}

}  // namespace

FeatureMap load_features(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
    char magic[4] = {};
    if (!in.read(magic, 4) || std::memcmp(magic, kFeatureMagic, 4) != 0) {
        throw Error(ErrorKind::BadMagic, path.string() + ": not a P2IF file");
    }
    const auto version = read_u32(in, path);
    if (version != 1) throw Error(ErrorKind::BadMagic, path.string() + ": unsupported version " + std::to_string(version));
    const auto h = read_u32(in, path);
    const auto w = read_u32(in, path);
    const auto d = read_u32(in, path);
    FeatureMap fm(static_cast<int>(h), static_cast<int>(w), static_cast<int>(d), kFeatureStride);
    const auto bytes = static_cast<std::streamsize>(fm.data.size() * sizeof(float));
    in.read(reinterpret_cast<char*>(fm.data.data()), bytes);
    if (in.gcount() != bytes || in.peek() != std::char_traits<char>::eof()) {
        throw Error(ErrorKind::DimMismatch, path.string() + ": payload length does not match header " +
                                                std::to_string(h) + "x" + std::to_string(w) + "x" + std::to_string(d));
    }
    for (float v : fm.data) {
        if (!std::isfinite(v)) throw Error(ErrorKind::NonFiniteValue, path.string() + ": non-finite feature value");
    }
    return fm;
}

void save_features(const std::filesystem::path& path, const FeatureMap& features) {
    std::ostringstream out(std::ios::binary);
    out.write(kFeatureMagic, 4);
    write_u32(out, 1);
    write_u32(out, static_cast<std::uint32_t>(features.h));
    write_u32(out, static_cast<std::uint32_t>(features.w));
    write_u32(out, static_cast<std::uint32_t>(features.d));
    out.write(reinterpret_cast<const char*>(features.data.data()),
              static_cast<std::streamsize>(features.data.size() * sizeof(float)));
    atomic_write(path, out.str());
}

FeatureMap handcrafted_features(const GrayImage& image) {
    if (image.h <= 0 || image.w <= 0 || image.px.empty()) throw Error(ErrorKind::EmptyImage, "empty image");

    constexpr int s = kFeatureStride;
    const int rows = (image.h + s - 1) / s;
    const int cols = (image.w + s - 1) / s;
    const int ph = rows * s;
    const int pw = cols * s;
    // Edge-replicated view of the padded image.
    auto px = [&](int r, int c) {
        r = std::clamp(r, 0, ph - 1);
        c = std::clamp(c, 0, pw - 1);
        return static_cast<double>(image.at(std::min(r, image.h - 1), std::min(c, image.w - 1)));
    };

    FeatureMap fm(rows, cols, kHandcraftedDim, s);
    constexpr double two_pi = 2 * std::numbers::pi;
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) {
            std::array<double, kHandcraftedDim> desc{};
            double sum = 0;
            for (int r = i * s; r < (i + 1) * s; ++r) {
                for (int c = j * s; c < (j + 1) * s; ++c) {
                    sum += px(r, c);
                    const double gx = (px(r, c + 1) - px(r, c - 1)) / 2;
                    const double gy = (px(r + 1, c) - px(r - 1, c)) / 2;
                    const double mag = std::hypot(gx, gy);
                    if (mag <= 0) continue;
                    double theta = std::atan2(gy, gx);
                    if (theta < 0) theta += two_pi;
                    const int bin = std::min(7, static_cast<int>(theta / two_pi * 8));
                    desc[2 + bin] += mag;
                }
            }
            constexpr double n = s * s;
            const double mean = sum / n;
            double var = 0;
            for (int r = i * s; r < (i + 1) * s; ++r)
                for (int c = j * s; c < (j + 1) * s; ++c) var += (px(r, c) - mean) * (px(r, c) - mean);
            desc[0] = mean;
            desc[1] = std::sqrt(var / n);
            for (int b = 0; b < 8; ++b) desc[2 + b] /= n;

            double norm = 0;
            for (double v : desc) norm += v * v;
            norm = std::sqrt(norm);
            if (norm < 1e-12) {
                desc.fill(0);
                desc[0] = 1;
                norm = 1;
            }
            for (int k = 0; k < kHandcraftedDim; ++k) fm.at(i, j, k) = static_cast<float>(desc[k] / norm);
        }
    }
    return fm;
}

GrayImage load_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
    std::string magic;
    in >> magic;
    if (magic != "P5") throw Error(ErrorKind::BadMagic, path.string() + ": not a binary PGM");
    auto next_int = [&]() {
        in >> std::ws;
        while (in.peek() == '#') {
            std::string comment;
            std::getline(in, comment);
            in >> std::ws;
        }
        int v = -1;
        in >> v;
        return v;
    };
    const int w = next_int();
    const int h = next_int();
    const int maxval = next_int();
    if (w <= 0 || h <= 0 || maxval != 255) throw Error(ErrorKind::BadMagic, path.string() + ": unsupported PGM header");
    in.get();
    std::vector<unsigned char> raw(static_cast<std::size_t>(w) * h);
    if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()))) {
        throw Error(ErrorKind::DimMismatch, path.string() + ": truncated PGM payload");
    }
    GrayImage img(h, w);
    for (std::size_t k = 0; k < raw.size(); ++k) img.px[k] = static_cast<float>(raw[k]) / 255.0f;
    return img;
}

void save_pgm(const std::filesystem::path& path, const GrayImage& image) {
    std::string bytes = "P5\n" + std::to_string(image.w) + ' ' + std::to_string(image.h) + "\n255\n";
    bytes.reserve(bytes.size() + image.px.size());
    for (float v : image.px) bytes += static_cast<char>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
    atomic_write(path, bytes);
}

FeatureProvider FeatureProvider::file_backed(std::filesystem::path dir) {
    FeatureProvider p;
    p.mode_ = Mode::FileBacked;
    p.dir_ = std::move(dir);
    return p;
}

FeatureProvider FeatureProvider::handcrafted(std::filesystem::path image_dir) {
    FeatureProvider p;
    p.mode_ = Mode::Handcrafted;
    p.dir_ = std::move(image_dir);
    return p;
}

FeatureProvider FeatureProvider::handcrafted(std::vector<GrayImage> frames) {
    FeatureProvider p;
    p.mode_ = Mode::Handcrafted;
    p.frames_ = std::make_shared<const std::vector<GrayImage>>(std::move(frames));
    return p;
}

FeatureProvider FeatureProvider::with_frame_step(int step) const {
    if (step < 1) throw Error(ErrorKind::InvalidConfig, "frame step must be >= 1");
    FeatureProvider p = *this;
    p.step_ = step_ * step;
    return p;
}

FeatureMap FeatureProvider::at(int frame) const {
    const int source = 1 + (frame - 1) * step_;
    if (mode_ == Mode::FileBacked) return load_features(dir_ / frame_name(source, "p2if"));
    if (frames_) {
        if (source < 1 || source > static_cast<int>(frames_->size())) {
            throw Error(ErrorKind::OutOfGrid, "frame " + std::to_string(source) + " not available");
        }
        return handcrafted_features((*frames_)[static_cast<std::size_t>(source - 1)]);
    }
    return handcrafted_features(load_pgm(dir_ / frame_name(source, "pgm")));
}

}  // namespace reltrack
