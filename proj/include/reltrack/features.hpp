#pragma once

#include <filesystem>
#include <memory>
#include <vector>

#include <reltrack/core.hpp>

namespace reltrack {

/// Row-major grayscale image, intensities in [0, 1].
struct GrayImage {
    int h = 0;
    int w = 0;
    std::vector<float> px;

    GrayImage() = default;
    GrayImage(int h_, int w_, float fill = 0.0f) : h(h_), w(w_), px(static_cast<std::size_t>(h_) * w_, fill) {}

    float& at(int r, int c) { return px[static_cast<std::size_t>(r) * w + c]; }
    float at(int r, int c) const { return px[static_cast<std::size_t>(r) * w + c]; }

    bool operator==(const GrayImage&) const = default;
};

inline constexpr int kFeatureStride = 8;
inline constexpr int kHandcraftedDim = 10;

FeatureMap load_features(const std::filesystem::path& path);
void save_features(const std::filesystem::path& path, const FeatureMap& features);

/// Per 8x8 patch: mean, standard deviation and an 8-bin magnitude-weighted
/// gradient-orientation histogram, L2-normalized. Patches whose descriptor is
/// all zero map to the unit vector along channel 0.
FeatureMap handcrafted_features(const GrayImage& image);

/// Binary PGM (P5, maxval 255).
GrayImage load_pgm(const std::filesystem::path& path);
void save_pgm(const std::filesystem::path& path, const GrayImage& image);

/// Supplies one FeatureMap per (1-based) frame.
class FeatureProvider {
public:
    enum class Mode { FileBacked, Handcrafted };

    /// Reads `<dir>/<frame:06d>.p2if`.
    static FeatureProvider file_backed(std::filesystem::path dir);
    /// Reads `<dir>/<frame:06d>.pgm` and computes handcrafted descriptors.
    static FeatureProvider handcrafted(std::filesystem::path image_dir);
    /// Handcrafted descriptors over in-memory frames; frames[0] is frame 1.
    static FeatureProvider handcrafted(std::vector<GrayImage> frames);

    Mode mode() const { return mode_; }

    /// Frame `f` of the provider reads source frame 1 + (f - 1) * step.
    FeatureProvider with_frame_step(int step) const;

    FeatureMap at(int frame) const;

private:
    Mode mode_ = Mode::Handcrafted;
    std::filesystem::path dir_;
    std::shared_ptr<const std::vector<GrayImage>> frames_;
    int step_ = 1;
};

}  // namespace reltrack
