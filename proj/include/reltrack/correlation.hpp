#pragma once

#include <vector>

#include <reltrack/core.hpp>

namespace reltrack {

/// Dense 4D volume c[i][j][k][l]: (i, j) on the previous frame's grid,
/// (k, l) on the current frame's grid.
struct CorrelationVolume {
    int h1 = 0, w1 = 0, h2 = 0, w2 = 0;
    std::vector<Real> data;

    CorrelationVolume() = default;
    CorrelationVolume(int h1_, int w1_, int h2_, int w2_, Real fill = 0)
        : h1(h1_), w1(w1_), h2(h2_), w2(w2_),
          data(static_cast<std::size_t>(h1_) * w1_ * h2_ * w2_, fill) {}

    std::size_t index(int i, int j, int k, int l) const {
        return ((static_cast<std::size_t>(i) * w1 + j) * h2 + k) * w2 + l;
    }
    Real& at(int i, int j, int k, int l) { return data[index(i, j, k, l)]; }
    Real at(int i, int j, int k, int l) const { return data[index(i, j, k, l)]; }

    /// Contiguous h2 x w2 plane for source point (i, j).
    const Real* plane(int i, int j) const { return data.data() + index(i, j, 0, 0); }
    Real* plane(int i, int j) { return data.data() + index(i, j, 0, 0); }
};

enum class CorrelationScale { Raw, InvSqrtD };

/// Foreground grids for the previous and current frame; 1 marks foreground.
struct BackgroundMask {
    int h1 = 0, w1 = 0, h2 = 0, w2 = 0;
    std::vector<unsigned char> prev;
    std::vector<unsigned char> cur;

    /// Cells inside at least one box (image-space boxes mapped by `stride`).
    static BackgroundMask from_boxes(int h1, int w1, const std::vector<BBox>& prev_boxes, int h2, int w2,
                                     const std::vector<BBox>& cur_boxes, Real stride);
};

CorrelationVolume build_volume(const FeatureMap& prev, const FeatureMap& cur,
                               CorrelationScale scale = CorrelationScale::InvSqrtD);

/// Replaces every entry whose source or target cell is background with `fill`.
CorrelationVolume apply_mask(const CorrelationVolume& vol, const BackgroundMask& mask, Real fill);
/// Same, filling with the volume's minimum value.
CorrelationVolume apply_mask(const CorrelationVolume& vol, const BackgroundMask& mask);

}  // namespace reltrack
