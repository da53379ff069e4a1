#pragma once

#include <vector>

#include <reltrack/correlation.hpp>

namespace reltrack {

enum class PoolMode { Average, Max };

/// Level 0 is the input volume; level s pools the last two dims of level s-1 by 2x2.
struct CorrelationPyramid {
    std::vector<CorrelationVolume> levels;

    int num_levels() const { return static_cast<int>(levels.size()); }
};

/// Per-point relation descriptor O[i][j][channel]. Channels are level-major,
/// then offsets in row-major (dy, dx) order, dy and dx running -R..R.
struct RelationMap {
    int h = 0;
    int w = 0;
    int c = 0;
    std::vector<Real> data;

    RelationMap() = default;
    RelationMap(int h_, int w_, int c_) : h(h_), w(w_), c(c_), data(static_cast<std::size_t>(h_) * w_ * c_, 0) {}

    Real& at(int i, int j, int ch) { return data[(static_cast<std::size_t>(i) * w + j) * c + ch]; }
    Real at(int i, int j, int ch) const { return data[(static_cast<std::size_t>(i) * w + j) * c + ch]; }
    const Real* cell(int i, int j) const { return data.data() + (static_cast<std::size_t>(i) * w + j) * c; }
};

/// Number of relation channels for S pooled levels and search radius R.
constexpr int relation_channels(int levels_S, int radius) { return (levels_S + 1) * (2 * radius + 1) * (2 * radius + 1); }

/// Integer displacements with max(|dy|, |dx|) <= radius, row-major.
std::vector<std::pair<int, int>> lookup_offsets(int radius);

CorrelationPyramid build_pyramid(const CorrelationVolume& vol, int levels_S, PoolMode mode = PoolMode::Average);

/// Bilinear sample of a h x w plane at fractional (row, col), clamped to the border.
Real sample_bilinear(const Real* plane, int h, int w, Real row, Real col);

/// Multi-scale lookup for source point (row, col) on the previous frame's grid.
/// Fractional source points are bilinearly blended over the source dims.
std::vector<Real> lookup(const CorrelationPyramid& pyr, Real row, Real col, int radius);

RelationMap build_relation_map(const CorrelationPyramid& pyr, int radius);

}  // namespace reltrack
