#include <reltrack/correlation.hpp>
#include <reltrack/error.hpp>

#include <algorithm>
#include <cmath>
#include <string>

namespace reltrack {

namespace {

std::vector<unsigned char> rasterize(int h, int w, const std::vector<BBox>& boxes, Real stride) {
    std::vector<unsigned char> grid(static_cast<std::size_t>(h) * w, 0);
    for (const auto& b : boxes) {
        const BBox g = grid_box(b, stride);
        // A cell [j, j+1) x [i, i+1) is inside when it overlaps the box interior.
        const int r0 = std::max(0, static_cast<int>(std::floor(g.y)));
        const int r1 = std::min(h, static_cast<int>(std::ceil(g.y + g.h)));
        const int c0 = std::max(0, static_cast<int>(std::floor(g.x)));
        const int c1 = std::min(w, static_cast<int>(std::ceil(g.x + g.w)));
        for (int r = r0; r < r1; ++r)
            for (int c = c0; c < c1; ++c) grid[static_cast<std::size_t>(r) * w + c] = 1;
    }
    return grid;
}

}  // namespace

BackgroundMask BackgroundMask::from_boxes(int h1, int w1, const std::vector<BBox>& prev_boxes, int h2, int w2,
                                          const std::vector<BBox>& cur_boxes, Real stride) {
    BackgroundMask m;
    m.h1 = h1;
    m.w1 = w1;
    m.h2 = h2;
    m.w2 = w2;
    m.prev = rasterize(h1, w1, prev_boxes, stride);
    m.cur = rasterize(h2, w2, cur_boxes, stride);
    return m;
}

CorrelationVolume build_volume(const FeatureMap& prev, const FeatureMap& cur, CorrelationScale scale) {
    if (prev.d != cur.d) {
        throw Error(ErrorKind::ChannelMismatch,
                    "feature channels differ: " + std::to_string(prev.d) + " vs " + std::to_string(cur.d));
    }
    const int d = prev.d;
    CorrelationVolume vol(prev.h, prev.w, cur.h, cur.w);
    const Real norm = scale == CorrelationScale::InvSqrtD && d > 0 ? 1.0 / std::sqrt(static_cast<Real>(d)) : 1.0;
    for (int i = 0; i < prev.h; ++i) {
        for (int j = 0; j < prev.w; ++j) {
            const float* a = prev.cell(i, j);
            Real* out = vol.plane(i, j);
            for (int k = 0; k < cur.h; ++k) {
                for (int l = 0; l < cur.w; ++l) {
                    const float* b = cur.cell(k, l);
                    Real acc = 0;
                    for (int c = 0; c < d; ++c) acc += static_cast<Real>(a[c]) * static_cast<Real>(b[c]);
                    out[k * cur.w + l] = scale == CorrelationScale::Raw ? acc : acc * norm;
                }
            }
        }
    }
    return vol;
}

CorrelationVolume apply_mask(const CorrelationVolume& vol, const BackgroundMask& mask, Real fill) {
    if (mask.h1 != vol.h1 || mask.w1 != vol.w1 || mask.h2 != vol.h2 || mask.w2 != vol.w2) {
        throw Error(ErrorKind::DimMismatch, "background mask does not match volume dimensions");
    }
    CorrelationVolume out = vol;
    for (int i = 0; i < vol.h1; ++i) {
        for (int j = 0; j < vol.w1; ++j) {
            Real* p = out.plane(i, j);
            const bool src_fg = mask.prev[static_cast<std::size_t>(i) * vol.w1 + j] != 0;
            for (int k = 0; k < vol.h2; ++k)
                for (int l = 0; l < vol.w2; ++l)
                    if (!src_fg || mask.cur[static_cast<std::size_t>(k) * vol.w2 + l] == 0) p[k * vol.w2 + l] = fill;
        }
    }
    return out;
}

CorrelationVolume apply_mask(const CorrelationVolume& vol, const BackgroundMask& mask) {
    const Real fill = vol.data.empty() ? 0 : *std::min_element(vol.data.begin(), vol.data.end());
    return apply_mask(vol, mask, fill);
}

}  // namespace reltrack
