#include <reltrack/pyramid.hpp>
#include <reltrack/error.hpp>

#include <algorithm>
#include <cmath>
#include <string>

namespace reltrack {

namespace {

CorrelationVolume pool_level(const CorrelationVolume& src, PoolMode mode) {
    const int h2 = (src.h2 + 1) / 2;
    const int w2 = (src.w2 + 1) / 2;
    CorrelationVolume dst(src.h1, src.w1, h2, w2);
    for (int i = 0; i < src.h1; ++i) {
        for (int j = 0; j < src.w1; ++j) {
            const Real* in = src.plane(i, j);
            Real* out = dst.plane(i, j);
            for (int k = 0; k < h2; ++k) {
                // Odd sizes: the missing row/column replicates the last one.
                const int k0 = 2 * k, k1 = std::min(2 * k + 1, src.h2 - 1);
                for (int l = 0; l < w2; ++l) {
                    const int l0 = 2 * l, l1 = std::min(2 * l + 1, src.w2 - 1);
                    const Real a = in[k0 * src.w2 + l0], b = in[k0 * src.w2 + l1];
                    const Real c = in[k1 * src.w2 + l0], d = in[k1 * src.w2 + l1];
                    out[k * w2 + l] = mode == PoolMode::Average ? (a + b + c + d) / 4 : std::max({a, b, c, d});
                }
            }
        }
    }
    return dst;
}

}  // namespace

std::vector<std::pair<int, int>> lookup_offsets(int radius) {
    std::vector<std::pair<int, int>> out;
    out.reserve(static_cast<std::size_t>((2 * radius + 1) * (2 * radius + 1)));
    for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx) out.emplace_back(dy, dx);
    return out;
}

CorrelationPyramid build_pyramid(const CorrelationVolume& vol, int levels_S, PoolMode mode) {
    if (levels_S < 0) throw Error(ErrorKind::TooManyLevels, "pyramid level count must be >= 0");
    const long need = 1L << levels_S;
    if (vol.h2 < need || vol.w2 < need) {
        throw Error(ErrorKind::TooManyLevels, "grid " + std::to_string(vol.h2) + "x" + std::to_string(vol.w2) +
                                                  " too small for " + std::to_string(levels_S) + " pooled levels");
    }
    CorrelationPyramid pyr;
    pyr.levels.reserve(static_cast<std::size_t>(levels_S) + 1);
    pyr.levels.push_back(vol);
    for (int s = 1; s <= levels_S; ++s) pyr.levels.push_back(pool_level(pyr.levels.back(), mode));
    return pyr;
}

Real sample_bilinear(const Real* plane, int h, int w, Real row, Real col) {
    row = std::clamp<Real>(row, 0, h - 1);
    col = std::clamp<Real>(col, 0, w - 1);
    const int r0 = static_cast<int>(std::floor(row));
    const int c0 = static_cast<int>(std::floor(col));
    const int r1 = std::min(r0 + 1, h - 1);
    const int c1 = std::min(c0 + 1, w - 1);
    const Real fr = row - r0;
    const Real fc = col - c0;
    const Real top = plane[r0 * w + c0] * (1 - fc) + plane[r0 * w + c1] * fc;
    const Real bottom = plane[r1 * w + c0] * (1 - fc) + plane[r1 * w + c1] * fc;
    return top * (1 - fr) + bottom * fr;
}

std::vector<Real> lookup(const CorrelationPyramid& pyr, Real row, Real col, int radius) {
    if (pyr.levels.empty()) throw Error(ErrorKind::OutOfGrid, "empty pyramid");
    const auto& base = pyr.levels.front();
    if (!(row >= 0 && col >= 0 && row <= base.h1 - 1 && col <= base.w1 - 1)) {
        throw Error(ErrorKind::OutOfGrid, "lookup point outside the source grid");
    }
    const auto offsets = lookup_offsets(radius);

    // Source-dim bilinear weights; integer points collapse to one plane.
    const int i0 = static_cast<int>(std::floor(row)), j0 = static_cast<int>(std::floor(col));
    const int i1 = std::min(i0 + 1, base.h1 - 1), j1 = std::min(j0 + 1, base.w1 - 1);
    const Real fi = row - i0, fj = col - j0;
    struct Tap {
        int i, j;
        Real wgt;
    };
    std::vector<Tap> taps;
    for (const Tap t : {Tap{i0, j0, (1 - fi) * (1 - fj)}, Tap{i0, j1, (1 - fi) * fj}, Tap{i1, j0, fi * (1 - fj)},
                        Tap{i1, j1, fi * fj}}) {
        if (t.wgt != 0) taps.push_back(t);
    }

    std::vector<Real> out;
    out.reserve(pyr.levels.size() * offsets.size());
    for (int s = 0; s < pyr.num_levels(); ++s) {
        const auto& lvl = pyr.levels[static_cast<std::size_t>(s)];
        const Real scale = std::ldexp(1.0, -s);
        for (const auto& [dy, dx] : offsets) {
            Real v = 0;
            for (const auto& t : taps) {
                v += t.wgt * sample_bilinear(lvl.plane(t.i, t.j), lvl.h2, lvl.w2, row * scale + dy, col * scale + dx);
            }
            out.push_back(v);
        }
    }
    return out;
}

RelationMap build_relation_map(const CorrelationPyramid& pyr, int radius) {
    if (pyr.levels.empty()) throw Error(ErrorKind::OutOfGrid, "empty pyramid");
    const auto& base = pyr.levels.front();
    const auto offsets = lookup_offsets(radius);
    RelationMap map(base.h1, base.w1, pyr.num_levels() * static_cast<int>(offsets.size()));
    for (int i = 0; i < base.h1; ++i) {
        for (int j = 0; j < base.w1; ++j) {
            Real* out = map.data.data() + (static_cast<std::size_t>(i) * map.w + j) * map.c;
            for (int s = 0; s < pyr.num_levels(); ++s) {
                const auto& lvl = pyr.levels[static_cast<std::size_t>(s)];
                const Real scale = std::ldexp(1.0, -s);
                const Real* plane = lvl.plane(i, j);
                for (const auto& [dy, dx] : offsets) {
                    *out++ = sample_bilinear(plane, lvl.h2, lvl.w2, i * scale + dy, j * scale + dx);
                }
            }
        }
    }
    return map;
}

}  // namespace reltrack
