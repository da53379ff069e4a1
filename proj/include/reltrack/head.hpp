#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <reltrack/core.hpp>
#include <reltrack/pyramid.hpp>

namespace reltrack {

/// RoIAligned relation map for one tracklet box: v x v x c, (row, col, channel).
struct PartRelation {
    int v = 0;
    int c = 0;
    std::vector<Real> data;

    Real at(int a, int b, int ch) const { return data[(static_cast<std::size_t>(a) * v + b) * c + ch]; }
};

/// Per-part centroid displacement (dx, dy) of detection minus tracklet, in grid units.
struct PartOffsetGrid {
    int v = 0;
    std::vector<Real> data;  // v x v x 2

    Real dx(int a, int b) const { return data[(static_cast<std::size_t>(a) * v + b) * 2]; }
    Real dy(int a, int b) const { return data[(static_cast<std::size_t>(a) * v + b) * 2 + 1]; }
};

/// Conv over the full v x v extent ((c+2) -> hidden), ReLU, Linear(hidden -> hidden/2),
/// ReLU, Linear(hidden/2 -> 1), sigmoid.
struct HeadParams {
    int v = 2;
    int c = 0;
    int hidden = 64;
    std::vector<Real> conv_w;  // [hidden][c+2][v][v]
    std::vector<Real> conv_b;  // [hidden]
    std::vector<Real> mlp1_w;  // [hidden2][hidden]
    std::vector<Real> mlp1_b;  // [hidden2]
    std::vector<Real> mlp2_w;  // [hidden2]
    Real mlp2_b = 0;

    int in_channels() const { return c + 2; }
    int hidden2() const { return hidden / 2 > 0 ? hidden / 2 : 1; }

    std::size_t conv_index(int o, int ch, int a, int b) const {
        return ((static_cast<std::size_t>(o) * in_channels() + ch) * v + a) * v + b;
    }

    /// All-zero parameters of consistent shape.
    static HeadParams zeros(int v, int c, int hidden);
    /// Uniform fan-in initialisation from a fixed seed.
    static HeadParams random(int v, int c, int hidden, std::uint64_t seed);

    std::size_t size() const;
    /// Flat views in the serialisation order: conv_w, conv_b, mlp1_w, mlp1_b, mlp2_w, mlp2_b.
    std::vector<Real> flatten() const;
    void assign(std::span<const Real> flat);

    bool operator==(const HeadParams&) const = default;
};

/// Scores in (0,1); rows are detections, columns tracklets.
struct AffinityMatrix {
    int n = 0;
    int m = 0;
    std::vector<Real> scores;

    Real at(int det, int trk) const { return scores[static_cast<std::size_t>(det) * m + trk]; }
    Real& at(int det, int trk) { return scores[static_cast<std::size_t>(det) * m + trk]; }
};

/// One bilinear sample at each bin center of a v x v partition of `grid_roi`.
PartRelation roi_align(const RelationMap& map, const BBox& grid_roi, int v);

/// Image-space boxes; displacements are divided by `stride`.
PartOffsetGrid offset_grid(const BBox& det, const BBox& trk, int v, Real stride = 8);

Real score_pair(const PartRelation& part, const PartOffsetGrid& off, const HeadParams& params);

/// Conv pre-activation contribution of the relation channels (bias excluded).
std::vector<Real> relation_response(const PartRelation& part, const HeadParams& params);
/// Finishes the forward pass given a tracklet's relation response.
Real score_from_response(std::span<const Real> response, const PartOffsetGrid& off, const HeadParams& params);

/// Box a tracklet contributes on the previous frame: its last observation when
/// Active, the Kalman estimate when Lost.
BBox reference_box(const Tracklet& trk);

AffinityMatrix build_affinity(const RelationMap& map, std::span<const BBox> tracklet_boxes,
                              std::span<const Detection> dets, const HeadParams& params, Real stride = 8);
AffinityMatrix build_affinity(const RelationMap& map, std::span<const Tracklet> trks, std::span<const Detection> dets,
                              const HeadParams& params, Real stride = 8);

HeadParams load_weights(const std::filesystem::path& path);
void save_weights(const std::filesystem::path& path, const HeadParams& params);

/// Logistic function kept strictly inside (0, 1) even where it saturates.
inline Real sigmoid(Real z) {
    const Real s = z >= 0 ? 1 / (1 + std::exp(-z)) : std::exp(z) / (1 + std::exp(z));
    return std::clamp(s, std::numeric_limits<Real>::min(), 1 - std::numeric_limits<Real>::epsilon() / 2);
}

}  // namespace reltrack
