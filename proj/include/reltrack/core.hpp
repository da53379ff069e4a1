#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace reltrack {

using Real = double;

/// Axis-aligned box, top-left corner plus size, in pixels.
struct BBox {
    Real x = 0;
    Real y = 0;
    Real w = 1;
    Real h = 1;

    Real cx() const { return x + w / 2; }
    Real cy() const { return y + h / 2; }
    std::pair<Real, Real> center() const { return {cx(), cy()}; }
    Real area() const { return w * h; }
    bool valid() const { return w > 0 && h > 0; }

    static BBox from_center(Real cx, Real cy, Real w, Real h) { return {cx - w / 2, cy - h / 2, w, h}; }

    bool operator==(const BBox&) const = default;
};

struct Detection {
    int frame = 1;
    BBox box;
    Real score = 1;
    int class_id = 0;
};

/// Ground-truth or tracker output row: a detection with an identity.
struct TrackRow {
    int frame = 1;
    int id = -1;
    BBox box;
    Real score = 1;
    int class_id = 0;
    Real visibility = 1;
};

/// Constant-velocity state over (cx, cy, aspect, height) and their rates.
struct KalmanState {
    Eigen::Matrix<Real, 8, 1> mean = Eigen::Matrix<Real, 8, 1>::Zero();
    Eigen::Matrix<Real, 8, 8> covariance = Eigen::Matrix<Real, 8, 8>::Identity();

    BBox box() const;
};

enum class TrackState { Active, Lost, Terminated };

struct HistoryEntry {
    int frame;
    BBox box;
    int class_id;
    Real score;
};

struct Tracklet {
    int id = 0;
    int t0 = 1;
    std::vector<HistoryEntry> history;
    TrackState state = TrackState::Active;
    int lost_age = 0;
    KalmanState kalman;
    std::map<int, int> class_counts;

    const HistoryEntry& last() const { return history.back(); }

    /// Appends an observation; frames must strictly increase.
    void append(int frame, const BBox& box, int class_id, Real score);
};

struct SequenceMeta {
    std::string name = "seq";
    Real fps = 30;
    int width = 0;
    int height = 0;
    int length = 1;
};

/// Dense descriptor grid in (row, col, channel) order.
struct FeatureMap {
    int h = 0;
    int w = 0;
    int d = 0;
    int stride = 8;
    std::vector<float> data;

    FeatureMap() = default;
    FeatureMap(int h_, int w_, int d_, int stride_ = 8)
        : h(h_), w(w_), d(d_), stride(stride_), data(static_cast<std::size_t>(h_) * w_ * d_, 0.0f) {}

    float& at(int i, int j, int c) { return data[(static_cast<std::size_t>(i) * w + j) * d + c]; }
    float at(int i, int j, int c) const { return data[(static_cast<std::size_t>(i) * w + j) * d + c]; }
    const float* cell(int i, int j) const { return data.data() + (static_cast<std::size_t>(i) * w + j) * d; }

    bool operator==(const FeatureMap&) const = default;
};

Real iou(const BBox& a, const BBox& b);

/// Maps an image-space box onto the feature grid (every coordinate divided by stride).
BBox grid_box(const BBox& box, Real stride);

}  // namespace reltrack
