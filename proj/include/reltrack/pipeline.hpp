#pragma once

#include <map>
#include <optional>
#include <vector>

#include <reltrack/correlation.hpp>
#include <reltrack/features.hpp>
#include <reltrack/head.hpp>
#include <reltrack/pyramid.hpp>
#include <reltrack/tracker.hpp>

namespace reltrack {

struct RelationConfig {
    int levels = 3;  // pooled pyramid levels S
    int radius = 4;  // lookup radius R
    CorrelationScale scale = CorrelationScale::InvSqrtD;
    PoolMode pool = PoolMode::Average;
    bool mask_background = false;

    int channels() const { return relation_channels(levels, radius); }
};

enum class ClassCorrection { None, EndOfSequence, Streaming };

struct TrackOptions {
    RelationConfig relation;
    AssocConfig assoc;
    ClassCorrection correction = ClassCorrection::EndOfSequence;
};

struct TrackResult {
    std::vector<TrackRow> rows;  // frame-major, id-minor
    std::vector<Tracklet> tracklets;
};

/// Correlation volume -> optional background mask -> pyramid -> relation map.
/// Mask boxes are image-space; they are ignored unless mask_background is set.
RelationMap compute_relation_map(const FeatureMap& prev, const FeatureMap& cur, const RelationConfig& cfg,
                                 const std::vector<BBox>& prev_boxes = {}, const std::vector<BBox>& cur_boxes = {});

/// Runs the relation tracker over frames 1..num_frames.
TrackResult track_sequence(const std::map<int, std::vector<Detection>>& dets, int num_frames,
                           const FeatureProvider& features, const HeadParams& params, const TrackOptions& opts);

/// Greedy IoU / Kalman reference tracker over the same lifecycle rules.
TrackResult track_sequence_iou(const std::map<int, std::vector<Detection>>& dets, int num_frames,
                               const AssocConfig& cfg, Real iou_thresh, ClassCorrection correction);

}  // namespace reltrack
