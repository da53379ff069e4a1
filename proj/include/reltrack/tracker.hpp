#pragma once

#include <span>
#include <vector>

#include <reltrack/core.hpp>
#include <reltrack/head.hpp>
#include <reltrack/hungarian.hpp>
#include <reltrack/kalman.hpp>

namespace reltrack {

struct AssocConfig {
    Real match_thresh = 0.3;
    Real det_high = 0.6;
    Real det_low = 0.1;
    Real init_thresh = 0.7;
    int max_lost_age = 30;
    Real iou_thresh_low = 0.5;
    /// Lost tracklets take part in the relation stage as well as the IoU stage.
    bool lost_in_relation_stage = true;
    /// Only match detections whose class equals the tracklet's birth class.
    bool class_restricted = false;
    KalmanConfig kalman;

    void validate() const;
};

/// Tracklet pool for one sequence. Terminated tracklets move to `finished`.
struct TrackerState {
    std::vector<Tracklet> tracklets;
    std::vector<Tracklet> finished;
    int next_id = 1;
    int last_frame = 0;

    /// Every tracklet ever created, ordered by id.
    std::vector<Tracklet> all_tracklets() const;
};

/// Detections with score >= det_high, in input order.
std::vector<Detection> high_score_detections(std::span<const Detection> dets, const AssocConfig& cfg);

/// Indices into `state.tracklets` that form the affinity columns of the relation stage.
std::vector<int> relation_stage_tracklets(const TrackerState& state, const AssocConfig& cfg);

/// Previous-frame boxes for the relation-stage tracklets (call before `step`).
std::vector<BBox> relation_stage_boxes(const TrackerState& state, const AssocConfig& cfg);

/// Advances the pool by one frame. `affinity` rows are the high-score
/// detections, columns the relation-stage tracklets. Returns one output row per
/// tracklet observed this frame, ordered by id.
std::vector<TrackRow> step(TrackerState& state, int frame, std::span<const Detection> dets,
                           const AffinityMatrix& affinity, const AssocConfig& cfg);

/// Greedy IoU matching against Kalman-predicted boxes (no relation stage).
std::vector<TrackRow> step_greedy_iou(TrackerState& state, int frame, std::span<const Detection> dets,
                                      const AssocConfig& cfg, Real iou_thresh);

/// Most frequent class of the tracklet; ties resolve to the smallest class id.
int true_class(const Tracklet& trk);

/// Class label for every history row, all equal to the tracklet's true class.
std::vector<int> correct_classes(const Tracklet& trk);

/// Rewrites each row's class with its tracklet's true class.
void apply_class_correction(std::vector<TrackRow>& rows, std::span<const Tracklet> tracklets);

}  // namespace reltrack
