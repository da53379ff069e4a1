#include <reltrack/pipeline.hpp>
#include <reltrack/error.hpp>

#include <algorithm>

namespace reltrack {

namespace {

const std::vector<Detection>& frame_dets(const std::map<int, std::vector<Detection>>& dets, int frame) {
    static const std::vector<Detection> empty;
    const auto it = dets.find(frame);
    return it == dets.end() ? empty : it->second;
}

void finalize(TrackResult& result, const TrackerState& state, ClassCorrection correction) {
    result.tracklets = state.all_tracklets();
    if (correction == ClassCorrection::EndOfSequence) apply_class_correction(result.rows, result.tracklets);
}

// Streaming correction relabels a frame's rows from the counts seen so far.
void correct_streaming(std::vector<TrackRow>& rows, const TrackerState& state) {
    apply_class_correction(rows, state.tracklets);
}

}  // namespace

RelationMap compute_relation_map(const FeatureMap& prev, const FeatureMap& cur, const RelationConfig& cfg,
                                 const std::vector<BBox>& prev_boxes, const std::vector<BBox>& cur_boxes) {
    CorrelationVolume vol = build_volume(prev, cur, cfg.scale);
    if (cfg.mask_background) {
        const auto mask = BackgroundMask::from_boxes(prev.h, prev.w, prev_boxes, cur.h, cur.w, cur_boxes, prev.stride);
        vol = apply_mask(vol, mask);
    }
    return build_relation_map(build_pyramid(vol, cfg.levels, cfg.pool), cfg.radius);
}

TrackResult track_sequence(const std::map<int, std::vector<Detection>>& dets, int num_frames,
                           const FeatureProvider& features, const HeadParams& params, const TrackOptions& opts) {
    opts.assoc.validate();
    if (params.c != opts.relation.channels()) {
        throw Error(ErrorKind::DimMismatch, "head expects " + std::to_string(params.c) + " relation channels, config gives " +
                                                std::to_string(opts.relation.channels()));
    }
    TrackerState state;
    TrackResult result;
    std::optional<FeatureMap> prev;
    for (int frame = 1; frame <= num_frames; ++frame) {
        const auto& fd = frame_dets(dets, frame);
        FeatureMap cur = features.at(frame);
        const auto high = high_score_detections(fd, opts.assoc);
        const auto boxes = relation_stage_boxes(state, opts.assoc);

        AffinityMatrix aff{static_cast<int>(high.size()), static_cast<int>(boxes.size()), {}};
        aff.scores.assign(static_cast<std::size_t>(aff.n) * aff.m, 0);
        if (prev && !high.empty() && !boxes.empty()) {
            std::vector<BBox> cur_boxes;
            for (const auto& d : fd) cur_boxes.push_back(d.box);
            const auto map = compute_relation_map(*prev, cur, opts.relation, boxes, cur_boxes);
            aff = build_affinity(map, std::span<const BBox>(boxes), high, params, cur.stride);
        }
        auto rows = step(state, frame, fd, aff, opts.assoc);
        if (opts.correction == ClassCorrection::Streaming) correct_streaming(rows, state);
        result.rows.insert(result.rows.end(), rows.begin(), rows.end());
        prev = std::move(cur);
    }
    finalize(result, state, opts.correction);
    return result;
}

TrackResult track_sequence_iou(const std::map<int, std::vector<Detection>>& dets, int num_frames,
                               const AssocConfig& cfg, Real iou_thresh, ClassCorrection correction) {
    cfg.validate();
    TrackerState state;
    TrackResult result;
    for (int frame = 1; frame <= num_frames; ++frame) {
        auto rows = step_greedy_iou(state, frame, frame_dets(dets, frame), cfg, iou_thresh);
        if (correction == ClassCorrection::Streaming) correct_streaming(rows, state);
        result.rows.insert(result.rows.end(), rows.begin(), rows.end());
    }
    finalize(result, state, correction);
    return result;
}

}  // namespace reltrack
