#include <reltrack/tracker.hpp>
#include <reltrack/error.hpp>

#include <algorithm>
#include <string>
#include <tuple>
#include <unordered_map>

namespace reltrack {

namespace {

constexpr Real kBlocked = 2.0;  // above any 1 - score cost

int birth_class(const Tracklet& t) { return t.history.empty() ? 0 : t.history.front().class_id; }

void observe(Tracklet& t, int frame, const Detection& det, const AssocConfig& cfg) {
    t.kalman = kalman_update(t.kalman, det.box, cfg.kalman);
    t.append(frame, det.box, det.class_id, det.score);
    t.state = TrackState::Active;
    t.lost_age = 0;
}

TrackRow output_row(const Tracklet& t) {
    const auto& h = t.last();
    return {h.frame, t.id, h.box, h.score, h.class_id, 1};
}

// Ages unmatched tracklets, retires expired ones and spawns births. Returns the
// rows for tracklets observed at `frame`.
std::vector<TrackRow> finish_frame(TrackerState& state, int frame, std::span<const Detection> dets,
                                   const std::vector<char>& trk_matched, const std::vector<char>& det_used,
                                   const std::vector<char>& det_can_birth, const AssocConfig& cfg) {
    std::vector<Tracklet> kept;
    kept.reserve(state.tracklets.size());
    for (std::size_t k = 0; k < state.tracklets.size(); ++k) {
        Tracklet& t = state.tracklets[k];
        if (!trk_matched[k]) {
            t.state = TrackState::Lost;
            ++t.lost_age;
            if (t.lost_age > cfg.max_lost_age) {
                t.state = TrackState::Terminated;
                state.finished.push_back(std::move(t));
                continue;
            }
        }
        kept.push_back(std::move(t));
    }
    state.tracklets = std::move(kept);

    for (std::size_t i = 0; i < dets.size(); ++i) {
        if (det_used[i] || !det_can_birth[i]) continue;
        Tracklet t;
        t.id = state.next_id++;
        t.t0 = frame;
        t.kalman = kalman_initiate(dets[i].box, cfg.kalman);
        t.append(frame, dets[i].box, dets[i].class_id, dets[i].score);
        state.tracklets.push_back(std::move(t));
    }
    state.last_frame = frame;

    std::vector<TrackRow> rows;
    for (const auto& t : state.tracklets)
        if (t.state == TrackState::Active && t.last().frame == frame) rows.push_back(output_row(t));
    std::sort(rows.begin(), rows.end(), [](const TrackRow& a, const TrackRow& b) { return a.id < b.id; });
    return rows;
}

void check_frame(const TrackerState& state, int frame) {
    if (frame <= state.last_frame) {
        throw Error(ErrorKind::DimMismatch, "frame " + std::to_string(frame) + " does not follow " +
                                                std::to_string(state.last_frame));
    }
}

}  // namespace

void AssocConfig::validate() const {
    if (!(0 <= det_low && det_low <= det_high && det_high <= 1)) {
        throw Error(ErrorKind::InvalidConfig, "require 0 <= det_low <= det_high <= 1");
    }
    if (max_lost_age < 1) throw Error(ErrorKind::InvalidConfig, "max_lost_age must be >= 1");
}

std::vector<Tracklet> TrackerState::all_tracklets() const {
    std::vector<Tracklet> out = finished;
    out.insert(out.end(), tracklets.begin(), tracklets.end());
    std::sort(out.begin(), out.end(), [](const Tracklet& a, const Tracklet& b) { return a.id < b.id; });
    return out;
}

std::vector<Detection> high_score_detections(std::span<const Detection> dets, const AssocConfig& cfg) {
    std::vector<Detection> out;
    for (const auto& d : dets)
        if (d.score >= cfg.det_high) out.push_back(d);
    return out;
}

std::vector<int> relation_stage_tracklets(const TrackerState& state, const AssocConfig& cfg) {
    std::vector<int> out;
    for (std::size_t k = 0; k < state.tracklets.size(); ++k) {
        const auto& t = state.tracklets[k];
        if (t.state == TrackState::Active || (t.state == TrackState::Lost && cfg.lost_in_relation_stage)) {
            out.push_back(static_cast<int>(k));
        }
    }
    return out;
}

std::vector<BBox> relation_stage_boxes(const TrackerState& state, const AssocConfig& cfg) {
    std::vector<BBox> out;
    for (int k : relation_stage_tracklets(state, cfg)) out.push_back(reference_box(state.tracklets[static_cast<std::size_t>(k)]));
    return out;
}

std::vector<TrackRow> step(TrackerState& state, int frame, std::span<const Detection> dets,
                           const AffinityMatrix& affinity, const AssocConfig& cfg) {
    check_frame(state, frame);
    std::vector<int> high, low;
    for (std::size_t i = 0; i < dets.size(); ++i) {
        if (dets[i].score >= cfg.det_high) high.push_back(static_cast<int>(i));
        else if (dets[i].score >= cfg.det_low) low.push_back(static_cast<int>(i));
    }
    const auto stage1 = relation_stage_tracklets(state, cfg);
    if (affinity.n != static_cast<int>(high.size()) || affinity.m != static_cast<int>(stage1.size())) {
        throw Error(ErrorKind::DimMismatch, "affinity is " + std::to_string(affinity.n) + "x" +
                                                std::to_string(affinity.m) + ", expected " +
                                                std::to_string(high.size()) + "x" + std::to_string(stage1.size()));
    }

    for (auto& t : state.tracklets) t.kalman = kalman_predict(t.kalman, cfg.kalman);

    std::vector<char> trk_matched(state.tracklets.size(), 0);
    std::vector<char> det_used(dets.size(), 0);
    auto allowed = [&](int det, int trk) {
        return !cfg.class_restricted ||
               dets[static_cast<std::size_t>(det)].class_id == birth_class(state.tracklets[static_cast<std::size_t>(trk)]);
    };

    // Relation stage: high-score detections against the affinity matrix.
    if (!high.empty() && !stage1.empty()) {
        CostMatrix cost(affinity.n, affinity.m);
        for (int i = 0; i < affinity.n; ++i)
            for (int j = 0; j < affinity.m; ++j)
                cost(i, j) = allowed(high[static_cast<std::size_t>(i)], stage1[static_cast<std::size_t>(j)])
                                 ? 1 - affinity.at(i, j)
                                 : kBlocked;
        for (const auto& [i, j] : hungarian(cost).matches) {
            const int di = high[static_cast<std::size_t>(i)];
            const int tk = stage1[static_cast<std::size_t>(j)];
            if (affinity.at(i, j) < cfg.match_thresh || !allowed(di, tk)) continue;
            observe(state.tracklets[static_cast<std::size_t>(tk)], frame, dets[static_cast<std::size_t>(di)], cfg);
            trk_matched[static_cast<std::size_t>(tk)] = 1;
            det_used[static_cast<std::size_t>(di)] = 1;
        }
    }

    // IoU stage: leftover tracklets against low-score detections.
    std::vector<int> rest;
    for (std::size_t k = 0; k < state.tracklets.size(); ++k)
        if (!trk_matched[k]) rest.push_back(static_cast<int>(k));
    if (!low.empty() && !rest.empty()) {
        CostMatrix cost(static_cast<int>(low.size()), static_cast<int>(rest.size()));
        std::vector<BBox> predicted;
        for (int k : rest) predicted.push_back(state.tracklets[static_cast<std::size_t>(k)].kalman.box());
        for (std::size_t i = 0; i < low.size(); ++i)
            for (std::size_t j = 0; j < rest.size(); ++j)
                cost(static_cast<int>(i), static_cast<int>(j)) =
                    allowed(low[i], rest[j]) ? 1 - iou(dets[static_cast<std::size_t>(low[i])].box, predicted[j]) : kBlocked;
        for (const auto& [i, j] : hungarian(cost).matches) {
            const int di = low[static_cast<std::size_t>(i)];
            const int tk = rest[static_cast<std::size_t>(j)];
            if (1 - cost(i, j) < cfg.iou_thresh_low || !allowed(di, tk)) continue;
            observe(state.tracklets[static_cast<std::size_t>(tk)], frame, dets[static_cast<std::size_t>(di)], cfg);
            trk_matched[static_cast<std::size_t>(tk)] = 1;
            det_used[static_cast<std::size_t>(di)] = 1;
        }
    }

    std::vector<char> can_birth(dets.size(), 0);
    for (int i : high) can_birth[static_cast<std::size_t>(i)] = dets[static_cast<std::size_t>(i)].score >= cfg.init_thresh;
    return finish_frame(state, frame, dets, trk_matched, det_used, can_birth, cfg);
}

std::vector<TrackRow> step_greedy_iou(TrackerState& state, int frame, std::span<const Detection> dets,
                                      const AssocConfig& cfg, Real iou_thresh) {
    check_frame(state, frame);
    for (auto& t : state.tracklets) t.kalman = kalman_predict(t.kalman, cfg.kalman);

    struct Candidate {
        Real overlap;
        int det;
        int trk;
    };
    std::vector<Candidate> cands;
    for (std::size_t i = 0; i < dets.size(); ++i) {
        if (dets[i].score < cfg.det_low) continue;
        for (std::size_t k = 0; k < state.tracklets.size(); ++k) {
            const Real o = iou(dets[i].box, state.tracklets[k].kalman.box());
            if (o >= iou_thresh && (!cfg.class_restricted || dets[i].class_id == birth_class(state.tracklets[k]))) {
                cands.push_back({o, static_cast<int>(i), static_cast<int>(k)});
            }
        }
    }
    std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
        return std::tie(b.overlap, a.det, a.trk) < std::tie(a.overlap, b.det, b.trk);
    });

    std::vector<char> trk_matched(state.tracklets.size(), 0);
    std::vector<char> det_used(dets.size(), 0);
    for (const auto& c : cands) {
        if (det_used[static_cast<std::size_t>(c.det)] || trk_matched[static_cast<std::size_t>(c.trk)]) continue;
        observe(state.tracklets[static_cast<std::size_t>(c.trk)], frame, dets[static_cast<std::size_t>(c.det)], cfg);
        det_used[static_cast<std::size_t>(c.det)] = 1;
        trk_matched[static_cast<std::size_t>(c.trk)] = 1;
    }
    std::vector<char> can_birth(dets.size(), 0);
    for (std::size_t i = 0; i < dets.size(); ++i) can_birth[i] = dets[i].score >= cfg.init_thresh;
    return finish_frame(state, frame, dets, trk_matched, det_used, can_birth, cfg);
}

int true_class(const Tracklet& trk) {
    int best = 0, best_count = -1;
    for (const auto& [cls, count] : trk.class_counts) {
        if (count > best_count) {
            best = cls;
            best_count = count;
        }
    }
    return best;
}

std::vector<int> correct_classes(const Tracklet& trk) {
    return std::vector<int>(trk.history.size(), true_class(trk));
}

void apply_class_correction(std::vector<TrackRow>& rows, std::span<const Tracklet> tracklets) {
    std::unordered_map<int, int> cls;
    for (const auto& t : tracklets) cls[t.id] = true_class(t);
    for (auto& r : rows) {
        if (auto it = cls.find(r.id); it != cls.end()) r.class_id = it->second;
    }
}

}  // namespace reltrack
