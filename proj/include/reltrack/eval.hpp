#pragma once

#include <array>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <reltrack/core.hpp>

namespace reltrack {

/// One-to-one matching of a single frame: maximum number of pairs with
/// IoU >= iou_min, then maximum total IoU.
std::vector<std::pair<int, int>> match_frame(std::span<const BBox> gt, std::span<const BBox> pred, Real iou_min = 0.5);

struct ClearResult {
    Real mota = 0;
    Real motp = 0;  // mean IoU over matches
    int ids = 0;
    int fp = 0;
    int fn = 0;
    int mt = 0;
    int ml = 0;
    int frag = 0;
    int gt_count = 0;
    int matches = 0;
    int gt_tracks = 0;
};

ClearResult clear_mot(std::span<const TrackRow> gt, std::span<const TrackRow> pred, Real iou_min = 0.5);

struct IdResult {
    Real idf1 = 0;
    int idtp = 0;
    int idfp = 0;
    int idfn = 0;
};

IdResult idf1(std::span<const TrackRow> gt, std::span<const TrackRow> pred, Real iou_min = 0.5);

/// Localization thresholds 0.05, 0.10, ..., 0.95.
std::array<Real, 19> hota_alphas();

struct HotaResult {
    Real hota = 0;
    Real deta = 0;
    Real assa = 0;
    std::array<Real, 19> hota_alpha{};
    std::array<Real, 19> deta_alpha{};
    std::array<Real, 19> assa_alpha{};
};

HotaResult hota(std::span<const TrackRow> gt, std::span<const TrackRow> pred);

enum class Metric { Clear, Identity, Hota };

struct ClassMetrics {
    ClearResult clear;
    IdResult id;
    HotaResult hota;
};

struct EvalReport {
    std::set<Metric> metrics;
    ClassMetrics overall;
    std::map<int, ClassMetrics> per_class;  // classes with at least one GT row
    Real m_mota = 0;
    Real m_idf1 = 0;
    Real m_hota = 0;

    Real mota() const { return overall.clear.mota; }
    Real idf1() const { return overall.id.idf1; }
    Real hota() const { return overall.hota.hota; }
};

/// Class-agnostic metrics plus per-class metrics (rows filtered by class) and their means.
EvalReport evaluate(std::span<const TrackRow> gt, std::span<const TrackRow> pred,
                    const std::set<Metric>& metrics = {Metric::Clear, Metric::Identity, Metric::Hota});

std::string report_json(const EvalReport& report);
std::string report_table(const EvalReport& report);

std::set<Metric> parse_metrics(const std::string& csv);

}  // namespace reltrack
