#include <reltrack/eval.hpp>
#include <reltrack/error.hpp>
#include <reltrack/hungarian.hpp>
#include <reltrack/mot_io.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace reltrack {

namespace {

struct FrameRows {
    std::vector<int> gt_ids, pred_ids;
    std::vector<BBox> gt_boxes, pred_boxes;
};

std::map<int, FrameRows> group(std::span<const TrackRow> gt, std::span<const TrackRow> pred) {
    std::map<int, FrameRows> frames;
    for (const auto& r : gt) {
        auto& f = frames[r.frame];
        f.gt_ids.push_back(r.id);
        f.gt_boxes.push_back(r.box);
    }
    for (const auto& r : pred) {
        auto& f = frames[r.frame];
        f.pred_ids.push_back(r.id);
        f.pred_boxes.push_back(r.box);
    }
    return frames;
}

std::map<int, int> dense_index(std::span<const TrackRow> rows) {
    std::map<int, int> idx;
    for (const auto& r : rows) idx.emplace(r.id, 0);
    int k = 0;
    for (auto& [id, i] : idx) i = k++;
    return idx;
}

void require_gt(std::span<const TrackRow> gt) {
    if (gt.empty()) throw Error(ErrorKind::EmptyGT, "ground truth has no rows");
}

}  // namespace

std::vector<std::pair<int, int>> match_frame(std::span<const BBox> gt, std::span<const BBox> pred, Real iou_min) {
    std::vector<std::pair<int, int>> out;
    if (gt.empty() || pred.empty()) return out;
    const int g = static_cast<int>(gt.size()), p = static_cast<int>(pred.size());
    // A blocked pair costs more than any set of admissible pairs, so the solver
    // first maximises the number of admissible matches.
    const Real blocked = 1 + std::max(g, p);
    CostMatrix cost(g, p);
    for (int i = 0; i < g; ++i)
        for (int j = 0; j < p; ++j) {
            const Real o = iou(gt[static_cast<std::size_t>(i)], pred[static_cast<std::size_t>(j)]);
            cost(i, j) = o >= iou_min ? 1 - o : blocked;
        }
    for (const auto& [i, j] : hungarian(cost).matches)
        if (cost(i, j) < blocked) out.emplace_back(i, j);
    return out;
}

ClearResult clear_mot(std::span<const TrackRow> gt, std::span<const TrackRow> pred, Real iou_min) {
    require_gt(gt);
    ClearResult res;
    const auto frames = group(gt, pred);
    std::map<int, int> mapping;  // gt id -> pred id of its latest match
    struct TrackStatus {
        int total = 0;
        int matched = 0;
        std::vector<char> flags;
    };
    std::map<int, TrackStatus> tracks;
    Real iou_sum = 0;

    for (const auto& [frame, f] : frames) {
        const int g = static_cast<int>(f.gt_ids.size()), p = static_cast<int>(f.pred_ids.size());
        std::vector<char> gt_used(g, 0), pred_used(p, 0);
        std::vector<std::pair<int, int>> matches;

        // Keep last frame's correspondences while they stay admissible.
        for (int i = 0; i < g; ++i) {
            const auto it = mapping.find(f.gt_ids[static_cast<std::size_t>(i)]);
            if (it == mapping.end()) continue;
            for (int j = 0; j < p; ++j) {
                if (pred_used[j] || f.pred_ids[static_cast<std::size_t>(j)] != it->second) continue;
                if (iou(f.gt_boxes[static_cast<std::size_t>(i)], f.pred_boxes[static_cast<std::size_t>(j)]) >= iou_min) {
                    gt_used[i] = pred_used[j] = 1;
                    matches.emplace_back(i, j);
                }
                break;
            }
        }

        std::vector<int> gi, pj;
        std::vector<BBox> gb, pb;
        for (int i = 0; i < g; ++i)
            if (!gt_used[i]) {
                gi.push_back(i);
                gb.push_back(f.gt_boxes[static_cast<std::size_t>(i)]);
            }
        for (int j = 0; j < p; ++j)
            if (!pred_used[j]) {
                pj.push_back(j);
                pb.push_back(f.pred_boxes[static_cast<std::size_t>(j)]);
            }
        for (const auto& [a, b] : match_frame(gb, pb, iou_min)) {
            const int i = gi[static_cast<std::size_t>(a)], j = pj[static_cast<std::size_t>(b)];
            const int gid = f.gt_ids[static_cast<std::size_t>(i)], pid = f.pred_ids[static_cast<std::size_t>(j)];
            if (auto it = mapping.find(gid); it != mapping.end() && it->second != pid) ++res.ids;
            mapping[gid] = pid;
            gt_used[i] = pred_used[j] = 1;
            matches.emplace_back(i, j);
        }

        for (const auto& [i, j] : matches)
            iou_sum += iou(f.gt_boxes[static_cast<std::size_t>(i)], f.pred_boxes[static_cast<std::size_t>(j)]);
        res.matches += static_cast<int>(matches.size());
        res.fp += p - static_cast<int>(matches.size());
        res.fn += g - static_cast<int>(matches.size());
        res.gt_count += g;
        for (int i = 0; i < g; ++i) {
            auto& ts = tracks[f.gt_ids[static_cast<std::size_t>(i)]];
            ++ts.total;
            ts.matched += gt_used[i];
            ts.flags.push_back(gt_used[i]);
        }
    }

    for (const auto& [id, ts] : tracks) {
        const Real ratio = static_cast<Real>(ts.matched) / ts.total;
        if (ratio >= 0.8) ++res.mt;
        if (ratio <= 0.2) ++res.ml;
        // Interruptions between the first and last tracked frame.
        const auto first = std::find(ts.flags.begin(), ts.flags.end(), 1);
        if (first == ts.flags.end()) continue;
        const auto last = std::find(ts.flags.rbegin(), ts.flags.rend(), 1).base();
        for (auto it = first + 1; it < last; ++it)
            if (*(it - 1) == 1 && *it == 0) ++res.frag;
    }
    res.gt_tracks = static_cast<int>(tracks.size());
    res.mota = 1 - static_cast<Real>(res.fp + res.fn + res.ids) / res.gt_count;
    res.motp = res.matches > 0 ? iou_sum / res.matches : 0;
    return res;
}

IdResult idf1(std::span<const TrackRow> gt, std::span<const TrackRow> pred, Real iou_min) {
    require_gt(gt);
    IdResult res;
    if (pred.empty()) {
        res.idfn = static_cast<int>(gt.size());
        return res;
    }
    const auto gidx = dense_index(gt), pidx = dense_index(pred);
    CostMatrix overlap = CostMatrix::Zero(static_cast<int>(gidx.size()), static_cast<int>(pidx.size()));
    for (const auto& [frame, f] : group(gt, pred)) {
        for (std::size_t i = 0; i < f.gt_ids.size(); ++i)
            for (std::size_t j = 0; j < f.pred_ids.size(); ++j)
                if (iou(f.gt_boxes[i], f.pred_boxes[j]) >= iou_min) overlap(gidx.at(f.gt_ids[i]), pidx.at(f.pred_ids[j])) += 1;
    }
    const CostMatrix cost = -overlap;
    for (const auto& [i, j] : hungarian(cost).matches) res.idtp += static_cast<int>(overlap(i, j));
    res.idfn = static_cast<int>(gt.size()) - res.idtp;
    res.idfp = static_cast<int>(pred.size()) - res.idtp;
    res.idf1 = 2.0 * res.idtp / (2.0 * res.idtp + res.idfp + res.idfn);
    return res;
}

std::array<Real, 19> hota_alphas() {
    std::array<Real, 19> a{};
    for (int k = 0; k < 19; ++k) a[static_cast<std::size_t>(k)] = 0.05 * (k + 1);
    return a;
}

HotaResult hota(std::span<const TrackRow> gt, std::span<const TrackRow> pred) {
    require_gt(gt);
    HotaResult res;
    if (pred.empty()) return res;
    const auto alphas = hota_alphas();
    const auto gidx = dense_index(gt), pidx = dense_index(pred);
    const int ng = static_cast<int>(gidx.size()), np = static_cast<int>(pidx.size());
    const auto frames = group(gt, pred);
    constexpr Real tiny = std::numeric_limits<Real>::epsilon();

    using Mat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
    Mat potential = Mat::Zero(ng, np);
    Eigen::VectorXd gt_count = Eigen::VectorXd::Zero(ng), pred_count = Eigen::VectorXd::Zero(np);
    std::map<int, Mat> sims;
    for (const auto& [frame, f] : frames) {
        const int g = static_cast<int>(f.gt_ids.size()), p = static_cast<int>(f.pred_ids.size());
        Mat sim(g, p);
        for (int i = 0; i < g; ++i)
            for (int j = 0; j < p; ++j) sim(i, j) = iou(f.gt_boxes[static_cast<std::size_t>(i)], f.pred_boxes[static_cast<std::size_t>(j)]);
        const Eigen::VectorXd row_sum = sim.rowwise().sum();
        const Eigen::RowVectorXd col_sum = sim.colwise().sum();
        for (int i = 0; i < g; ++i)
            for (int j = 0; j < p; ++j) {
                const Real denom = row_sum(i) + col_sum(j) - sim(i, j);
                if (denom > tiny) potential(gidx.at(f.gt_ids[static_cast<std::size_t>(i)]), pidx.at(f.pred_ids[static_cast<std::size_t>(j)])) += sim(i, j) / denom;
            }
        for (int id : f.gt_ids) gt_count(gidx.at(id)) += 1;
        for (int id : f.pred_ids) pred_count(pidx.at(id)) += 1;
        sims.emplace(frame, std::move(sim));
    }
    Mat alignment(ng, np);
    for (int i = 0; i < ng; ++i)
        for (int j = 0; j < np; ++j) alignment(i, j) = potential(i, j) / (gt_count(i) + pred_count(j) - potential(i, j));

    std::vector<Mat> match_counts(alphas.size(), Mat::Zero(ng, np));
    std::array<Real, 19> tp{}, fn{}, fp{};
    for (const auto& [frame, f] : frames) {
        const int g = static_cast<int>(f.gt_ids.size()), p = static_cast<int>(f.pred_ids.size());
        if (g == 0 || p == 0) {
            for (std::size_t a = 0; a < alphas.size(); ++a) {
                fn[a] += g;
                fp[a] += p;
            }
            continue;
        }
        const Mat& sim = sims.at(frame);
        CostMatrix cost(g, p);
        for (int i = 0; i < g; ++i)
            for (int j = 0; j < p; ++j)
                cost(i, j) = -alignment(gidx.at(f.gt_ids[static_cast<std::size_t>(i)]), pidx.at(f.pred_ids[static_cast<std::size_t>(j)])) * sim(i, j);
        const auto assignment = hungarian(cost);
        for (std::size_t a = 0; a < alphas.size(); ++a) {
            int matched = 0;
            for (const auto& [i, j] : assignment.matches) {
                if (sim(i, j) < alphas[a] - tiny) continue;
                ++matched;
                match_counts[a](gidx.at(f.gt_ids[static_cast<std::size_t>(i)]), pidx.at(f.pred_ids[static_cast<std::size_t>(j)])) += 1;
            }
            tp[a] += matched;
            fn[a] += g - matched;
            fp[a] += p - matched;
        }
    }

    for (std::size_t a = 0; a < alphas.size(); ++a) {
        const Mat& mc = match_counts[a];
        Real ass_sum = 0;
        for (int i = 0; i < ng; ++i)
            for (int j = 0; j < np; ++j) {
                if (mc(i, j) == 0) continue;
                ass_sum += mc(i, j) * mc(i, j) / std::max<Real>(1, gt_count(i) + pred_count(j) - mc(i, j));
            }
        const Real assa = ass_sum / std::max<Real>(1, tp[a]);
        const Real deta = tp[a] / std::max<Real>(1, tp[a] + fn[a] + fp[a]);
        res.assa_alpha[a] = assa;
        res.deta_alpha[a] = deta;
        res.hota_alpha[a] = std::sqrt(deta * assa);
    }
    auto mean = [](const std::array<Real, 19>& v) {
        Real s = 0;
        for (Real x : v) s += x;
        return s / static_cast<Real>(v.size());
    };
    res.hota = mean(res.hota_alpha);
    res.deta = mean(res.deta_alpha);
    res.assa = mean(res.assa_alpha);
    return res;
}

namespace {

ClassMetrics compute(std::span<const TrackRow> gt, std::span<const TrackRow> pred, const std::set<Metric>& metrics) {
    ClassMetrics m;
    if (metrics.count(Metric::Clear)) m.clear = clear_mot(gt, pred);
    if (metrics.count(Metric::Identity)) m.id = idf1(gt, pred);
    if (metrics.count(Metric::Hota)) m.hota = hota(gt, pred);
    return m;
}

nlohmann::ordered_json to_json(const ClassMetrics& m, const std::set<Metric>& metrics) {
    nlohmann::ordered_json j;
    if (metrics.count(Metric::Clear)) {
        j["MOTA"] = m.clear.mota;
        j["MOTP"] = m.clear.motp;
        j["IDs"] = m.clear.ids;
        j["FP"] = m.clear.fp;
        j["FN"] = m.clear.fn;
        j["MT"] = m.clear.mt;
        j["ML"] = m.clear.ml;
        j["Frag"] = m.clear.frag;
        j["GT"] = m.clear.gt_count;
    }
    if (metrics.count(Metric::Identity)) {
        j["IDF1"] = m.id.idf1;
        j["IDTP"] = m.id.idtp;
        j["IDFP"] = m.id.idfp;
        j["IDFN"] = m.id.idfn;
    }
    if (metrics.count(Metric::Hota)) {
        j["HOTA"] = m.hota.hota;
        j["DetA"] = m.hota.deta;
        j["AssA"] = m.hota.assa;
    }
    return j;
}

}  // namespace

EvalReport evaluate(std::span<const TrackRow> gt, std::span<const TrackRow> pred, const std::set<Metric>& metrics) {
    require_gt(gt);
    EvalReport rep;
    rep.metrics = metrics;
    rep.overall = compute(gt, pred, metrics);
    std::set<int> classes;
    for (const auto& r : gt) classes.insert(r.class_id);
    for (int cls : classes) {
        std::vector<TrackRow> g, p;
        for (const auto& r : gt)
            if (r.class_id == cls) g.push_back(r);
        for (const auto& r : pred)
            if (r.class_id == cls) p.push_back(r);
        const auto m = compute(g, p, metrics);
        rep.m_mota += m.clear.mota;
        rep.m_idf1 += m.id.idf1;
        rep.m_hota += m.hota.hota;
        rep.per_class.emplace(cls, m);
    }
    const auto k = static_cast<Real>(classes.size());
    rep.m_mota /= k;
    rep.m_idf1 /= k;
    rep.m_hota /= k;
    return rep;
}

std::string report_json(const EvalReport& report) {
    nlohmann::ordered_json j;
    j["overall"] = to_json(report.overall, report.metrics);
    nlohmann::ordered_json per_class = nlohmann::ordered_json::object();
    for (const auto& [cls, m] : report.per_class) per_class[std::to_string(cls)] = to_json(m, report.metrics);
    j["per_class"] = per_class;
    nlohmann::ordered_json mean;
    if (report.metrics.count(Metric::Clear)) mean["mMOTA"] = report.m_mota;
    if (report.metrics.count(Metric::Identity)) mean["mIDF1"] = report.m_idf1;
    if (report.metrics.count(Metric::Hota)) mean["mHOTA"] = report.m_hota;
    j["class_mean"] = mean;
    return j.dump(2) + "\n";
}

std::string report_table(const EvalReport& report) {
    std::vector<std::string> header{"scope"};
    if (report.metrics.count(Metric::Clear)) header.insert(header.end(), {"MOTA", "IDs", "FP", "FN", "MT", "ML", "Frag"});
    if (report.metrics.count(Metric::Identity)) header.push_back("IDF1");
    if (report.metrics.count(Metric::Hota)) header.insert(header.end(), {"HOTA", "DetA", "AssA"});

    auto fmt = [](Real x) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.4f", x);
        return std::string(buf);
    };
    auto row_for = [&](const std::string& scope, const ClassMetrics& m) {
        std::vector<std::string> r{scope};
        if (report.metrics.count(Metric::Clear)) {
            r.insert(r.end(), {fmt(m.clear.mota), std::to_string(m.clear.ids), std::to_string(m.clear.fp),
                               std::to_string(m.clear.fn), std::to_string(m.clear.mt), std::to_string(m.clear.ml),
                               std::to_string(m.clear.frag)});
        }
        if (report.metrics.count(Metric::Identity)) r.push_back(fmt(m.id.idf1));
        if (report.metrics.count(Metric::Hota)) r.insert(r.end(), {fmt(m.hota.hota), fmt(m.hota.deta), fmt(m.hota.assa)});
        return r;
    };
    std::vector<std::vector<std::string>> rows{header, row_for("all", report.overall)};
    for (const auto& [cls, m] : report.per_class) rows.push_back(row_for("class " + std::to_string(cls), m));

    std::vector<std::size_t> width(header.size(), 0);
    for (const auto& r : rows)
        for (std::size_t k = 0; k < r.size(); ++k) width[k] = std::max(width[k], r[k].size());
    std::ostringstream out;
    for (const auto& r : rows) {
        for (std::size_t k = 0; k < r.size(); ++k) {
            if (k == 0) out << r[k] << std::string(width[k] - r[k].size(), ' ');
            else out << "  " << std::string(width[k] - r[k].size(), ' ') << r[k];
        }
        out << '\n';
    }
    std::string tail;
    if (report.metrics.count(Metric::Clear)) tail += "mMOTA " + fmt(report.m_mota) + "  ";
    if (report.metrics.count(Metric::Identity)) tail += "mIDF1 " + fmt(report.m_idf1) + "  ";
    if (report.metrics.count(Metric::Hota)) tail += "mHOTA " + fmt(report.m_hota);
    while (!tail.empty() && tail.back() == ' ') tail.pop_back();
    out << tail << '\n';
    return out.str();
}

std::set<Metric> parse_metrics(const std::string& csv) {
    std::set<Metric> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item == "clear") out.insert(Metric::Clear);
        else if (item == "idf1") out.insert(Metric::Identity);
        else if (item == "hota") out.insert(Metric::Hota);
        else if (!item.empty()) throw Error(ErrorKind::InvalidConfig, "unknown metric '" + item + "'");
    }
    if (out.empty()) throw Error(ErrorKind::InvalidConfig, "no metrics selected");
    return out;
}

}  // namespace reltrack
