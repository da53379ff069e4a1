#include <reltrack/train.hpp>
#include <reltrack/error.hpp>
#include <reltrack/mot_io.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace reltrack {

namespace {

// Activations of one pair's forward pass.
struct PairTrace {
    std::vector<Real> a1;  // conv pre-activation
    std::vector<Real> a2;  // mlp1 pre-activation
    Real p = 0;
};

PairTrace forward_pair(std::span<const Real> response, const PartOffsetGrid& off, const HeadParams& params) {
    const int v = params.v;
    PairTrace t;
    t.a1.resize(static_cast<std::size_t>(params.hidden));
    for (int o = 0; o < params.hidden; ++o) {
        Real z = response[static_cast<std::size_t>(o)] + params.conv_b[static_cast<std::size_t>(o)];
        const Real* wx = &params.conv_w[params.conv_index(o, params.c, 0, 0)];
        const Real* wy = &params.conv_w[params.conv_index(o, params.c + 1, 0, 0)];
        for (int a = 0; a < v; ++a)
            for (int b = 0; b < v; ++b) z += wx[a * v + b] * off.dx(a, b) + wy[a * v + b] * off.dy(a, b);
        t.a1[static_cast<std::size_t>(o)] = z;
    }
    const int h2n = params.hidden2();
    t.a2.resize(static_cast<std::size_t>(h2n));
    Real z = params.mlp2_b;
    for (int q = 0; q < h2n; ++q) {
        Real acc = params.mlp1_b[static_cast<std::size_t>(q)];
        const Real* w = &params.mlp1_w[static_cast<std::size_t>(q) * params.hidden];
        for (int o = 0; o < params.hidden; ++o) acc += w[o] * std::max<Real>(0, t.a1[static_cast<std::size_t>(o)]);
        t.a2[static_cast<std::size_t>(q)] = acc;
        z += params.mlp2_w[static_cast<std::size_t>(q)] * std::max<Real>(0, acc);
    }
    t.p = sigmoid(z);
    return t;
}

std::vector<std::vector<Real>> responses(const PairBatch& batch, const HeadParams& params) {
    std::vector<std::vector<Real>> out;
    out.reserve(batch.parts.size());
    for (const auto& part : batch.parts) out.push_back(relation_response(part, params));
    return out;
}

void check_batch(const PairBatch& batch) {
    if (batch.n() == 0 || batch.m() == 0) throw Error(ErrorKind::EmptyBatch, "training batch has no pairs");
    if (batch.labels.size() != static_cast<std::size_t>(batch.n()) * batch.m()) {
        throw Error(ErrorKind::DimMismatch, "label count does not match pair count");
    }
    for (const auto& row : batch.offsets)
        if (row.size() != batch.parts.size()) throw Error(ErrorKind::DimMismatch, "ragged offset grid");
}

}  // namespace

void LossConfig::validate() const {
    if (w && !(*w > 0)) throw Error(ErrorKind::InvalidConfig, "positive weight must be > 0");
    if (!(eps > 0 && eps < 0.5)) throw Error(ErrorKind::InvalidConfig, "eps must lie in (0, 0.5)");
    if (epochs < 0) throw Error(ErrorKind::InvalidConfig, "epochs must be >= 0");
    if (!(lr > 0)) throw Error(ErrorKind::InvalidConfig, "learning rate must be > 0");
    if (!(grad_clip > 0)) throw Error(ErrorKind::InvalidConfig, "grad_clip must be > 0");
    if (!(w_min > 0 && w_min <= w_max)) throw Error(ErrorKind::InvalidConfig, "require 0 < w_min <= w_max");
}

int PairBatch::positives() const { return static_cast<int>(std::count(labels.begin(), labels.end(), 1)); }

Real wbce(std::span<const Real> preds, std::span<const int> labels, Real w, Real eps) {
    if (preds.empty()) throw Error(ErrorKind::EmptyBatch, "wbce over an empty batch");
    if (preds.size() != labels.size()) throw Error(ErrorKind::DimMismatch, "prediction and label counts differ");
    Real sum = 0;
    for (std::size_t k = 0; k < preds.size(); ++k) {
        const Real p = std::clamp(preds[k], eps, 1 - eps);
        sum += labels[k] ? -w * std::log(p) : -std::log(1 - p);
    }
    return sum / static_cast<Real>(preds.size());
}

std::vector<Real> wbce_grad(std::span<const Real> preds, std::span<const int> labels, Real w, Real eps) {
    if (preds.empty()) throw Error(ErrorKind::EmptyBatch, "wbce over an empty batch");
    if (preds.size() != labels.size()) throw Error(ErrorKind::DimMismatch, "prediction and label counts differ");
    const Real scale = 1.0 / static_cast<Real>(preds.size());
    std::vector<Real> g(preds.size(), 0);
    for (std::size_t k = 0; k < preds.size(); ++k) {
        const Real p = preds[k];
        if (p < eps || p > 1 - eps) continue;
        g[k] = scale * (labels[k] ? -w / p : 1 / (1 - p));
    }
    return g;
}

Real positive_weight(const PairBatch& batch, const LossConfig& cfg) {
    if (cfg.w) return *cfg.w;
    const int pos = batch.positives();
    const int neg = static_cast<int>(batch.labels.size()) - pos;
    if (pos == 0) return cfg.w_max;
    return std::clamp(static_cast<Real>(neg) / pos, cfg.w_min, cfg.w_max);
}

std::vector<Real> predict_batch(const PairBatch& batch, const HeadParams& params) {
    check_batch(batch);
    const auto resp = responses(batch, params);
    std::vector<Real> out;
    out.reserve(batch.labels.size());
    for (int i = 0; i < batch.n(); ++i)
        for (int j = 0; j < batch.m(); ++j)
            out.push_back(score_from_response(resp[static_cast<std::size_t>(j)],
                                              batch.offsets[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)],
                                              params));
    return out;
}

BatchGradient backward(const PairBatch& batch, const HeadParams& params, Real w, Real eps) {
    check_batch(batch);
    const int n = batch.n(), m = batch.m(), v = params.v, hid = params.hidden, h2n = params.hidden2();
    const auto resp = responses(batch, params);

    std::vector<PairTrace> traces;
    traces.reserve(static_cast<std::size_t>(n) * m);
    std::vector<Real> preds;
    preds.reserve(static_cast<std::size_t>(n) * m);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) {
            traces.push_back(forward_pair(resp[static_cast<std::size_t>(j)],
                                          batch.offsets[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)], params));
            preds.push_back(traces.back().p);
        }

    BatchGradient out;
    out.loss = wbce(preds, batch.labels, w, eps);
    const auto dp = wbce_grad(preds, batch.labels, w, eps);
    HeadParams& g = out.grad;
    g = HeadParams::zeros(v, params.c, hid);

    // Conv-output deltas summed per tracklet feed the relation-channel weights.
    std::vector<Real> delta_trk(static_cast<std::size_t>(m) * hid, 0);
    std::vector<Real> d2(static_cast<std::size_t>(h2n));
    std::vector<Real> d1(static_cast<std::size_t>(hid));
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < m; ++j) {
            const std::size_t k = static_cast<std::size_t>(i) * m + j;
            const PairTrace& t = traces[k];
            const Real dz = dp[k] * t.p * (1 - t.p);
            if (dz == 0) continue;
            g.mlp2_b += dz;
            for (int q = 0; q < h2n; ++q) {
                const Real a2 = t.a2[static_cast<std::size_t>(q)];
                g.mlp2_w[static_cast<std::size_t>(q)] += dz * std::max<Real>(0, a2);
                d2[static_cast<std::size_t>(q)] = a2 > 0 ? dz * params.mlp2_w[static_cast<std::size_t>(q)] : 0;
            }
            std::fill(d1.begin(), d1.end(), 0);
            for (int q = 0; q < h2n; ++q) {
                const Real dq = d2[static_cast<std::size_t>(q)];
                if (dq == 0) continue;
                g.mlp1_b[static_cast<std::size_t>(q)] += dq;
                const Real* w1 = &params.mlp1_w[static_cast<std::size_t>(q) * hid];
                Real* gw1 = &g.mlp1_w[static_cast<std::size_t>(q) * hid];
                for (int o = 0; o < hid; ++o) {
                    const Real a1 = t.a1[static_cast<std::size_t>(o)];
                    gw1[o] += dq * std::max<Real>(0, a1);
                    d1[static_cast<std::size_t>(o)] += dq * w1[o];
                }
            }
            const auto& off = batch.offsets[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            for (int o = 0; o < hid; ++o) {
                const Real d = t.a1[static_cast<std::size_t>(o)] > 0 ? d1[static_cast<std::size_t>(o)] : 0;
                if (d == 0) continue;
                g.conv_b[static_cast<std::size_t>(o)] += d;
                delta_trk[static_cast<std::size_t>(j) * hid + o] += d;
                Real* gx = &g.conv_w[params.conv_index(o, params.c, 0, 0)];
                Real* gy = &g.conv_w[params.conv_index(o, params.c + 1, 0, 0)];
                for (int a = 0; a < v; ++a)
                    for (int b = 0; b < v; ++b) {
                        gx[a * v + b] += d * off.dx(a, b);
                        gy[a * v + b] += d * off.dy(a, b);
                    }
            }
        }
    }
    for (int j = 0; j < m; ++j) {
        const auto& part = batch.parts[static_cast<std::size_t>(j)];
        for (int o = 0; o < hid; ++o) {
            const Real d = delta_trk[static_cast<std::size_t>(j) * hid + o];
            if (d == 0) continue;
            for (int ch = 0; ch < params.c; ++ch) {
                Real* gw = &g.conv_w[params.conv_index(o, ch, 0, 0)];
                for (int a = 0; a < v; ++a)
                    for (int b = 0; b < v; ++b) gw[a * v + b] += d * part.at(a, b, ch);
            }
        }
    }
    for (Real x : g.flatten())
        if (!std::isfinite(x)) throw Error(ErrorKind::NonFiniteGradient, "non-finite gradient");
    return out;
}

void clip_gradients(HeadParams& grad, Real bound) {
    auto flat = grad.flatten();
    for (auto& x : flat) x = std::clamp(x, -bound, bound);
    grad.assign(flat);
}

void ParamOptimizer::step(HeadParams& params, const HeadParams& grad) {
    auto theta = params.flatten();
    const auto g = grad.flatten();
    if (cfg_.optimizer == Optimizer::SGD) {
        for (std::size_t k = 0; k < theta.size(); ++k) theta[k] -= cfg_.lr * (g[k] + cfg_.weight_decay * theta[k]);
        params.assign(theta);
        return;
    }
    if (m_.empty()) {
        m_.assign(theta.size(), 0);
        v_.assign(theta.size(), 0);
    }
    ++t_;
    const Real bc1 = 1 - std::pow(cfg_.beta1, static_cast<Real>(t_));
    const Real bc2 = 1 - std::pow(cfg_.beta2, static_cast<Real>(t_));
    for (std::size_t k = 0; k < theta.size(); ++k) {
        m_[k] = cfg_.beta1 * m_[k] + (1 - cfg_.beta1) * g[k];
        v_[k] = cfg_.beta2 * v_[k] + (1 - cfg_.beta2) * g[k] * g[k];
        const Real mhat = m_[k] / bc1;
        const Real vhat = v_[k] / bc2;
        // Decoupled weight decay.
        theta[k] -= cfg_.lr * (mhat / (std::sqrt(vhat) + cfg_.adam_eps) + cfg_.weight_decay * theta[k]);
    }
    params.assign(theta);
}

std::vector<PairBatch> build_batches(std::span<const TrainingSequence> seqs, const RelationConfig& rel, int v,
                                     Real stride) {
    std::vector<PairBatch> batches;
    for (const auto& seq : seqs) {
        const auto frames = rows_by_frame(seq.gt);
        std::optional<FeatureMap> prev;
        int prev_frame = 0;
        for (int t = 2; t <= seq.num_frames; ++t) {
            const auto pit = frames.find(t - 1);
            const auto cit = frames.find(t);
            if (pit == frames.end() || cit == frames.end()) continue;
            if (!prev || prev_frame != t - 1) prev = seq.features.at(t - 1);
            FeatureMap cur = seq.features.at(t);

            std::vector<BBox> prev_boxes, cur_boxes;
            for (const auto& r : pit->second) prev_boxes.push_back(r.box);
            for (const auto& r : cit->second) cur_boxes.push_back(r.box);
            const auto map = compute_relation_map(*prev, cur, rel, prev_boxes, cur_boxes);

            PairBatch batch;
            for (const auto& b : prev_boxes) batch.parts.push_back(roi_align(map, grid_box(b, stride), v));
            for (const auto& det : cit->second) {
                std::vector<PartOffsetGrid> row;
                for (const auto& trk : pit->second) {
                    row.push_back(offset_grid(det.box, trk.box, v, stride));
                    batch.labels.push_back(det.id == trk.id ? 1 : 0);
                }
                batch.offsets.push_back(std::move(row));
            }
            batches.push_back(std::move(batch));
            prev = std::move(cur);
            prev_frame = t;
        }
    }
    return batches;
}

Real dataset_loss(std::span<const PairBatch> batches, const HeadParams& params, const LossConfig& cfg) {
    if (batches.empty()) throw Error(ErrorKind::EmptyBatch, "no training batches");
    Real sum = 0;
    for (const auto& b : batches) sum += wbce(predict_batch(b, params), b.labels, positive_weight(b, cfg), cfg.eps);
    return sum / static_cast<Real>(batches.size());
}

FitResult fit_batches(std::span<const PairBatch> batches, const HeadParams& init, const LossConfig& cfg) {
    cfg.validate();
    if (batches.empty()) throw Error(ErrorKind::EmptyBatch, "no training batches");
    int positives = 0;
    for (const auto& b : batches) positives += b.positives();
    if (positives == 0) throw Error(ErrorKind::NoPositivePairs, "no positive training pairs");

    FitResult result{init, {dataset_loss(batches, init, cfg)}};
    ParamOptimizer opt(cfg);
    std::mt19937_64 rng(cfg.seed);
    std::vector<std::size_t> order(batches.size());
    std::iota(order.begin(), order.end(), 0);
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t k : order) {
            const auto& b = batches[k];
            auto bg = backward(b, result.params, positive_weight(b, cfg), cfg.eps);
            clip_gradients(bg.grad, cfg.grad_clip);
            opt.step(result.params, bg.grad);
        }
        result.loss_trace.push_back(dataset_loss(batches, result.params, cfg));
    }
    return result;
}

FitResult fit(std::span<const TrainingSequence> seqs, const RelationConfig& rel, int v, int hidden,
              const LossConfig& cfg) {
    for (const auto& s : seqs)
        if (s.num_frames < 2) throw Error(ErrorKind::EmptyBatch, "training sequences need at least two frames");
    const auto batches = build_batches(seqs, rel, v);
    const auto init = HeadParams::random(v, rel.channels(), hidden, cfg.seed);
    return fit_batches(batches, init, cfg);
}

Real ranking_auc(std::span<const Real> scores, std::span<const int> labels) {
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    // Mann-Whitney U with average ranks for ties.
    Real rank_sum = 0;
    long pos = 0, neg = 0;
    for (std::size_t k = 0; k < idx.size();) {
        std::size_t e = k;
        while (e < idx.size() && scores[idx[e]] == scores[idx[k]]) ++e;
        const Real avg_rank = (static_cast<Real>(k) + static_cast<Real>(e - 1)) / 2 + 1;
        for (std::size_t q = k; q < e; ++q) {
            if (labels[idx[q]]) {
                rank_sum += avg_rank;
                ++pos;
            } else {
                ++neg;
            }
        }
        k = e;
    }
    if (pos == 0 || neg == 0) return 0.5;
    return (rank_sum - static_cast<Real>(pos) * (pos + 1) / 2) / (static_cast<Real>(pos) * neg);
}

GradCheckReport gradient_check(int configs, std::uint64_t seed, Real h, Real tol) {
    constexpr int v = 2, c = 8, hidden = 4;
    GradCheckReport report;
    report.configs = configs;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<Real> unit(-1, 1);
    for (int cfg_idx = 0; cfg_idx < configs; ++cfg_idx) {
        const HeadParams params = HeadParams::random(v, c, hidden, rng());
        std::uniform_int_distribution<int> dim(1, 4);
        const int n = dim(rng), m = dim(rng);
        PairBatch batch;
        for (int j = 0; j < m; ++j) {
            PartRelation part{v, c, std::vector<Real>(static_cast<std::size_t>(v) * v * c)};
            for (auto& x : part.data) x = unit(rng);
            batch.parts.push_back(std::move(part));
        }
        for (int i = 0; i < n; ++i) {
            std::vector<PartOffsetGrid> row;
            for (int j = 0; j < m; ++j) {
                PartOffsetGrid off{v, std::vector<Real>(static_cast<std::size_t>(v) * v * 2)};
                for (auto& x : off.data) x = 2 * unit(rng);
                row.push_back(std::move(off));
                batch.labels.push_back(unit(rng) > 0.3 ? 1 : 0);
            }
            batch.offsets.push_back(std::move(row));
        }
        batch.labels[0] = 1;
        const Real w = 1 + 2 * (unit(rng) + 1);

        const auto analytic = backward(batch, params, w).grad.flatten();
        auto theta = params.flatten();
        HeadParams probe = params;
        for (std::size_t k = 0; k < theta.size(); ++k) {
            const Real saved = theta[k];
            theta[k] = saved + h;
            probe.assign(theta);
            const Real up = wbce(predict_batch(batch, probe), batch.labels, w);
            theta[k] = saved - h;
            probe.assign(theta);
            const Real down = wbce(predict_batch(batch, probe), batch.labels, w);
            theta[k] = saved;
            const Real numeric = (up - down) / (2 * h);
            // Relative error with a magnitude floor so vanishing gradients compare absolutely.
            const Real denom = std::max({std::abs(analytic[k]), std::abs(numeric), Real{1e-4}});
            report.max_rel_error = std::max(report.max_rel_error, std::abs(analytic[k] - numeric) / denom);
            ++report.parameters_checked;
        }
    }
    report.passed = report.max_rel_error < tol;
    return report;
}

}  // namespace reltrack
