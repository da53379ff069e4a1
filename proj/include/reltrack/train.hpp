#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <reltrack/features.hpp>
#include <reltrack/head.hpp>
#include <reltrack/pipeline.hpp>

namespace reltrack {

enum class Optimizer { SGD, AdamLike };

struct LossConfig {
    std::optional<Real> w;  // positive weight; per-batch neg/pos ratio when unset
    Real w_min = 1;
    Real w_max = 50;
    Real eps = 1e-7;
    Real lr = 1e-3;
    int epochs = 40;
    Real grad_clip = 1.0;
    Optimizer optimizer = Optimizer::AdamLike;
    Real beta1 = 0.9;
    Real beta2 = 0.999;
    Real adam_eps = 1e-8;
    Real weight_decay = 1e-4;
    std::uint64_t seed = 0;

    void validate() const;
};

/// All tracklet x detection pairs of one consecutive-frame pair.
struct PairBatch {
    std::vector<PartRelation> parts;               // one per tracklet (m)
    std::vector<std::vector<PartOffsetGrid>> offsets;  // [det][trk], n x m
    std::vector<int> labels;                       // n x m, row-major over detections

    int n() const { return static_cast<int>(offsets.size()); }
    int m() const { return static_cast<int>(parts.size()); }
    int positives() const;
};

/// Mean weighted binary cross-entropy; predictions are clamped to [eps, 1-eps].
Real wbce(std::span<const Real> preds, std::span<const int> labels, Real w, Real eps = 1e-7);
/// dL/dp for every element (zero where the clamp is active).
std::vector<Real> wbce_grad(std::span<const Real> preds, std::span<const int> labels, Real w, Real eps = 1e-7);

/// Positive weight used for a batch.
Real positive_weight(const PairBatch& batch, const LossConfig& cfg);

std::vector<Real> predict_batch(const PairBatch& batch, const HeadParams& params);

struct BatchGradient {
    Real loss = 0;
    HeadParams grad;  // same shape as the parameters
};

/// Exact analytic gradient of the batch wbce with respect to every head parameter.
BatchGradient backward(const PairBatch& batch, const HeadParams& params, Real w, Real eps = 1e-7);

/// Clamps every component to [-bound, bound].
void clip_gradients(HeadParams& grad, Real bound);

/// Stateful optimizer over flattened parameters.
class ParamOptimizer {
public:
    explicit ParamOptimizer(const LossConfig& cfg) : cfg_(cfg) {}
    void step(HeadParams& params, const HeadParams& grad);

private:
    LossConfig cfg_;
    std::vector<Real> m_, v_;
    long t_ = 0;
};

struct TrainingSequence {
    std::vector<TrackRow> gt;
    int num_frames = 0;
    FeatureProvider features;
};

/// Ground-truth pairs for every consecutive frame pair with boxes in both frames.
std::vector<PairBatch> build_batches(std::span<const TrainingSequence> seqs, const RelationConfig& rel, int v,
                                     Real stride = kFeatureStride);

struct FitResult {
    HeadParams params;
    std::vector<Real> loss_trace;  // entry 0: before training; entry k: after epoch k
};

/// Per-frame-pair full batches, clipped gradients, one optimizer step per batch.
FitResult fit_batches(std::span<const PairBatch> batches, const HeadParams& init, const LossConfig& cfg);
FitResult fit(std::span<const TrainingSequence> seqs, const RelationConfig& rel, int v, int hidden,
              const LossConfig& cfg);

/// Mean wbce over batches with their per-batch weights.
Real dataset_loss(std::span<const PairBatch> batches, const HeadParams& params, const LossConfig& cfg);

/// Probability that a random positive outranks a random negative (ties count half).
Real ranking_auc(std::span<const Real> scores, std::span<const int> labels);

struct GradCheckReport {
    int configs = 0;
    std::size_t parameters_checked = 0;
    Real max_rel_error = 0;
    bool passed = false;
};

/// Central finite differences against `backward` on random (v=2, c=8, hidden=4) heads.
GradCheckReport gradient_check(int configs = 10, std::uint64_t seed = 7, Real h = 1e-5, Real tol = 1e-6);

}  // namespace reltrack
