#include <gtest/gtest.h>

#include <reltrack/error.hpp>
#include <reltrack/hungarian.hpp>
#include <reltrack/kalman.hpp>
#include <reltrack/tracker.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>
#include <set>

using namespace reltrack;

namespace {

// Exhaustive minimum over injective maps of the smaller side into the larger.
Real brute_min_cost(const CostMatrix& c) {
    const int n = static_cast<int>(c.rows()), m = static_cast<int>(c.cols());
    const bool transpose = n > m;
    const int small = transpose ? m : n, big = transpose ? n : m;
    std::vector<int> perm(big);
    std::iota(perm.begin(), perm.end(), 0);
    Real best = std::numeric_limits<Real>::infinity();
    do {
        Real s = 0;
        for (int i = 0; i < small; ++i) s += transpose ? c(perm[i], i) : c(i, perm[i]);
        best = std::min(best, s);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

AffinityMatrix affinity(int n, int m, std::vector<Real> v) { return {n, m, std::move(v)}; }

Detection det(BBox b, Real score, int cls = 1) { return {1, b, score, cls}; }

}  // namespace

TEST(Hungarian, ThreeByThreeExample) {
    CostMatrix c(3, 3);
    c << 4, 1, 3, 2, 0, 5, 3, 2, 2;
    const auto r = hungarian(c);
    EXPECT_EQ(r.cost, 5.0);
    EXPECT_EQ(r.cost, brute_min_cost(c));
    const std::vector<std::pair<int, int>> want{{0, 1}, {1, 0}, {2, 2}};
    EXPECT_EQ(r.matches, want);
    EXPECT_TRUE(r.unmatched_rows.empty());
    EXPECT_TRUE(r.unmatched_cols.empty());
}

TEST(Hungarian, DiagonalZeros) {
    CostMatrix c = CostMatrix::Constant(4, 4, 1.0);
    c.diagonal().setZero();
    const auto r = hungarian(c);
    ASSERT_EQ(r.matches.size(), 4u);
    for (int i = 0; i < 4; ++i) EXPECT_EQ(r.matches[static_cast<std::size_t>(i)], std::make_pair(i, i));
    EXPECT_EQ(r.cost, 0.0);
}

TEST(Hungarian, Rectangular) {
    CostMatrix c(2, 3);
    c << 1, 5, 0.5, 4, 0.2, 3;
    const auto r = hungarian(c);
    EXPECT_EQ(r.matches.size(), 2u);
    EXPECT_TRUE(r.unmatched_rows.empty());
    ASSERT_EQ(r.unmatched_cols.size(), 1u);
    EXPECT_EQ(r.unmatched_cols[0], 0);
    EXPECT_DOUBLE_EQ(r.cost, 0.7);

    const auto t = hungarian(c.transpose());
    EXPECT_EQ(t.matches.size(), 2u);
    ASSERT_EQ(t.unmatched_rows.size(), 1u);
    EXPECT_EQ(t.unmatched_rows[0], 0);
}

TEST(Hungarian, EmptyMatrix) {
    const auto r = hungarian(CostMatrix(0, 3));
    EXPECT_TRUE(r.matches.empty());
    EXPECT_EQ(r.unmatched_cols.size(), 3u);
}

TEST(Hungarian, MatchesExhaustiveSearch) {
    std::mt19937_64 rng(1234);
    std::uniform_int_distribution<int> dim(1, 5);
    std::uniform_real_distribution<Real> val(-5, 10);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = dim(rng), m = dim(rng);
        CostMatrix c(n, m);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < m; ++j) c(i, j) = val(rng);
        const auto r = hungarian(c);
        const Real oracle = brute_min_cost(c);
        // Exact when summed in the same row order the oracle uses for the winner.
        EXPECT_NEAR(r.cost, oracle, 1e-12) << "trial " << trial;
        EXPECT_EQ(r.matches.size(), static_cast<std::size_t>(std::min(n, m)));

        std::set<int> rows, cols;
        for (auto [i, j] : r.matches) {
            rows.insert(i);
            cols.insert(j);
        }
        for (int i : r.unmatched_rows) EXPECT_FALSE(rows.count(i));
        for (int j : r.unmatched_cols) EXPECT_FALSE(cols.count(j));
        EXPECT_EQ(rows.size() + r.unmatched_rows.size(), static_cast<std::size_t>(n));
        EXPECT_EQ(cols.size() + r.unmatched_cols.size(), static_cast<std::size_t>(m));
    }
}

TEST(Hungarian, IntegerCostsExactEquality) {
    std::mt19937_64 rng(99);
    std::uniform_int_distribution<int> dim(1, 5), val(0, 9);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = dim(rng), m = dim(rng);
        CostMatrix c(n, m);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < m; ++j) c(i, j) = val(rng);
        EXPECT_EQ(hungarian(c).cost, brute_min_cost(c));
    }
}

TEST(Hungarian, TiesPickLexicographicallySmallest) {
    const auto r = hungarian(CostMatrix::Ones(3, 3));
    const std::vector<std::pair<int, int>> want{{0, 0}, {1, 1}, {2, 2}};
    EXPECT_EQ(r.matches, want);

    CostMatrix c(2, 2);
    c << 1, 0, 0, 1;
    CostMatrix d(2, 2);
    d << 0, 0, 0, 0;
    EXPECT_EQ(hungarian(d).matches, (std::vector<std::pair<int, int>>{{0, 0}, {1, 1}}));
    EXPECT_EQ(hungarian(c).matches, (std::vector<std::pair<int, int>>{{0, 1}, {1, 0}}));
}

TEST(Hungarian, RejectsNonFinite) {
    CostMatrix c = CostMatrix::Zero(2, 2);
    c(1, 0) = std::numeric_limits<Real>::quiet_NaN();
    try {
        hungarian(c);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::NonFiniteValue);
    }
}

TEST(Kalman, ZeroVelocityPredictKeepsPosition) {
    const BBox b{10, 20, 30, 60};
    const auto s = kalman_predict(kalman_initiate(b));
    const BBox p = s.box();
    EXPECT_NEAR(p.x, b.x, 1e-12);
    EXPECT_NEAR(p.y, b.y, 1e-12);
    EXPECT_NEAR(p.w, b.w, 1e-12);
    EXPECT_NEAR(p.h, b.h, 1e-12);
}

TEST(Kalman, MatchesOneDimensionalRecursion) {
    // With a constant height the x axis decouples into a 2-state filter.
    const KalmanConfig cfg;
    const Real h = 40;
    const Real sp = cfg.std_weight_position * h, sv = cfg.std_weight_velocity * h, sm = cfg.std_weight_measurement * h;

    Real x = 0, v = 0;
    Real pxx = 4 * sp * sp, pxv = 0, pvv = 100 * sv * sv;
    auto predict = [&] {
        x += v;
        pxx = pxx + 2 * pxv + pvv + sp * sp;
        pxv = pxv + pvv;
        pvv = pvv + sv * sv;
    };
    auto update = [&](Real z) {
        const Real s = pxx + sm * sm;
        const Real kx = pxx / s, kv = pxv / s;
        const Real innov = z - x;
        x += kx * innov;
        v += kv * innov;
        const Real nxx = (1 - kx) * pxx, nxv = (1 - kx) * pxv, nvv = pvv - kv * pxv;
        pxx = nxx;
        pxv = nxv;
        pvv = nvv;
    };

    auto s = kalman_initiate(BBox::from_center(0, 0, 20, h), cfg);
    s = kalman_predict(s, cfg);
    predict();
    s = kalman_update(s, BBox::from_center(10, 0, 20, h), cfg);
    update(10);
    s = kalman_predict(s, cfg);
    predict();

    EXPECT_NEAR(s.mean(0), x, 1e-9);
    EXPECT_NEAR(s.mean(4), v, 1e-9);
    EXPECT_NEAR(s.covariance(0, 0), pxx, 1e-9);
    EXPECT_NEAR(s.covariance(0, 4), pxv, 1e-9);
    EXPECT_NEAR(s.covariance(4, 4), pvv, 1e-9);
    EXPECT_GT(x, 10);
    EXPECT_LT(x, 20);
}

TEST(Kalman, ConfidentMeasurementsExtrapolateVelocity) {
    KalmanConfig cfg;
    cfg.std_weight_measurement = 1e-6;
    cfg.std_weight_velocity = 10;
    auto s = kalman_initiate(BBox::from_center(0, 0, 20, 40), cfg);
    s = kalman_predict(s, cfg);
    s = kalman_update(s, BBox::from_center(10, 0, 20, 40), cfg);
    s = kalman_predict(s, cfg);
    EXPECT_NEAR(s.mean(0), 20, 0.1);
}

TEST(Kalman, CovarianceStaysSymmetricPsd) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<Real> jitter(-5, 5);
    auto s = kalman_initiate({100, 100, 30, 60});
    for (int k = 0; k < 100; ++k) {
        s = kalman_predict(s);
        const BBox b = s.box();
        s = kalman_update(s, {b.x + jitter(rng), b.y + jitter(rng), std::max(5.0, b.w + jitter(rng)),
                              std::max(5.0, b.h + jitter(rng))});
        EXPECT_LT((s.covariance - s.covariance.transpose()).cwiseAbs().maxCoeff(), 1e-12);
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix<Real, 8, 8>> eig(s.covariance);
        EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-9);
    }
}

TEST(Kalman, SingularInnovation) {
    KalmanConfig cfg;
    cfg.std_weight_measurement = 0;
    cfg.aspect_measurement_std = 0;
    KalmanState s = kalman_initiate({0, 0, 10, 10}, cfg);
    s.covariance.setZero();
    try {
        kalman_update(s, {1, 1, 10, 10}, cfg);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::SingularInnovation);
    }
}

class StepTest : public ::testing::Test {
protected:
    AssocConfig cfg;
    TrackerState state;
    const BBox box{0, 0, 10, 10};

    void SetUp() override { step(state, 1, std::vector{det(box, 0.9)}, affinity(1, 0, {}), cfg); }
};

TEST_F(StepTest, BirthAssignsFirstId) {
    ASSERT_EQ(state.tracklets.size(), 1u);
    EXPECT_EQ(state.tracklets[0].id, 1);
    EXPECT_EQ(state.next_id, 2);
}

TEST_F(StepTest, HighAffinityMatches) {
    const auto rows = step(state, 2, std::vector{det({1, 0, 10, 10}, 0.9)}, affinity(1, 1, {0.9}), cfg);
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(rows[0].id, 1);
    EXPECT_EQ(state.tracklets.size(), 1u);
    EXPECT_EQ(state.tracklets[0].state, TrackState::Active);
    EXPECT_EQ(state.tracklets[0].history.size(), 2u);
}

TEST_F(StepTest, LowAffinityLosesAndBirths) {
    const auto rows = step(state, 2, std::vector{det({1, 0, 10, 10}, 0.9)}, affinity(1, 1, {0.1}), cfg);
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(rows[0].id, 2);
    ASSERT_EQ(state.tracklets.size(), 2u);
    EXPECT_EQ(state.tracklets[0].state, TrackState::Lost);
    EXPECT_EQ(state.tracklets[0].lost_age, 1);
}

TEST_F(StepTest, LostTrackRecoveredByLowScoreDetection) {
    step(state, 2, std::vector<Detection>{}, affinity(0, 1, {}), cfg);
    ASSERT_EQ(state.tracklets[0].state, TrackState::Lost);
    // Zero velocity keeps the prediction on `box`; a 10x8 box inside it overlaps at 80/100.
    const BBox low{0, 0, 10, 8};
    ASSERT_DOUBLE_EQ(iou(low, box), 0.8);
    const auto rows = step(state, 3, std::vector{det(low, 0.3)}, affinity(0, 1, {}), cfg);
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(rows[0].id, 1);
    EXPECT_EQ(state.tracklets[0].state, TrackState::Active);
    EXPECT_EQ(state.tracklets[0].lost_age, 0);
}

TEST_F(StepTest, LowScoreDetectionBelowIouGateIgnored) {
    const auto rows = step(state, 2, std::vector{det({6, 6, 10, 10}, 0.3)}, affinity(0, 1, {}), cfg);
    EXPECT_TRUE(rows.empty());
    EXPECT_EQ(state.tracklets.size(), 1u);
}

TEST_F(StepTest, TerminatesAfterMaxLostAge) {
    cfg.max_lost_age = 2;
    for (int f = 2; f <= 3; ++f) step(state, f, std::vector<Detection>{}, affinity(0, 1, {}), cfg);
    EXPECT_EQ(state.tracklets.size(), 1u);
    step(state, 4, std::vector<Detection>{}, affinity(0, 1, {}), cfg);
    EXPECT_TRUE(state.tracklets.empty());
    ASSERT_EQ(state.finished.size(), 1u);
    EXPECT_EQ(state.finished[0].state, TrackState::Terminated);
}

TEST_F(StepTest, DimMismatch) {
    try {
        step(state, 2, std::vector{det(box, 0.9)}, affinity(1, 2, {0.5, 0.5}), cfg);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::DimMismatch);
    }
}

TEST_F(StepTest, ClassRestrictionBlocksCrossClassMatch) {
    TrackerState agnostic = state;
    cfg.class_restricted = true;
    auto rows = step(state, 2, std::vector{det(box, 0.9, 2)}, affinity(1, 1, {0.9}), cfg);
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(rows[0].id, 2);

    cfg.class_restricted = false;
    rows = step(agnostic, 2, std::vector{det(box, 0.9, 2)}, affinity(1, 1, {0.9}), cfg);
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(rows[0].id, 1);
    EXPECT_EQ(agnostic.tracklets[0].class_counts.at(1), 1);
    EXPECT_EQ(agnostic.tracklets[0].class_counts.at(2), 1);
}

TEST_F(StepTest, ScoreBelowInitThreshDoesNotSpawn) {
    step(state, 2, std::vector{det({50, 50, 10, 10}, 0.65)}, affinity(1, 1, {0.0}), cfg);
    EXPECT_EQ(state.next_id, 2);
}

namespace {

std::vector<std::vector<TrackRow>> random_run(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<Real> u(0, 1);
    std::uniform_int_distribution<int> count(0, 6);
    AssocConfig cfg;
    TrackerState state;
    std::vector<std::vector<TrackRow>> out;
    for (int f = 1; f <= 40; ++f) {
        std::vector<Detection> dets;
        const int n = count(rng);
        for (int i = 0; i < n; ++i)
            dets.push_back({f, {100 * u(rng), 100 * u(rng), 5 + 20 * u(rng), 5 + 20 * u(rng)}, u(rng),
                            1 + static_cast<int>(3 * u(rng))});
        const auto high = high_score_detections(dets, cfg);
        const auto cols = relation_stage_tracklets(state, cfg);
        AffinityMatrix aff{static_cast<int>(high.size()), static_cast<int>(cols.size()), {}};
        for (int k = 0; k < aff.n * aff.m; ++k) aff.scores.push_back(u(rng));
        out.push_back(step(state, f, dets, aff, cfg));
    }
    return out;
}

}  // namespace

TEST(StepProperties, UniqueIdsAndMonotoneBirths) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        int max_seen = 0;
        for (const auto& rows : random_run(seed)) {
            std::set<int> ids;
            for (const auto& r : rows) {
                EXPECT_TRUE(ids.insert(r.id).second);
                if (r.id > max_seen) {
                    EXPECT_EQ(r.id, max_seen + 1) << "ids are not dense";
                    max_seen = std::max(max_seen, r.id);
                }
            }
            EXPECT_TRUE(std::is_sorted(rows.begin(), rows.end(),
                                       [](const TrackRow& a, const TrackRow& b) { return a.id < b.id; }));
        }
    }
}

TEST(StepProperties, Deterministic) {
    const auto a = random_run(42), b = random_run(42);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t f = 0; f < a.size(); ++f) {
        ASSERT_EQ(a[f].size(), b[f].size());
        for (std::size_t k = 0; k < a[f].size(); ++k) {
            EXPECT_EQ(a[f][k].id, b[f][k].id);
            EXPECT_EQ(a[f][k].box, b[f][k].box);
            EXPECT_EQ(a[f][k].class_id, b[f][k].class_id);
        }
    }
}

TEST(StepProperties, RejectsNonIncreasingFrame) {
    TrackerState state;
    AssocConfig cfg;
    step(state, 3, std::vector<Detection>{}, affinity(0, 0, {}), cfg);
    EXPECT_THROW(step(state, 3, std::vector<Detection>{}, affinity(0, 0, {}), cfg), Error);
}

TEST(AssocConfig, Validation) {
    AssocConfig cfg;
    EXPECT_NO_THROW(cfg.validate());
    cfg.det_low = 0.7;
    EXPECT_THROW(cfg.validate(), Error);
    cfg = {};
    cfg.max_lost_age = 0;
    EXPECT_THROW(cfg.validate(), Error);
}

namespace {

Tracklet with_classes(const std::vector<int>& classes) {
    Tracklet t;
    t.id = 7;
    for (std::size_t k = 0; k < classes.size(); ++k) t.append(static_cast<int>(k) + 1, {0, 0, 1, 1}, classes[k], 1);
    return t;
}

int count_oracle(const std::vector<int>& classes) {
    int best = 0, best_n = 0;
    for (int c : std::set<int>(classes.begin(), classes.end())) {
        const int n = static_cast<int>(std::count(classes.begin(), classes.end(), c));
        if (n > best_n) {
            best = c;
            best_n = n;
        }
    }
    return best;
}

}  // namespace

TEST(ClassCorrection, MajorityRule) {
    constexpr int car = 3, bus = 6;
    const auto t = with_classes({car, car, bus});
    EXPECT_EQ(correct_classes(t), (std::vector<int>{car, car, car}));
}

TEST(ClassCorrection, TieGoesToSmallestId) {
    constexpr int car = 3, bus = 6;
    EXPECT_EQ(true_class(with_classes({bus, car})), car);
    EXPECT_EQ(true_class(with_classes({car, bus})), car);
}

TEST(ClassCorrection, CountingOracle) {
    constexpr int ped = 1, rider = 2;
    const std::vector<int> seq{rider, ped, rider, rider, ped, rider, rider};
    EXPECT_EQ(true_class(with_classes(seq)), count_oracle(seq));
    EXPECT_EQ(true_class(with_classes(seq)), rider);

    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> cls(1, 4), len(1, 12);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<int> classes(static_cast<std::size_t>(len(rng)));
        for (auto& c : classes) c = cls(rng);
        const auto t = with_classes(classes);
        const int want = count_oracle(classes);
        EXPECT_EQ(true_class(t), want);
        // The majority class's rows keep their label.
        const auto fixed = correct_classes(t);
        for (std::size_t k = 0; k < classes.size(); ++k)
            if (classes[k] == want) {
                EXPECT_EQ(fixed[k], classes[k]);
            }
    }
}

TEST(ClassCorrection, ApplyRewritesRows) {
    const auto t = with_classes({2, 2, 5});
    std::vector<TrackRow> rows{{1, 7, {}, 1, 2, 1}, {3, 7, {}, 1, 5, 1}, {3, 8, {}, 1, 5, 1}};
    apply_class_correction(rows, std::span<const Tracklet>(&t, 1));
    EXPECT_EQ(rows[0].class_id, 2);
    EXPECT_EQ(rows[1].class_id, 2);
    EXPECT_EQ(rows[2].class_id, 5);
}
