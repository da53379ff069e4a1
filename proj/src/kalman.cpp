#include <reltrack/kalman.hpp>
#include <reltrack/error.hpp>

#include <algorithm>

#include <Eigen/Cholesky>

namespace reltrack {

namespace {

using Vec4 = Eigen::Matrix<Real, 4, 1>;
using Vec8 = Eigen::Matrix<Real, 8, 1>;
using Mat4 = Eigen::Matrix<Real, 4, 4>;
using Mat8 = Eigen::Matrix<Real, 8, 8>;
using Mat48 = Eigen::Matrix<Real, 4, 8>;

constexpr Real kMinHeight = 1e-3;

Vec4 measure(const BBox& box) { return Vec4(box.cx(), box.cy(), box.w / box.h, box.h); }

Mat8 transition() {
    Mat8 f = Mat8::Identity();
    for (int k = 0; k < 4; ++k) f(k, k + 4) = 1;
    return f;
}

Mat48 observation() {
    Mat48 h = Mat48::Zero();
    for (int k = 0; k < 4; ++k) h(k, k) = 1;
    return h;
}

}  // namespace

KalmanState kalman_initiate(const BBox& box, const KalmanConfig& cfg) {
    KalmanState s;
    s.mean.head<4>() = measure(box);
    s.mean.tail<4>().setZero();
    const Real h = box.h;
    Vec8 std;
    std << 2 * cfg.std_weight_position * h, 2 * cfg.std_weight_position * h, 1e-2, 2 * cfg.std_weight_position * h,
        10 * cfg.std_weight_velocity * h, 10 * cfg.std_weight_velocity * h, 1e-5, 10 * cfg.std_weight_velocity * h;
    s.covariance = std.array().square().matrix().asDiagonal();
    return s;
}

KalmanState kalman_predict(const KalmanState& state, const KalmanConfig& cfg) {
    const Real h = state.mean(3);
    Vec8 std;
    std << cfg.std_weight_position * h, cfg.std_weight_position * h, 1e-2, cfg.std_weight_position * h,
        cfg.std_weight_velocity * h, cfg.std_weight_velocity * h, 1e-5, cfg.std_weight_velocity * h;
    const Mat8 q = std.array().square().matrix().asDiagonal();
    static const Mat8 f = transition();
    KalmanState out;
    out.mean = f * state.mean;
    out.covariance = f * state.covariance * f.transpose() + q;
    out.covariance = (out.covariance + out.covariance.transpose()) / 2;
    return out;
}

KalmanState kalman_update(const KalmanState& state, const BBox& box, const KalmanConfig& cfg) {
    static const Mat48 hm = observation();
    const Real h = state.mean(3);
    Vec4 std(cfg.std_weight_measurement * h, cfg.std_weight_measurement * h, cfg.aspect_measurement_std,
             cfg.std_weight_measurement * h);
    const Mat4 r = std.array().square().matrix().asDiagonal();

    const Mat4 s = hm * state.covariance * hm.transpose() + r;
    const Eigen::LLT<Mat4> llt(s);
    if (llt.info() != Eigen::Success || !s.allFinite()) {
        throw Error(ErrorKind::SingularInnovation, "innovation covariance is not positive definite");
    }
    // K = P H^T S^-1, solved through the Cholesky factor.
    const Eigen::Matrix<Real, 8, 4> gain = llt.solve(hm * state.covariance).transpose();
    const Vec4 innovation = measure(box) - hm * state.mean;

    KalmanState out;
    out.mean = state.mean + gain * innovation;
    // Joseph form keeps the covariance symmetric positive semidefinite.
    const Mat8 ikh = Mat8::Identity() - gain * hm;
    out.covariance = ikh * state.covariance * ikh.transpose() + gain * r * gain.transpose();
    out.covariance = (out.covariance + out.covariance.transpose()) / 2;
    out.mean(3) = std::max(out.mean(3), kMinHeight);
    out.mean(2) = std::max(out.mean(2), kMinHeight);
    return out;
}

}  // namespace reltrack
