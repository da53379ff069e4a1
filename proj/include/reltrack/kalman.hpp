#pragma once

#include <reltrack/core.hpp>

namespace reltrack {

/// Noise model with standard deviations proportional to the box height.
struct KalmanConfig {
    Real std_weight_position = 1.0 / 20;
    Real std_weight_velocity = 1.0 / 160;
    Real std_weight_measurement = 1.0 / 20;
    Real aspect_measurement_std = 1e-1;
};

KalmanState kalman_initiate(const BBox& box, const KalmanConfig& cfg = {});
KalmanState kalman_predict(const KalmanState& state, const KalmanConfig& cfg = {});
/// Throws SingularInnovation when the innovation covariance is not positive definite.
KalmanState kalman_update(const KalmanState& state, const BBox& box, const KalmanConfig& cfg = {});

}  // namespace reltrack
