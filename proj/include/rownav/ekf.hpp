#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "rownav/geometry.hpp"
#include "rownav/perception.hpp"

namespace rownav {

/// Fused row-relative state: distances to the left/right row walls and the
/// heading relative to the row direction, with a 3x3 covariance.
struct EkfEstimate {
    double dist_left = 0.0;   // meters
    double dist_right = 0.0;  // meters
    double heading = 0.0;     // radians, wrapped to (-pi, pi]
    Eigen::Matrix3d covariance = Eigen::Matrix3d::Identity() * 1e-2;

    Eigen::Vector3d mean() const { return {dist_left, dist_right, heading}; }
    void set_mean(const Eigen::Vector3d& m) {
        dist_left = m(0);
        dist_right = m(1);
        heading = wrap_pi(m(2));
    }
};

/// Odometry / gyro inputs driving the prediction.
struct ControlInput {
    double v_x = 0.0;   // m/s, wheel-odometry forward speed
    double omega = 0.0; // rad/s, gyro yaw rate
};

/// Constant diagonal process / measurement covariances.
struct EkfNoise {
    Eigen::Vector3d q_diag{0.001, 0.001, 0.01};
    Eigen::Vector3d r_diag{0.05, 0.05, 0.5};
};

/// State-transition Jacobian evaluated at the prior mean: identity except
/// the heading column of the two distance rows.
inline Eigen::Matrix3d jacobian_f(const EkfEstimate& est, const ControlInput& u, double dt) {
    Eigen::Matrix3d f = Eigen::Matrix3d::Identity();
    const double k = u.v_x * std::cos(est.heading) * dt;
    f(0, 2) = -k;
    f(1, 2) = k;
    return f;
}

/// Forward-Euler prediction. Moving forward with positive heading shifts
/// the robot toward the left row, so dist_left loses exactly what
/// dist_right gains and their sum is conserved.
inline EkfEstimate predict(const EkfEstimate& est, const ControlInput& u, double dt,
                           const Eigen::Vector3d& q_diag) {
    if (!(dt > 0.0)) throw std::invalid_argument("predict: dt must be positive");
    if (!std::isfinite(u.v_x) || !std::isfinite(u.omega))
        throw std::invalid_argument("predict: non-finite control input");
    if (std::abs(u.v_x) > 5.0) throw std::invalid_argument("predict: |v_x| beyond sanity bound");

    const double shift = u.v_x * std::sin(est.heading) * dt;
    const Eigen::Matrix3d f = jacobian_f(est, u, dt);

    EkfEstimate out;
    out.dist_left = est.dist_left - shift;
    out.dist_right = est.dist_right + shift;
    out.heading = wrap_pi(est.heading + u.omega * dt);
    out.covariance = f * est.covariance * f.transpose();
    out.covariance.diagonal() += q_diag;
    out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();
    return out;
}

struct KalmanUpdate {
    EkfEstimate estimate;
    bool skipped = false;  // singular innovation covariance, prior returned
};

/// Measurement update with an identity observation map restricted to the
/// components the observation marks usable. Absent components drop out by
/// deleting their rows; the heading innovation is wrapped.
inline KalmanUpdate update(const EkfEstimate& est, const RowObservation& obs,
                           const Eigen::Vector3d& r_diag) {
    std::vector<int> idx;
    Eigen::Vector3d z = Eigen::Vector3d::Zero();
    if (obs.left_usable) {
        z(static_cast<int>(idx.size())) = obs.dist_left;
        idx.push_back(0);
    }
    if (obs.right_usable) {
        z(static_cast<int>(idx.size())) = obs.dist_right;
        idx.push_back(1);
    }
    if (obs.heading_usable) {
        z(static_cast<int>(idx.size())) = obs.heading;
        idx.push_back(2);
    }
    if (idx.empty()) return {est, false};

    const int m = static_cast<int>(idx.size());
    Eigen::MatrixXd p_iz(3, m);   // P H^T
    Eigen::MatrixXd s(m, m);      // H P H^T + R
    for (int a = 0; a < m; ++a) {
        for (int r = 0; r < 3; ++r) p_iz(r, a) = est.covariance(r, idx[a]);
        for (int b = 0; b < m; ++b) s(a, b) = est.covariance(idx[a], idx[b]);
        s(a, a) += r_diag(idx[a]);
    }

    const double det = s.determinant();
    if (!(std::abs(det) > 1e-30)) return {est, true};

    Eigen::VectorXd innovation(m);
    const Eigen::Vector3d mean = est.mean();
    for (int a = 0; a < m; ++a) {
        double d = z(a) - mean(idx[a]);
        if (idx[a] == 2) d = wrap_pi(d);
        innovation(a) = d;
    }

    const Eigen::MatrixXd gain = p_iz * s.inverse();

    EkfEstimate out;
    out.set_mean(mean + gain * innovation);
    Eigen::Matrix3d ikh = Eigen::Matrix3d::Identity();
    for (int a = 0; a < m; ++a)
        for (int r = 0; r < 3; ++r) ikh(r, idx[a]) -= gain(r, a);
    out.covariance = ikh * est.covariance;
    out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();
    return {out, false};
}

/// One filter iteration: predict with the interval's odometry/gyro, then
/// correct with the validated row observation. The harness calls this once
/// per control tick.
inline EkfEstimate step(const EkfEstimate& est, const ControlInput& u, double dt,
                        const RowObservation& obs, const EkfNoise& noise) {
    return update(predict(est, u, dt, noise.q_diag), obs, noise.r_diag).estimate;
}

}  // namespace rownav
