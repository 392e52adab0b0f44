#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "sgdyn/irbc.hpp"

namespace sgdyn {

/// First-order approximation p(x) = p_ss + P (x - x_ss) around the
/// deterministic steady state.
struct LinearPolicy {
    std::vector<double> x_ss;
    std::vector<double> p_ss;
    Eigen::MatrixXd P;          // (N+1) x 2N
    int stable_roots = 0;       // generalized eigenvalues inside the unit circle
    double spectral_radius = 0; // of the implied state transition
    int fixed_point_iterations = 0;

    void evaluate(std::span<const double> x, std::span<double> out) const;
    std::vector<double> evaluate(std::span<const double> x) const;
};

/// Jacobians of the zero-shock equilibrium conditions at the steady state,
/// by central differences.
struct EquilibriumJacobians {
    Eigen::MatrixXd Fx, Fxn, Fp, Fpn;  // (N+1) x 2N, x 2N, x (N+1), x (N+1)
};

EquilibriumJacobians linearize(const IrbcParams& p);

/// Solves the linear rational-expectations system for the stable policy
/// matrix. Throws BlanchardKahnError when the stable-root count differs
/// from the 2N predetermined states.
LinearPolicy initial_guess_linear(const IrbcParams& p);

}  // namespace sgdyn
