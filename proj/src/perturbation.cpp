#include "sgdyn/perturbation.hpp"

#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

#include "sgdyn/errors.hpp"

namespace sgdyn {

namespace {

// Zero-shock equilibrium conditions E(x, x', p, p') with the next state given
// explicitly rather than derived from p.
Eigen::VectorXd conditions(const IrbcParams& p, const Eigen::VectorXd& x, const Eigen::VectorXd& xn,
                           const Eigen::VectorXd& pol, const Eigen::VectorXd& poln) {
    const int n = p.N;
    Eigen::VectorXd out(n + 1);
    const double lam = pol(n);
    const double lam_n = poln(n);
    for (int j = 0; j < n; ++j) {
        const double kp = xn(n + j);
        const double ratio = poln(j) / kp;
        const double ret = std::exp(xn(j)) * p.kappa * p.A * std::pow(kp, p.kappa - 1.0) + 1.0 - p.delta +
                           0.5 * p.phi * (ratio - 1.0) * (ratio + 1.0);
        out(j) = lam * (1.0 + p.phi * (pol(j) / x(n + j) - 1.0)) - p.beta * lam_n * ret;
    }
    double res = 0.0;
    for (int j = 0; j < n; ++j) {
        const double k = x(n + j);
        const double g = pol(j) / k - 1.0;
        const auto jj = static_cast<std::size_t>(j);
        res += std::exp(x(j)) * p.A * std::pow(k, p.kappa) -
               (std::pow(lam / p.tau[jj], -p.gamma[jj]) + pol(j) - (1.0 - p.delta) * k + 0.5 * p.phi * k * g * g);
    }
    out(n) = res;
    return out;
}

}  // namespace

void LinearPolicy::evaluate(std::span<const double> x, std::span<double> out) const {
    const auto nx = static_cast<Eigen::Index>(x_ss.size());
    const auto np = static_cast<Eigen::Index>(p_ss.size());
    for (Eigen::Index i = 0; i < np; ++i) {
        double v = p_ss[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < nx; ++j) v += P(i, j) * (x[static_cast<std::size_t>(j)] - x_ss[static_cast<std::size_t>(j)]);
        out[static_cast<std::size_t>(i)] = v;
    }
}

std::vector<double> LinearPolicy::evaluate(std::span<const double> x) const {
    std::vector<double> out(p_ss.size());
    evaluate(x, out);
    return out;
}

EquilibriumJacobians linearize(const IrbcParams& p) {
    const SteadyState ss = steady_state(p);
    const int nx = 2 * p.N;
    const int np = p.N + 1;
    const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(ss.state.data(), nx);
    const Eigen::VectorXd pol = Eigen::Map<const Eigen::VectorXd>(ss.policy.data(), np);

    EquilibriumJacobians J;
    auto diff = [&](int which, int size, Eigen::MatrixXd& M) {
        M.resize(np, size);
        for (int c = 0; c < size; ++c) {
            Eigen::VectorXd args[4] = {x, x, pol, pol};
            const double h = 1e-6 * (1.0 + std::abs(args[which](c)));
            args[which](c) += h;
            const Eigen::VectorXd up = conditions(p, args[0], args[1], args[2], args[3]);
            args[which](c) -= 2.0 * h;
            const Eigen::VectorXd dn = conditions(p, args[0], args[1], args[2], args[3]);
            M.col(c) = (up - dn) / (2.0 * h);
        }
    };
    diff(0, nx, J.Fx);
    diff(1, nx, J.Fxn);
    diff(2, np, J.Fp);
    diff(3, np, J.Fpn);
    return J;
}

LinearPolicy initial_guess_linear(const IrbcParams& p) {
    const int n = p.N;
    const int nx = 2 * n;
    const int np = n + 1;
    const EquilibriumJacobians J = linearize(p);

    // x' = Tx x + Tp p: productivity follows its mean dynamics, capital is chosen.
    Eigen::MatrixXd Tx = Eigen::MatrixXd::Zero(nx, nx);
    Eigen::MatrixXd Tp = Eigen::MatrixXd::Zero(nx, np);
    for (int j = 0; j < n; ++j) {
        Tx(j, j) = p.rho;
        Tp(n + j, j) = 1.0;
    }

    // Root count of the pencil B z' = A z with z = (x, p).
    const int nz = nx + np;
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(nz, nz);
    Eigen::MatrixXd Am = Eigen::MatrixXd::Zero(nz, nz);
    B.topLeftCorner(nx, nx).setIdentity();
    B.bottomLeftCorner(np, nx) = J.Fxn;
    B.bottomRightCorner(np, np) = J.Fpn;
    Am.topLeftCorner(nx, nx) = Tx;
    Am.topRightCorner(nx, np) = Tp;
    Am.bottomLeftCorner(np, nx) = -J.Fx;
    Am.bottomRightCorner(np, np) = -J.Fp;
    Eigen::GeneralizedEigenSolver<Eigen::MatrixXd> ges(Am, B, false);
    int stable = 0;
    for (Eigen::Index i = 0; i < nz; ++i) {
        const double num = std::abs(ges.alphas()(i));
        const double den = std::abs(ges.betas()(i));
        if (num < den * (1.0 - 1e-10)) ++stable;
    }

    LinearPolicy out;
    const SteadyState ss = steady_state(p);
    out.x_ss = ss.state;
    out.p_ss = ss.policy;
    out.stable_roots = stable;
    if (stable != nx) {
        throw BlanchardKahnError("linear system has " + std::to_string(stable) + " stable roots for " +
                                     std::to_string(nx) + " predetermined states",
                                 stable, nx);
    }

    // Fixed-point iteration on the quadratic matrix equation
    //   Fx + Fx' Tx + Fp' P Tx + (Fx' Tp + Fp + Fp' P Tp) P = 0.
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(np, nx);
    int it = 0;
    for (; it < 100000; ++it) {
        const Eigen::MatrixXd lhs = J.Fxn * Tp + J.Fp + J.Fpn * P * Tp;
        const Eigen::MatrixXd rhs = J.Fx + J.Fxn * Tx + J.Fpn * P * Tx;
        const Eigen::MatrixXd next = -lhs.partialPivLu().solve(rhs);
        const double change = (next - P).cwiseAbs().maxCoeff();
        P = next;
        if (!P.allFinite()) break;
        if (change < 1e-13) break;
    }
    if (!P.allFinite()) {
        throw BlanchardKahnError("fixed-point iteration for the linear policy diverged", stable, nx);
    }
    out.P = P;
    out.fixed_point_iterations = it + 1;
    const Eigen::MatrixXd H = Tx + Tp * P;
    out.spectral_radius = H.eigenvalues().cwiseAbs().maxCoeff();
    if (!(out.spectral_radius < 1.0)) {
        throw BlanchardKahnError("linear policy is not stable (spectral radius >= 1)", stable, nx);
    }
    return out;
}

}  // namespace sgdyn
