#pragma once

#include <cmath>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fot/errors.hpp"

namespace fot {

/// Nonnegative coupling matrix with prescribed marginals.
struct TransportPlan {
    Eigen::MatrixXd pi;        // n1 x n2
    Eigen::VectorXd p_source;  // length n1
    Eigen::VectorXd p_target;  // length n2
    double marginal_residual = 0.0;
    int iterations = 0;
    bool converged = false;
    std::vector<double> residual_history; // filled by the Lagrangian solver

    double residual() const {
        const double r1 = (pi.rowwise().sum() - p_source).cwiseAbs().maxCoeff();
        const double r2 = (pi.colwise().sum().transpose() - p_target).cwiseAbs().maxCoeff();
        return std::max(r1, r2);
    }
};

struct CouplingConfig {
    double gamma_h = 1.0;   // entropy weight, > 0
    double gamma_p = 0.0;   // l_p weight (negative allowed, with a warning)
    double p = 2.0;         // l_p exponent, >= 1
    int max_iters = 10000;
    double tolerance = 1e-9;
    double rho_row = 800.0; // rho_l
    double rho_col = 800.0; // rho_k
    double rho_nn = 800.0;  // rho_lk, also the dual step for lambda_lk
    int inner_sweeps = 200; // coordinate sweeps per dual update

    void validate() const {
        if (gamma_h <= 0.0) throw ParameterError("coupling: gamma_h must be > 0");
        if (tolerance <= 0.0) throw ParameterError("coupling: tolerance must be > 0");
        if (p < 1.0) throw ParameterError("coupling: p must be >= 1");
    }
};

inline Eigen::VectorXd uniform_marginal(int n) {
    return Eigen::VectorXd::Constant(n, 1.0 / n);
}

/// Eq.-(13) coupling terms: <C, pi> + gamma_h sum pi log pi
/// + gamma_p sum pi^p, with 0 log 0 := 0.
inline double coupling_objective(const Eigen::MatrixXd& C, const Eigen::MatrixXd& pi,
                                 double gamma_h, double gamma_p = 0.0, double p = 2.0) {
    double obj = (C.array() * pi.array()).sum();
    for (Eigen::Index i = 0; i < pi.rows(); ++i)
        for (Eigen::Index j = 0; j < pi.cols(); ++j) {
            const double v = pi(i, j);
            if (v > 0.0) obj += gamma_h * v * std::log(v);
            if (gamma_p != 0.0) obj += gamma_p * std::pow(v, p);
        }
    return obj;
}

namespace detail {

inline double logsumexp(const Eigen::VectorXd& v) {
    const double m = v.maxCoeff();
    if (!std::isfinite(m)) return m;
    return m + std::log((v.array() - m).exp().sum());
}

} // namespace detail

/// Entropy-regularized coupling by alternating marginal scaling in the log
/// domain. Potentials may be passed in for warm starting; they are updated
/// in place.
inline TransportPlan sinkhorn_log(const Eigen::MatrixXd& C, double gamma_h,
                                  const Eigen::VectorXd& p_source,
                                  const Eigen::VectorXd& p_target,
                                  int max_iters, double tol,
                                  Eigen::VectorXd* warm_f = nullptr,
                                  Eigen::VectorXd* warm_g = nullptr) {
    if (gamma_h <= 0.0) throw ParameterError("sinkhorn: gamma_h must be > 0");
    if (!C.allFinite()) throw ValidityError("sinkhorn: non-finite cost matrix");
    const auto n1 = C.rows();
    const auto n2 = C.cols();
    if (p_source.size() != n1 || p_target.size() != n2)
        throw DimensionError("sinkhorn: marginal lengths do not match cost matrix");

    Eigen::VectorXd f = (warm_f && warm_f->size() == n1) ? *warm_f : Eigen::VectorXd::Zero(n1);
    Eigen::VectorXd g = (warm_g && warm_g->size() == n2) ? *warm_g : Eigen::VectorXd::Zero(n2);
    const Eigen::ArrayXd log_ps = p_source.array().log();
    const Eigen::ArrayXd log_pt = p_target.array().log();
    const Eigen::ArrayXXd neg_cg = (-C / gamma_h).array();

    TransportPlan plan;
    plan.p_source = p_source;
    plan.p_target = p_target;

    // Log-plan entries (f_i + g_j - C_ij) / gamma_h, kept as a scratch buffer.
    Eigen::ArrayXXd A(n1, n2);
    const auto refresh = [&] {
        A = (neg_cg.colwise() + f.array() / gamma_h).rowwise() +
            (g.array() / gamma_h).transpose();
    };

    int it = 0;
    for (; it < max_iters; ++it) {
        // Row-wise logsumexp of -C/gamma + g/gamma, stabilized by the row max.
        A = neg_cg.rowwise() + (g.array() / gamma_h).transpose();
        Eigen::ArrayXd m = A.rowwise().maxCoeff();
        const Eigen::ArrayXd lse_rows =
            m + (A.colwise() - m).exp().rowwise().sum().log();
        f = gamma_h * (log_ps - lse_rows);

        A = neg_cg.colwise() + f.array() / gamma_h;
        m = A.colwise().maxCoeff();
        const Eigen::ArrayXd lse_cols =
            m + (A.rowwise() - m.transpose()).exp().colwise().sum().transpose().log();
        g = gamma_h * (log_pt - lse_cols);

        // Column marginals are exact after the g update; rows can drift.
        // Entries of the plan are <= 1 here, so a raw exp is safe.
        A.rowwise() += (g.array() / gamma_h).transpose();
        const double residual =
            (A.exp().rowwise().sum() - p_source.array()).abs().maxCoeff();
        if (residual <= tol) { ++it; break; }
    }
    refresh();
    plan.pi = A.exp();
    plan.marginal_residual = plan.residual();
    plan.iterations = it;
    plan.converged = plan.marginal_residual <= tol;
    if (warm_f) *warm_f = f;
    if (warm_g) *warm_g = g;
    return plan;
}

/// Textbook scaling iteration on K = exp(-C/gamma). Underflows for small
/// gamma_h; kept for cross-checking the log-domain path.
inline TransportPlan sinkhorn_naive(const Eigen::MatrixXd& C, double gamma_h,
                                    const Eigen::VectorXd& p_source,
                                    const Eigen::VectorXd& p_target,
                                    int max_iters, double tol) {
    if (gamma_h <= 0.0) throw ParameterError("sinkhorn: gamma_h must be > 0");
    if (!C.allFinite()) throw ValidityError("sinkhorn: non-finite cost matrix");
    // std::exp (not Eigen's clamped packet exp) so genuine underflow to
    // zero is observable and reported below.
    const Eigen::MatrixXd K =
        C.unaryExpr([gamma_h](double c) { return std::exp(-c / gamma_h); });
    Eigen::VectorXd u = Eigen::VectorXd::Ones(C.rows());
    Eigen::VectorXd v = Eigen::VectorXd::Ones(C.cols());
    TransportPlan plan;
    plan.p_source = p_source;
    plan.p_target = p_target;
    int it = 0;
    for (; it < max_iters; ++it) {
        const Eigen::VectorXd Kv = K * v;
        if ((Kv.array() <= 0.0).any())
            throw ConvergenceError("sinkhorn: Gibbs kernel underflow; use the log-domain solver");
        u = p_source.cwiseQuotient(Kv);
        const Eigen::VectorXd Ktu = K.transpose() * u;
        if ((Ktu.array() <= 0.0).any())
            throw ConvergenceError("sinkhorn: Gibbs kernel underflow; use the log-domain solver");
        v = p_target.cwiseQuotient(Ktu);
        plan.pi = u.asDiagonal() * K * v.asDiagonal();
        if (plan.residual() <= tol) { ++it; break; }
    }
    plan.marginal_residual = plan.residual();
    plan.iterations = it;
    plan.converged = plan.marginal_residual <= tol;
    return plan;
}

/// Default entry point: log-domain, uniform marginals unless given.
inline TransportPlan sinkhorn(const Eigen::MatrixXd& C, double gamma_h,
                              const Eigen::VectorXd& p_source,
                              const Eigen::VectorXd& p_target,
                              int max_iters = 10000, double tol = 1e-9) {
    return sinkhorn_log(C, gamma_h, p_source, p_target, max_iters, tol);
}

inline TransportPlan sinkhorn(const Eigen::MatrixXd& C, double gamma_h,
                              int max_iters = 10000, double tol = 1e-9) {
    return sinkhorn_log(C, gamma_h, uniform_marginal(static_cast<int>(C.rows())),
                        uniform_marginal(static_cast<int>(C.cols())), max_iters, tol);
}

namespace detail {

/// Derivative of the per-entry augmented Lagrangian in pi_lk. Entropy pulls
/// the derivative to -inf at 0, so a positive root exists whenever the
/// derivative at the cap is positive.
struct EntryProblem {
    double q;      // linear coefficient (cost + duals + penalty offsets)
    double quad;   // total quadratic coefficient rho_row + rho_col + rho_nn
    double gamma_h, gamma_p, p;

    double deriv(double x) const {
        double d = q + quad * x + gamma_h * (std::log(x) + 1.0);
        if (gamma_p != 0.0) d += gamma_p * p * std::pow(x, p - 1.0);
        return d;
    }

    double solve() const {
        constexpr double kCap = 1.0; // simplex guard: pi <= 1 entrywise
        if (deriv(kCap) <= 0.0) return kCap;
        double lo = 1e-18, hi = kCap;
        for (int i = 0; i < 80; ++i) {
            const double mid = 0.5 * (lo + hi);
            (deriv(mid) > 0.0 ? hi : lo) = mid;
        }
        return 0.5 * (lo + hi);
    }
};

} // namespace detail

/// Entropy + l_p coupling via the augmented Lagrangian: block minimization
/// over (pi, s) followed by dual ascent on the marginal and nonnegativity
/// multipliers. The pi block is minimized by cyclic exact coordinate
/// updates (each entry is a 1-D problem solved by bisection).
inline TransportPlan lagrangian_coupling(const Eigen::MatrixXd& C, const CouplingConfig& cfg,
                                         const Eigen::VectorXd& p_source,
                                         const Eigen::VectorXd& p_target) {
    cfg.validate();
    if (!C.allFinite()) throw ValidityError("lagrangian_coupling: non-finite cost matrix");
    if (cfg.gamma_p < 0.0) {
        static bool warned = false;
        if (!warned) {
            warned = true;
            std::cerr << "warning: gamma_p < 0; the l_p term rewards mass concentration "
                         "and is bounded only by the entrywise cap pi <= 1\n";
        }
    }
    const auto n1 = C.rows();
    const auto n2 = C.cols();

    Eigen::MatrixXd pi = p_source * p_target.transpose(); // product init
    Eigen::MatrixXd s = pi.cwiseMax(0.0);
    Eigen::VectorXd lam_row = Eigen::VectorXd::Zero(n1);
    Eigen::VectorXd lam_col = Eigen::VectorXd::Zero(n2);
    Eigen::MatrixXd lam_nn = Eigen::MatrixXd::Zero(n1, n2);

    Eigen::VectorXd row_sum = pi.rowwise().sum();
    Eigen::VectorXd col_sum = pi.colwise().sum();

    TransportPlan plan;
    plan.p_source = p_source;
    plan.p_target = p_target;

    const int dual_iters = std::max(1, cfg.max_iters);
    int t = 0;
    for (; t < dual_iters; ++t) {
        // pi block: cyclic coordinate minimization.
        for (int sweep = 0; sweep < cfg.inner_sweeps; ++sweep) {
            double max_change = 0.0;
            for (Eigen::Index l = 0; l < n1; ++l) {
                for (Eigen::Index k = 0; k < n2; ++k) {
                    const double old = pi(l, k);
                    const double row_rest = row_sum(l) - old;
                    const double col_rest = col_sum(k) - old;
                    detail::EntryProblem ep;
                    ep.q = C(l, k) + lam_row(l) + lam_col(k) + lam_nn(l, k) +
                           cfg.rho_row * (row_rest - p_source(l)) +
                           cfg.rho_col * (col_rest - p_target(k)) -
                           cfg.rho_nn * s(l, k);
                    ep.quad = cfg.rho_row + cfg.rho_col + cfg.rho_nn;
                    ep.gamma_h = cfg.gamma_h;
                    ep.gamma_p = cfg.gamma_p;
                    ep.p = cfg.p;
                    const double next = ep.solve();
                    pi(l, k) = next;
                    row_sum(l) = row_rest + next;
                    col_sum(k) = col_rest + next;
                    max_change = std::max(max_change, std::abs(next - old));
                }
            }
            if (max_change < 1e-14) break;
        }
        // s block: closed form, projected to >= 0.
        s = (pi + lam_nn / cfg.rho_nn).cwiseMax(0.0);

        // Dual ascent.
        lam_row += cfg.rho_row * (row_sum - p_source);
        lam_col += cfg.rho_col * (col_sum - p_target);
        lam_nn += cfg.rho_nn * (pi - s);

        const double r1 = (row_sum - p_source).cwiseAbs().maxCoeff();
        const double r2 = (col_sum - p_target).cwiseAbs().maxCoeff();
        const double residual = std::max(r1, r2);
        plan.residual_history.push_back(residual);
        if (residual <= cfg.tolerance) { ++t; break; }

        // Divergence guard: residual growing consistently over a window and
        // by a meaningful factor (plateau jitter near the floor is benign).
        const std::size_t w = 8;
        if (plan.residual_history.size() > w) {
            const double start = plan.residual_history[plan.residual_history.size() - w - 1];
            bool growing = residual > 10.0 * start && residual > 100.0 * cfg.tolerance;
            for (std::size_t i = plan.residual_history.size() - w;
                 growing && i < plan.residual_history.size(); ++i)
                if (plan.residual_history[i] <= plan.residual_history[i - 1]) growing = false;
            if (growing)
                throw ConvergenceError(
                    "lagrangian_coupling: marginal residual grew over " + std::to_string(w) +
                    " consecutive dual updates (last " +
                    std::to_string(plan.residual_history.back()) + ")");
        }
    }
    plan.pi = pi.cwiseMax(0.0);
    plan.marginal_residual = plan.residual();
    plan.iterations = t;
    plan.converged = plan.marginal_residual <= cfg.tolerance;
    return plan;
}

inline TransportPlan lagrangian_coupling(const Eigen::MatrixXd& C, const CouplingConfig& cfg) {
    return lagrangian_coupling(C, cfg, uniform_marginal(static_cast<int>(C.rows())),
                               uniform_marginal(static_cast<int>(C.cols())));
}

/// CSV export (l, k, pi_lk) for coupling heat maps.
inline void save_plan_csv(const TransportPlan& plan, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << "l,k,pi\n";
    char buf[64];
    for (Eigen::Index l = 0; l < plan.pi.rows(); ++l)
        for (Eigen::Index k = 0; k < plan.pi.cols(); ++k) {
            std::snprintf(buf, sizeof buf, "%.17g", plan.pi(l, k));
            f << l << ',' << k << ',' << buf << '\n';
        }
}

} // namespace fot
