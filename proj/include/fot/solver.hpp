#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "fot/coupling.hpp"
#include "fot/transport_operator.hpp"

namespace fot {

struct SolverConfig {
    double eta = 1.0;      // HS-norm weight
    double gamma_h = 20.0; // entropy weight
    double gamma_p = 0.0;  // l_p weight; 0 selects the Sinkhorn route
    double p = 2.0;
    int k1 = 15;
    int k2 = 15;
    double lr_lambda = 4e-4;
    double lr_pi = 1e-5;
    int t_max = 1000;
    int inner_lambda_steps = 20;
    double rho = 800.0;
    double coupling_tol = 1e-9;
    int coupling_max_iters = 10000;
    double rel_decrease_tol = 1e-8; // stop after 10 outer iterations below this
    // Trapezoid-weighted source coefficients (a ~= integral of phi * y)
    // instead of the plain dot product; makes the coefficient scale
    // independent of the per-curve design-point count.
    bool quadrature_weighted = false;
    // Optional warm start; empty means zero initialization. Must be k2 x k1
    // when set. Used by continuation schemes that chain fits.
    Eigen::MatrixXd lambda_init;
    // Start from the identity embedding instead of zero (ignored when
    // lambda_init is set). The first coupling solve then sees raw
    // curve-to-curve distances rather than a row-constant cost, which
    // carries correspondence information whenever source and target
    // domains overlap.
    bool identity_init = false;
    std::uint64_t seed = 0;

    void validate() const {
        if (eta < 0.0) throw ParameterError("solver: eta must be >= 0");
        if (k1 < 1 || k2 < 1) throw ParameterError("solver: K1, K2 must be >= 1");
        if (lr_lambda <= 0.0) throw ParameterError("solver: lr_lambda must be > 0");
        if (t_max < 1) throw ParameterError("solver: t_max must be >= 1");
    }

    /// Appendix-style simulation coefficients.
    static SolverConfig preset_appendix() {
        SolverConfig c;
        c.eta = 0.001;
        c.gamma_h = 40.0;
        c.gamma_p = -10.0;
        c.p = 3.0;
        c.rho = 800.0;
        c.lr_lambda = 4e-4;
        c.lr_pi = 1e-5;
        c.t_max = 1000;
        return c;
    }

    /// Simulation-study coefficients.
    static SolverConfig preset_sim51() {
        SolverConfig c;
        c.eta = 1.0;
        c.gamma_h = 20.0;
        c.gamma_p = 0.0;
        c.lr_lambda = 4e-4;
        c.t_max = 1000;
        return c;
    }
};

struct ObjectiveRecord {
    double total = 0.0;
    double transport = 0.0; // sum C pi
    double entropy = 0.0;   // gamma_h sum pi log pi
    double lp = 0.0;        // gamma_p sum pi^p
    double ridge = 0.0;     // eta ||Lambda||_F^2
};

struct FitResult {
    Eigen::MatrixXd lambda;
    TransportPlan plan;
    std::vector<ObjectiveRecord> trace;
    bool converged = false;
    std::string message;
};

namespace detail {

/// Gradient of sum_{l,k} pi_lk C_lk(Lambda) + eta ||Lambda||_F^2:
///   2 sum pi_lk V^T (V Lambda a_l - y_2k) a_l^T + 2 eta Lambda
/// expanded through the cached Gram matrices M_k = V^T V and w_k = V^T y.
inline Eigen::MatrixXd grad_lambda_ws(const Eigen::MatrixXd& lambda, const Eigen::MatrixXd& pi,
                                      const CostWorkspace& ws, double eta) {
    Eigen::MatrixXd grad = 2.0 * eta * lambda;
    std::vector<Eigen::VectorXd> pushed(static_cast<std::size_t>(ws.n1));
    for (int l = 0; l < ws.n1; ++l) pushed[l] = lambda * ws.src_coef[l];
    for (int k = 0; k < ws.n2; ++k) {
        const auto& M = ws.tgt_gram[k];
        const auto& w = ws.tgt_proj[k];
        for (int l = 0; l < ws.n1; ++l) {
            const double weight = pi(l, k);
            if (weight == 0.0) continue;
            grad.noalias() +=
                (2.0 * weight) * ((M * pushed[l] - w) * ws.src_coef[l].transpose());
        }
    }
    return grad;
}

inline ObjectiveRecord objective_record(const Eigen::MatrixXd& C, const Eigen::MatrixXd& pi,
                                        const Eigen::MatrixXd& lambda, const SolverConfig& cfg) {
    ObjectiveRecord rec;
    rec.transport = (C.array() * pi.array()).sum();
    for (Eigen::Index i = 0; i < pi.rows(); ++i)
        for (Eigen::Index j = 0; j < pi.cols(); ++j) {
            const double v = pi(i, j);
            if (v > 0.0) rec.entropy += cfg.gamma_h * v * std::log(v);
            if (cfg.gamma_p != 0.0) rec.lp += cfg.gamma_p * std::pow(v, cfg.p);
        }
    rec.ridge = cfg.eta * lambda.squaredNorm();
    rec.total = rec.transport + rec.entropy + rec.lp + rec.ridge;
    return rec;
}

} // namespace detail

/// Exact gradient of the pi-weighted transport cost plus the HS penalty.
inline Eigen::MatrixXd grad_lambda(const OperatorCoeffs& op, const Eigen::MatrixXd& pi,
                                   const FunctionalDataset& source,
                                   const FunctionalDataset& target, double eta,
                                   bool quadrature_weighted = false) {
    const auto ws = CostWorkspace::build(op.source_basis, op.target_basis, source, target,
                                         quadrature_weighted);
    if (pi.rows() != ws.n1 || pi.cols() != ws.n2)
        throw DimensionError("grad_lambda: pi dimensions do not match datasets");
    return detail::grad_lambda_ws(op.lambda, pi, ws, eta);
}

/// Alternating minimization over (Lambda, pi). One coupling solve followed
/// by a fixed number of Lambda gradient steps per outer iteration; the
/// Sinkhorn route is taken when gamma_p == 0, the augmented Lagrangian
/// otherwise. Stops at t_max or when the relative objective decrease stays
/// below rel_decrease_tol for 10 consecutive iterations.
inline FitResult fit(const FunctionalDataset& source, const FunctionalDataset& target,
                     const BasisSet& source_basis, const BasisSet& target_basis,
                     const SolverConfig& cfg) {
    cfg.validate();
    source.validate();
    target.validate();
    if (cfg.k1 > source_basis.count() || cfg.k2 > target_basis.count())
        throw DimensionError("fit: basis counts smaller than configured K1/K2");

    // Work with the bases restricted to the configured (K1, K2).
    const BasisSet src_b = source_basis.truncated(cfg.k1);
    const BasisSet tgt_b = target_basis.truncated(cfg.k2);
    CostWorkspace ws =
        CostWorkspace::build(src_b, tgt_b, source, target, cfg.quadrature_weighted);

    const Eigen::VectorXd p_src = uniform_marginal(ws.n1);
    const Eigen::VectorXd p_tgt = uniform_marginal(ws.n2);

    Eigen::MatrixXd lambda = Eigen::MatrixXd::Zero(cfg.k2, cfg.k1);
    if (cfg.lambda_init.size() != 0) {
        if (cfg.lambda_init.rows() != cfg.k2 || cfg.lambda_init.cols() != cfg.k1)
            throw DimensionError("fit: lambda_init must be K2 x K1");
        lambda = cfg.lambda_init;
    } else if (cfg.identity_init) {
        lambda = Eigen::MatrixXd::Identity(cfg.k2, cfg.k1);
    }
    TransportPlan plan;
    plan.pi = p_src * p_tgt.transpose();
    plan.p_source = p_src;
    plan.p_target = p_tgt;

    Eigen::VectorXd warm_f, warm_g; // Sinkhorn potentials carried across iterations

    FitResult result;
    int low_decrease_streak = 0;
    for (int t = 0; t < cfg.t_max; ++t) {
        Eigen::MatrixXd C = ws.cost_matrix(lambda);

        if (cfg.gamma_p == 0.0) {
            plan = sinkhorn_log(C, cfg.gamma_h, p_src, p_tgt, cfg.coupling_max_iters,
                                cfg.coupling_tol, &warm_f, &warm_g);
        } else {
            CouplingConfig cc;
            cc.gamma_h = cfg.gamma_h;
            cc.gamma_p = cfg.gamma_p;
            cc.p = cfg.p;
            cc.rho_row = cc.rho_col = cc.rho_nn = cfg.rho;
            cc.tolerance = std::max(cfg.coupling_tol, 1e-9);
            cc.max_iters = 500;
            plan = lagrangian_coupling(C, cc, p_src, p_tgt);
        }

        for (int s = 0; s < cfg.inner_lambda_steps; ++s)
            lambda -= cfg.lr_lambda * detail::grad_lambda_ws(lambda, plan.pi, ws, cfg.eta);

        C = ws.cost_matrix(lambda);
        const ObjectiveRecord rec = detail::objective_record(C, plan.pi, lambda, cfg);
        if (!std::isfinite(rec.total)) {
            result.lambda = lambda;
            result.plan = plan;
            result.converged = false;
            result.message = "objective diverged (non-finite) at outer iteration " +
                             std::to_string(t);
            throw ConvergenceError(result.message);
        }
        if (!result.trace.empty()) {
            const double prev = result.trace.back().total;
            const double decrease = prev - rec.total;
            if (decrease / std::max(1.0, std::abs(prev)) < cfg.rel_decrease_tol)
                ++low_decrease_streak;
            else
                low_decrease_streak = 0;
        }
        result.trace.push_back(rec);
        if (low_decrease_streak >= 10) {
            result.converged = true;
            break;
        }
    }
    result.lambda = lambda;
    result.plan = plan;
    if (result.message.empty())
        result.message = result.converged ? "converged" : "reached t_max";
    return result;
}

inline nlohmann::json fit_result_to_json(const FitResult& r, const BasisSet& source_basis,
                                         const BasisSet& target_basis) {
    nlohmann::json j;
    const OperatorCoeffs op(r.lambda, source_basis, target_basis);
    j["operator"] = operator_to_json(op);
    std::vector<std::vector<double>> pi_rows;
    for (Eigen::Index l = 0; l < r.plan.pi.rows(); ++l) {
        std::vector<double> row(static_cast<std::size_t>(r.plan.pi.cols()));
        for (Eigen::Index k = 0; k < r.plan.pi.cols(); ++k)
            row[static_cast<std::size_t>(k)] = r.plan.pi(l, k);
        pi_rows.push_back(std::move(row));
    }
    j["pi"] = pi_rows;
    j["converged"] = r.converged;
    j["message"] = r.message;
    j["trace"] = nlohmann::json::array();
    for (const auto& rec : r.trace)
        j["trace"].push_back({{"total", rec.total},
                              {"transport", rec.transport},
                              {"entropy", rec.entropy},
                              {"lp", rec.lp},
                              {"ridge", rec.ridge}});
    return j;
}

struct CvRow {
    int k1 = 0;
    int k2 = 0;
    double loss = 0.0;
};

struct CvTable {
    std::vector<CvRow> rows;
    std::size_t best = 0;
};

} // namespace fot
