#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fot/coupling.hpp"
#include "fot/funcdata.hpp"
#include "fot/gp_baseline.hpp"
#include "fot/solver.hpp"
#include "fot/transport_operator.hpp"

namespace fot {

struct MatchReport {
    double loss = 0.0;
    TransportPlan plan;
    Eigen::MatrixXd distances; // per-pair, already normalized by target length
};

/// Squared-Euclidean distance of each pushed curve to each target curve,
/// evaluated on the target's design points (pushed curves are interpolated
/// there) and normalized by the target sample's length.
inline Eigen::MatrixXd pairwise_distances(const FunctionalDataset& pushed,
                                          const FunctionalDataset& target) {
    const auto n1 = static_cast<Eigen::Index>(pushed.samples.size());
    const auto n2 = static_cast<Eigen::Index>(target.samples.size());
    Eigen::MatrixXd D(n1, n2);
    for (Eigen::Index k = 0; k < n2; ++k) {
        const auto& t = target.samples[static_cast<std::size_t>(k)];
        for (Eigen::Index l = 0; l < n1; ++l) {
            const auto& f = pushed.samples[static_cast<std::size_t>(l)];
            D(l, k) = (f.interp(t.x) - t.y).squaredNorm() / static_cast<double>(t.x.size());
        }
    }
    return D;
}

/// Near-exact Wasserstein matching loss: couple pushed and target curves
/// with a small evaluation entropy (default 1e-3 * max distance) and return
/// the coupled cost.
inline MatchReport matching_loss(const FunctionalDataset& pushed,
                                 const FunctionalDataset& target,
                                 double gamma_h_eval = -1.0) {
    if (pushed.samples.empty() || target.samples.empty())
        throw ValidityError("matching_loss: empty dataset");
    MatchReport rep;
    rep.distances = pairwise_distances(pushed, target);
    const double dmax = rep.distances.maxCoeff();
    if (gamma_h_eval <= 0.0) gamma_h_eval = 1e-3 * std::max(dmax, 1e-12);
    rep.plan = sinkhorn(rep.distances, gamma_h_eval);
    rep.loss = (rep.distances.array() * rep.plan.pi.array()).sum();
    return rep;
}

/// Push every source curve onto a fixed evaluation grid.
inline FunctionalDataset push_to_grid(const OperatorCoeffs& op, const FunctionalDataset& source,
                                      int grid_points = 101,
                                      bool quadrature_weighted = false) {
    return pushforward_dataset(source, op, uniform_grid(0.0, 1.0, grid_points),
                               quadrature_weighted);
}

// ---------------------------------------------------------------------------
// Cross-validation over (K1, K2)
// ---------------------------------------------------------------------------

/// Round-robin folds over source curves; each grid point is refit per fold
/// and scored by the matching loss of held-out source curves pushed onto
/// the full target set.
inline CvTable cross_validate(const FunctionalDataset& source, const FunctionalDataset& target,
                              const BasisSet& source_basis, const BasisSet& target_basis,
                              const std::vector<std::pair<int, int>>& k_grid,
                              const SolverConfig& base_cfg, int n_folds) {
    if (n_folds < 2) throw ParameterError("cross_validate: need at least 2 folds");
    if (k_grid.empty()) throw ParameterError("cross_validate: empty K grid");
    const auto n = source.samples.size();

    CvTable table;
    for (const auto& [k1, k2] : k_grid) {
        double loss_sum = 0.0;
        int scored = 0;
        for (int fold = 0; fold < n_folds; ++fold) {
            FunctionalDataset train, held;
            train.domain = held.domain = source.domain;
            for (std::size_t i = 0; i < n; ++i)
                (static_cast<int>(i % static_cast<std::size_t>(n_folds)) == fold ? held : train)
                    .samples.push_back(source.samples[i]);
            if (train.samples.size() < 2 || held.samples.empty())
                throw ValidityError("cross_validate: fold with fewer than 2 samples");
            SolverConfig cfg = base_cfg;
            cfg.k1 = k1;
            cfg.k2 = k2;
            const FitResult r = fit(train, target, source_basis, target_basis, cfg);
            const OperatorCoeffs op(r.lambda, source_basis.truncated(k1),
                                    target_basis.truncated(k2));
            loss_sum += matching_loss(push_to_grid(op, held), target).loss;
            ++scored;
        }
        table.rows.push_back({k1, k2, loss_sum / scored});
    }
    table.best = 0;
    for (std::size_t i = 1; i < table.rows.size(); ++i)
        if (table.rows[i].loss < table.rows[table.best].loss) table.best = i;
    return table;
}

// ---------------------------------------------------------------------------
// Simulation protocols
// ---------------------------------------------------------------------------

struct ProtocolRow {
    int k = 0;
    double value = 0.0; // matching loss or Frobenius discrepancy
    bool failed = false;
    std::string error;
};

struct SimProtocolConfig {
    int n_samples = 30;
    int k_star = 15;
    std::vector<int> k_grid = {3, 5, 10, 15, 20};
    std::vector<std::uint64_t> seeds = {1, 2, 3};
    int points_min = 50;
    int points_max = 60;
    double noise_sigma = 0.1; // i.i.d. observation noise on the targets
    double coeff_sigma = 0.5; // per-mode std of the finite-span source draws
    SolverConfig solver; // sim51 defaults set below

    SimProtocolConfig() {
        solver = SolverConfig::preset_sim51();
        solver.t_max = 300;
        solver.inner_lambda_steps = 100;
        // Warm-started coupling solves; looser per-solve tolerance loses
        // nothing by the end of the outer loop but saves an order of
        // magnitude in wall time.
        solver.coupling_tol = 1e-7;
        solver.coupling_max_iters = 2000;
        // Quadrature-weighted coefficients keep the cost Hessian (and hence
        // the stable learning-rate range) independent of design density.
        solver.quadrature_weighted = true;
    }
};

/// Curves with finite intrinsic dimension: random flat-variance combinations
/// of the first k basis functions, observed at sorted uniform design points.
/// Flat (undecayed) coefficients spread the energy evenly across all k modes,
/// so truncating below k discards a proportional share of the signal.
inline FunctionalDataset generate_basis_span(int n_samples, const BasisSet& basis, int k,
                                             int points_min, int points_max,
                                             double coeff_sigma, Rng& rng) {
    if (n_samples < 1) throw ParameterError("generate: n_samples must be >= 1");
    if (points_min < 2 || points_max < points_min)
        throw ParameterError("generate: invalid points-per-sample range");
    FunctionalDataset ds;
    for (int s = 0; s < n_samples; ++s) {
        Eigen::VectorXd z(k);
        for (int i = 0; i < k; ++i) z(i) = coeff_sigma * rng.normal();
        const auto d = static_cast<int>(rng.uniform_int(points_min, points_max));
        std::vector<double> pts(static_cast<std::size_t>(d));
        for (auto& p : pts) p = rng.uniform();
        std::sort(pts.begin(), pts.end());
        for (std::size_t i = 1; i < pts.size(); ++i)
            if (pts[i] <= pts[i - 1]) pts[i] = std::nextafter(pts[i - 1], 2.0);
        FunctionalSample sample;
        sample.x = Eigen::Map<const Eigen::VectorXd>(pts.data(), d);
        sample.y = basis.evaluate(sample.x, k) * z;
        ds.samples.push_back(std::move(sample));
    }
    return ds;
}

/// Ground-truth operator with intrinsic dimension k_star embedded in a
/// k_max x k_max matrix: i.i.d. standard normal on the leading block, zero
/// elsewhere.
inline Eigen::MatrixXd ground_truth_block(int k_star, int k_max, Rng& rng) {
    Eigen::MatrixXd lambda = Eigen::MatrixXd::Zero(k_max, k_max);
    for (int j = 0; j < k_star; ++j)
        for (int i = 0; i < k_star; ++i) lambda(j, i) = rng.normal();
    return lambda;
}

/// Near-identity ground truth of intrinsic dimension k_star: a positive
/// random diagonal on the leading block. Keeps the map well separated from
/// zero in every retained mode while leaving the joint fit's identity warm
/// start inside the basin of the true source-target correspondence.
inline Eigen::MatrixXd ground_truth_diag(int k_star, int k_max, Rng& rng, double lo = 0.7,
                                         double hi = 1.3) {
    Eigen::MatrixXd lambda = Eigen::MatrixXd::Zero(k_max, k_max);
    for (int i = 0; i < k_star; ++i) lambda(i, i) = rng.uniform(lo, hi);
    return lambda;
}

/// Matching loss as a function of the fitted truncation K-hat, on data whose
/// ground-truth map has finite intrinsic dimension k_star. Averaged over
/// seeds; per-K fit failures are recorded and the run continues.
inline std::vector<ProtocolRow> run_fig2_left(const SimProtocolConfig& cfg) {
    const int k_max = std::max(cfg.k_star,
                               *std::max_element(cfg.k_grid.begin(), cfg.k_grid.end()));
    const BasisSet basis = BasisSet::brownian(k_max);

    std::vector<ProtocolRow> rows;
    for (int khat : cfg.k_grid) rows.push_back({khat, 0.0, false, ""});
    std::vector<int> counts(cfg.k_grid.size(), 0);

    for (const auto seed : cfg.seeds) {
        Rng rng(seed);
        // Sources share the truth's intrinsic dimension: all signal lives in
        // the leading k_star modes, so truncations at or above k_star see the
        // same problem while smaller ones lose a proportional energy share.
        const FunctionalDataset source =
            generate_basis_span(cfg.n_samples, basis, cfg.k_star, cfg.points_min,
                                cfg.points_max, cfg.coeff_sigma, rng);
        const OperatorCoeffs truth(ground_truth_diag(cfg.k_star, k_max, rng), basis, basis);
        FunctionalDataset target = pushforward_dataset(source, truth, cfg.points_min,
                                                       cfg.points_max, rng,
                                                       cfg.solver.quadrature_weighted);
        for (auto& s : target.samples)
            for (Eigen::Index i = 0; i < s.y.size(); ++i)
                s.y(i) += cfg.noise_sigma * rng.normal();

        for (std::size_t gi = 0; gi < cfg.k_grid.size(); ++gi) {
            const int khat = cfg.k_grid[gi];
            SolverConfig sc = cfg.solver;
            sc.k1 = sc.k2 = khat;
            sc.seed = seed;
            // Identity warm start keeps near-identity truths inside the
            // basin of the true source-target correspondence.
            sc.identity_init = true;
            try {
                const FitResult r = fit(source, target, basis, basis, sc);
                const OperatorCoeffs op(r.lambda, basis.truncated(khat), basis.truncated(khat));
                rows[gi].value +=
                    matching_loss(push_to_grid(op, source, 101, sc.quadrature_weighted), target)
                        .loss;
                ++counts[gi];
            } catch (const Error& e) {
                rows[gi].failed = true;
                rows[gi].error = e.what();
            }
        }
    }
    for (std::size_t gi = 0; gi < rows.size(); ++gi)
        if (counts[gi] > 0) rows[gi].value /= counts[gi];
    return rows;
}

/// Frobenius discrepancy between the optimal map and the rank-K estimate
/// (extended by zero) against K. The reference map is near-identity with a
/// geometrically decaying dense tail on a large block, a finite stand-in
/// for a full-rank operator.
inline std::vector<ProtocolRow> run_fig2_right(const SimProtocolConfig& cfg) {
    const int k_big = 20;
    const double decay = 0.6;
    const BasisSet basis = BasisSet::brownian(k_big);

    std::vector<ProtocolRow> rows;
    for (int k : cfg.k_grid) rows.push_back({k, 0.0, false, ""});
    std::vector<int> counts(cfg.k_grid.size(), 0);

    for (const auto seed : cfg.seeds) {
        Rng rng(seed);
        const FunctionalDataset source = generate_basis_span(
            cfg.n_samples, basis, k_big, cfg.points_min, cfg.points_max, cfg.coeff_sigma, rng);

        // Near-identity map with a geometrically decaying dense tail: a
        // finite stand-in for a full-rank operator whose leading K x K
        // projection is the comparison point T*_K.
        Eigen::MatrixXd lambda_star = ground_truth_diag(k_big, k_big, rng);
        for (int j = 0; j < k_big; ++j)
            for (int i = 0; i < k_big; ++i)
                lambda_star(j, i) += 0.3 * rng.normal() * std::pow(decay, std::max(i, j));
        const OperatorCoeffs truth(lambda_star, basis, basis);
        FunctionalDataset target = pushforward_dataset(source, truth, cfg.points_min,
                                                       cfg.points_max, rng,
                                                       cfg.solver.quadrature_weighted);
        for (auto& s : target.samples)
            for (Eigen::Index i = 0; i < s.y.size(); ++i)
                s.y(i) += cfg.noise_sigma * rng.normal();

        for (std::size_t gi = 0; gi < cfg.k_grid.size(); ++gi) {
            const int k = cfg.k_grid[gi];
            SolverConfig sc = cfg.solver;
            sc.k1 = sc.k2 = k;
            sc.seed = seed;
            sc.identity_init = true;
            try {
                const FitResult r = fit(source, target, basis, basis, sc);
                // Distance to the full reference map, with the rank-K
                // estimate extended by zero: the truncation tail vanishes
                // as K grows, so the curve decreases toward the pure
                // estimation error of the largest model.
                Eigen::MatrixXd padded = Eigen::MatrixXd::Zero(k_big, k_big);
                padded.topLeftCorner(k, k) = r.lambda;
                rows[gi].value += (lambda_star - padded).norm();
                ++counts[gi];
            } catch (const Error& e) {
                rows[gi].failed = true;
                rows[gi].error = e.what();
            }
        }
    }
    for (std::size_t gi = 0; gi < rows.size(); ++gi)
        if (counts[gi] > 0) rows[gi].value /= counts[gi];
    return rows;
}

// ---------------------------------------------------------------------------
// Baseline comparison
// ---------------------------------------------------------------------------

struct BaselineRow {
    std::string method;
    double loss = 0.0;
    bool failed = false;
    std::string error;
};

/// Discrete-vector stand-in: curves resampled to a fixed grid, entropic
/// coupling between the point clouds, barycentric projection as the map.
inline FunctionalDataset vector_sinkhorn_pushforward(const FunctionalDataset& source,
                                                     const FunctionalDataset& target,
                                                     const Eigen::VectorXd& grid,
                                                     double gamma_h) {
    const FunctionalDataset src = resample_to_grid(source, grid);
    const FunctionalDataset tgt = resample_to_grid(target, grid);
    const auto n1 = static_cast<Eigen::Index>(src.samples.size());
    const auto n2 = static_cast<Eigen::Index>(tgt.samples.size());
    Eigen::MatrixXd C(n1, n2);
    for (Eigen::Index l = 0; l < n1; ++l)
        for (Eigen::Index k = 0; k < n2; ++k)
            C(l, k) = (src.samples[static_cast<std::size_t>(l)].y -
                       tgt.samples[static_cast<std::size_t>(k)].y)
                          .squaredNorm();
    const TransportPlan plan = sinkhorn(C, gamma_h);
    FunctionalDataset out;
    out.domain = "target";
    for (Eigen::Index l = 0; l < n1; ++l) {
        FunctionalSample s;
        s.x = grid;
        s.y = Eigen::VectorXd::Zero(grid.size());
        double mass = 0.0;
        for (Eigen::Index k = 0; k < n2; ++k) {
            s.y += plan.pi(l, k) * tgt.samples[static_cast<std::size_t>(k)].y;
            mass += plan.pi(l, k);
        }
        s.y /= mass;
        out.samples.push_back(std::move(s));
    }
    return out;
}

struct BaselineConfig {
    SolverConfig solver;
    BasisSet source_basis = BasisSet::brownian(15);
    BasisSet target_basis = BasisSet::brownian(15);
    int grid_points = 50; // fixed grid for GPOT / VectorSinkhorn
    std::vector<std::string> methods = {"FOT", "GPOT", "VectorSinkhorn"};

    BaselineConfig() {
        solver = SolverConfig::preset_sim51();
        solver.t_max = 300;
        solver.coupling_tol = 1e-7;
        solver.coupling_max_iters = 2000;
        solver.inner_lambda_steps = 100;
        solver.quadrature_weighted = true;
        solver.identity_init = true;
    }
};

/// Maps held-out curves through the plan learned on the training pair by
/// 1-nearest-neighbor lookup: each evaluation curve inherits the barycentric
/// image of its closest training source. The natural out-of-sample extension
/// of a purely discrete coupling.
inline FunctionalDataset vector_sinkhorn_extend(const FunctionalDataset& train_source,
                                                const FunctionalDataset& train_pushed,
                                                const FunctionalDataset& eval_source,
                                                const Eigen::VectorXd& grid) {
    const FunctionalDataset train = resample_to_grid(train_source, grid);
    const FunctionalDataset eval = resample_to_grid(eval_source, grid);
    FunctionalDataset out;
    out.domain = train_pushed.domain;
    for (const auto& e : eval.samples) {
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t l = 0; l < train.samples.size(); ++l) {
            const double d = (train.samples[l].y - e.y).squaredNorm();
            if (d < best_d) {
                best_d = d;
                best = l;
            }
        }
        out.samples.push_back(train_pushed.samples[best]);
    }
    return out;
}

/// Fits every method on (source, target) and scores the learned maps by
/// pushing eval_source and matching against eval_target. Held-out curves on
/// both sides measure map quality rather than in-sample copying: a method
/// that memorizes training targets pays the sampling gap against a fresh
/// target draw.
inline std::vector<BaselineRow> compare_baselines(const FunctionalDataset& source,
                                                  const FunctionalDataset& target,
                                                  const FunctionalDataset& eval_source,
                                                  const FunctionalDataset& eval_target,
                                                  const BaselineConfig& cfg) {
    const Eigen::VectorXd grid = uniform_grid(0.0, 1.0, cfg.grid_points);
    std::vector<BaselineRow> rows;
    for (const auto& method : cfg.methods) {
        BaselineRow row;
        row.method = method;
        try {
            if (method == "FOT") {
                const FitResult r =
                    fit(source, target, cfg.source_basis, cfg.target_basis, cfg.solver);
                const OperatorCoeffs op(r.lambda, cfg.source_basis.truncated(cfg.solver.k1),
                                        cfg.target_basis.truncated(cfg.solver.k2));
                row.loss =
                    matching_loss(
                        push_to_grid(op, eval_source, 101, cfg.solver.quadrature_weighted),
                        eval_target)
                        .loss;
            } else if (method == "GPOT") {
                const FunctionalDataset src = resample_to_grid(source, grid);
                const FunctionalDataset tgt = resample_to_grid(target, grid);
                const GaussianMeasure gs = fit_gaussian(src);
                const GaussianMeasure gt = fit_gaussian(tgt);
                const FunctionalDataset ev = resample_to_grid(eval_source, grid);
                row.loss = matching_loss(gp_pushforward(ev, gs, gt), eval_target).loss;
            } else if (method == "VectorSinkhorn") {
                const FunctionalDataset pushed = vector_sinkhorn_pushforward(
                    source, target, grid, cfg.solver.gamma_h);
                row.loss = matching_loss(
                               vector_sinkhorn_extend(source, pushed, eval_source, grid),
                               eval_target)
                               .loss;
            } else {
                throw ParameterError("compare_baselines: unknown method '" + method + "'");
            }
        } catch (const Error& e) {
            row.failed = true;
            row.error = e.what();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

/// In-sample variant: evaluates on the training pair itself.
inline std::vector<BaselineRow> compare_baselines(const FunctionalDataset& source,
                                                  const FunctionalDataset& target,
                                                  const BaselineConfig& cfg) {
    return compare_baselines(source, target, source, target, cfg);
}

} // namespace fot
