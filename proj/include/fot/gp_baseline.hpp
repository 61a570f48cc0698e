#pragma once

#include <cmath>

#include <Eigen/Dense>

#include "fot/errors.hpp"
#include "fot/funcdata.hpp"

namespace fot {

/// Gaussian measure on R^d: mean and symmetric PSD covariance.
struct GaussianMeasure {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;

    int dim() const { return static_cast<int>(mean.size()); }

    void validate() const {
        if (cov.rows() != cov.cols() || cov.rows() != mean.size())
            throw DimensionError("gaussian: covariance must be d x d");
        const double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
        if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
            throw ValidityError("gaussian: covariance not symmetric");
    }
};

namespace detail {

/// Symmetric matrix power via eigendecomposition, eigenvalues floored at
/// 1e-10 * trace (empirical covariances are routinely rank-deficient).
inline Eigen::MatrixXd sym_pow(const Eigen::MatrixXd& M, double exponent,
                               bool floor_small = true) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(M);
    Eigen::VectorXd vals = eig.eigenvalues();
    const double floor = 1e-10 * std::max(1e-300, M.trace());
    for (Eigen::Index i = 0; i < vals.size(); ++i) {
        if (vals(i) < floor) {
            if (!floor_small && exponent < 0.0)
                throw ValidityError("sym_pow: singular matrix under inversion");
            vals(i) = floor;
        }
        vals(i) = std::pow(vals(i), exponent);
    }
    return eig.eigenvectors() * vals.asDiagonal() * eig.eigenvectors().transpose();
}

inline Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& M) {
    return 0.5 * (M + M.transpose());
}

} // namespace detail

inline Eigen::MatrixXd matrix_sqrt(const Eigen::MatrixXd& M) {
    return detail::sym_pow(M, 0.5);
}

/// Empirical mean and covariance (denominator n) of samples sharing a grid.
inline GaussianMeasure fit_gaussian(const FunctionalDataset& ds) {
    if (ds.samples.size() < 2)
        throw ValidityError("fit_gaussian: needs at least 2 samples");
    const auto d = ds.samples.front().x.size();
    for (const auto& s : ds.samples)
        if (s.x.size() != d || (s.x - ds.samples.front().x).cwiseAbs().maxCoeff() > 1e-12)
            throw ValidityError("fit_gaussian: samples must share design points; resample first");

    const auto n = static_cast<double>(ds.samples.size());
    GaussianMeasure g;
    g.mean = Eigen::VectorXd::Zero(d);
    for (const auto& s : ds.samples) g.mean += s.y;
    g.mean /= n;
    g.cov = Eigen::MatrixXd::Zero(d, d);
    for (const auto& s : ds.samples) {
        const Eigen::VectorXd c = s.y - g.mean;
        g.cov.noalias() += c * c.transpose();
    }
    g.cov /= n;
    g.cov = detail::symmetrize(g.cov);
    // Clamp any round-off negative eigenvalues.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(g.cov);
    Eigen::VectorXd vals = eig.eigenvalues().cwiseMax(0.0);
    g.cov = eig.eigenvectors() * vals.asDiagonal() * eig.eigenvectors().transpose();
    return g;
}

/// Squared L2-Wasserstein distance between Gaussian measures:
/// ||m - n||^2 + Tr(V + U - 2 (V^1/2 U V^1/2)^1/2).
inline double gaussian_w2_sq(const GaussianMeasure& g1, const GaussianMeasure& g2) {
    if (g1.dim() != g2.dim())
        throw DimensionError("gaussian_w2: dimension mismatch");
    const Eigen::MatrixXd v_half = detail::sym_pow(g1.cov, 0.5);
    const Eigen::MatrixXd inner = detail::symmetrize(v_half * g2.cov * v_half);
    const Eigen::MatrixXd cross = detail::sym_pow(inner, 0.5);
    const double tr = g1.cov.trace() + g2.cov.trace() - 2.0 * cross.trace();
    return (g1.mean - g2.mean).squaredNorm() + std::max(tr, 0.0);
}

/// Symmetric PD matrix T = U^1/2 (U^1/2 V U^1/2)^-1/2 U^1/2 mapping
/// N(m, V) onto N(n, U) via x -> n + T (x - m).
inline Eigen::MatrixXd gaussian_ot_map(const GaussianMeasure& g_source,
                                       const GaussianMeasure& g_target) {
    if (g_source.dim() != g_target.dim())
        throw DimensionError("gaussian_ot_map: dimension mismatch");
    const Eigen::MatrixXd u_half = detail::sym_pow(g_target.cov, 0.5);
    const Eigen::MatrixXd mid = detail::symmetrize(u_half * g_source.cov * u_half);
    const Eigen::MatrixXd mid_inv_sqrt = detail::sym_pow(mid, -0.5);
    return detail::symmetrize(u_half * mid_inv_sqrt * u_half);
}

/// Affine pushforward of aligned samples through the Gaussian OT map.
inline FunctionalDataset gp_pushforward(const FunctionalDataset& samples,
                                        const GaussianMeasure& g_source,
                                        const GaussianMeasure& g_target) {
    if (g_source.dim() != g_target.dim())
        throw DimensionError("gp_pushforward: dimension mismatch");
    const Eigen::MatrixXd T = gaussian_ot_map(g_source, g_target);
    FunctionalDataset out;
    out.domain = "target";
    for (const auto& s : samples.samples) {
        if (s.y.size() != g_source.dim())
            throw DimensionError("gp_pushforward: sample grid does not match the measure");
        FunctionalSample mapped;
        mapped.x = s.x;
        mapped.y = g_target.mean + T * (s.y - g_source.mean);
        mapped.channel = s.channel;
        out.samples.push_back(std::move(mapped));
    }
    return out;
}

} // namespace fot
