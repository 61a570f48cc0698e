#pragma once

#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "fot/basis.hpp"
#include "fot/funcdata.hpp"

namespace fot {

/// Finite-rank Hilbert-Schmidt operator between the spans of the two bases,
/// represented by its K2 x K1 coefficient matrix.
struct OperatorCoeffs {
    Eigen::MatrixXd lambda; // K2 x K1
    BasisSet source_basis;  // K1 functions
    BasisSet target_basis;  // K2 functions

    OperatorCoeffs(Eigen::MatrixXd l, BasisSet src, BasisSet tgt)
        : lambda(std::move(l)), source_basis(std::move(src)), target_basis(std::move(tgt)) {
        if (lambda.cols() != source_basis.count() || lambda.rows() != target_basis.count())
            throw DimensionError("operator: lambda dimensions must be K2 x K1");
        if (!lambda.allFinite())
            throw ValidityError("operator: lambda has non-finite entries");
    }

    int k1() const { return static_cast<int>(lambda.cols()); }
    int k2() const { return static_cast<int>(lambda.rows()); }
};

inline double hs_norm_sq(const OperatorCoeffs& op) {
    return op.lambda.squaredNorm();
}

/// Source-domain coefficients of a sample: U(x)^T y, the plain dot product
/// of Eq.-level design values against basis columns. With quadrature
/// weighting on, the products are trapezoid-weighted instead.
inline Eigen::VectorXd source_coefficients(const BasisSet& basis, const FunctionalSample& f,
                                           bool quadrature_weighted = false) {
    const Eigen::MatrixXd U = basis.evaluate(f.x, basis.count());
    if (!quadrature_weighted) return U.transpose() * f.y;
    Eigen::VectorXd w(f.x.size());
    for (Eigen::Index i = 0; i < f.x.size(); ++i) {
        const double left = (i == 0) ? f.x(0) : f.x(i - 1);
        const double right = (i + 1 == f.x.size()) ? f.x(f.x.size() - 1) : f.x(i + 1);
        w(i) = 0.5 * (right - left);
    }
    return U.transpose() * w.cwiseProduct(f.y);
}

/// Pushed values at target_points: V(target) Lambda U(x_f)^T y_f.
inline FunctionalSample pushforward(const OperatorCoeffs& op, const FunctionalSample& f,
                                    const Eigen::VectorXd& target_points,
                                    bool quadrature_weighted = false) {
    if (target_points.size() == 0)
        throw DimensionError("pushforward: empty target_points");
    const Eigen::VectorXd coef = source_coefficients(op.source_basis, f, quadrature_weighted);
    const Eigen::MatrixXd V = op.target_basis.evaluate(target_points, op.k2());
    FunctionalSample out;
    out.x = target_points;
    out.y = V * (op.lambda * coef);
    out.channel = f.channel;
    return out;
}

/// Pre-evaluated per-sample quantities; the basis matrices never change
/// during optimization, so they are computed once.
struct CostWorkspace {
    std::vector<Eigen::VectorXd> src_coef;   // a_l = U_{1l}^T y_{1l}
    std::vector<Eigen::MatrixXd> tgt_gram;   // M_k = V_{2k}^T V_{2k}
    std::vector<Eigen::VectorXd> tgt_proj;   // w_k = V_{2k}^T y_{2k}
    std::vector<double> tgt_norm_sq;         // ||y_{2k}||^2
    int n1 = 0, n2 = 0;

    static CostWorkspace build(const BasisSet& source_basis, const BasisSet& target_basis,
                               const FunctionalDataset& source, const FunctionalDataset& target,
                               bool quadrature_weighted = false) {
        CostWorkspace ws;
        ws.n1 = static_cast<int>(source.samples.size());
        ws.n2 = static_cast<int>(target.samples.size());
        for (const auto& f : source.samples)
            ws.src_coef.push_back(source_coefficients(source_basis, f, quadrature_weighted));
        for (const auto& g : target.samples) {
            const Eigen::MatrixXd V = target_basis.evaluate(g.x, target_basis.count());
            ws.tgt_gram.push_back(V.transpose() * V);
            ws.tgt_proj.push_back(V.transpose() * g.y);
            ws.tgt_norm_sq.push_back(g.y.squaredNorm());
        }
        return ws;
    }

    /// C_lk = ||V_2k Lambda a_l - y_2k||^2, expanded through the cached
    /// Gram matrices.
    Eigen::MatrixXd cost_matrix(const Eigen::MatrixXd& lambda) const {
        Eigen::MatrixXd C(n1, n2);
        std::vector<Eigen::VectorXd> pushed(static_cast<std::size_t>(n1));
        for (int l = 0; l < n1; ++l) pushed[l] = lambda * src_coef[l];
        for (int k = 0; k < n2; ++k) {
            const auto& M = tgt_gram[k];
            const auto& w = tgt_proj[k];
            for (int l = 0; l < n1; ++l) {
                const auto& b = pushed[l];
                C(l, k) = b.dot(M * b) - 2.0 * w.dot(b) + tgt_norm_sq[k];
                if (C(l, k) < 0.0) C(l, k) = 0.0; // round-off guard
            }
        }
        return C;
    }
};

inline Eigen::MatrixXd cost_matrix(const OperatorCoeffs& op, const FunctionalDataset& source,
                                   const FunctionalDataset& target,
                                   bool quadrature_weighted = false) {
    return CostWorkspace::build(op.source_basis, op.target_basis, source, target,
                                quadrature_weighted)
        .cost_matrix(op.lambda);
}

/// Generate a target dataset by pushing every source curve through a known
/// operator, evaluated at fresh design points (count drawn per sample).
inline FunctionalDataset pushforward_dataset(const FunctionalDataset& source,
                                             const OperatorCoeffs& op,
                                             int points_min, int points_max, Rng& rng,
                                             bool quadrature_weighted = false) {
    FunctionalDataset out;
    out.domain = "target";
    for (const auto& f : source.samples) {
        const auto d = static_cast<int>(rng.uniform_int(points_min, points_max));
        std::vector<double> pts(static_cast<std::size_t>(d));
        for (auto& p : pts) p = rng.uniform();
        std::sort(pts.begin(), pts.end());
        for (std::size_t i = 1; i < pts.size(); ++i)
            if (pts[i] <= pts[i - 1]) pts[i] = std::nextafter(pts[i - 1], 2.0);
        out.samples.push_back(pushforward(op, f, Eigen::Map<const Eigen::VectorXd>(pts.data(), d),
                                          quadrature_weighted));
    }
    return out;
}

/// Same-grid variant: every pushed curve lands on the given points.
inline FunctionalDataset pushforward_dataset(const FunctionalDataset& source,
                                             const OperatorCoeffs& op,
                                             const Eigen::VectorXd& target_points,
                                             bool quadrature_weighted = false) {
    FunctionalDataset out;
    out.domain = "target";
    for (const auto& f : source.samples)
        out.samples.push_back(pushforward(op, f, target_points, quadrature_weighted));
    return out;
}

inline nlohmann::json operator_to_json(const OperatorCoeffs& op) {
    nlohmann::json j;
    std::vector<std::vector<double>> rows;
    for (Eigen::Index r = 0; r < op.lambda.rows(); ++r) {
        std::vector<double> row(static_cast<std::size_t>(op.lambda.cols()));
        for (Eigen::Index c = 0; c < op.lambda.cols(); ++c)
            row[static_cast<std::size_t>(c)] = op.lambda(r, c);
        rows.push_back(std::move(row));
    }
    j["lambda"] = rows;
    j["source_basis"] = op.source_basis.to_json();
    j["target_basis"] = op.target_basis.to_json();
    return j;
}

inline OperatorCoeffs operator_from_json(const nlohmann::json& j) {
    const auto rows = j.at("lambda").get<std::vector<std::vector<double>>>();
    if (rows.empty()) throw ParseError("operator json: empty lambda");
    Eigen::MatrixXd lambda(static_cast<Eigen::Index>(rows.size()),
                           static_cast<Eigen::Index>(rows[0].size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != rows[0].size())
            throw ParseError("operator json: ragged lambda rows");
        for (std::size_t c = 0; c < rows[r].size(); ++c)
            lambda(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
    return OperatorCoeffs(std::move(lambda), BasisSet::from_json(j.at("source_basis")),
                          BasisSet::from_json(j.at("target_basis")));
}

} // namespace fot
