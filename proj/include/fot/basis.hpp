#pragma once

#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "fot/errors.hpp"

namespace fot {

enum class BasisKind { BrownianMotion, SquaredExponential, Empirical };

/// Physicists' Hermite polynomials H_0..H_{count-1} at x, by the three-term
/// recurrence H_{k+1} = 2x H_k - 2k H_{k-1}.
inline Eigen::VectorXd hermite_values(int count, double x) {
    Eigen::VectorXd h(count);
    if (count >= 1) h(0) = 1.0;
    if (count >= 2) h(1) = 2.0 * x;
    for (int k = 1; k + 1 < count; ++k)
        h(k + 1) = 2.0 * x * h(k) - 2.0 * k * h(k - 1);
    return h;
}

/// Brownian-motion kernel min(s,t) on [0,1]: lambda_k = 4/((2k-1)^2 pi^2),
/// k = 1..K.
inline Eigen::VectorXd brownian_eigenvalues(int K) {
    if (K < 1) throw ParameterError("brownian_eigenvalues: K must be >= 1");
    Eigen::VectorXd lam(K);
    for (int k = 1; k <= K; ++k) {
        const double m = (2.0 * k - 1.0) * std::numbers::pi;
        lam(k - 1) = 4.0 / (m * m);
    }
    return lam;
}

/// Constants of the squared-exponential KL expansion under N(0, sigma^2).
struct SeConstants {
    double a, b, c, A, B;
};

inline SeConstants se_constants(double lengthscale, double sigma) {
    if (lengthscale <= 0.0 || sigma <= 0.0)
        throw ParameterError("se_constants: lengthscale and sigma must be positive");
    SeConstants s{};
    s.a = 1.0 / (4.0 * sigma * sigma);
    s.b = 1.0 / (2.0 * lengthscale * lengthscale);
    s.c = std::sqrt(s.a * s.a + 2.0 * s.a * s.b);
    s.A = s.a + s.b + s.c;
    s.B = s.b / s.A;
    return s;
}

/// lambda_k = sqrt(2a/A) B^k, k = 0..K-1.
inline Eigen::VectorXd se_eigenvalues(double lengthscale, double sigma, int K) {
    if (K < 1) throw ParameterError("se_eigenvalues: K must be >= 1");
    const SeConstants s = se_constants(lengthscale, sigma);
    Eigen::VectorXd lam(K);
    double lead = std::sqrt(2.0 * s.a / s.A);
    for (int k = 0; k < K; ++k) {
        lam(k) = lead;
        lead *= s.B;
    }
    return lam;
}

/// An evaluable orthonormal eigenbasis with its eigenvalue sequence.
/// Immutable after construction.
class BasisSet {
public:
    static BasisSet brownian(int K) {
        BasisSet b;
        b.kind_ = BasisKind::BrownianMotion;
        b.count_ = K;
        b.eigenvalues_ = brownian_eigenvalues(K);
        return b;
    }

    static BasisSet squared_exponential(double lengthscale, double sigma, int K) {
        BasisSet b;
        b.kind_ = BasisKind::SquaredExponential;
        b.count_ = K;
        b.lengthscale_ = lengthscale;
        b.sigma_ = sigma;
        b.se_ = se_constants(lengthscale, sigma);
        b.eigenvalues_ = se_eigenvalues(lengthscale, sigma, K);
        return b;
    }

    /// Top-K eigenpairs of a symmetric PSD kernel matrix sampled on a grid.
    /// Stored eigenvectors have orthonormal columns; evaluation scales them
    /// by sqrt(n) so the discrete inner product with weight 1/n is
    /// orthonormal, and interpolates linearly off-grid.
    static BasisSet empirical(const Eigen::VectorXd& grid,
                              const Eigen::MatrixXd& kernel, int K) {
        const auto n = kernel.rows();
        if (kernel.cols() != n)
            throw DimensionError("empirical basis: kernel matrix must be square");
        if (grid.size() != n)
            throw DimensionError("empirical basis: grid length must match kernel size");
        if (K < 1 || K > n)
            throw DimensionError("empirical basis: K must be in [1, n]");
        const double scale = std::max(1.0, kernel.cwiseAbs().maxCoeff());
        if ((kernel - kernel.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
            throw ValidityError("empirical basis: kernel matrix is not symmetric");
        for (Eigen::Index i = 0; i + 1 < n; ++i)
            if (grid(i + 1) <= grid(i))
                throw ValidityError("empirical basis: grid must be strictly increasing");

        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(kernel);
        Eigen::VectorXd vals = eig.eigenvalues();
        const double trace = kernel.trace();
        if (vals(0) < -1e-8 * std::max(1.0, trace))
            throw ValidityError("empirical basis: kernel matrix has a significantly negative eigenvalue");

        // Eigen returns ascending order; take the top K, descending.
        BasisSet b;
        b.kind_ = BasisKind::Empirical;
        b.count_ = K;
        b.grid_ = grid;
        b.eigenvalues_.resize(K);
        b.eigenvectors_.resize(n, K);
        for (int j = 0; j < K; ++j) {
            const auto src = n - 1 - j;
            b.eigenvalues_(j) = std::max(vals(src), 0.0);
            Eigen::VectorXd v = eig.eigenvectors().col(src);
            // Canonical sign: largest-magnitude entry positive.
            Eigen::Index imax;
            v.cwiseAbs().maxCoeff(&imax);
            if (v(imax) < 0.0) v = -v;
            b.eigenvectors_.col(j) = v;
        }
        b.clamp_small_eigenvalues();
        return b;
    }

    /// Same basis family restricted to its first K functions.
    BasisSet truncated(int K) const {
        if (K < 1 || K > count_)
            throw DimensionError("truncated: K must be in [1, count]");
        BasisSet b = *this;
        b.count_ = K;
        b.eigenvalues_ = eigenvalues_.head(K);
        if (kind_ == BasisKind::Empirical)
            b.eigenvectors_ = eigenvectors_.leftCols(K);
        return b;
    }

    BasisKind kind() const { return kind_; }
    int count() const { return count_; }
    const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }
    double lengthscale() const { return lengthscale_; }
    double sigma() const { return sigma_; }
    const Eigen::VectorXd& grid() const { return grid_; }
    const Eigen::MatrixXd& eigenvectors() const { return eigenvectors_; }

    /// Matrix of basis values; entry (i,j) is phi_j evaluated at points(i).
    Eigen::MatrixXd evaluate(const Eigen::VectorXd& points, int k_max) const {
        if (k_max < 1 || k_max > count_)
            throw DimensionError("evaluate_basis: k_max exceeds basis count");
        Eigen::MatrixXd out(points.size(), k_max);
        switch (kind_) {
        case BasisKind::BrownianMotion:
            for (Eigen::Index i = 0; i < points.size(); ++i) {
                const double t = points(i);
                if (t < 0.0 || t > 1.0)
                    throw DomainError("evaluate_basis: Brownian basis requires points in [0,1]");
                for (int k = 1; k <= k_max; ++k)
                    out(i, k - 1) = std::numbers::sqrt2 *
                                    std::sin((k - 0.5) * std::numbers::pi * t);
            }
            break;
        case BasisKind::SquaredExponential:
            for (Eigen::Index i = 0; i < points.size(); ++i) {
                const double x = points(i);
                const Eigen::VectorXd h =
                    hermite_values(k_max, std::sqrt(2.0 * se_.c) * x);
                const double envelope = std::exp(-(se_.c - se_.a) * x * x);
                for (int k = 0; k < k_max; ++k)
                    out(i, k) = envelope * h(k) / se_norm(k);
            }
            break;
        case BasisKind::Empirical: {
            const double root_n = std::sqrt(static_cast<double>(grid_.size()));
            for (Eigen::Index i = 0; i < points.size(); ++i)
                for (int k = 0; k < k_max; ++k)
                    out(i, k) = root_n * interp_column(k, points(i));
            break;
        }
        }
        return out;
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["count"] = count_;
        switch (kind_) {
        case BasisKind::BrownianMotion:
            j["kind"] = "brownian";
            break;
        case BasisKind::SquaredExponential:
            j["kind"] = "squared_exponential";
            j["lengthscale"] = lengthscale_;
            j["sigma"] = sigma_;
            break;
        case BasisKind::Empirical: {
            j["kind"] = "empirical";
            j["grid"] = std::vector<double>(grid_.begin(), grid_.end());
            j["eigenvalues"] =
                std::vector<double>(eigenvalues_.begin(), eigenvalues_.end());
            std::vector<std::vector<double>> vecs;
            for (Eigen::Index r = 0; r < eigenvectors_.rows(); ++r) {
                std::vector<double> row(eigenvectors_.cols());
                for (Eigen::Index c = 0; c < eigenvectors_.cols(); ++c)
                    row[c] = eigenvectors_(r, c);
                vecs.push_back(std::move(row));
            }
            j["eigenvectors"] = vecs;
            break;
        }
        }
        return j;
    }

    static BasisSet from_json(const nlohmann::json& j) {
        const std::string kind = j.at("kind").get<std::string>();
        const int K = j.at("count").get<int>();
        if (kind == "brownian") return brownian(K);
        if (kind == "squared_exponential")
            return squared_exponential(j.at("lengthscale").get<double>(),
                                       j.at("sigma").get<double>(), K);
        if (kind == "empirical") {
            BasisSet b;
            b.kind_ = BasisKind::Empirical;
            b.count_ = K;
            const auto grid = j.at("grid").get<std::vector<double>>();
            const auto vals = j.at("eigenvalues").get<std::vector<double>>();
            const auto vecs =
                j.at("eigenvectors").get<std::vector<std::vector<double>>>();
            b.grid_ = Eigen::Map<const Eigen::VectorXd>(grid.data(),
                                                        static_cast<Eigen::Index>(grid.size()));
            b.eigenvalues_ = Eigen::Map<const Eigen::VectorXd>(vals.data(),
                                                               static_cast<Eigen::Index>(vals.size()));
            if (static_cast<int>(vals.size()) != K || vecs.size() != grid.size())
                throw ParseError("empirical basis json: inconsistent dimensions");
            b.eigenvectors_.resize(static_cast<Eigen::Index>(vecs.size()), K);
            for (std::size_t r = 0; r < vecs.size(); ++r) {
                if (static_cast<int>(vecs[r].size()) != K)
                    throw ParseError("empirical basis json: ragged eigenvector rows");
                for (int c = 0; c < K; ++c)
                    b.eigenvectors_(static_cast<Eigen::Index>(r), c) = vecs[r][c];
            }
            return b;
        }
        throw ParseError("basis json: unknown kind '" + kind + "'");
    }

private:
    BasisSet() = default;

    /// Normalization constant so that int phi_k^2 dN(0, sigma^2) = 1:
    /// ||phi_k||^2 = 2^k k! / (2 sigma sqrt(c)) before scaling.
    double se_norm(int k) const {
        const double log_sq = k * std::numbers::ln2 + std::lgamma(k + 1.0) -
                              std::log(2.0 * sigma_ * std::sqrt(se_.c));
        return std::exp(0.5 * log_sq);
    }

    double interp_column(int k, double x) const {
        const auto n = grid_.size();
        if (x <= grid_(0)) return eigenvectors_(0, k);
        if (x >= grid_(n - 1)) return eigenvectors_(n - 1, k);
        Eigen::Index hi = 1;
        while (grid_(hi) < x) ++hi;
        const double t = (x - grid_(hi - 1)) / (grid_(hi) - grid_(hi - 1));
        return (1.0 - t) * eigenvectors_(hi - 1, k) + t * eigenvectors_(hi, k);
    }

    void clamp_small_eigenvalues() {
        if (eigenvalues_.size() == 0) return;
        const double floor = 1e-12 * eigenvalues_.maxCoeff();
        for (Eigen::Index i = 0; i < eigenvalues_.size(); ++i)
            if (eigenvalues_(i) < floor) eigenvalues_(i) = 0.0;
    }

    BasisKind kind_ = BasisKind::BrownianMotion;
    int count_ = 0;
    Eigen::VectorXd eigenvalues_;
    double lengthscale_ = 0.0;
    double sigma_ = 0.0;
    SeConstants se_{};
    Eigen::VectorXd grid_;
    Eigen::MatrixXd eigenvectors_;
};

} // namespace fot
