#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "trialineq/error.hpp"
#include "trialineq/stats.hpp"

namespace trialineq {

struct OlsFit {
    std::vector<std::string> names; // "(intercept)" first when present
    Eigen::VectorXd coef;
    Eigen::VectorXd se;
    Eigen::VectorXd t;
    Eigen::VectorXd p;
    Eigen::VectorXd fitted;
    Eigen::VectorXd residuals;
    double r2 = 0;
    double rss = 0;
    double tss = 0;
    long n = 0;
    long n_params = 0;
    bool intercept = true;

    double coef_of(const std::string& name) const {
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == name) return coef[static_cast<long>(i)];
        throw NumericError("no coefficient named '" + name + "'");
    }
    double p_of(const std::string& name) const {
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == name) return p[static_cast<long>(i)];
        throw NumericError("no coefficient named '" + name + "'");
    }
};

namespace detail {

inline Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& X) {
    Eigen::MatrixXd Z(X.rows(), X.cols() + 1);
    Z.col(0).setOnes();
    if (X.cols() > 0) Z.rightCols(X.cols()) = X;
    return Z;
}

} // namespace detail

/// Ordinary least squares with classical standard errors and two-sided
/// t-based p values (df = n - #params). R-squared is centered when an
/// intercept is present.
inline OlsFit ols(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, bool intercept = true,
                  std::vector<std::string> names = {}) {
    if (y.size() != X.rows()) throw NumericError("ols: y and X row mismatch");
    const Eigen::MatrixXd Z = intercept ? detail::with_intercept(X) : X;
    const long n = Z.rows(), p = Z.cols();
    if (p == 0) throw NumericError("ols: no regressors");
    if (n <= p) throw NumericError("ols: n <= number of parameters");

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Z);
    qr.setThreshold(1e-10);
    if (qr.rank() < p) throw NumericError("ols: rank-deficient design matrix");

    OlsFit fit;
    fit.intercept = intercept;
    fit.n = n;
    fit.n_params = p;
    fit.coef = qr.solve(y);
    fit.fitted = Z * fit.coef;
    fit.residuals = y - fit.fitted;
    fit.rss = fit.residuals.squaredNorm();

    const double ybar = y.mean();
    fit.tss = intercept ? (y.array() - ybar).matrix().squaredNorm() : y.squaredNorm();
    fit.r2 = fit.tss > 0 ? 1.0 - fit.rss / fit.tss : 0.0;

    const double df = static_cast<double>(n - p);
    const double sigma2 = fit.rss / df;
    const Eigen::MatrixXd xtx_inv =
        (Z.transpose() * Z).ldlt().solve(Eigen::MatrixXd::Identity(p, p));

    fit.se.resize(p);
    fit.t.resize(p);
    fit.p.resize(p);
    for (long j = 0; j < p; ++j) {
        fit.se[j] = std::sqrt(std::max(0.0, sigma2 * xtx_inv(j, j)));
        fit.t[j] = fit.se[j] > 0 ? fit.coef[j] / fit.se[j] : 0.0;
        fit.p[j] = fit.se[j] > 0 ? stats::student_t_two_sided_p(fit.t[j], df) : 1.0;
    }

    if (names.empty()) {
        if (intercept) fit.names.push_back("(intercept)");
        for (long j = 0; j < X.cols(); ++j) fit.names.push_back("x" + std::to_string(j + 1));
    } else {
        if (static_cast<long>(names.size()) != X.cols()) throw NumericError("ols: name count mismatch");
        if (intercept) fit.names.push_back("(intercept)");
        fit.names.insert(fit.names.end(), names.begin(), names.end());
    }
    return fit;
}

/// R-squared of the least-squares fit without inference; the workhorse for
/// subset walks in the Shapley and hierarchical decompositions. An empty
/// predictor set with an intercept gives exactly 0.
inline double ols_r2(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, bool intercept = true) {
    const long n = y.size();
    if (intercept && X.cols() == 0) return 0.0;
    const Eigen::MatrixXd Z = intercept ? detail::with_intercept(X) : X;
    if (n <= Z.cols()) throw NumericError("ols_r2: n <= number of parameters");
    const Eigen::VectorXd beta = Z.colPivHouseholderQr().solve(y);
    const double rss = (y - Z * beta).squaredNorm();
    const double ybar = y.mean();
    const double tss = intercept ? (y.array() - ybar).matrix().squaredNorm() : y.squaredNorm();
    return tss > 0 ? 1.0 - rss / tss : 0.0;
}

} // namespace trialineq
