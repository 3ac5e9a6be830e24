#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "dgp.hpp"
#include "estimator.hpp"
#include "population.hpp"

namespace quantcurve {

// Score, curvature, leading term and remainder of the Bahadur decomposition
//
//   (n h^d)^{1/2} H (b-hat - b*) = beta_n + e_n,
//   beta_n = -jbar^{-1} score_sum
//
// for one theta of a synthetic DGP.
struct BahadurParts {
    EvalPoint theta;
    Eigen::VectorXd score_sum;  // sum S_i / (n h^d)^{1/2}
    Eigen::MatrixXd jbar;       // sum J_i / (n h^d)
    Eigen::VectorXd beta_n;
    Eigen::VectorXd e_n;
    double jbar_min_eigenvalue = 0.0;
};

// S_i = 2 { 1(Y_i <= Q*(X_i;theta)) - alpha } U((X_i-x)/h) K((X_i-x)/h).
// Ties Y = Q* count as "<=".
inline std::vector<Eigen::VectorXd> score_terms(const Sample& sample, const EvalPoint& theta,
                                                const PopulationFit& pop, const BasisSpec& basis,
                                                const KernelSpec& kernel) {
    const std::size_t P = basis.size();
    std::vector<Eigen::VectorXd> out(sample.n, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(P)));
    std::vector<double> z(sample.d), xi(sample.d);
    for (std::size_t i = 0; i < sample.n; ++i) {
        for (std::size_t j = 0; j < sample.d; ++j) {
            xi[j] = sample.x[i * sample.d + j];
            z[j] = (xi[j] - theta.x[j]) / theta.h;
        }
        const double K = kernel.value(z);
        if (K <= 0.0) continue;
        const double qstar = population_taylor(pop, basis, xi);
        const double c = 2.0 * ((sample.y[i] <= qstar ? 1.0 : 0.0) - theta.alpha) * K;
        const std::vector<double> u = basis.eval(z);
        for (std::size_t k = 0; k < P; ++k) out[i](static_cast<Eigen::Index>(k)) = c * u[k];
    }
    return out;
}

// J_i = 2 f(Q*(X_i;theta)|X_i) U U^T K at the scaled argument.
inline std::vector<Eigen::MatrixXd> j_terms(const Dgp& dgp, const Sample& sample,
                                            const EvalPoint& theta, const PopulationFit& pop,
                                            const BasisSpec& basis, const KernelSpec& kernel) {
    const auto P = static_cast<Eigen::Index>(basis.size());
    std::vector<Eigen::MatrixXd> out(sample.n, Eigen::MatrixXd::Zero(P, P));
    std::vector<double> z(sample.d), xi(sample.d);
    for (std::size_t i = 0; i < sample.n; ++i) {
        for (std::size_t j = 0; j < sample.d; ++j) {
            xi[j] = sample.x[i * sample.d + j];
            z[j] = (xi[j] - theta.x[j]) / theta.h;
        }
        const double K = kernel.value(z);
        if (K <= 0.0) continue;
        const double c = 2.0 * dgp.conditional_pdf(population_taylor(pop, basis, xi), xi) * K;
        const std::vector<double> u = basis.eval(z);
        for (Eigen::Index a = 0; a < P; ++a)
            for (Eigen::Index b = 0; b < P; ++b)
                out[i](a, b) = c * u[static_cast<std::size_t>(a)] * u[static_cast<std::size_t>(b)];
    }
    return out;
}

class SingularCurvature : public std::runtime_error {
public:
    explicit SingularCurvature(const EvalPoint& theta)
        : std::runtime_error("near-singular curvature matrix at theta " + theta.describe()) {}
};

inline BahadurParts decompose(const Dgp& dgp, const Sample& sample, const EvalPoint& theta,
                              const LocalFit& fit, const PopulationFit& pop,
                              const BasisSpec& basis, const KernelSpec& kernel,
                              double min_eigenvalue = 1e-10) {
    const auto P = static_cast<Eigen::Index>(basis.size());
    const double nhd = static_cast<double>(sample.n) * std::pow(theta.h, dgp.d);
    const double root = std::sqrt(nhd);

    BahadurParts parts;
    parts.theta = theta;
    parts.score_sum = Eigen::VectorXd::Zero(P);
    parts.jbar = Eigen::MatrixXd::Zero(P, P);
    for (const auto& s : score_terms(sample, theta, pop, basis, kernel)) parts.score_sum += s;
    parts.score_sum /= root;
    for (const auto& j : j_terms(dgp, sample, theta, pop, basis, kernel)) parts.jbar += j;
    parts.jbar /= nhd;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(parts.jbar);
    parts.jbar_min_eigenvalue = es.eigenvalues().minCoeff();
    if (!(parts.jbar_min_eigenvalue > min_eigenvalue)) throw SingularCurvature(theta);

    parts.beta_n = -parts.jbar.ldlt().solve(parts.score_sum);

    Eigen::VectorXd diff(P);
    for (Eigen::Index k = 0; k < P; ++k)
        diff(k) = fit.coeffs_standardized[static_cast<std::size_t>(k)] -
                  pop.b_star_standardized[static_cast<std::size_t>(k)];
    parts.e_n = root * diff - parts.beta_n;
    return parts;
}

}  // namespace quantcurve
