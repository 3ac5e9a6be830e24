#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "dgp.hpp"
#include "estimator.hpp"
#include "kernel.hpp"
#include "multi_index.hpp"
#include "quadrature.hpp"

namespace quantcurve {

struct QuadSpec {
    int nodes_per_axis = 0;  // 0: 64 for d=1, 32 for d>=2
    double newton_tol = 1e-12;
    int max_newton_steps = 100;

    int nodes_for(int d) const { return nodes_per_axis > 0 ? nodes_per_axis : (d == 1 ? 64 : 32); }
};

// Population pseudo-true coefficients b*(theta) for a synthetic DGP,
// obtained by solving the first-order condition
//
//   integral { F(U(z)^T B | x + h z) - alpha } f(x + h z) U(z) K(z) dz = 0
//
// with tensor quadrature and damped Newton.  The Jacobian is
// integral U U^T f(U(z)^T B | x + h z) f(x + h z) K(z) dz, positive definite
// at the solution.
struct PopulationFit {
    EvalPoint theta;
    std::vector<double> b_star_standardized;
    std::vector<double> b_star_natural;
    double residual_norm = 0.0;       // sup-norm of the FOC system at the solution
    double jacobian_min_eigenvalue = 0.0;
    int newton_steps = 0;
};

class NewtonFailure : public std::runtime_error {
public:
    NewtonFailure(const EvalPoint& theta, double residual, std::vector<double> iterate)
        : std::runtime_error(message(theta, residual)), last_iterate(std::move(iterate)),
          last_residual(residual) {}

    std::vector<double> last_iterate;
    double last_residual;

private:
    static std::string message(const EvalPoint& theta, double residual) {
        std::ostringstream os;
        os << "population FOC Newton failed at theta " << theta.describe()
           << ", residual " << residual;
        return os.str();
    }
};

namespace detail {

struct FocNodes {
    std::vector<std::vector<double>> z;   // quadrature nodes, scaled coordinates
    std::vector<double> kw;               // K(z) * quad weight * f(x + h z)
    Eigen::MatrixXd U;                    // node count x P
    std::vector<std::vector<double>> xz;  // x + h z per node
};

inline FocNodes build_foc_nodes(const Dgp& dgp, const EvalPoint& theta, const BasisSpec& basis,
                                const KernelSpec& kernel, const QuadSpec& quad) {
    const int d = dgp.d;
    const QuadRule base = gauss_legendre(quad.nodes_for(d));
    std::vector<AxisRule> axes;
    for (int j = 0; j < d; ++j) {
        const auto ju = static_cast<std::size_t>(j);
        std::vector<double> breaks;
        // split panels where x + h z crosses a kink of the DGP
        for (double c : dgp.kinks[ju]) breaks.push_back((c - theta.x[ju]) / theta.h);
        axes.push_back(paneled_axis(base, -1.0, 1.0, breaks));
    }

    FocNodes out;
    const std::size_t P = basis.size();
    std::vector<std::size_t> idx(static_cast<std::size_t>(d), 0);
    std::vector<double> z(static_cast<std::size_t>(d)), xz(static_cast<std::size_t>(d));
    std::vector<std::vector<double>> us;
    for (;;) {
        double w = 1.0;
        for (int j = 0; j < d; ++j) {
            const auto ju = static_cast<std::size_t>(j);
            z[ju] = axes[ju].nodes[idx[ju]];
            w *= axes[ju].weights[idx[ju]];
        }
        const double K = kernel.value(z);
        if (K > 0.0) {
            for (int j = 0; j < d; ++j) {
                const auto ju = static_cast<std::size_t>(j);
                xz[ju] = theta.x[ju] + theta.h * z[ju];
            }
            const double fx = dgp.marginal_density(xz);
            if (fx > 0.0) {
                out.z.push_back(z);
                out.xz.push_back(xz);
                out.kw.push_back(w * K * fx);
                us.push_back(basis.eval(z));
            }
        }
        std::size_t j = 0;
        for (; j < static_cast<std::size_t>(d); ++j) {
            if (++idx[j] < axes[j].nodes.size()) break;
            idx[j] = 0;
        }
        if (j == static_cast<std::size_t>(d)) break;
    }
    out.U.resize(static_cast<Eigen::Index>(us.size()), static_cast<Eigen::Index>(P));
    for (std::size_t i = 0; i < us.size(); ++i)
        for (std::size_t k = 0; k < P; ++k)
            out.U(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = us[i][k];
    return out;
}

}  // namespace detail

inline PopulationFit solve_population_foc(const Dgp& dgp, const EvalPoint& theta,
                                          const BasisSpec& basis, const KernelSpec& kernel,
                                          const QuadSpec& quad = {}) {
    theta.validate();
    if (basis.dim() != dgp.d || kernel.dim() != dgp.d ||
        theta.x.size() != static_cast<std::size_t>(dgp.d))
        throw std::invalid_argument("solve_population_foc: dimension mismatch");

    const detail::FocNodes nodes = detail::build_foc_nodes(dgp, theta, basis, kernel, quad);
    if (nodes.kw.empty())
        throw std::runtime_error("solve_population_foc: quadrature support empty at theta " +
                                 theta.describe());
    const Eigen::Index P = static_cast<Eigen::Index>(basis.size());
    const Eigen::Index N = nodes.U.rows();

    auto residual = [&](const Eigen::VectorXd& B, Eigen::VectorXd& g) {
        const Eigen::VectorXd q = nodes.U * B;  // U(z)^T B at each node
        g.setZero(P);
        for (Eigen::Index i = 0; i < N; ++i) {
            const double c =
                (dgp.conditional_cdf(q(i), nodes.xz[static_cast<std::size_t>(i)]) - theta.alpha) *
                nodes.kw[static_cast<std::size_t>(i)];
            g.noalias() += c * nodes.U.row(i).transpose();
        }
    };
    auto jacobian = [&](const Eigen::VectorXd& B, Eigen::MatrixXd& J) {
        const Eigen::VectorXd q = nodes.U * B;
        J.setZero(P, P);
        for (Eigen::Index i = 0; i < N; ++i) {
            const double c =
                dgp.conditional_pdf(q(i), nodes.xz[static_cast<std::size_t>(i)]) *
                nodes.kw[static_cast<std::size_t>(i)];
            J.noalias() += c * nodes.U.row(i).transpose() * nodes.U.row(i);
        }
    };

    // initial point (Q(alpha|x), 0, ..., 0): the h -> 0 limit of B*
    Eigen::VectorXd B = Eigen::VectorXd::Zero(P);
    B(0) = dgp.quantile(theta.alpha, theta.x);

    Eigen::VectorXd g(P), g_try(P);
    Eigen::MatrixXd J(P, P);
    residual(B, g);
    double gnorm = g.lpNorm<Eigen::Infinity>();
    int steps = 0;
    while (gnorm > quad.newton_tol) {
        if (steps >= quad.max_newton_steps)
            throw NewtonFailure(theta, gnorm, std::vector<double>(B.data(), B.data() + P));
        ++steps;
        jacobian(B, J);
        const Eigen::VectorXd step = J.ldlt().solve(g);
        double t = 1.0;
        for (;;) {
            const Eigen::VectorXd B_try = B - t * step;
            residual(B_try, g_try);
            const double gn_try = g_try.lpNorm<Eigen::Infinity>();
            if (gn_try < gnorm || t < 1e-12) {
                B = B_try;
                g = g_try;
                gnorm = gn_try;
                break;
            }
            t *= 0.5;
        }
    }

    PopulationFit fit;
    fit.theta = theta;
    fit.newton_steps = steps;
    fit.residual_norm = gnorm;
    fit.b_star_standardized.assign(B.data(), B.data() + P);
    const std::vector<double> scale = basis.scaling(theta.h);
    fit.b_star_natural.resize(static_cast<std::size_t>(P));
    for (Eigen::Index k = 0; k < P; ++k)
        fit.b_star_natural[static_cast<std::size_t>(k)] = B(k) / scale[static_cast<std::size_t>(k)];

    jacobian(B, J);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    fit.jacobian_min_eigenvalue = es.eigenvalues().minCoeff();
    if (!(fit.jacobian_min_eigenvalue > 0.0))
        throw std::runtime_error("solve_population_foc: FOC Jacobian not positive definite at " +
                                 theta.describe());
    return fit;
}

// b*_v(theta) - b_v(alpha|x), natural scale.
inline double population_bias(const Dgp& dgp, const EvalPoint& theta, const BasisSpec& basis,
                              const KernelSpec& kernel, const MultiIndex& v,
                              const QuadSpec& quad = {}) {
    const PopulationFit fit = solve_population_foc(dgp, theta, basis, kernel, quad);
    return fit.b_star_natural[basis.position(v)] - dgp.quantile_deriv(theta.alpha, theta.x, v);
}

// Taylor-counterpart Q*(x'; theta) = U(x'-x)^T b*(theta).
inline double population_taylor(const PopulationFit& fit, const BasisSpec& basis,
                                const std::vector<double>& x_prime) {
    std::vector<double> z(fit.theta.x.size());
    for (std::size_t j = 0; j < z.size(); ++j)
        z[j] = (x_prime[j] - fit.theta.x[j]) / fit.theta.h;
    const std::vector<double> u = basis.eval(z);
    double q = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) q += u[k] * fit.b_star_standardized[k];
    return q;
}

}  // namespace quantcurve
