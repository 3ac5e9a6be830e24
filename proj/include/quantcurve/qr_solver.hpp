#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>

namespace quantcurve {

// Check loss l_alpha(q) = |q| + (2 alpha - 1) q = 2 q (alpha - 1{q <= 0}).
// Twice the usual pinball loss; same minimizers.
inline double check_loss(double alpha, double q) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::domain_error("check_loss: alpha must be in (0,1)");
    return std::abs(q) + (2.0 * alpha - 1.0) * q;
}

enum class SolverStatus { Optimal, RankDeficientRegularized, MaxIterations };

inline std::string to_string(SolverStatus s) {
    switch (s) {
        case SolverStatus::Optimal: return "optimal";
        case SolverStatus::RankDeficientRegularized: return "rank-deficient-regularized";
        case SolverStatus::MaxIterations: return "max-iterations";
    }
    return "?";
}

// Kernel-weighted check-loss problem restricted to the m active points.
// design rows are U((X_i - x)/h), so the solution lives in the standardized
// parameterization B = H b.
struct WeightedQRProblem {
    Eigen::MatrixXd design;   // m x P
    Eigen::VectorXd responses; // m
    Eigen::VectorXd weights;   // m, strictly positive
    double alpha = 0.5;

    void validate() const {
        const auto m = design.rows();
        if (m < 1) throw std::invalid_argument("WeightedQRProblem: no active points");
        if (responses.size() != m || weights.size() != m)
            throw std::invalid_argument("WeightedQRProblem: size mismatch");
        if (!(alpha > 0.0 && alpha < 1.0))
            throw std::domain_error("WeightedQRProblem: alpha must be in (0,1)");
        if (!design.allFinite() || !responses.allFinite() || !weights.allFinite())
            throw std::domain_error("WeightedQRProblem: non-finite input");
        if ((weights.array() <= 0.0).any())
            throw std::invalid_argument("WeightedQRProblem: weights must be strictly positive");
    }
};

struct SolverResult {
    Eigen::VectorXd coefficients;  // standardized scale
    SolverStatus status = SolverStatus::Optimal;
    double duality_gap = 0.0;      // relative
    int iterations = 0;
    int active_points = 0;
    double objective = 0.0;        // sum_i w_i l_alpha(r_i)
};

struct SolverOptions {
    double gap = 1e-9;       // relative duality gap target
    int max_iterations = 200;
    double step_factor = 0.99995;
};

inline double weighted_objective(const WeightedQRProblem& prob, const Eigen::VectorXd& coef) {
    const Eigen::VectorXd r = prob.responses - prob.design * coef;
    double obj = 0.0;
    for (Eigen::Index i = 0; i < r.size(); ++i)
        obj += prob.weights(i) * check_loss(prob.alpha, r(i));
    return obj;
}

// One-sided directional derivative of the weighted check-loss objective at
// coef along dir.  Nonnegative along every direction iff coef is optimal.
// Residuals within tie_tol of zero use the kink subdifferential, so the
// certificate is robust to interior-point solutions that miss an exact zero
// by a rounding error.
inline double directional_derivative(const WeightedQRProblem& prob, const Eigen::VectorXd& coef,
                                     const Eigen::VectorXd& dir, double tie_tol = 1e-8) {
    const Eigen::VectorXd r = prob.responses - prob.design * coef;
    const Eigen::VectorXd t = -(prob.design * dir);  // residual change rate
    double dd = 0.0;
    for (Eigen::Index i = 0; i < r.size(); ++i) {
        double g;
        if (r(i) > tie_tol)
            g = 2.0 * prob.alpha * t(i);
        else if (r(i) < -tie_tol)
            g = 2.0 * (prob.alpha - 1.0) * t(i);
        else
            g = 2.0 * std::max(prob.alpha * t(i), (prob.alpha - 1.0) * t(i));
        dd += prob.weights(i) * g;
    }
    return dd;
}

namespace detail {

// Solve (A D A^T + ridge I) sol = rhs with D diagonal.  Falls back to a ridge
// when the normal matrix is numerically rank deficient; reports whether the
// ridge was engaged.
inline Eigen::VectorXd normal_solve(const Eigen::MatrixXd& A, const Eigen::VectorXd& d,
                                    const Eigen::VectorXd& rhs, double& ridge, bool& regularized,
                                    Eigen::LLT<Eigen::MatrixXd>& llt) {
    const Eigen::Index P = A.rows();
    Eigen::MatrixXd M = A * d.asDiagonal() * A.transpose();
    if (ridge > 0.0) M.diagonal().array() += ridge;
    llt.compute(M);
    if (llt.info() != Eigen::Success) {
        ridge = 1e-8 * M.trace() / static_cast<double>(P);
        if (!(ridge > 0.0)) ridge = 1e-12;
        M.diagonal().array() += ridge;
        llt.compute(M);
        regularized = true;
        if (llt.info() != Eigen::Success)
            throw std::runtime_error("qr_solver: normal equations not factorizable");
    }
    return llt.solve(rhs);
}

}  // namespace detail

// Frisch-Newton interior point with Mehrotra predictor-corrector on the dual
// LP  max{ y^T a : A^T a = (1-alpha) A^T 1, a in [0,1]^m }  of the weighted
// pinball problem (weights absorbed by row scaling, which leaves the argmin
// unchanged since the loss is positively homogeneous).
inline SolverResult solve_weighted_qr(const WeightedQRProblem& prob,
                                      const SolverOptions& opts = {}) {
    prob.validate();
    const Eigen::Index m = prob.design.rows();
    const Eigen::Index P = prob.design.cols();
    const double tau = prob.alpha;

    // row-scaled data; A is P x m
    Eigen::MatrixXd A = (prob.weights.asDiagonal() * prob.design).transpose();
    Eigen::VectorXd c = -(prob.weights.asDiagonal() * prob.responses);

    SolverResult res;
    res.active_points = static_cast<int>(m);

    double ridge = 0.0;
    bool regularized = false;
    if (m < P) {
        ridge = 1e-8 * (A * A.transpose()).trace() / static_cast<double>(P);
        if (!(ridge > 0.0)) ridge = 1e-12;
        regularized = true;
    }

    const Eigen::VectorXd b_rhs = (1.0 - tau) * A.rowwise().sum();
    Eigen::VectorXd x = Eigen::VectorXd::Constant(m, 1.0 - tau);
    Eigen::VectorXd d = Eigen::VectorXd::Ones(m);
    Eigen::LLT<Eigen::MatrixXd> llt;
    Eigen::VectorXd y = detail::normal_solve(A, d, A * c, ridge, regularized, llt);
    Eigen::VectorXd s_dual = c - A.transpose() * y;

    const double init_eps = 1e-12;
    Eigen::VectorXd z(m), w(m), s(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        if (std::abs(s_dual(i)) < init_eps) {
            z(i) = std::max(s_dual(i), 0.0) + init_eps;
            w(i) = std::max(-s_dual(i), 0.0) + init_eps;
        } else {
            z(i) = std::max(s_dual(i), 0.0);
            w(i) = std::max(-s_dual(i), 0.0);
        }
        s(i) = 1.0 - x(i);
    }

    const double obj_scale = 1.0 + c.cwiseAbs().sum();
    double gap = z.dot(x) + w.dot(s);
    double best_gap = gap;
    int stall = 0;

    Eigen::VectorXd dx(m), ds(m), dz(m), dw(m), dsd(m), rhs(P), dy(P), dr(m), u(m);
    int it = 0;
    while (gap / obj_scale > opts.gap && it < opts.max_iterations) {
        ++it;
        for (Eigen::Index i = 0; i < m; ++i) {
            d(i) = 1.0 / (z(i) / x(i) + w(i) / s(i));
            dsd(i) = z(i) - w(i);
            dr(i) = d(i) * dsd(i);
        }
        rhs = b_rhs - A * x + A * dr;
        dy = detail::normal_solve(A, d, rhs, ridge, regularized, llt);
        ds = A.transpose() * dy - dsd;

        double deltap = 1e20, deltad = 1e20;
        for (Eigen::Index i = 0; i < m; ++i) {
            dx(i) = d(i) * ds(i);
            ds(i) = -dx(i);
            dz(i) = -z(i) * (dx(i) / x(i) + 1.0);
            dw(i) = -w(i) * (ds(i) / s(i) + 1.0);
            if (dx(i) < 0) deltap = std::min(deltap, -x(i) / dx(i));
            if (ds(i) < 0) deltap = std::min(deltap, -s(i) / ds(i));
            if (dz(i) < 0) deltad = std::min(deltad, -z(i) / dz(i));
            if (dw(i) < 0) deltad = std::min(deltad, -w(i) / dw(i));
        }
        deltap = std::min(opts.step_factor * deltap, 1.0);
        deltad = std::min(opts.step_factor * deltad, 1.0);

        if (std::min(deltap, deltad) < 1.0) {
            // Mehrotra corrector
            double mu = z.dot(x) + w.dot(s);
            const double g = mu + deltap * dx.dot(z) + deltad * dz.dot(x) +
                             deltap * deltad * dx.dot(dz) + deltap * ds.dot(w) +
                             deltad * dw.dot(s) + deltap * deltad * ds.dot(dw);
            mu = mu * std::pow(g / mu, 3) / (2.0 * static_cast<double>(m));
            for (Eigen::Index i = 0; i < m; ++i)
                dr(i) = d(i) * (mu * (1.0 / s(i) - 1.0 / x(i)) + dx(i) * dz(i) / x(i) -
                                ds(i) * dw(i) / s(i));
            dy = llt.solve(rhs + A * dr);
            u = A.transpose() * dy;
            deltap = 1e20;
            deltad = 1e20;
            for (Eigen::Index i = 0; i < m; ++i) {
                const double dxdz = dx(i) * dz(i);
                const double dsdw = ds(i) * dw(i);
                dx(i) = d(i) * (u(i) - z(i) + w(i)) - dr(i);
                ds(i) = -dx(i);
                dz(i) = -z(i) + (mu - z(i) * dx(i) - dxdz) / x(i);
                dw(i) = -w(i) + (mu - w(i) * ds(i) - dsdw) / s(i);
                if (dx(i) < 0) deltap = std::min(deltap, -x(i) / dx(i));
                if (ds(i) < 0) deltap = std::min(deltap, -s(i) / ds(i));
                if (dz(i) < 0) deltad = std::min(deltad, -z(i) / dz(i));
                if (dw(i) < 0) deltad = std::min(deltad, -w(i) / dw(i));
            }
            deltap = std::min(opts.step_factor * deltap, 1.0);
            deltad = std::min(opts.step_factor * deltad, 1.0);
        }

        x += deltap * dx;
        s += deltap * ds;
        y += deltad * dy;
        z += deltad * dz;
        w += deltad * dw;
        gap = z.dot(x) + w.dot(s);

        if (gap < 0.9 * best_gap) {
            best_gap = gap;
            stall = 0;
        } else if (++stall >= 10) {
            break;
        }
    }

    res.coefficients = -y;
    res.iterations = it;
    res.duality_gap = gap / obj_scale;
    res.objective = weighted_objective(prob, res.coefficients);
    if (regularized)
        res.status = SolverStatus::RankDeficientRegularized;
    else if (gap / obj_scale <= opts.gap)
        res.status = SolverStatus::Optimal;
    else
        res.status = SolverStatus::MaxIterations;
    return res;
}

}  // namespace quantcurve
