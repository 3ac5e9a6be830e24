#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "kernel.hpp"
#include "multi_index.hpp"
#include "parallel.hpp"
#include "qr_solver.hpp"

namespace quantcurve {

struct Sample {
    std::vector<double> x;  // row major, n x d
    std::vector<double> y;  // n
    std::size_t n = 0;
    std::size_t d = 0;

    void validate() const {
        if (n < 1) throw std::invalid_argument("Sample: need at least one observation");
        if (x.size() != n * d || y.size() != n)
            throw std::invalid_argument("Sample: size mismatch");
        for (double v : x)
            if (!std::isfinite(v)) throw std::domain_error("Sample: non-finite covariate");
        for (double v : y)
            if (!std::isfinite(v)) throw std::domain_error("Sample: non-finite response");
    }

    std::vector<double> row(std::size_t i) const {
        return std::vector<double>(x.begin() + static_cast<std::ptrdiff_t>(i * d),
                                   x.begin() + static_cast<std::ptrdiff_t>((i + 1) * d));
    }
};

// theta = (alpha, h, x): the triple every estimate is indexed by.
struct EvalPoint {
    double alpha;
    double h;
    std::vector<double> x;

    void validate() const {
        if (!(alpha > 0.0 && alpha < 1.0))
            throw std::domain_error("EvalPoint: alpha must be in (0,1)");
        if (!(h > 0.0)) throw std::domain_error("EvalPoint: bandwidth must be positive");
        for (double v : x)
            if (!std::isfinite(v)) throw std::domain_error("EvalPoint: non-finite x");
    }

    std::string describe() const {
        std::ostringstream os;
        os << "(alpha=" << alpha << ", h=" << h << ", x=(";
        for (std::size_t j = 0; j < x.size(); ++j) {
            if (j) os << ",";
            os << x[j];
        }
        os << "))";
        return os.str();
    }
};

class EmptyWindowError : public std::runtime_error {
public:
    explicit EmptyWindowError(const EvalPoint& theta)
        : std::runtime_error("empty kernel window at theta " + theta.describe()) {}
};

struct LocalFit {
    EvalPoint theta;
    std::vector<double> coeffs_standardized;  // B-hat
    std::vector<double> coeffs_natural;       // b-hat, entry v is B_v / h^|v|
    SolverResult solver;
    bool boundary = false;  // x outside the declared inner region

    double quantile() const { return coeffs_natural.at(0); }
};

// Partial derivative estimator: the natural-scale coefficient at v.
inline double derivative(const LocalFit& fit, const BasisSpec& basis, const MultiIndex& v) {
    return fit.coeffs_natural.at(basis.position(v));
}

inline LocalFit fit_at(const Sample& sample, const EvalPoint& theta, const BasisSpec& basis,
                       const KernelSpec& kernel, const SolverOptions& opts = {},
                       std::optional<double> boundary_margin = std::nullopt) {
    sample.validate();
    theta.validate();
    if (basis.dim() != static_cast<int>(sample.d) || theta.x.size() != sample.d)
        throw std::invalid_argument("fit_at: dimension mismatch");

    const LocalWeights w = local_weights(kernel, sample.x, sample.n, theta.x, theta.h);
    const std::size_t m = w.active.size();
    if (m == 0) throw EmptyWindowError(theta);

    const std::size_t P = basis.size();
    WeightedQRProblem prob;
    prob.design.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(P));
    prob.responses.resize(static_cast<Eigen::Index>(m));
    prob.weights.resize(static_cast<Eigen::Index>(m));
    prob.alpha = theta.alpha;
    std::vector<double> z(sample.d);
    for (std::size_t r = 0; r < m; ++r) {
        const std::size_t i = w.active[r];
        for (std::size_t j = 0; j < sample.d; ++j)
            z[j] = (sample.x[i * sample.d + j] - theta.x[j]) / theta.h;
        const std::vector<double> u = basis.eval(z);
        for (std::size_t k = 0; k < P; ++k)
            prob.design(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = u[k];
        prob.responses(static_cast<Eigen::Index>(r)) = sample.y[i];
        prob.weights(static_cast<Eigen::Index>(r)) = w.weights[i];
    }

    LocalFit fit;
    fit.theta = theta;
    fit.solver = solve_weighted_qr(prob, opts);
    fit.coeffs_standardized.assign(fit.solver.coefficients.data(),
                                   fit.solver.coefficients.data() + P);
    const std::vector<double> scale = basis.scaling(theta.h);
    fit.coeffs_natural.resize(P);
    for (std::size_t k = 0; k < P; ++k)
        fit.coeffs_natural[k] = fit.coeffs_standardized[k] / scale[k];

    if (boundary_margin) {
        // inner region: sample bounding box shrunk by the margin
        for (std::size_t j = 0; j < sample.d; ++j) {
            double lo = std::numeric_limits<double>::infinity();
            double hi = -std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < sample.n; ++i) {
                lo = std::min(lo, sample.x[i * sample.d + j]);
                hi = std::max(hi, sample.x[i * sample.d + j]);
            }
            if (theta.x[j] < lo + *boundary_margin || theta.x[j] > hi - *boundary_margin)
                fit.boundary = true;
        }
    }
    return fit;
}

struct GridCell {
    EvalPoint theta;
    std::optional<LocalFit> fit;
    std::string error;  // nonempty when the cell failed
};

// One cell per (alpha, h, x) triple, alpha outer, then h, then x.  Cell
// failures are recorded, never abort the grid.  Cells are evaluated
// concurrently; each writes only its own slot so the result matches
// sequential evaluation.
inline std::vector<GridCell> fit_grid(const Sample& sample, const std::vector<double>& alphas,
                                      const std::vector<double>& hs,
                                      const std::vector<std::vector<double>>& xs,
                                      const BasisSpec& basis, const KernelSpec& kernel,
                                      const SolverOptions& opts = {}) {
    if (alphas.empty() || hs.empty() || xs.empty())
        throw std::invalid_argument("fit_grid: empty grid");
    double hmax = 0.0;
    for (double h : hs) hmax = std::max(hmax, h);
    const double margin = hmax;  // support radius is 1 in scaled coordinates

    std::vector<GridCell> cells(alphas.size() * hs.size() * xs.size());
    std::size_t idx = 0;
    for (double a : alphas)
        for (double h : hs)
            for (const auto& x : xs) cells[idx++].theta = EvalPoint{a, h, x};

    parallel_for(cells.size(), [&](std::size_t i) {
        try {
            cells[i].fit = fit_at(sample, cells[i].theta, basis, kernel, opts, margin);
        } catch (const std::exception& e) {
            cells[i].error = e.what();
        }
    });
    return cells;
}

}  // namespace quantcurve
