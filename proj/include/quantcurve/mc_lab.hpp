#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "bahadur.hpp"
#include "dgp.hpp"
#include "estimator.hpp"
#include "kernel.hpp"
#include "parallel.hpp"
#include "population.hpp"
#include "qdensity.hpp"
#include "quadrature.hpp"
#include "rng.hpp"

namespace quantcurve {

struct SlopeFit {
    double slope = 0.0;
    double intercept = 0.0;
    double stderr_slope = 0.0;
};

// OLS of y on x with the usual slope standard error; at least 4 points.
inline SlopeFit fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    if (n < 4 || y.size() != n)
        throw std::invalid_argument("fit_slope: need at least 4 matching points");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    SlopeFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double rss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - f.intercept - f.slope * x[i];
        rss += r * r;
    }
    f.stderr_slope = n > 2 ? std::sqrt(rss / (static_cast<double>(n - 2) * sxx)) : 0.0;
    return f;
}

inline double median_of(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline double iqr_of(std::vector<double> v) {
    if (v.size() < 4) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    auto quantile = [&](double q) {
        const double pos = q * (static_cast<double>(v.size()) - 1.0);
        const std::size_t i = static_cast<std::size_t>(pos);
        const double frac = pos - static_cast<double>(i);
        return i + 1 < v.size() ? v[i] * (1.0 - frac) + v[i + 1] * frac : v[i];
    };
    return quantile(0.75) - quantile(0.25);
}

enum class RateTarget {
    BiasOrder,
    SharpDivergence,
    BahadurRemainder,
    GlobalSupRate,
    QdensityRate,
    RandomBandwidth
};

inline RateTarget rate_target_from_string(const std::string& s) {
    if (s == "bias-order") return RateTarget::BiasOrder;
    if (s == "sharp-divergence") return RateTarget::SharpDivergence;
    if (s == "bahadur-remainder") return RateTarget::BahadurRemainder;
    if (s == "global-sup-rate") return RateTarget::GlobalSupRate;
    if (s == "qdensity-rate") return RateTarget::QdensityRate;
    if (s == "random-bandwidth") return RateTarget::RandomBandwidth;
    throw std::invalid_argument("unknown experiment target: " + s);
}

inline std::string to_string(RateTarget t) {
    switch (t) {
        case RateTarget::BiasOrder: return "bias-order";
        case RateTarget::SharpDivergence: return "sharp-divergence";
        case RateTarget::BahadurRemainder: return "bahadur-remainder";
        case RateTarget::GlobalSupRate: return "global-sup-rate";
        case RateTarget::QdensityRate: return "qdensity-rate";
        case RateTarget::RandomBandwidth: return "random-bandwidth";
    }
    return "?";
}

struct RateExperiment {
    std::string dgp = "location-sin";
    RateTarget target = RateTarget::BiasOrder;
    std::vector<std::size_t> ns;
    std::vector<double> hs;
    std::vector<double> alphas{0.5};
    std::vector<std::vector<double>> xs{{0.0}};
    MultiIndex v{std::vector<int>{0}};
    int p = 1;
    KernelFamily kernel = KernelFamily::EpanechnikovProduct;
    int replications = 1;
    std::uint64_t seed = 0;
    double bandwidth_c = 1.0;    // c in the h(n) rules
    double smoothness = 2.0;     // s plugged into the bandwidth rules
    double expected_slope = std::numeric_limits<double>::quiet_NaN();
    double slope_tolerance = 0.15;
    bool bound_only = false;     // pass if slope <= expected + tolerance
    QdSchemeKind qd_scheme = QdSchemeKind::Central;
    double random_log_halfwidth = 0.5;  // xi ~ U[-w, w], h-hat = h exp(xi)
    int lm_m = 0;                // 0: sup norm; m > 0: L_m over the x grid

    void validate() const {
        if (replications < 1) throw std::invalid_argument("RateExperiment: replications >= 1");
        if (alphas.empty() || xs.empty())
            throw std::invalid_argument("RateExperiment: empty grids");
        for (double h : hs)
            if (!(h > 0.0)) throw std::invalid_argument("RateExperiment: bandwidths > 0");
    }
};

struct CellSummary {
    double scale = 0.0;      // abscissa the slope is regressed on (pre-log)
    double median = 0.0;     // target statistic
    double iqr = 0.0;
    double aux_median = 0.0; // companion statistic (e.g. ||beta_n||)
    int count = 0;
    int failures = 0;
};

struct RateResult {
    RateTarget target = RateTarget::BiasOrder;
    std::vector<CellSummary> cells;
    double slope = std::numeric_limits<double>::quiet_NaN();
    double slope_stderr = std::numeric_limits<double>::quiet_NaN();
    double expected_slope = std::numeric_limits<double>::quiet_NaN();
    double tolerance = 0.0;
    bool passed = false;
    bool slope_skipped = false;
    double limit_constant = std::numeric_limits<double>::quiet_NaN();  // sharp-divergence only
    double limit_estimate = std::numeric_limits<double>::quiet_NaN();
    std::string note;
};

namespace detail {

inline void finish_slope(RateResult& r, const RateExperiment& exp, bool log_scale_axis = true) {
    std::vector<double> xs, ys;
    for (const auto& c : r.cells) {
        if (!(c.median > 0.0) || !std::isfinite(c.median)) continue;
        xs.push_back(log_scale_axis ? std::log(c.scale) : c.scale);
        ys.push_back(std::log(c.median));
    }
    const SlopeFit f = fit_slope(xs, ys);
    r.slope = f.slope;
    r.slope_stderr = f.stderr_slope;
    r.tolerance = exp.slope_tolerance;
    if (exp.bound_only)
        r.passed = r.slope <= r.expected_slope + r.tolerance;
    else
        r.passed = std::abs(r.slope - r.expected_slope) <= r.tolerance;
}

inline std::uint64_t rep_stream(std::size_t cell, int rep) {
    return (static_cast<std::uint64_t>(cell) << 32) + static_cast<std::uint64_t>(rep);
}

}  // namespace detail

// Oracle bias order (no sampling): statistic |b*_v - b_v| vs h, expected
// slope s - |v|.  Exact-zero biases (quantile polynomial inside the model)
// skip the slope fit.
inline RateResult run_bias_order(const RateExperiment& exp, const QuadSpec& quad = {}) {
    exp.validate();
    if (exp.hs.size() < 4) throw std::invalid_argument("run_bias_order: need >= 4 bandwidths");
    const Dgp dgp = make_dgp(exp.dgp);
    const BasisSpec basis(dgp.d, exp.p);
    const KernelSpec kernel(exp.kernel, dgp.d);

    RateResult r;
    r.target = exp.target;
    r.expected_slope = std::isnan(exp.expected_slope)
                           ? exp.smoothness - static_cast<double>(exp.v.degree)
                           : exp.expected_slope;
    for (double h : exp.hs) {
        CellSummary c;
        c.scale = h;
        std::vector<double> stats;
        for (double a : exp.alphas)
            for (const auto& x : exp.xs) {
                try {
                    stats.push_back(std::abs(
                        population_bias(dgp, EvalPoint{a, h, x}, basis, kernel, exp.v, quad)));
                } catch (const std::exception&) {
                    ++c.failures;
                }
            }
        c.median = median_of(stats);
        c.iqr = iqr_of(stats);
        c.count = static_cast<int>(stats.size());
        r.cells.push_back(c);
    }

    bool all_zero = true;
    for (const auto& c : r.cells)
        if (!(c.median < 1e-9)) all_zero = false;
    if (all_zero) {
        r.slope_skipped = true;
        r.passed = true;
        r.note = "bias below 1e-9 at every bandwidth; slope test skipped";
        return r;
    }
    detail::finish_slope(r, exp);
    return r;
}

// Sharp divergence of b*_1 on the signed-sqrt model at theta = (0.5, h, 0):
// statistic h^{1/2} |b*_1|, limit integral |z|^{3/2} K / integral z^2 K,
// slope of log |b*_1| vs log h expected -1/2.
inline RateResult run_sharp_divergence(const RateExperiment& exp, const QuadSpec& quad = {}) {
    exp.validate();
    if (exp.hs.size() < 4)
        throw std::invalid_argument("run_sharp_divergence: need >= 4 bandwidths");
    const Dgp dgp = make_signed_sqrt();
    const BasisSpec basis(1, 1);
    const KernelSpec kernel(exp.kernel, 1);

    RateResult r;
    r.target = exp.target;
    r.expected_slope = std::isnan(exp.expected_slope) ? -0.5 : exp.expected_slope;

    // closed-form limit via an independent quadrature route
    {
        const QuadRule g = gauss_legendre(256);
        double num = 0.0, den = 0.0;
        // |z|^{3/2} has a kink at 0: integrate the halves separately
        for (int half = 0; half < 2; ++half) {
            for (std::size_t i = 0; i < g.nodes.size(); ++i) {
                const double z = 0.5 * (g.nodes[i] + 1.0) * (half ? 1.0 : -1.0);
                const double w = 0.5 * g.weights[i];
                const double K = kernel.value({z});
                num += w * std::pow(std::abs(z), 1.5) * K;
                den += w * z * z * K;
            }
        }
        r.limit_constant = num / den;
    }

    std::vector<double> log_b1, log_h;
    for (double h : exp.hs) {
        CellSummary c;
        c.scale = h;
        const PopulationFit fit =
            solve_population_foc(dgp, EvalPoint{0.5, h, {0.0}}, basis, kernel, quad);
        const double b1 = fit.b_star_natural[1];
        c.median = std::sqrt(h) * std::abs(b1);
        c.count = 1;
        r.cells.push_back(c);
        log_b1.push_back(std::log(std::abs(b1)));
        log_h.push_back(std::log(h));
    }
    double hmin = exp.hs[0];
    for (double h : exp.hs) hmin = std::min(hmin, h);
    for (const auto& c : r.cells)
        if (c.scale == hmin) r.limit_estimate = c.median;

    const SlopeFit f = fit_slope(log_h, log_b1);
    r.slope = f.slope;
    r.slope_stderr = f.stderr_slope;
    r.tolerance = exp.slope_tolerance;
    r.passed = std::abs(r.slope - r.expected_slope) <= r.tolerance;
    return r;
}

// Monte Carlo Bahadur remainder: h = c n^{-1/(2p+d)}, statistic median
// ||e_n|| over replications against n h^d; the theoretical order is an upper
// bound, so the pass rule is one sided.
inline RateResult run_bahadur_remainder(const RateExperiment& exp, const QuadSpec& quad = {}) {
    exp.validate();
    if (exp.ns.size() < 4) throw std::invalid_argument("run_bahadur_remainder: need >= 4 sizes");
    const Dgp dgp = make_dgp(exp.dgp);
    const BasisSpec basis(dgp.d, exp.p);
    const KernelSpec kernel(exp.kernel, dgp.d);
    const double alpha = exp.alphas[0];
    const std::vector<double> x0 = exp.xs[0];

    RateResult r;
    r.target = exp.target;
    r.expected_slope = std::isnan(exp.expected_slope) ? -0.25 : exp.expected_slope;

    for (std::size_t cell = 0; cell < exp.ns.size(); ++cell) {
        const std::size_t n = exp.ns[cell];
        const double h =
            exp.bandwidth_c * std::pow(static_cast<double>(n), -1.0 / (2.0 * exp.p + dgp.d));
        const EvalPoint theta{alpha, h, x0};
        const PopulationFit pop = solve_population_foc(dgp, theta, basis, kernel, quad);

        const int R = exp.replications;
        std::vector<double> e_norm(static_cast<std::size_t>(R),
                                   std::numeric_limits<double>::quiet_NaN());
        std::vector<double> b_norm(static_cast<std::size_t>(R),
                                   std::numeric_limits<double>::quiet_NaN());
        parallel_for(static_cast<std::size_t>(R), [&](std::size_t rep) {
            Sample s;
            s.n = n;
            s.d = static_cast<std::size_t>(dgp.d);
            draw_sample(dgp, n, exp.seed, detail::rep_stream(cell, static_cast<int>(rep)), s.x,
                        s.y);
            try {
                const LocalFit fit = fit_at(s, theta, basis, kernel);
                const BahadurParts parts = decompose(dgp, s, theta, fit, pop, basis, kernel);
                e_norm[rep] = parts.e_n.norm();
                b_norm[rep] = parts.beta_n.norm();
            } catch (const std::exception&) {
                // recorded below via the NaN slots
            }
        });

        CellSummary c;
        c.scale = static_cast<double>(n) * std::pow(h, dgp.d);
        std::vector<double> e_ok, b_ok;
        for (int rep = 0; rep < R; ++rep) {
            if (std::isnan(e_norm[static_cast<std::size_t>(rep)])) {
                ++c.failures;
                continue;
            }
            e_ok.push_back(e_norm[static_cast<std::size_t>(rep)]);
            b_ok.push_back(b_norm[static_cast<std::size_t>(rep)]);
        }
        c.median = median_of(e_ok);
        c.iqr = iqr_of(e_ok);
        c.aux_median = median_of(b_ok);
        c.count = static_cast<int>(e_ok.size());
        r.cells.push_back(c);
    }
    RateExperiment bound = exp;
    bound.bound_only = true;
    detail::finish_slope(r, bound);
    return r;
}

namespace detail {

// Shared engine of the global-rate and random-bandwidth experiments.
inline RateResult run_sup_rate_impl(const RateExperiment& exp, bool random_bandwidth) {
    exp.validate();
    if (exp.ns.size() < 4) throw std::invalid_argument("sup-rate: need >= 4 sample sizes");
    const Dgp dgp = make_dgp(exp.dgp);
    const BasisSpec basis(dgp.d, exp.p);
    const KernelSpec kernel(exp.kernel, dgp.d);
    const double alpha = exp.alphas[0];
    const double s = exp.smoothness;
    const std::size_t vpos = basis.position(exp.v);

    RateResult r;
    r.target = exp.target;
    r.expected_slope = std::isnan(exp.expected_slope)
                           ? (s - exp.v.degree) / (2.0 * s + dgp.d)
                           : exp.expected_slope;

    for (std::size_t cell = 0; cell < exp.ns.size(); ++cell) {
        const std::size_t n = exp.ns[cell];
        const double nn = static_cast<double>(n);
        const double rate_arg = exp.lm_m > 0 ? 1.0 / nn : std::log(nn) / nn;
        const double h = exp.bandwidth_c * std::pow(rate_arg, 1.0 / (2.0 * s + dgp.d));

        const int R = exp.replications;
        std::vector<double> err(static_cast<std::size_t>(R),
                                std::numeric_limits<double>::quiet_NaN());
        parallel_for(static_cast<std::size_t>(R), [&](std::size_t rep) {
            double h_rep = h;
            if (random_bandwidth && exp.random_log_halfwidth > 0.0) {
                // xi stream kept separate so xi == 0 reduces to the
                // deterministic run with identical sample draws
                CounterRng xi_rng(exp.seed,
                                  rep_stream(cell, static_cast<int>(rep)) | (1ULL << 63));
                h_rep = h * std::exp(xi_rng.uniform(-exp.random_log_halfwidth,
                                                    exp.random_log_halfwidth));
            }
            Sample smp;
            smp.n = n;
            smp.d = static_cast<std::size_t>(dgp.d);
            draw_sample(dgp, n, exp.seed, rep_stream(cell, static_cast<int>(rep)), smp.x, smp.y);
            try {
                double sup = 0.0, acc = 0.0;
                for (const auto& x : exp.xs) {
                    const LocalFit fit = fit_at(smp, EvalPoint{alpha, h_rep, x}, basis, kernel);
                    const double truth = dgp.quantile_deriv(alpha, x, exp.v);
                    const double e = std::abs(fit.coeffs_natural[vpos] - truth);
                    sup = std::max(sup, e);
                    acc += std::pow(e, exp.lm_m > 0 ? exp.lm_m : 1);
                }
                err[rep] = exp.lm_m > 0
                               ? std::pow(acc / static_cast<double>(exp.xs.size()),
                                          1.0 / exp.lm_m)
                               : sup;
            } catch (const std::exception&) {
            }
        });

        CellSummary c;
        c.scale = rate_arg;
        std::vector<double> ok;
        for (int rep = 0; rep < R; ++rep) {
            if (std::isnan(err[static_cast<std::size_t>(rep)]))
                ++c.failures;
            else
                ok.push_back(err[static_cast<std::size_t>(rep)]);
        }
        c.median = median_of(ok);
        c.iqr = iqr_of(ok);
        c.count = static_cast<int>(ok.size());
        r.cells.push_back(c);
    }
    detail::finish_slope(r, exp);
    return r;
}

}  // namespace detail

// Global rate in sup (or L_m) norm over the x grid: h tied to n by the
// optimal rule, expected slope (s - |v|) / (2s + d) against log(log n / n)
// (or log(1/n) for L_m).
inline RateResult run_global_sup_rate(const RateExperiment& exp) {
    return detail::run_sup_rate_impl(exp, false);
}

// Same statistic with a per-replication random bandwidth h exp(xi),
// xi ~ U[-w, w]; the slope should match the deterministic run.
inline RateResult run_random_bandwidth(const RateExperiment& exp) {
    return detail::run_sup_rate_impl(exp, true);
}

// Pointwise quantile-density rate: h = h_q = c n^{-1/(2s+d+1)}, statistic
// |q-hat - q| at (alpha, x), expected slope s/(2s+d+1) against log(1/n).
inline RateResult run_qdensity_rate(const RateExperiment& exp) {
    exp.validate();
    if (exp.ns.size() < 4) throw std::invalid_argument("run_qdensity_rate: need >= 4 sizes");
    const Dgp dgp = make_dgp(exp.dgp);
    const BasisSpec basis(dgp.d, exp.p);
    const KernelSpec kernel(exp.kernel, dgp.d);
    const QdScheme scheme = make_scheme(exp.qd_scheme);
    const double alpha = exp.alphas[0];
    const std::vector<double> x0 = exp.xs[0];
    const double s = exp.smoothness;

    RateResult r;
    r.target = exp.target;
    r.expected_slope =
        std::isnan(exp.expected_slope) ? s / (2.0 * s + dgp.d + 1.0) : exp.expected_slope;

    const double truth = dgp.quantile_density(alpha, x0);
    for (std::size_t cell = 0; cell < exp.ns.size(); ++cell) {
        const std::size_t n = exp.ns[cell];
        const double h = exp.bandwidth_c *
                         std::pow(static_cast<double>(n), -1.0 / (2.0 * s + dgp.d + 1.0));
        const int R = exp.replications;
        std::vector<double> err(static_cast<std::size_t>(R),
                                std::numeric_limits<double>::quiet_NaN());
        parallel_for(static_cast<std::size_t>(R), [&](std::size_t rep) {
            Sample smp;
            smp.n = n;
            smp.d = static_cast<std::size_t>(dgp.d);
            draw_sample(dgp, n, exp.seed, detail::rep_stream(cell, static_cast<int>(rep)), smp.x,
                        smp.y);
            try {
                const double qhat = estimate_qd(smp, alpha, x0, h, h, scheme, basis, kernel);
                err[rep] = std::abs(qhat - truth);
            } catch (const std::exception&) {
            }
        });

        CellSummary c;
        c.scale = 1.0 / static_cast<double>(n);
        std::vector<double> ok;
        for (int rep = 0; rep < R; ++rep) {
            if (std::isnan(err[static_cast<std::size_t>(rep)]))
                ++c.failures;
            else
                ok.push_back(err[static_cast<std::size_t>(rep)]);
        }
        c.median = median_of(ok);
        c.iqr = iqr_of(ok);
        c.count = static_cast<int>(ok.size());
        r.cells.push_back(c);
    }
    detail::finish_slope(r, exp);
    return r;
}

inline RateResult run_experiment(const RateExperiment& exp) {
    switch (exp.target) {
        case RateTarget::BiasOrder: return run_bias_order(exp);
        case RateTarget::SharpDivergence: return run_sharp_divergence(exp);
        case RateTarget::BahadurRemainder: return run_bahadur_remainder(exp);
        case RateTarget::GlobalSupRate: return run_global_sup_rate(exp);
        case RateTarget::QdensityRate: return run_qdensity_rate(exp);
        case RateTarget::RandomBandwidth: return run_random_bandwidth(exp);
    }
    throw std::logic_error("run_experiment: unreachable");
}

}  // namespace quantcurve
