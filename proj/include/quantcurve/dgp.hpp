#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "multi_index.hpp"
#include "normal.hpp"
#include "rng.hpp"

namespace quantcurve {

// Synthetic data-generating process with closed-form conditional law.  All
// shipped DGPs are Gaussian location-scale: Y = loc(X) + scale(X) * eps with
// eps ~ N(0,1) and X uniform on a box, so F, f, Q, q and the derivatives of
// Q are available exactly.
struct Dgp {
    std::string name;
    int d = 1;
    double smoothness = std::numeric_limits<double>::infinity();
    std::vector<double> lo, hi;  // covariate box

    std::function<double(const std::vector<double>&)> loc;
    std::function<double(const std::vector<double>&)> scale;
    // v-th partial derivative of loc / scale; only |v| <= deriv_order queried
    std::function<double(const std::vector<double>&, const MultiIndex&)> loc_deriv;
    std::function<double(const std::vector<double>&, const MultiIndex&)> scale_deriv;
    int deriv_order = 0;
    // x-axis locations where loc has a kink, per dimension (quadrature panels)
    std::vector<std::vector<double>> kinks;

    double marginal_density(const std::vector<double>& x) const {
        double v = 1.0;
        for (int j = 0; j < d; ++j) {
            const auto ju = static_cast<std::size_t>(j);
            if (x[ju] < lo[ju] || x[ju] > hi[ju]) return 0.0;
            v /= hi[ju] - lo[ju];
        }
        return v;
    }

    double conditional_cdf(double y, const std::vector<double>& x) const {
        return normal_cdf((y - loc(x)) / scale(x));
    }

    double conditional_pdf(double y, const std::vector<double>& x) const {
        const double s = scale(x);
        return normal_pdf((y - loc(x)) / s) / s;
    }

    double quantile(double alpha, const std::vector<double>& x) const {
        return loc(x) + scale(x) * normal_quantile(alpha);
    }

    // d^|v| Q(alpha|x) / dx^v
    double quantile_deriv(double alpha, const std::vector<double>& x, const MultiIndex& v) const {
        if (v.degree == 0) return quantile(alpha, x);
        return loc_deriv(x, v) + normal_quantile(alpha) * scale_deriv(x, v);
    }

    // conditional quantile density q(alpha|x) = 1 / f(Q(alpha|x)|x)
    double quantile_density(double alpha, const std::vector<double>& x) const {
        return scale(x) / normal_pdf(normal_quantile(alpha));
    }

    // Inverse-transform draw: d uniforms for X, one for Y.
    void draw(CounterRng& rng, std::vector<double>& x_out, double& y_out) const {
        x_out.resize(static_cast<std::size_t>(d));
        for (int j = 0; j < d; ++j) {
            const auto ju = static_cast<std::size_t>(j);
            x_out[ju] = rng.uniform(lo[ju], hi[ju]);
        }
        y_out = quantile(rng.uniform(), x_out);
    }
};

namespace detail {

inline double poly_deriv_zero(const MultiIndex&) { return 0.0; }

}  // namespace detail

// Q(alpha|x) = a + b x + PhiInv(alpha); exactly linear, zero bias for p >= 1.
inline Dgp make_location_linear(double a = 2.0, double b = 3.0) {
    Dgp g;
    g.name = "location-linear";
    g.d = 1;
    g.lo = {-1.0};
    g.hi = {1.0};
    g.deriv_order = 10;
    g.loc = [a, b](const std::vector<double>& x) { return a + b * x[0]; };
    g.scale = [](const std::vector<double>&) { return 1.0; };
    g.loc_deriv = [b](const std::vector<double>&, const MultiIndex& v) {
        return v.degree == 1 ? b : 0.0;
    };
    g.scale_deriv = [](const std::vector<double>&, const MultiIndex&) { return 0.0; };
    g.kinks = {{}};
    return g;
}

// Y = sign(X) |X|^{1/2} + eps, X ~ U[-1,1]: the quantile function is Holder
// of order 1/2 at x = 0 and nowhere smoother there.
inline Dgp make_signed_sqrt() {
    Dgp g;
    g.name = "signed-sqrt";
    g.d = 1;
    g.smoothness = 0.5;
    g.lo = {-1.0};
    g.hi = {1.0};
    g.deriv_order = 0;
    g.loc = [](const std::vector<double>& x) {
        return x[0] >= 0.0 ? std::sqrt(x[0]) : -std::sqrt(-x[0]);
    };
    g.scale = [](const std::vector<double>&) { return 1.0; };
    g.loc_deriv = [](const std::vector<double>&, const MultiIndex&) -> double {
        throw std::domain_error("signed-sqrt: derivatives of Q are not defined at this order");
    };
    g.scale_deriv = [](const std::vector<double>&, const MultiIndex&) { return 0.0; };
    g.kinks = {{0.0}};
    return g;
}

// Q(alpha|x) = PhiInv(alpha) + sin(2x), X ~ U[-1,1]; smooth location model.
inline Dgp make_location_sin() {
    Dgp g;
    g.name = "location-sin";
    g.d = 1;
    g.lo = {-1.0};
    g.hi = {1.0};
    g.deriv_order = 10;
    g.loc = [](const std::vector<double>& x) { return std::sin(2.0 * x[0]); };
    g.scale = [](const std::vector<double>&) { return 1.0; };
    g.loc_deriv = [](const std::vector<double>& x, const MultiIndex& v) {
        const int k = v.degree;
        const double f = std::pow(2.0, k);
        switch (k % 4) {
            case 0: return f * std::sin(2.0 * x[0]);
            case 1: return f * std::cos(2.0 * x[0]);
            case 2: return -f * std::sin(2.0 * x[0]);
            default: return -f * std::cos(2.0 * x[0]);
        }
    };
    g.scale_deriv = [](const std::vector<double>&, const MultiIndex&) { return 0.0; };
    g.kinks = {{}};
    return g;
}

// Y = X + (1 + X^2) eps: quantile derivatives depend on alpha through the
// level-dependent scale term.
inline Dgp make_heteroskedastic() {
    Dgp g;
    g.name = "heteroskedastic";
    g.d = 1;
    g.lo = {-1.0};
    g.hi = {1.0};
    g.deriv_order = 10;
    g.loc = [](const std::vector<double>& x) { return x[0]; };
    g.scale = [](const std::vector<double>& x) { return 1.0 + x[0] * x[0]; };
    g.loc_deriv = [](const std::vector<double>&, const MultiIndex& v) {
        return v.degree == 1 ? 1.0 : 0.0;
    };
    g.scale_deriv = [](const std::vector<double>& x, const MultiIndex& v) {
        if (v.degree == 1) return 2.0 * x[0];
        if (v.degree == 2) return 2.0;
        return 0.0;
    };
    g.kinks = {{}};
    return g;
}

// d = 2 additive model Q(alpha|x) = sin(2 x1) + x2^2 + PhiInv(alpha).
inline Dgp make_additive_2d() {
    Dgp g;
    g.name = "additive-2d";
    g.d = 2;
    g.lo = {-1.0, -1.0};
    g.hi = {1.0, 1.0};
    g.deriv_order = 10;
    g.loc = [](const std::vector<double>& x) { return std::sin(2.0 * x[0]) + x[1] * x[1]; };
    g.scale = [](const std::vector<double>&) { return 1.0; };
    g.loc_deriv = [](const std::vector<double>& x, const MultiIndex& v) -> double {
        const int k1 = v.components[0], k2 = v.components[1];
        if (k1 > 0 && k2 > 0) return 0.0;
        if (k2 > 0) {
            if (k2 == 1) return 2.0 * x[1];
            if (k2 == 2) return 2.0;
            return 0.0;
        }
        const double f = std::pow(2.0, k1);
        switch (k1 % 4) {
            case 0: return f * std::sin(2.0 * x[0]);
            case 1: return f * std::cos(2.0 * x[0]);
            case 2: return -f * std::sin(2.0 * x[0]);
            default: return -f * std::cos(2.0 * x[0]);
        }
    };
    g.scale_deriv = [](const std::vector<double>&, const MultiIndex&) { return 0.0; };
    g.kinks = {{}, {}};
    return g;
}

inline Dgp make_dgp(const std::string& name) {
    if (name == "location-linear") return make_location_linear();
    if (name == "signed-sqrt") return make_signed_sqrt();
    if (name == "location-sin") return make_location_sin();
    if (name == "heteroskedastic") return make_heteroskedastic();
    if (name == "additive-2d") return make_additive_2d();
    throw std::invalid_argument("unknown DGP: " + name);
}

// Draw an i.i.d. sample of size n from stream (seed, stream).
inline void draw_sample(const Dgp& g, std::size_t n, std::uint64_t seed, std::uint64_t stream,
                        std::vector<double>& x, std::vector<double>& y) {
    CounterRng rng(seed, stream);
    x.resize(n * static_cast<std::size_t>(g.d));
    y.resize(n);
    std::vector<double> xi;
    for (std::size_t i = 0; i < n; ++i) {
        double yi;
        g.draw(rng, xi, yi);
        for (int j = 0; j < g.d; ++j) x[i * static_cast<std::size_t>(g.d) + static_cast<std::size_t>(j)] = xi[static_cast<std::size_t>(j)];
        y[i] = yi;
    }
}

}  // namespace quantcurve
