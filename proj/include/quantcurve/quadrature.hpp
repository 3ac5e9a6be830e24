#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace quantcurve {

struct QuadRule {
    std::vector<double> nodes;    // on [-1, 1]
    std::vector<double> weights;
};

// Gauss-Legendre nodes and weights on [-1,1], Newton iteration on the
// Legendre recurrence (classic gauleg).
inline QuadRule gauss_legendre(int n) {
    if (n < 1) throw std::invalid_argument("gauss_legendre: need n >= 1");
    QuadRule r;
    r.nodes.resize(static_cast<std::size_t>(n));
    r.weights.resize(static_cast<std::size_t>(n));
    const int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
        double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p1 = 1.0, p2 = 0.0;
            for (int j = 0; j < n; ++j) {
                double p3 = p2;
                p2 = p1;
                p1 = ((2.0 * j + 1.0) * z * p2 - j * p3) / (j + 1.0);
            }
            pp = n * (z * p1 - p2) / (z * z - 1.0);
            double z1 = z;
            z = z1 - p1 / pp;
            if (std::abs(z - z1) < 1e-15) break;
        }
        r.nodes[static_cast<std::size_t>(i)] = -z;
        r.nodes[static_cast<std::size_t>(n - 1 - i)] = z;
        double w = 2.0 / ((1.0 - z * z) * pp * pp);
        r.weights[static_cast<std::size_t>(i)] = w;
        r.weights[static_cast<std::size_t>(n - 1 - i)] = w;
    }
    return r;
}

// One axis of a tensor rule: [a,b] split into panels at interior break
// points, Gauss-Legendre mapped onto each panel.
struct AxisRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

inline AxisRule paneled_axis(const QuadRule& base, double a, double b,
                             const std::vector<double>& breaks) {
    std::vector<double> edges{a};
    for (double c : breaks)
        if (c > a + 1e-14 && c < b - 1e-14) edges.push_back(c);
    edges.push_back(b);
    std::sort(edges.begin(), edges.end());
    AxisRule r;
    for (std::size_t e = 0; e + 1 < edges.size(); ++e) {
        const double lo = edges[e], hi = edges[e + 1];
        const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
        for (std::size_t i = 0; i < base.nodes.size(); ++i) {
            r.nodes.push_back(mid + half * base.nodes[i]);
            r.weights.push_back(half * base.weights[i]);
        }
    }
    return r;
}

// Tensor-product quadrature over a d-dimensional box.  f receives the node
// coordinates; per-axis panel splits handle integrand kinks.
inline double tensor_integrate(const std::vector<AxisRule>& axes,
                               const std::function<double(const std::vector<double>&)>& f) {
    const std::size_t d = axes.size();
    std::vector<std::size_t> idx(d, 0);
    std::vector<double> z(d);
    double total = 0.0;
    for (;;) {
        double w = 1.0;
        for (std::size_t j = 0; j < d; ++j) {
            z[j] = axes[j].nodes[idx[j]];
            w *= axes[j].weights[idx[j]];
        }
        total += w * f(z);
        std::size_t j = 0;
        for (; j < d; ++j) {
            if (++idx[j] < axes[j].nodes.size()) break;
            idx[j] = 0;
        }
        if (j == d) break;
    }
    return total;
}

}  // namespace quantcurve
