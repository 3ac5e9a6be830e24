#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "quadrature.hpp"

namespace quantcurve {

enum class KernelFamily { UniformBall, EpanechnikovProduct, TriweightProduct };

inline KernelFamily kernel_family_from_string(const std::string& s) {
    if (s == "uniform-ball") return KernelFamily::UniformBall;
    if (s == "epanechnikov-product") return KernelFamily::EpanechnikovProduct;
    if (s == "triweight-product") return KernelFamily::TriweightProduct;
    throw std::invalid_argument("unknown kernel family: " + s);
}

inline std::string to_string(KernelFamily f) {
    switch (f) {
        case KernelFamily::UniformBall: return "uniform-ball";
        case KernelFamily::EpanechnikovProduct: return "epanechnikov-product";
        case KernelFamily::TriweightProduct: return "triweight-product";
    }
    return "?";
}

// Compactly supported multivariate kernel, support radius 1 in scaled
// coordinates.  uniform-ball is the indicator of the unit ball; the product
// families live on [-1,1]^d.  The uniform-ball family is not Lipschitz and is
// flagged as such in diagnostics.
class KernelSpec {
public:
    KernelSpec(KernelFamily family, int d) : family_(family), d_(d) {
        if (d < 1) throw std::invalid_argument("KernelSpec: dimension must be >= 1");
        if (d <= 3) {
            const double mass = normalization_integral();
            if (std::abs(mass - 1.0) > 1e-6)
                throw std::logic_error("KernelSpec: kernel does not integrate to 1");
        }
    }

    KernelFamily family() const { return family_; }
    int dim() const { return d_; }
    bool lipschitz() const { return family_ != KernelFamily::UniformBall; }

    double value(const std::vector<double>& z) const {
        if (z.size() != static_cast<std::size_t>(d_))
            throw std::invalid_argument("kernel_value: dimension mismatch");
        switch (family_) {
            case KernelFamily::UniformBall: {
                double r2 = 0.0;
                for (double t : z) r2 += t * t;
                return r2 <= 1.0 ? 1.0 / unit_ball_volume(d_) : 0.0;
            }
            case KernelFamily::EpanechnikovProduct: {
                double v = 1.0;
                for (double t : z) {
                    if (std::abs(t) >= 1.0) return 0.0;
                    v *= 0.75 * (1.0 - t * t);
                }
                return v;
            }
            case KernelFamily::TriweightProduct: {
                double v = 1.0;
                for (double t : z) {
                    if (std::abs(t) >= 1.0) return 0.0;
                    const double u = 1.0 - t * t;
                    v *= (35.0 / 32.0) * u * u * u;
                }
                return v;
            }
        }
        return 0.0;
    }

    static double unit_ball_volume(int d) {
        // V_d = pi^{d/2} / Gamma(d/2 + 1)
        return std::pow(M_PI, 0.5 * d) / std::tgamma(0.5 * d + 1.0);
    }

private:
    // Integral of K over its support.  Product families use a plain tensor
    // rule; the ball uses iterated integration with exact radial limits so
    // the indicator edge never crosses a panel.
    double normalization_integral() const {
        const QuadRule base = gauss_legendre(64);
        if (family_ != KernelFamily::UniformBall) {
            std::vector<AxisRule> axes(static_cast<std::size_t>(d_),
                                       paneled_axis(base, -1.0, 1.0, {}));
            return tensor_integrate(axes, [this](const std::vector<double>& z) { return value(z); });
        }
        return ball_mass(std::vector<double>{}, base);
    }

    double ball_mass(std::vector<double> fixed, const QuadRule& base) const {
        double r2 = 1.0;
        for (double t : fixed) r2 -= t * t;
        if (r2 <= 0.0) return 0.0;
        const double r = std::sqrt(r2);
        if (fixed.size() + 1 == static_cast<std::size_t>(d_)) {
            // innermost axis: K is constant on the slab
            return 2.0 * r / unit_ball_volume(d_);
        }
        // substitute t = r sin(phi): the cross-section radius sqrt(r^2 - t^2)
        // is not smooth at t = +-r, but it is in phi
        double total = 0.0;
        fixed.push_back(0.0);
        for (std::size_t i = 0; i < base.nodes.size(); ++i) {
            const double phi = 0.5 * M_PI * base.nodes[i];
            fixed.back() = r * std::sin(phi);
            total += 0.5 * M_PI * r * std::cos(phi) * base.weights[i] * ball_mass(fixed, base);
        }
        return total;
    }

    KernelFamily family_;
    int d_;
};

struct LocalWeights {
    std::vector<double> weights;       // K((X_i - x)/h), all i
    std::vector<std::size_t> active;   // indices with strictly positive weight
};

// Kernel weights of every sample point relative to (x, h).  sample_x is row
// major, n rows of d entries.
inline LocalWeights local_weights(const KernelSpec& k, const std::vector<double>& sample_x,
                                  std::size_t n, const std::vector<double>& x, double h) {
    if (!(h > 0.0)) throw std::domain_error("local_weights: bandwidth must be positive");
    const std::size_t d = static_cast<std::size_t>(k.dim());
    if (x.size() != d) throw std::invalid_argument("local_weights: point dimension mismatch");
    LocalWeights out;
    out.weights.resize(n);
    std::vector<double> z(d);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) z[j] = (sample_x[i * d + j] - x[j]) / h;
        const double w = k.value(z);
        out.weights[i] = w;
        if (w > 0.0) out.active.push_back(i);
    }
    return out;
}

}  // namespace quantcurve
