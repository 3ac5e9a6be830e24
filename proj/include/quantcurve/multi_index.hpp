#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace quantcurve {

// Multi-index v = (v_1,...,v_d), |v| = v_1 + ... + v_d.  Indexes both the
// monomial z^v / v! and the partial derivative d^|v| / dx^v.
struct MultiIndex {
    std::vector<int> components;
    int degree = 0;

    MultiIndex() = default;
    explicit MultiIndex(std::vector<int> c) : components(std::move(c)) {
        for (int v : components) {
            if (v < 0) throw std::invalid_argument("MultiIndex: negative component");
            degree += v;
        }
    }

    std::size_t dim() const { return components.size(); }

    bool operator==(const MultiIndex& o) const { return components == o.components; }

    std::string label() const {
        std::string s;
        for (std::size_t i = 0; i < components.size(); ++i) {
            if (i) s += '_';
            s += std::to_string(components[i]);
        }
        return s;
    }
};

inline std::int64_t factorial(int k) {
    std::int64_t f = 1;
    for (int i = 2; i <= k; ++i) f *= i;
    return f;
}

inline double multi_factorial(const MultiIndex& v) {
    double f = 1.0;
    for (int c : v.components) f *= static_cast<double>(factorial(c));
    return f;
}

// All multi-indices with |v| <= p in graded lexicographic order: total degree
// ascending, ties broken by ascending lexicographic comparison of the
// component vectors.  Index 0 is always the zero multi-index, so coefficient 0
// of any fit is the level itself.  This ordering is serialized into every
// output file header.
class BasisSpec {
public:
    BasisSpec(int d, int p) : d_(d), p_(p) {
        if (d < 1) throw std::invalid_argument("BasisSpec: dimension must be >= 1");
        if (p < 0) throw std::invalid_argument("BasisSpec: order must be >= 0");
        if (p > 10) throw std::invalid_argument("BasisSpec: order capped at 10");
        std::vector<int> cur(static_cast<std::size_t>(d), 0);
        for (int deg = 0; deg <= p; ++deg) emit_degree(cur, 0, deg);
        for (auto& v : indices_) inv_factorials_.push_back(1.0 / multi_factorial(v));
    }

    int dim() const { return d_; }
    int order() const { return p_; }
    std::size_t size() const { return indices_.size(); }
    const std::vector<MultiIndex>& indices() const { return indices_; }
    const MultiIndex& index(std::size_t k) const { return indices_[k]; }

    // Position of v in the ordering; throws if |v| > p.
    std::size_t position(const MultiIndex& v) const {
        if (v.dim() != static_cast<std::size_t>(d_))
            throw std::invalid_argument("BasisSpec: multi-index dimension mismatch");
        if (v.degree > p_)
            throw std::domain_error("BasisSpec: multi-index degree exceeds order");
        for (std::size_t k = 0; k < indices_.size(); ++k)
            if (indices_[k] == v) return k;
        throw std::logic_error("BasisSpec: index not found");
    }

    // U(z), component for v equal to z^v / v!.
    std::vector<double> eval(const std::vector<double>& z) const {
        if (z.size() != static_cast<std::size_t>(d_))
            throw std::invalid_argument("eval_basis: point dimension mismatch");
        std::vector<double> u(indices_.size());
        for (std::size_t k = 0; k < indices_.size(); ++k) {
            double m = 1.0;
            for (int j = 0; j < d_; ++j)
                for (int t = 0; t < indices_[k].components[static_cast<std::size_t>(j)]; ++t)
                    m *= z[static_cast<std::size_t>(j)];
            u[k] = m * inv_factorials_[k];
        }
        return u;
    }

    // Diagonal of the standardization matrix H(h): entry h^|v| per index.
    // Satisfies U(x'-x) = H(h) .* U((x'-x)/h) componentwise.
    std::vector<double> scaling(double h) const {
        if (!(h > 0.0)) throw std::domain_error("scaling_matrix: bandwidth must be positive");
        std::vector<double> s(indices_.size());
        for (std::size_t k = 0; k < indices_.size(); ++k) {
            double v = 1.0;
            for (int t = 0; t < indices_[k].degree; ++t) v *= h;
            s[k] = v;
        }
        return s;
    }

private:
    void emit_degree(std::vector<int>& cur, int pos, int remaining) {
        if (pos == d_ - 1) {
            cur[static_cast<std::size_t>(pos)] = remaining;
            indices_.emplace_back(cur);
            return;
        }
        for (int v = 0; v <= remaining; ++v) {
            cur[static_cast<std::size_t>(pos)] = v;
            emit_degree(cur, pos + 1, remaining - v);
        }
    }

    int d_;
    int p_;
    std::vector<MultiIndex> indices_;
    std::vector<double> inv_factorials_;
};

inline BasisSpec enumerate_indices(int d, int p) { return BasisSpec(d, p); }

}  // namespace quantcurve
