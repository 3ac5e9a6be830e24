#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "estimator.hpp"

namespace quantcurve {

// Finite signed measure {(t_j, kappa_j)} for the convolution estimator of
// the quantile density: sum kappa = 0, sum t kappa = 1, and moments 2..r
// vanish.  Applying the weights to Q(alpha + h_q t) reproduces Q'(alpha)
// exactly for polynomials of degree <= r.
struct QdScheme {
    std::vector<double> nodes;
    std::vector<double> kappas;
    int order = 1;

    void verify() const {
        if (nodes.size() != kappas.size() || nodes.size() < 2)
            throw std::invalid_argument("QdScheme: need matching node/weight lists");
        for (std::size_t i = 0; i < nodes.size(); ++i)
            for (std::size_t j = i + 1; j < nodes.size(); ++j)
                if (std::abs(nodes[i] - nodes[j]) < 1e-12)
                    throw std::invalid_argument("QdScheme: duplicate nodes");
        for (int m = 0; m <= order; ++m) {
            double s = 0.0;
            for (std::size_t j = 0; j < nodes.size(); ++j)
                s += kappas[j] * std::pow(nodes[j], m);
            const double target = m == 1 ? 1.0 : 0.0;
            if (std::abs(s - target) > 1e-12) {
                std::ostringstream os;
                os << "QdScheme: moment " << m << " equals " << s << ", expected " << target;
                throw std::invalid_argument(os.str());
            }
        }
    }
};

enum class QdSchemeKind { Forward, Backward, Central, CustomNodes };

inline QdSchemeKind qd_scheme_kind_from_string(const std::string& s) {
    if (s == "forward") return QdSchemeKind::Forward;
    if (s == "backward") return QdSchemeKind::Backward;
    if (s == "central") return QdSchemeKind::Central;
    if (s == "custom-nodes") return QdSchemeKind::CustomNodes;
    throw std::invalid_argument("unknown qd scheme: " + s);
}

// Weights for arbitrary nodes solve the Vandermonde moment system
// sum kappa_j t_j^m = 1{m = 1}, m = 0..r.
inline QdScheme make_custom_scheme(const std::vector<double>& nodes, int order) {
    if (order < 1) throw std::invalid_argument("make_scheme: order must be >= 1");
    if (nodes.size() < 2) throw std::invalid_argument("make_scheme: not enough nodes");
    const auto J = static_cast<Eigen::Index>(nodes.size());
    Eigen::MatrixXd V(order + 1, J);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(order + 1);
    rhs(1) = 1.0;
    for (int m = 0; m <= order; ++m)
        for (Eigen::Index j = 0; j < J; ++j)
            V(m, j) = std::pow(nodes[static_cast<std::size_t>(j)], m);
    const Eigen::VectorXd kappa = V.colPivHouseholderQr().solve(rhs);
    QdScheme s;
    s.nodes = nodes;
    s.kappas.assign(kappa.data(), kappa.data() + J);
    s.order = order;
    s.verify();  // rejects singular / inconsistent node configurations
    return s;
}

inline QdScheme make_scheme(QdSchemeKind kind, int order = 0,
                            const std::vector<double>& custom_nodes = {}) {
    QdScheme s;
    switch (kind) {
        case QdSchemeKind::Forward:
            s.nodes = {0.0, 1.0};
            s.kappas = {-1.0, 1.0};
            s.order = 1;
            break;
        case QdSchemeKind::Backward:
            s.nodes = {-1.0, 0.0};
            s.kappas = {-1.0, 1.0};
            s.order = 1;
            break;
        case QdSchemeKind::Central:
            s.nodes = {-1.0, 1.0};
            s.kappas = {-0.5, 0.5};
            s.order = 2;
            break;
        case QdSchemeKind::CustomNodes:
            return make_custom_scheme(custom_nodes, order > 0 ? order : 1);
    }
    s.verify();
    return s;
}

// Apply the scheme's divided-difference weights to a scalar function of the
// level; isolates the scheme from the fitting error in tests.
template <typename F>
double apply_scheme(const QdScheme& scheme, F&& q_of_alpha, double alpha, double h_q) {
    double acc = 0.0;
    for (std::size_t j = 0; j < scheme.nodes.size(); ++j)
        acc += scheme.kappas[j] * q_of_alpha(alpha + h_q * scheme.nodes[j]);
    return acc / h_q;
}

// q-hat(alpha|x) = (1/h_q) sum_j kappa_j Q-hat_h(alpha + h_q t_j | x).
inline double estimate_qd(const Sample& sample, double alpha, const std::vector<double>& x,
                          double h, double h_q, const QdScheme& scheme, const BasisSpec& basis,
                          const KernelSpec& kernel, const SolverOptions& opts = {}) {
    scheme.verify();
    if (!(h_q > 0.0)) throw std::domain_error("estimate_qd: h_q must be positive");
    for (double t : scheme.nodes) {
        const double a = alpha + h_q * t;
        if (!(a > 0.0 && a < 1.0)) {
            std::ostringstream os;
            os << "estimate_qd: node level " << a << " (alpha=" << alpha << ", t=" << t
               << ") outside (0,1)";
            throw std::domain_error(os.str());
        }
    }
    return apply_scheme(
        scheme,
        [&](double a) {
            return fit_at(sample, EvalPoint{a, h, x}, basis, kernel, opts).quantile();
        },
        alpha, h_q);
}

// First-price auction private-value transform under independent private
// values and risk neutrality: Q^v = Q^b + alpha q^b / (I - 1).
inline double auction_private_value(double alpha, double q_b_hat, double Q_b_hat, int bidders) {
    if (bidders < 2) throw std::domain_error("auction_private_value: need at least 2 bidders");
    if (!(alpha >= 0.0 && alpha <= 1.0))
        throw std::domain_error("auction_private_value: alpha outside [0,1]");
    return Q_b_hat + alpha * q_b_hat / static_cast<double>(bidders - 1);
}

}  // namespace quantcurve
