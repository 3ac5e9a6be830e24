// quantcurve: local polynomial conditional quantile estimation CLI.
//
// Usage: quantcurve --config <path> [--set key=value ...]
//
// The config selects one command: fit, qdensity, auction, experiment or
// sample-echo.  Exit status 0 on success, 1 on validation errors, 2 on
// runtime failures.

#include <cmath>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "quantcurve/bahadur.hpp"
#include "quantcurve/config.hpp"
#include "quantcurve/csv.hpp"
#include "quantcurve/estimator.hpp"
#include "quantcurve/io.hpp"
#include "quantcurve/kernel.hpp"
#include "quantcurve/mc_lab.hpp"
#include "quantcurve/multi_index.hpp"
#include "quantcurve/qdensity.hpp"
#include "quantcurve/qr_solver.hpp"

namespace qc = quantcurve;

namespace {

std::vector<double> parse_vector(const std::string& s, const std::string& key) {
    std::vector<double> out;
    std::istringstream in(s);
    std::string cell;
    while (std::getline(in, cell, ',')) {
        std::size_t pos = 0;
        double v = 0.0;
        try {
            v = std::stod(cell, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos != cell.size())
            throw qc::ConfigError("config key '" + key + "': invalid number '" + cell + "'");
        out.push_back(v);
    }
    if (out.empty()) throw qc::ConfigError("config key '" + key + "': empty value");
    return out;
}

std::vector<std::vector<double>> eval_points(const qc::Config& cfg, std::size_t d) {
    std::vector<std::vector<double>> xs;
    if (cfg.has("x")) {
        for (const auto& s : cfg.list("x")) {
            auto v = parse_vector(s, "x");
            if (v.size() != d)
                throw qc::ConfigError("config key 'x': expected " + std::to_string(d) +
                                      " coordinates, got " + std::to_string(v.size()));
            xs.push_back(v);
        }
    } else if (cfg.has("x_range")) {
        if (d != 1) throw qc::ConfigError("x_range requires d=1");
        // lo:hi:count
        const std::string s = cfg.str("x_range");
        const auto c1 = s.find(':');
        const auto c2 = s.find(':', c1 == std::string::npos ? c1 : c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos)
            throw qc::ConfigError("config key 'x_range': expected lo:hi:count");
        const double lo = std::stod(s.substr(0, c1));
        const double hi = std::stod(s.substr(c1 + 1, c2 - c1 - 1));
        const long count = std::stol(s.substr(c2 + 1));
        if (count < 1) throw qc::ConfigError("config key 'x_range': count must be >= 1");
        for (long i = 0; i < count; ++i) {
            const double t = count == 1 ? 0.5 : static_cast<double>(i) / (count - 1);
            xs.push_back({lo + t * (hi - lo)});
        }
    } else {
        throw qc::ConfigError("missing config key 'x' (or 'x_range')");
    }
    return xs;
}

void validate_levels(const std::vector<double>& alphas) {
    for (double a : alphas)
        if (!(a > 0.0 && a < 1.0))
            throw qc::ConfigError("config key 'alpha': level " + qc::fmt17(a) +
                                  " outside (0,1)");
}

void validate_bandwidths(const std::vector<double>& hs, const std::string& key) {
    for (double h : hs)
        if (!(h > 0.0))
            throw qc::ConfigError("config key '" + key + "': bandwidth must be positive");
}

struct PluginBahadur {
    std::vector<double> beta;  // standardized scale
};

// Plug-in leading term on real data: score at the fitted polynomial and
// curvature with f(Q-hat|x) replaced by 1 / q-hat(alpha|x).  No oracle.
PluginBahadur plugin_beta(const qc::Sample& sample, const qc::LocalFit& fit,
                          const qc::BasisSpec& basis, const qc::KernelSpec& kernel,
                          double qhat) {
    const auto P = static_cast<Eigen::Index>(basis.size());
    const double nhd =
        static_cast<double>(sample.n) * std::pow(fit.theta.h, static_cast<int>(sample.d));
    Eigen::VectorXd score = Eigen::VectorXd::Zero(P);
    Eigen::MatrixXd jbar = Eigen::MatrixXd::Zero(P, P);
    std::vector<double> z(sample.d);
    const double f_plug = 1.0 / qhat;
    for (std::size_t i = 0; i < sample.n; ++i) {
        for (std::size_t j = 0; j < sample.d; ++j)
            z[j] = (sample.x[i * sample.d + j] - fit.theta.x[j]) / fit.theta.h;
        const double K = kernel.value(z);
        if (K <= 0.0) continue;
        const std::vector<double> u = basis.eval(z);
        double qfit = 0.0;
        for (std::size_t k = 0; k < u.size(); ++k) qfit += u[k] * fit.coeffs_standardized[k];
        const double sc = 2.0 * ((sample.y[i] <= qfit ? 1.0 : 0.0) - fit.theta.alpha) * K;
        for (Eigen::Index a = 0; a < P; ++a) {
            score(a) += sc * u[static_cast<std::size_t>(a)];
            for (Eigen::Index b = 0; b < P; ++b)
                jbar(a, b) += 2.0 * f_plug * K * u[static_cast<std::size_t>(a)] *
                              u[static_cast<std::size_t>(b)];
        }
    }
    score /= std::sqrt(nhd);
    jbar /= nhd;
    const Eigen::VectorXd beta = -jbar.ldlt().solve(score);
    PluginBahadur out;
    out.beta.assign(beta.data(), beta.data() + P);
    return out;
}

std::string basis_comment(const qc::BasisSpec& basis) {
    std::string s = "# basis_order:";
    for (const auto& v : basis.indices()) {
        s += " (";
        for (std::size_t j = 0; j < v.components.size(); ++j) {
            if (j) s += " ";
            s += std::to_string(v.components[j]);
        }
        s += ")";
    }
    return s + "\n";
}

int cmd_fit(const qc::Config& cfg) {
    const qc::Sample sample = qc::ingest_csv(cfg.str("input"));
    const int p = static_cast<int>(cfg.integer("p"));
    const qc::BasisSpec basis(static_cast<int>(sample.d), p);
    const qc::KernelSpec kernel(
        qc::kernel_family_from_string(cfg.str_or("kernel", "epanechnikov-product")),
        static_cast<int>(sample.d));
    const std::vector<double> alphas = cfg.nums("alpha");
    const std::vector<double> hs = cfg.nums("h");
    validate_levels(alphas);
    validate_bandwidths(hs, "h");
    const auto xs = eval_points(cfg, sample.d);

    const bool plugin = cfg.str_or("plugin_bahadur", "false") == "true";
    double hq = 0.0;
    qc::QdScheme scheme;
    if (plugin) {
        hq = cfg.num("qd_hq");
        validate_bandwidths({hq}, "qd_hq");
        scheme = qc::make_scheme(qc::qd_scheme_kind_from_string(cfg.str_or("qd_scheme", "central")));
    }

    const std::vector<qc::GridCell> cells = qc::fit_grid(sample, alphas, hs, xs, basis, kernel);

    std::ostringstream os;
    os << basis_comment(basis);
    os << "alpha,h";
    for (std::size_t j = 0; j < sample.d; ++j) os << ",x" << (j + 1);
    for (const auto& v : basis.indices()) os << ",b_" << v.label();
    if (plugin)
        for (const auto& v : basis.indices()) os << ",beta_plugin_" << v.label();
    os << ",status,active_points,boundary\n";

    std::size_t failures = 0;
    for (const auto& cell : cells) {
        os << qc::fmt17(cell.theta.alpha) << "," << qc::fmt17(cell.theta.h);
        for (double xj : cell.theta.x) os << "," << qc::fmt17(xj);
        if (cell.fit) {
            for (double b : cell.fit->coeffs_natural) os << "," << qc::fmt17(b);
            if (plugin) {
                const double qhat = qc::estimate_qd(sample, cell.theta.alpha, cell.theta.x,
                                                    cell.theta.h, hq, scheme, basis, kernel);
                const auto pb = plugin_beta(sample, *cell.fit, basis, kernel, qhat);
                for (double b : pb.beta) os << "," << qc::fmt17(b);
            }
            os << "," << qc::to_string(cell.fit->solver.status) << ","
               << cell.fit->solver.active_points << "," << (cell.fit->boundary ? 1 : 0);
        } else {
            ++failures;
            const std::size_t pcols = basis.size() * (plugin ? 2 : 1);
            for (std::size_t k = 0; k < pcols; ++k) os << ",nan";
            std::string msg = cell.error;
            for (char& c : msg)
                if (c == ',' || c == '\n') c = ';';
            os << ",error: " << msg << ",0,0";
        }
        os << "\n";
    }
    qc::atomic_write(cfg.str("output"), os.str());
    std::cout << "fit: " << cells.size() << " cells (" << failures << " failed) -> "
              << cfg.str("output") << "\n";
    return 0;
}

int cmd_qdensity(const qc::Config& cfg) {
    const qc::Sample sample = qc::ingest_csv(cfg.str("input"));
    const int p = static_cast<int>(cfg.integer_or("p", 1));
    const qc::BasisSpec basis(static_cast<int>(sample.d), p);
    const qc::KernelSpec kernel(
        qc::kernel_family_from_string(cfg.str_or("kernel", "epanechnikov-product")),
        static_cast<int>(sample.d));
    const std::vector<double> alphas = cfg.nums("alpha");
    validate_levels(alphas);
    const double h = cfg.num("h");
    const double hq = cfg.num("qd_hq");
    validate_bandwidths({h}, "h");
    validate_bandwidths({hq}, "qd_hq");
    const auto xs = eval_points(cfg, sample.d);
    const std::string kind_name = cfg.str_or("qd_scheme", "central");
    const bool report_var = cfg.str_or("report_variance", "false") == "true";

    std::ostringstream os;
    os << basis_comment(basis);
    os << "alpha,h,hq";
    for (std::size_t j = 0; j < sample.d; ++j) os << ",x" << (j + 1);
    os << ",qhat,scheme,switched";
    if (report_var) os << ",avar_unscaled";
    os << "\n";

    for (double a : alphas) {
        // auto-switch to a one-sided scheme when a node would leave (0,1)
        std::string used = kind_name;
        bool switched = false;
        qc::QdScheme scheme = qc::make_scheme(qc::qd_scheme_kind_from_string(kind_name));
        auto fits = [&](const qc::QdScheme& s) {
            for (double t : s.nodes) {
                const double at = a + hq * t;
                if (!(at > 0.0 && at < 1.0)) return false;
            }
            return true;
        };
        if (!fits(scheme)) {
            const std::string alt = a < 0.5 ? "forward" : "backward";
            qc::QdScheme alt_scheme = qc::make_scheme(qc::qd_scheme_kind_from_string(alt));
            if (fits(alt_scheme)) {
                scheme = alt_scheme;
                used = alt;
                switched = true;
            }
        }
        for (const auto& x : xs) {
            const double qhat = qc::estimate_qd(sample, a, x, h, hq, scheme, basis, kernel);
            os << qc::fmt17(a) << "," << qc::fmt17(h) << "," << qc::fmt17(hq);
            for (double xj : x) os << "," << qc::fmt17(xj);
            os << "," << qc::fmt17(qhat) << "," << used << "," << (switched ? 1 : 0);
            if (report_var) {
                // alpha (1-alpha) / (n h^d (1/qhat)^2 fhat(x)), up to the
                // proportionality constant of the asymptotic variance
                const qc::LocalWeights w =
                    qc::local_weights(kernel, sample.x, sample.n, x, h);
                double fhat = 0.0;
                for (double wi : w.weights) fhat += wi;
                const double nhd =
                    static_cast<double>(sample.n) * std::pow(h, static_cast<int>(sample.d));
                fhat /= nhd;
                const double avar = a * (1.0 - a) * qhat * qhat / (nhd * fhat);
                os << "," << qc::fmt17(avar);
            }
            os << "\n";
        }
    }
    qc::atomic_write(cfg.str("output"), os.str());
    std::cout << "qdensity: " << alphas.size() * xs.size() << " cells -> " << cfg.str("output")
              << "\n";
    return 0;
}

int cmd_auction(const qc::Config& cfg) {
    const qc::Sample sample = qc::ingest_csv(cfg.str("input"));
    const int bidders = static_cast<int>(cfg.integer("bidders"));
    if (bidders < 2) throw qc::ConfigError("config key 'bidders': need at least 2");
    const int p = static_cast<int>(cfg.integer_or("p", 1));
    const qc::BasisSpec basis(static_cast<int>(sample.d), p);
    const qc::KernelSpec kernel(
        qc::kernel_family_from_string(cfg.str_or("kernel", "epanechnikov-product")),
        static_cast<int>(sample.d));
    const std::vector<double> alphas = cfg.nums("alpha");
    validate_levels(alphas);
    const double h = cfg.num("h");
    const double hq = cfg.num("qd_hq");
    validate_bandwidths({h}, "h");
    validate_bandwidths({hq}, "qd_hq");
    const auto xs = eval_points(cfg, sample.d);
    const qc::QdScheme scheme =
        qc::make_scheme(qc::qd_scheme_kind_from_string(cfg.str_or("qd_scheme", "central")));

    std::ostringstream os;
    os << basis_comment(basis);
    os << "alpha";
    for (std::size_t j = 0; j < sample.d; ++j) os << ",x" << (j + 1);
    os << ",Qb,qb,Qv,negative_qb\n";
    for (double a : alphas)
        for (const auto& x : xs) {
            const double Qb =
                qc::fit_at(sample, qc::EvalPoint{a, h, x}, basis, kernel).quantile();
            const double qb = qc::estimate_qd(sample, a, x, h, hq, scheme, basis, kernel);
            const double Qv = qc::auction_private_value(a, qb, Qb, bidders);
            os << qc::fmt17(a);
            for (double xj : x) os << "," << qc::fmt17(xj);
            os << "," << qc::fmt17(Qb) << "," << qc::fmt17(qb) << "," << qc::fmt17(Qv) << ","
               << (qb < 0.0 ? 1 : 0) << "\n";
        }
    qc::atomic_write(cfg.str("output"), os.str());
    std::cout << "auction: " << alphas.size() * xs.size() << " cells -> " << cfg.str("output")
              << "\n";
    return 0;
}

qc::RateExperiment experiment_from_config(const qc::Config& cfg) {
    qc::RateExperiment exp;
    exp.target = qc::rate_target_from_string(cfg.str("target"));
    exp.dgp = cfg.str_or("dgp", "location-sin");
    const qc::Dgp dgp = qc::make_dgp(exp.dgp);
    if (cfg.has("n"))
        for (double n : cfg.nums("n")) exp.ns.push_back(static_cast<std::size_t>(n));
    if (cfg.has("h")) exp.hs = cfg.nums("h");
    validate_bandwidths(exp.hs, "h");
    if (cfg.has("alpha")) exp.alphas = cfg.nums("alpha");
    validate_levels(exp.alphas);
    if (cfg.has("x")) {
        exp.xs.clear();
        for (const auto& s : cfg.list("x")) exp.xs.push_back(parse_vector(s, "x"));
    } else {
        exp.xs = {std::vector<double>(static_cast<std::size_t>(dgp.d), 0.0)};
    }
    if (cfg.has("v")) {
        std::vector<int> comps;
        for (double c : parse_vector(cfg.str("v"), "v")) comps.push_back(static_cast<int>(c));
        exp.v = qc::MultiIndex(comps);
    } else {
        exp.v = qc::MultiIndex(std::vector<int>(static_cast<std::size_t>(dgp.d), 0));
    }
    exp.p = static_cast<int>(cfg.integer_or("p", 1));
    exp.kernel = qc::kernel_family_from_string(cfg.str_or("kernel", "epanechnikov-product"));
    exp.replications = static_cast<int>(cfg.integer_or("replications", 1));
    exp.seed = static_cast<std::uint64_t>(cfg.integer_or("seed", 0));
    exp.bandwidth_c = cfg.num_or("c", 1.0);
    exp.smoothness = cfg.num_or("s", 2.0);
    if (cfg.has("expected_slope")) exp.expected_slope = cfg.num("expected_slope");
    exp.slope_tolerance = cfg.num_or("tolerance", exp.slope_tolerance);
    exp.bound_only = cfg.str_or("bound_only", "false") == "true";
    exp.qd_scheme = qc::qd_scheme_kind_from_string(cfg.str_or("qd_scheme", "central"));
    exp.random_log_halfwidth = cfg.num_or("xi_halfwidth", 0.5);
    exp.lm_m = static_cast<int>(cfg.integer_or("lm_m", 0));
    return exp;
}

std::string rate_result_csv(const qc::RateResult& r) {
    std::ostringstream os;
    os << "cell,scale,median,iqr,aux_median,count,failures\n";
    for (std::size_t i = 0; i < r.cells.size(); ++i) {
        const auto& c = r.cells[i];
        os << i << "," << qc::fmt17(c.scale) << "," << qc::fmt17(c.median) << ","
           << qc::fmt17(c.iqr) << "," << qc::fmt17(c.aux_median) << "," << c.count << ","
           << c.failures << "\n";
    }
    return os.str();
}

std::string rate_result_json(const qc::RateResult& r, const qc::RateExperiment& exp) {
    nlohmann::ordered_json j;
    j["target"] = qc::to_string(r.target);
    j["dgp"] = exp.dgp;
    j["seed"] = exp.seed;
    j["replications"] = exp.replications;
    j["slope"] = r.slope;
    j["slope_stderr"] = r.slope_stderr;
    j["expected_slope"] = r.expected_slope;
    j["tolerance"] = r.tolerance;
    j["bound_only"] = exp.bound_only || r.target == qc::RateTarget::BahadurRemainder;
    j["passed"] = r.passed;
    j["slope_skipped"] = r.slope_skipped;
    if (!std::isnan(r.limit_constant)) {
        j["limit_constant"] = r.limit_constant;
        j["limit_estimate"] = r.limit_estimate;
    }
    if (!r.note.empty()) j["note"] = r.note;
    return j.dump(2) + "\n";
}

int cmd_experiment(const qc::Config& cfg) {
    qc::Config spec = cfg;
    if (cfg.has("experiment")) {
        spec = qc::Config::from_file(cfg.str("experiment"));
        // command-line overrides win over the experiment file
        for (const auto& kv : cfg.raw())
            if (kv.first != "command" && kv.first != "experiment" && kv.first != "output")
                spec.override_set(kv.first, kv.second.back());
    }
    const qc::RateExperiment exp = experiment_from_config(spec);
    const qc::RateResult r = qc::run_experiment(exp);
    const std::string out = cfg.str("output");
    qc::atomic_write(out, rate_result_csv(r));
    std::string summary = out;
    const auto dot = summary.rfind('.');
    summary = (dot == std::string::npos ? summary : summary.substr(0, dot)) + ".json";
    qc::atomic_write(summary, rate_result_json(r, exp));
    std::cout << "experiment " << qc::to_string(r.target) << ": slope " << qc::fmt17(r.slope)
              << " (expected " << qc::fmt17(r.expected_slope) << " +/- "
              << qc::fmt17(r.tolerance) << "), "
              << (r.passed ? "pass" : "fail") << " -> " << out << "\n";
    return 0;
}

int cmd_sample_echo(const qc::Config& cfg) {
    const qc::Sample sample = qc::ingest_csv(cfg.str("input"));
    qc::atomic_write(cfg.str("output"), qc::emit_csv(sample));
    std::cout << "sample-echo: " << sample.n << " rows -> " << cfg.str("output") << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    std::string config_path;
    std::vector<std::pair<std::string, std::string>> overrides;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--config" && i + 1 < argc) {
            config_path = argv[++i];
        } else if (arg == "--set" && i + 1 < argc) {
            const std::string kv = argv[++i];
            const auto eq = kv.find('=');
            if (eq == std::string::npos) {
                std::cerr << "error: --set expects key=value, got '" << kv << "'\n";
                return 1;
            }
            overrides.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
        } else if (arg == "--help" || arg == "-h") {
            std::cout << "usage: quantcurve --config <path> [--set key=value ...]\n"
                         "commands (config key 'command'): fit, qdensity, auction, "
                         "experiment, sample-echo\n";
            return 0;
        } else {
            std::cerr << "error: unknown argument '" << arg << "'\n";
            return 1;
        }
    }
    if (config_path.empty()) {
        std::cerr << "error: --config is required\n";
        return 1;
    }

    try {
        qc::Config cfg = qc::Config::from_file(config_path);
        for (const auto& kv : overrides) cfg.override_set(kv.first, kv.second);
        const std::string command = cfg.str("command");
        if (command == "fit") return cmd_fit(cfg);
        if (command == "qdensity") return cmd_qdensity(cfg);
        if (command == "auction") return cmd_auction(cfg);
        if (command == "experiment") return cmd_experiment(cfg);
        if (command == "sample-echo") return cmd_sample_echo(cfg);
        throw qc::ConfigError("unknown command '" + command + "'");
    } catch (const qc::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::domain_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return 2;
    }
}
