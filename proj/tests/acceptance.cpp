// Acceptance gate: one line per criterion, exit nonzero on any failure.
//
//   acceptance [--write-golden]
//
// --write-golden regenerates the pinned determinism fixture under
// tests/golden/ instead of comparing against it.

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "quantcurve/bahadur.hpp"
#include "quantcurve/io.hpp"
#include "quantcurve/mc_lab.hpp"
#include "quantcurve/population.hpp"
#include "quantcurve/qdensity.hpp"
#include "quantcurve/qr_solver.hpp"
#include "quantcurve/rng.hpp"

#ifndef GOLDEN_DIR
#define GOLDEN_DIR "tests/golden"
#endif

namespace qc = quantcurve;

namespace {

int failures = 0;

void report(int num, const std::string& name, bool pass, const std::string& detail) {
    std::cout << "criterion " << num << " (" << name << "): " << (pass ? "PASS" : "FAIL")
              << " - " << detail << std::endl;
    if (!pass) ++failures;
}

double brute_force_objective(const qc::WeightedQRProblem& prob) {
    const Eigen::Index m = prob.design.rows();
    const Eigen::Index P = prob.design.cols();
    double best = std::numeric_limits<double>::infinity();
    std::vector<Eigen::Index> pick(static_cast<std::size_t>(P));
    std::function<void(Eigen::Index, Eigen::Index)> rec = [&](Eigen::Index start,
                                                              Eigen::Index depth) {
        if (depth == P) {
            Eigen::MatrixXd A(P, P);
            Eigen::VectorXd b(P);
            for (Eigen::Index r = 0; r < P; ++r) {
                A.row(r) = prob.design.row(pick[static_cast<std::size_t>(r)]);
                b(r) = prob.responses(pick[static_cast<std::size_t>(r)]);
            }
            Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
            if (lu.isInvertible())
                best = std::min(best, qc::weighted_objective(prob, lu.solve(b)));
            return;
        }
        for (Eigen::Index i = start; i < m; ++i) {
            pick[static_cast<std::size_t>(depth)] = i;
            rec(i + 1, depth + 1);
        }
    };
    rec(0, 0);
    return best;
}

void criterion_1() {
    const auto start = std::chrono::steady_clock::now();
    qc::CounterRng rng(2024, 0);
    int bad = 0;
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const int P = 1 + static_cast<int>(rng.uniform(0, 2));
        const int m = P + 1 + static_cast<int>(rng.uniform(0, 11 - P));
        qc::WeightedQRProblem prob;
        prob.design.resize(m, P);
        prob.responses.resize(m);
        prob.weights.resize(m);
        prob.alpha = rng.uniform(0.05, 0.95);
        for (int i = 0; i < m; ++i) {
            prob.design(i, 0) = 1.0;
            for (int k = 1; k < P; ++k) prob.design(i, k) = rng.uniform(-1, 1);
            prob.responses(i) = rng.uniform(-2, 2);
            prob.weights(i) = rng.uniform(0.1, 2.0);
        }
        const auto res = qc::solve_weighted_qr(prob);
        const double oracle = brute_force_objective(prob);
        const double rel = std::abs(res.objective - oracle) / (1.0 + std::abs(oracle));
        worst = std::max(worst, rel);
        if (rel > 1e-8) ++bad;
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::ostringstream os;
    os << "100 problems, worst relative objective error " << worst << ", " << secs << " s";
    report(1, "solver vs brute force", bad == 0 && secs < 10.0, os.str());
}

void criterion_2() {
    qc::RateExperiment sin_exp;
    sin_exp.target = qc::RateTarget::BiasOrder;
    sin_exp.dgp = "location-sin";
    sin_exp.p = 3;
    sin_exp.hs = {0.5, 0.4, 0.3, 0.25, 0.2};
    sin_exp.xs = {{0.3}};
    sin_exp.expected_slope = 4.0;
    sin_exp.slope_tolerance = 0.3;
    const auto a = qc::run_bias_order(sin_exp);

    qc::RateExperiment sq_exp;
    sq_exp.target = qc::RateTarget::BiasOrder;
    sq_exp.dgp = "signed-sqrt";
    sq_exp.p = 1;
    sq_exp.hs = {0.1, 0.05, 0.025, 0.0125, 0.00625};
    // slightly off the kink: at x = 0 exactly the intercept bias cancels by
    // antisymmetry and the h^{1/2} order is invisible
    sq_exp.xs = {{0.003}};
    sq_exp.expected_slope = 0.5;
    sq_exp.slope_tolerance = 0.1;
    const auto b = qc::run_bias_order(sq_exp);

    std::ostringstream os;
    os << "smooth p=3 slope " << a.slope << " (want 4 +/- 0.3), rough p=1 slope " << b.slope
       << " (want 0.5 +/- 0.1)";
    report(2, "pseudo-true bias order",
           a.passed && b.passed && !a.slope_skipped && !b.slope_skipped, os.str());
}

void criterion_3() {
    auto run = [](qc::KernelFamily k) {
        qc::RateExperiment exp;
        exp.target = qc::RateTarget::SharpDivergence;
        exp.kernel = k;
        exp.hs = {8e-3, 4e-3, 2e-3, 1e-3};
        exp.slope_tolerance = 0.05;
        return qc::run_sharp_divergence(exp);
    };
    const auto uni = run(qc::KernelFamily::UniformBall);
    const auto epa = run(qc::KernelFamily::EpanechnikovProduct);

    const bool uni_const = std::abs(uni.limit_constant - 1.2) < 1e-9 &&
                           std::abs(uni.limit_estimate / uni.limit_constant - 1.0) < 0.05;
    // closed-form integration gives (4/15)/(1/5) = 4/3 for the Epanechnikov
    // kernel; the estimate is checked against that oracle value
    const bool epa_const = std::abs(epa.limit_constant - 4.0 / 3.0) < 1e-9 &&
                           std::abs(epa.limit_estimate / epa.limit_constant - 1.0) < 0.05;
    std::ostringstream os;
    os << "uniform: const " << uni.limit_constant << ", h^{1/2} b*_1 at h=1e-3 "
       << uni.limit_estimate << ", slope " << uni.slope << "; epanechnikov: const "
       << epa.limit_constant << ", estimate " << epa.limit_estimate << ", slope " << epa.slope;
    report(3, "sharp divergence constant", uni_const && epa_const && uni.passed && epa.passed,
           os.str());
}

void criterion_4() {
    const auto start = std::chrono::steady_clock::now();
    const std::vector<std::string> dgps = {"location-linear", "location-sin",
                                           "heteroskedastic"};
    const std::vector<double> alphas = {0.25, 0.5, 0.75};
    const std::vector<double> xs = {-0.4, 0.0, 0.4};
    const double h = 0.3;
    const std::size_t draws = 100000;

    struct Cell {
        std::string dgp;
        double alpha, x;
        double worst_z = 0.0;
    };
    std::vector<Cell> cells;
    for (const auto& g : dgps)
        for (double a : alphas)
            for (double x : xs) cells.push_back({g, a, x, 0.0});

    qc::parallel_for(cells.size(), [&](std::size_t ci) {
        Cell& cell = cells[ci];
        const qc::Dgp dgp = qc::make_dgp(cell.dgp);
        const qc::BasisSpec basis(1, 1);
        const qc::KernelSpec kernel(qc::KernelFamily::EpanechnikovProduct, 1);
        const qc::EvalPoint theta{cell.alpha, h, {cell.x}};
        const auto pop = qc::solve_population_foc(dgp, theta, basis, kernel);

        qc::CounterRng rng(314159, 1000 + ci);
        Eigen::Vector2d sum = Eigen::Vector2d::Zero();
        Eigen::Vector2d sumsq = Eigen::Vector2d::Zero();
        std::vector<double> xi(1);
        for (std::size_t i = 0; i < draws; ++i) {
            double yi;
            dgp.draw(rng, xi, yi);
            const double z = (xi[0] - cell.x) / h;
            const double K = kernel.value({z});
            Eigen::Vector2d s = Eigen::Vector2d::Zero();
            if (K > 0.0) {
                const double qstar = qc::population_taylor(pop, basis, xi);
                const double c = 2.0 * ((yi <= qstar ? 1.0 : 0.0) - cell.alpha) * K;
                const auto u = basis.eval({z});
                s << c * u[0], c * u[1];
            }
            sum += s;
            sumsq += s.cwiseProduct(s);
        }
        const double n = static_cast<double>(draws);
        for (int k = 0; k < 2; ++k) {
            const double mean = sum(k) / n;
            const double var = sumsq(k) / n - mean * mean;
            const double se = std::sqrt(var / n);
            cell.worst_z = std::max(cell.worst_z, std::abs(mean) / se);
        }
    });

    double worst = 0.0;
    std::string worst_at;
    for (const auto& c : cells)
        if (c.worst_z > worst) {
            worst = c.worst_z;
            worst_at = c.dgp + " alpha=" + qc::fmt17(c.alpha) + " x=" + qc::fmt17(c.x);
        }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::ostringstream os;
    os << cells.size() << " cells x 2 components, worst |mean|/SE " << worst << " at "
       << worst_at << ", " << secs << " s";
    report(4, "score mean zero", worst < 3.0 && secs < 120.0, os.str());
}

qc::RateResult criterion_5_result;

void criterion_5() {
    const auto start = std::chrono::steady_clock::now();
    qc::RateExperiment exp;
    exp.target = qc::RateTarget::BahadurRemainder;
    exp.dgp = "location-sin";
    exp.p = 1;
    exp.ns = {500, 1000, 2000, 4000, 8000};
    exp.replications = 200;
    exp.seed = 20240;
    exp.bandwidth_c = 1.3;
    exp.alphas = {0.5};
    exp.xs = {{0.2}};
    exp.expected_slope = -0.10;
    exp.slope_tolerance = 0.0;  // hard bound
    const auto r = qc::run_bahadur_remainder(exp);
    criterion_5_result = r;

    bool decreasing = true;
    double prev = std::numeric_limits<double>::infinity();
    std::ostringstream ratios;
    for (const auto& c : r.cells) {
        const double ratio = c.median / c.aux_median;
        ratios << " " << ratio;
        if (!(ratio < prev)) decreasing = false;
        prev = ratio;
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::ostringstream os;
    os << "median ratios ||e||/||beta||" << ratios.str() << "; log-median ||e|| slope "
       << r.slope << " (bound -0.10), " << secs << " s";
    report(5, "remainder shrinks at desk scale", decreasing && r.slope <= -0.10 && secs < 1800.0,
           os.str());
}

qc::RateExperiment sup_rate_experiment() {
    qc::RateExperiment exp;
    exp.target = qc::RateTarget::GlobalSupRate;
    exp.dgp = "location-sin";
    exp.p = 1;
    exp.smoothness = 2.0;
    exp.ns = {1000, 2000, 4000, 8000, 16000};
    exp.replications = 100;
    exp.seed = 777;
    exp.bandwidth_c = 1.2;
    exp.alphas = {0.5};
    exp.xs.clear();
    for (int i = -4; i <= 4; ++i) exp.xs.push_back({0.2 * i});
    exp.expected_slope = 0.4;
    exp.slope_tolerance = 0.15;
    return exp;
}

double criterion_6_slope = std::numeric_limits<double>::quiet_NaN();

void criterion_6() {
    const auto start = std::chrono::steady_clock::now();
    const auto r = qc::run_global_sup_rate(sup_rate_experiment());
    criterion_6_slope = r.slope;
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::ostringstream os;
    os << "sup-norm slope " << r.slope << " (want 0.4 +/- 0.15), " << secs << " s";
    report(6, "global sup-norm rate", r.passed && secs < 1800.0, os.str());
}

void criterion_7() {
    const auto start = std::chrono::steady_clock::now();
    auto exp = sup_rate_experiment();
    exp.target = qc::RateTarget::RandomBandwidth;
    exp.random_log_halfwidth = 0.3;
    const auto r = qc::run_random_bandwidth(exp);
    const double diff = std::abs(r.slope - criterion_6_slope);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::ostringstream os;
    os << "random-bandwidth slope " << r.slope << ", deterministic " << criterion_6_slope
       << ", |diff| " << diff << " (want <= 0.1), " << secs << " s";
    report(7, "random bandwidth stability", diff <= 0.1 && secs < 1800.0, os.str());
}

void criterion_8() {
    const auto start = std::chrono::steady_clock::now();
    qc::RateExperiment exp;
    exp.target = qc::RateTarget::QdensityRate;
    exp.dgp = "location-linear";
    exp.p = 1;
    exp.smoothness = 2.0;
    exp.ns = {500, 1000, 2000, 4000, 8000};
    exp.replications = 100;
    exp.seed = 888;
    exp.bandwidth_c = 1.1;
    exp.alphas = {0.5};
    exp.xs = {{0.0}};
    exp.expected_slope = 1.0 / 3.0;
    exp.slope_tolerance = 0.2;
    const auto r = qc::run_qdensity_rate(exp);

    // sparsity check: 1 / q-hat at the median on the location-Gaussian model
    const auto dgp = qc::make_location_linear();
    qc::Sample s;
    s.n = 10000;
    s.d = 1;
    qc::draw_sample(dgp, s.n, 999, 0, s.x, s.y);
    const qc::BasisSpec basis(1, 1);
    const qc::KernelSpec kernel(qc::KernelFamily::EpanechnikovProduct, 1);
    const auto scheme = qc::make_scheme(qc::QdSchemeKind::Central);
    const double qhat = qc::estimate_qd(s, 0.5, {0.0}, 0.30, 0.05, scheme, basis, kernel);
    const double fhat = 1.0 / qhat;
    const double phi0 = 1.0 / std::sqrt(2.0 * M_PI);
    const bool sparsity_ok = std::abs(fhat / phi0 - 1.0) < 0.10;

    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::ostringstream os;
    os << "pointwise slope " << r.slope << " (want 1/3 +/- 0.2); 1/q-hat " << fhat
       << " vs phi(0) " << phi0 << ", " << secs << " s";
    report(8, "quantile density rate", r.passed && sparsity_ok && secs < 1200.0, os.str());
}

void criterion_9() {
    bool ok = true;
    std::string detail = "moment and exactness checks to 1e-12 / 1e-10";
    try {
        for (auto kind : {qc::QdSchemeKind::Forward, qc::QdSchemeKind::Backward,
                          qc::QdSchemeKind::Central}) {
            const auto s = qc::make_scheme(kind);
            s.verify();
            for (int deg = 0; deg <= s.order; ++deg) {
                auto poly = [deg](double a) { return std::pow(a - 0.4, deg); };
                const double want = deg == 0 ? 0.0 : deg * std::pow(0.6 - 0.4, deg - 1);
                const double got = qc::apply_scheme(s, poly, 0.6, 0.02);
                if (std::abs(got - want) > 1e-10) {
                    ok = false;
                    detail = "polynomial exactness violated for " + std::to_string(deg);
                }
            }
        }
        const auto custom = qc::make_custom_scheme({-2.0, -1.0, 1.0, 2.0}, 4);
        custom.verify();
    } catch (const std::exception& e) {
        ok = false;
        detail = e.what();
    }
    report(9, "scheme moments", ok, detail);
}

void criterion_10() {
    const double v = qc::auction_private_value(0.5, 0.8, 1.0, 2);
    bool ok = std::abs(v - 1.4) < 1e-15;
    double prev = std::numeric_limits<double>::infinity();
    for (int bidders = 2; bidders <= 10; ++bidders) {
        const double markup = qc::auction_private_value(0.5, 0.8, 1.0, bidders) - 1.0;
        if (!(markup < prev && markup > 0.0)) ok = false;
        prev = markup;
    }
    std::ostringstream os;
    os << "I=2 alpha=0.5 Qb=1 qb=0.8 -> " << v << "; markup decreasing over I=2..10";
    report(10, "auction transform", ok, os.str());
}

std::string tiny_experiment_bytes() {
    qc::RateExperiment exp;
    exp.target = qc::RateTarget::BahadurRemainder;
    exp.dgp = "location-sin";
    exp.p = 1;
    exp.ns = {200, 300, 400, 500};
    exp.replications = 6;
    exp.seed = 12345;
    exp.bandwidth_c = 1.0;
    exp.alphas = {0.5};
    exp.xs = {{0.1}};
    const auto r = qc::run_bahadur_remainder(exp);
    std::ostringstream os;
    os << "cell,scale,median,iqr,aux_median,count,failures\n";
    for (std::size_t i = 0; i < r.cells.size(); ++i) {
        const auto& c = r.cells[i];
        os << i << "," << qc::fmt17(c.scale) << "," << qc::fmt17(c.median) << ","
           << qc::fmt17(c.iqr) << "," << qc::fmt17(c.aux_median) << "," << c.count << ","
           << c.failures << "\n";
    }
    os << "slope," << qc::fmt17(r.slope) << "\n";
    return os.str();
}

void criterion_11(bool write_golden) {
    const std::string golden_path = std::string(GOLDEN_DIR) + "/tiny_experiment.csv";
    setenv("QUANTCURVE_THREADS", "1", 1);
    const std::string run1 = tiny_experiment_bytes();
    setenv("QUANTCURVE_THREADS", "4", 1);
    const std::string run2 = tiny_experiment_bytes();
    unsetenv("QUANTCURVE_THREADS");

    if (write_golden) {
        qc::atomic_write(golden_path, run1);
        report(11, "determinism", run1 == run2, "golden written to " + golden_path);
        return;
    }
    std::string golden;
    bool have_golden = true;
    try {
        golden = qc::read_file(golden_path);
    } catch (const std::exception&) {
        have_golden = false;
    }
    const bool ok = run1 == run2 && have_golden && run1 == golden;
    std::ostringstream os;
    os << "two runs " << (run1 == run2 ? "identical" : "DIFFER") << "; golden "
       << (have_golden ? (run1 == golden ? "matched" : "MISMATCH") : "MISSING at " + golden_path);
    report(11, "determinism", ok, os.str());
}

}  // namespace

int main(int argc, char** argv) {
    const bool write_golden = argc > 1 && std::string(argv[1]) == "--write-golden";
    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    criterion_5();
    criterion_6();
    criterion_7();
    criterion_8();
    criterion_9();
    criterion_10();
    criterion_11(write_golden);
    std::cout << (failures == 0 ? "all criteria passed"
                                : std::to_string(failures) + " criterion(s) failed")
              << std::endl;
    return failures == 0 ? 0 : 1;
}
