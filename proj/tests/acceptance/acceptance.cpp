// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance [--work DIR] [--resume] [ids...]
//
// With no ids every criterion runs. Exit status is 0 only if all selected
// criteria pass.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "isored/error.hpp"
#include "isored/fitting.hpp"
#include "isored/fourier_forms.hpp"
#include "isored/oracle.hpp"
#include "isored/pipeline.hpp"
#include "isored/probe.hpp"
#include "isored/spectral.hpp"
#include "isored/testbeds.hpp"

using namespace isored;

namespace {

struct Part {
    std::string tag;
    bool pass = false;
    std::string detail;
};

struct Outcome {
    bool pass = false;
    std::string detail;
    std::vector<Part> parts;  // reported as separate lines when present
};

struct Settings {
    std::filesystem::path work = "acceptance-runs";
    bool resume = false;
};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

// ---------------------------------------------------------------- 1

HarmonicSeries random_series(std::mt19937_64& rng, double omega, int k_max) {
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    HarmonicSeries s(omega);
    s.add_cos(0, cplx{d(rng), d(rng)});
    for (int k = 1; k <= k_max; ++k) {
        s.add_sin(k, cplx{d(rng), d(rng)});
        s.add_cos(k, cplx{d(rng), d(rng)});
    }
    return s;
}

// Sine/cosine coefficients of periodic samples (one period, uniform grid).
std::vector<std::pair<cplx, cplx>> sampled_coefficients(const std::vector<cplx>& v, double omega, int k_max) {
    const auto n = static_cast<int>(v.size());
    const double period = 2.0 * std::numbers::pi / omega;
    std::vector<std::pair<cplx, cplx>> out;
    for (int k = 0; k <= k_max; ++k) {
        cplx a{}, b{};
        for (int i = 0; i < n; ++i) {
            const double t = period * i / n;
            a += v[static_cast<std::size_t>(i)] * std::sin(k * omega * t);
            b += v[static_cast<std::size_t>(i)] * std::cos(k * omega * t);
        }
        out.emplace_back(k == 0 ? cplx{} : a * (2.0 / n), b * ((k == 0 ? 1.0 : 2.0) / n));
    }
    return out;
}

double series_error(const HarmonicSeries& s, const std::vector<std::pair<cplx, cplx>>& want) {
    double scale = 0.0, err = 0.0;
    for (int k = 0; k < static_cast<int>(want.size()); ++k) {
        const auto [ws, wc] = want[static_cast<std::size_t>(k)];
        const cplx gs = k <= s.max_harmonic() ? s.sin_coeff(k).constant() : cplx{};
        const cplx gc = k <= s.max_harmonic() ? s.cos_coeff(k).constant() : cplx{};
        scale = std::max({scale, std::abs(ws), std::abs(wc)});
        err = std::max({err, std::abs(gs - ws), std::abs(gc - wc)});
    }
    return err / scale;
}

// Periodic solution of psi' = lambda psi + f(t) by RK4 over one period,
// sampled at `samples` points.
std::vector<cplx> periodic_rk4(const HarmonicSeries& f, cplx lambda, int samples, int k_max) {
    const double omega = f.omega();
    const double period = 2.0 * std::numbers::pi / omega;
    const int per_sample = std::max(1, static_cast<int>(std::ceil(period * std::max(k_max * omega, std::abs(lambda)) /
                                                                  0.002 / samples)));
    const int steps = per_sample * samples;
    const double h = period / steps;
    auto rhs = [&](double t, cplx p) { return lambda * p + f.evaluate(t); };
    auto sweep = [&](cplx p, std::vector<cplx>* out) {
        for (int i = 0; i < steps; ++i) {
            if (out && i % per_sample == 0) out->push_back(p);
            const double t = i * h;
            const cplx k1 = rhs(t, p);
            const cplx k2 = rhs(t + 0.5 * h, p + 0.5 * h * k1);
            const cplx k3 = rhs(t + 0.5 * h, p + 0.5 * h * k2);
            const cplx k4 = rhs(t + h, p + h * k3);
            p += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        return p;
    };
    // psi(T) = e^{lambda T} psi(0) + P, with P the response from rest.
    const cplx p_rest = sweep(cplx{}, nullptr);
    const cplx p0 = p_rest / (1.0 - std::exp(lambda * period));
    std::vector<cplx> out;
    sweep(p0, &out);
    return out;
}

Outcome fourier_exactness() {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> freq(0.2, 3.0), decay(0.2, 2.0), rot(-1.0, 1.0);
    std::uniform_int_distribution<int> kk(1, 3);
    double worst_mul = 0.0, worst_ss = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const double w = freq(rng);
        const auto a = random_series(rng, w, kk(rng));
        const auto b = random_series(rng, w, kk(rng));
        const cplx lambda{-decay(rng), rot(rng)};
        const auto prod = multiply(a, b);
        const int k_max = a.max_harmonic() + b.max_harmonic();

        const int n = 512;
        std::vector<cplx> ab;
        for (int i = 0; i < n; ++i) {
            const double t = 2.0 * std::numbers::pi / w * i / n;
            ab.push_back(a.evaluate(t) * b.evaluate(t));
        }
        worst_mul = std::max(worst_mul, series_error(prod, sampled_coefficients(ab, w, k_max + 1)));

        const auto psi = steady_state_solve(prod, lambda);
        worst_ss = std::max(worst_ss, series_error(psi, sampled_coefficients(periodic_rk4(prod, lambda, n, k_max), w,
                                                                             k_max + 1)));
    }
    const double worst = std::max(worst_mul, worst_ss);
    return {worst <= 1e-10, "50 series, multiply " + fmt(worst_mul) + ", steady_state_solve " + fmt(worst_ss) +
                                " max relative (tol 1e-10)"};
}

// ---------------------------------------------------------------- 2, 3

// Order-3 single-isostable model with lambda = -0.05.
ReducedModel synthetic_model() {
    auto m = ReducedModel::blank({cplx{-0.05}}, {}, {0.1}, 3);
    m.g_tensors[0].set(MultiIndex{0}, 1.0);
    m.g_tensors[0].set(MultiIndex{0, 0}, -0.6);
    m.g_tensors[0].set(MultiIndex{0, 0, 0}, 0.4);
    m.i_tensors[0].set(MultiIndex{0}, 0.3);
    m.i_tensors[0].set(MultiIndex{0, 0}, -0.2);
    m.validate();
    return m;
}

const std::vector<double> kSyntheticGrid{0.2, 0.4, 0.6, 0.8, 1.0};

ProbeOptions synthetic_probe() {
    ProbeOptions opt;
    opt.slow_rate = 0.05;
    opt.settle_time_constants = 30.0;
    opt.avg_cycles = 2;
    opt.j_max = 3;
    return opt;
}

Outcome scaling_law() {
    const ReducedModelSystem sut(synthetic_model());
    const std::vector<double> eps{0.005, 0.01, 0.02, 0.04};
    std::vector<std::vector<ProbeRecord>> by_eps;
    for (double e : eps) by_eps.push_back(probe_sweep(sut, kSyntheticGrid, e, synthetic_probe()));
    double worst = 0.0;
    std::string where;
    for (std::size_t r = 0; r < kSyntheticGrid.size(); ++r) {
        for (int k = 1; k <= 3; ++k) {
            double lo = INFINITY, hi = 0.0;
            for (std::size_t i = 0; i < eps.size(); ++i) {
                const auto& rec = by_eps[i][r];
                const double mag = std::hypot(rec.sin[0][static_cast<std::size_t>(k)], rec.cos[0][static_cast<std::size_t>(k)]);
                const double ratio = mag / std::pow(eps[i], k);
                lo = std::min(lo, ratio);
                hi = std::max(hi, ratio);
            }
            const double spread = hi / lo - 1.0;
            if (spread > worst) {
                worst = spread;
                where = "omega " + fmt(kSyntheticGrid[r]) + ", k " + std::to_string(k);
            }
        }
    }
    return {worst <= 0.05, "worst spread of |Gamma_k|/eps^k " + fmt(100.0 * worst) + "% at " + where + " (tol 5%)"};
}

double worst_relative(const ReducedModel& a, const ReducedModel& b) {
    double worst = 0.0;
    auto compare = [&](const ExpansionTensor& x, const ExpansionTensor& y) {
        for (const auto& [k, v] : x.entries()) worst = std::max(worst, std::abs(v - y.get(k)) / std::abs(v));
        for (const auto& [k, v] : y.entries())
            if (x.get(k) == cplx{}) worst = std::max(worst, std::abs(v) / std::max(1.0, std::abs(v)));
    };
    for (std::size_t n = 0; n < a.i_tensors.size(); ++n) compare(a.i_tensors[n], b.i_tensors[n]);
    for (std::size_t m = 0; m < a.g_tensors.size(); ++m) compare(a.g_tensors[m], b.g_tensors[m]);
    return worst;
}

Outcome round_trip() {
    const auto truth = synthetic_model();
    const ReducedModelSystem sut(truth);
    std::vector<std::vector<ProbeRecord>> records;
    for (int s = 0; s < 3; ++s) records.push_back(probe_sweep(sut, kSyntheticGrid, 1e-3, synthetic_probe()));
    const auto base = ReducedModel::blank(truth.eigenvalues, {}, truth.y0, 3);
    const auto fit = fit_multi_output(base, records, 3);
    const double err = worst_relative(truth, fit.model);
    return {err <= 1e-3, "worst relative coefficient error " + fmt(err) + " over stages 1-3 (tol 1e-3)"};
}

// ---------------------------------------------------------------- 4

Outcome oracle_equivalence() {
    const auto sys = simple_known_system();
    const auto lin = linearize(sys);
    const auto g = solve_g_tensors(sys, lin, 1, 3);
    const auto in = solve_I_tensors(sys, lin, g, 1, 3);
    const cplx w11 = lin.left(0, 0);

    // Slow-manifold points: flow out the fast transient and land on x1 = target.
    std::vector<std::vector<cplx>> psi;
    std::vector<cplx> x1s, x2s, grad;
    double worst_identity = 0.0;
    const double horizon = 30.0;
    const double h = 1e-4;
    for (int i = 0; i < 24; ++i) {
        const double target = -0.2 + 0.4 * i / 23.0;
        if (std::abs(target) < 1e-9) continue;
        const Eigen::Vector2d start(target * std::exp(0.05 * horizon), 0.0);
        const Eigen::VectorXd x = flow(sys, start, horizon);
        const cplx p = direct_isostable(sys, lin, x, 0);
        worst_identity = std::max(worst_identity, std::abs(p / w11 - x(0)) / std::abs(x(0)));
        psi.push_back({p});
        x1s.push_back(x(0));
        x2s.push_back(x(1));
        const cplx up = direct_isostable(sys, lin, x + Eigen::Vector2d(h, 0.0), 0);
        const cplx down = direct_isostable(sys, lin, x - Eigen::Vector2d(h, 0.0), 0);
        grad.push_back((up - down) / (2.0 * h));
    }
    const auto r1 = regress_expansion(psi, x1s, 1, 3, 1);
    const auto r2 = regress_expansion(psi, x2s, 1, 3, 1);
    const auto ri = regress_expansion(psi, grad, 1, 3, 0);
    double worst = 0.0;
    for (const auto& beta : multi_indices_up_to(1, 3)) {
        if (beta.order() == 0) continue;
        const Eigen::VectorXcd& v = g.at(beta);
        worst = std::max(worst, std::abs(r1.tensor.get(beta) - v(0)) / std::max(1.0, std::abs(v(0))));
        worst = std::max(worst, std::abs(r2.tensor.get(beta) - v(1)) / std::max(1.0, std::abs(v(1))));
    }
    const Eigen::VectorXcd a = sys.input_direction.cast<cplx>();
    for (const auto& beta : multi_indices_up_to(1, 3)) {
        const cplx want = (in[0].at(beta).transpose() * a)(0);
        worst = std::max(worst, std::abs(ri.tensor.get(beta) - want) / std::max(1.0, std::abs(want)));
    }
    return {worst <= 1e-3 && worst_identity <= 1e-6,
            "tensor mismatch " + fmt(worst) + " through order 3 (tol 1e-3); psi1 vs x1 " + fmt(worst_identity) +
                " relative (tol 1e-6)"};
}

// ---------------------------------------------------------------- 5, 6

const std::vector<double> kProbeGrid{0.02, 0.025, 0.03, 0.035, 0.04};

PipelineConfig simple_config(const Settings& s, const std::string& name, int order) {
    PipelineConfig c;
    c.system.kind = SystemKind::Simple;
    c.isostables = 1;
    c.order = order;
    c.frequencies = kProbeGrid;
    c.amplitudes = {0.01, 0.1, std::cbrt(0.01)};
    c.amplitudes.resize(static_cast<std::size_t>(order));
    c.probe.avg_cycles = 100;
    c.probe.j_max = order;
    c.coarse.enabled = true;
    c.out_dir = (s.work / name).string();
    return c;
}

InputSignal three_tones(double amplitude, std::vector<double> omegas) {
    SineSum s;
    for (double w : omegas) s.terms.push_back({amplitude, w, 0.0});
    return InputSignal(s);
}

Outcome deterministic_simple(const Settings& s) {
    auto c = simple_config(s, "simple-deterministic", 3);
    // No process noise: the coarse run is driven by a small random-hold input.
    c.coarse.excitation = 0.01;
    c.coarse.excitation_hold = 1.0;
    c.system.simple.noise = 0.0;
    const auto result = identify(c, RunOptions{s.resume, {}});
    const double lam = result.model.eigenvalues[0].real();
    const auto system = build_system(c);
    const auto u = three_tones(0.08, {0.1, 0.15, 0.17});
    const auto v1 = validate_model(system, result.model.truncated(1), u, 400.0, 0.1);
    const auto v3 = validate_model(system, result.model, u, 400.0, 0.1);
    const double ratio = v3.rms / v1.rms;
    const double coarse = result.report["coarse"]["eigenvalues"][0][0].get<double>();
    return {lam >= -0.055 && lam <= -0.045 && ratio <= 0.3,
            "lambda1 " + fmt(lam) + " (coarse " + fmt(coarse) + ", want [-0.055, -0.045]); RMS order-3/order-1 " +
                fmt(ratio) + " = " + fmt(v3.rms) + "/" + fmt(v1.rms) + " (tol 0.3)"};
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Outcome stochastic_simple(const Settings& s) {
    std::vector<double> coarse, refined;
    int failures = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        auto c = simple_config(s, "simple-noise-seed" + std::to_string(seed), 1);
        c.system.simple.noise = 0.0005;
        c.seed = seed;
        c.coarse.duration = 20000.0;
        c.coarse.sample_dt = 0.1;
        c.coarse.window = 100;
        try {
            const auto result = identify(c, RunOptions{s.resume, {}});
            coarse.push_back(result.report["coarse"]["eigenvalues"][0][0].get<double>());
            refined.push_back(result.model.eigenvalues[0].real());
        } catch (const Error& e) {
            ++failures;
            std::cerr << "seed " << seed << ": " << e.what() << "\n";
        }
    }
    if (coarse.empty()) return {false, "every seed failed"};
    const double mc = median(coarse);
    const double mr = median(refined);
    const bool coarse_ok = mc <= -0.025 && mc >= -0.1;
    const bool refined_ok = std::abs(mr + 0.0462) <= 0.01;
    std::ostringstream os;
    os << "coarse median " << fmt(mc) << " (want within x2 of -0.05), refined median " << fmt(mr)
       << " (want -0.0462 +- 0.01), " << failures << " failed seeds";
    return {failures == 0 && coarse_ok && refined_ok, os.str()};
}

// ---------------------------------------------------------------- 7

Outcome burgers(const Settings& s) {
    PipelineConfig c;
    c.system.kind = SystemKind::Burgers;
    c.system.pod_modes = 5;
    c.isostables = 3;
    c.order = 2;
    for (int i = 1; i <= 20; ++i) c.frequencies.push_back(0.1 * i);
    c.amplitudes = {0.05, 0.5};
    c.probe.avg_cycles = 2;
    c.probe.j_max = 2;
    c.eigenvalues = {-1.0, -2.0, -3.0};
    c.newton_outputs = {0};
    c.out_dir = (s.work / "burgers").string();
    const auto result = identify(c, RunOptions{s.resume, {}});
    const double captured = result.report["pod"]["captured"].get<double>();

    const std::vector<double> reference{-1.22, -4.62, -32.06};
    auto eig = result.model.eigenvalues;
    std::sort(eig.begin(), eig.end(), [](cplx a, cplx b) { return a.real() > b.real(); });
    bool eig_ok = true;
    std::string eig_text;
    for (std::size_t i = 0; i < 3; ++i) {
        const double rel = std::abs(eig[i] - reference[i]) / std::abs(reference[i]);
        eig_ok = eig_ok && rel <= 0.25;
        eig_text += (i ? ", " : "") + fmt(eig[i].real()) + " (" + fmt(100.0 * rel) + "%)";
    }

    const auto system = build_system(c, RunOptions{true, {}});
    const auto u = three_tones(0.5, {0.2, 0.35, 0.63});
    const double t_end = 200.0;
    const double dt = 0.01;
    const auto v1 = validate_model(system, result.model.truncated(1), u, t_end, dt);
    std::string second;
    bool ratio_ok = false;
    try {
        const auto v2 = validate_model(system, result.model, u, t_end, dt);
        const double ratio = v1.mean_l2 / v2.mean_l2;
        ratio_ok = ratio >= 10.0;
        second = "mean L2 order-1 " + fmt(v1.mean_l2) + ", order-2 " + fmt(v2.mean_l2) + ", ratio " + fmt(ratio);
    } catch (const Error& e) {
        second = "mean L2 order-1 " + fmt(v1.mean_l2) + ", order-2 model diverged (" + e.what() + ")";
    }

    std::ostringstream pod_text;
    pod_text << "POD energy of 5 modes " << std::setprecision(6) << captured << " (want >= 0.999)";
    Outcome o;
    o.parts = {{"a", captured >= 0.999, pod_text.str()},
               {"b", eig_ok, "eigenvalues " + eig_text + " vs (-1.22, -4.62, -32.06) (tol 25%)"},
               {"c", ratio_ok, second + " (want ratio >= 10)"}};
    o.pass = captured >= 0.999 && eig_ok && ratio_ok;
    return o;
}

// ---------------------------------------------------------------- 8

Outcome two_exponentials() {
    const double dt = 0.05;
    const int window = 4;
    std::vector<double> y;
    for (int i = 0; i < 2000; ++i) y.push_back(std::exp(-0.2 * i * dt) + std::exp(-1.5 * i * dt));
    const auto basis = pod(stack_snapshots(y, window, dt, 0.0).y, PodSelection{2, 0.0});
    const auto est = coarse_eigenvalues(basis, window, dt, 2);
    const double e1 = std::abs(est.eigenvalues[0] - cplx{-0.2}) / 0.2;
    const double e2 = std::abs(est.eigenvalues[1] - cplx{-1.5}) / 1.5;
    return {std::max(e1, e2) <= 0.05, "rates " + fmt(est.eigenvalues[0].real()) + ", " +
                                          fmt(est.eigenvalues[1].real()) + "; relative errors " + fmt(e1) + ", " +
                                          fmt(e2) + " (tol 0.05)"};
}

}  // namespace

int main(int argc, char** argv) {
    Settings settings;
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--resume") {
            settings.resume = true;
        } else if (a == "--work" && i + 1 < argc) {
            settings.work = argv[++i];
        } else {
            try {
                selected.insert(std::stoi(a));
            } catch (const std::exception&) {
                std::cerr << "usage: acceptance [--work DIR] [--resume] [ids...]\n";
                return 2;
            }
        }
    }
    std::filesystem::create_directories(settings.work);

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"fourier engine exactness", fourier_exactness},
        {"harmonic scaling law", scaling_law},
        {"round-trip identification", round_trip},
        {"oracle equivalence", oracle_equivalence},
        {"deterministic two-state identification", [&] { return deterministic_simple(settings); }},
        {"stochastic two-state identification", [&] { return stochastic_simple(settings); }},
        {"Burgers reproduction", [&] { return burgers(settings); }},
        {"two-exponential coarse estimate", two_exponentials},
    };

    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!selected.empty() && !selected.count(id)) continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (o.parts.empty()) o.parts.push_back({"", o.pass, o.detail});
        for (const auto& p : o.parts) {
            std::cout << (p.pass ? "PASS" : "FAIL") << " " << id << p.tag << " " << criteria[i].first << ": "
                      << p.detail << " [" << fmt(secs) << " s]" << std::endl;
        }
        failed += o.pass ? 0 : 1;
    }
    return failed == 0 ? 0 : 1;
}
