#include <doctest.h>

#include <cmath>
#include <random>

#include "isored/error.hpp"
#include "isored/fitting.hpp"
#include "isored/testbeds.hpp"

using namespace isored;

namespace {

std::vector<double> grid(double first, double step, int count) {
    std::vector<double> out;
    for (int i = 0; i < count; ++i) out.push_back(first + step * i);
    return out;
}

// Random coefficients with the pair symmetry I_{n'}^{b'} = conj(I_n^b), g^{b'} = conj(g^b).
ReducedModel random_model(std::vector<cplx> eigenvalues, std::vector<std::pair<int, int>> pairs, int outputs,
                          int order, std::uint64_t seed, double i_scale = 0.5) {
    auto model = ReducedModel::blank(eigenvalues, pairs, std::vector<double>(static_cast<std::size_t>(outputs), 0.1),
                                     order);
    const int m = model.isostables();
    const auto perm = conjugation_permutation(m, pairs);
    const bool complex_pairs = !pairs.empty();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    auto draw = [&] { return complex_pairs ? cplx{unit(rng), unit(rng)} : cplx{unit(rng)}; };
    for (int p = 1; p <= order; ++p) {
        for (const auto& b : multi_indices(m, p)) {
            const auto bp = b.relabeled(perm);
            if (bp < b) continue;
            for (auto& g : model.g_tensors) {
                const cplx v = bp == b ? cplx{unit(rng)} : draw();
                g.set(b, v);
                g.set(bp, std::conj(v));
            }
        }
    }
    for (int p = 1; p < order; ++p) {
        for (int n = 0; n < m; ++n) {
            const int np = perm[static_cast<std::size_t>(n)];
            if (np < n) continue;
            for (const auto& b : multi_indices(m, p)) {
                const auto bp = b.relabeled(perm);
                const cplx v = i_scale * (np == n && bp == b ? cplx{unit(rng)} : draw());
                model.i_tensors[static_cast<std::size_t>(n)].set(b, v);
                model.i_tensors[static_cast<std::size_t>(np)].set(bp, std::conj(v));
            }
        }
    }
    model.validate();
    return model;
}

double worst_relative(const ReducedModel& a, const ReducedModel& b) {
    double worst = 0.0;
    auto compare = [&](const ExpansionTensor& x, const ExpansionTensor& y) {
        for (const auto& [k, v] : x.entries()) worst = std::max(worst, std::abs(v - y.get(k)) / std::max(1.0, std::abs(v)));
        for (const auto& [k, v] : y.entries()) worst = std::max(worst, std::abs(v - x.get(k)) / std::max(1.0, std::abs(v)));
    };
    for (std::size_t n = 0; n < a.i_tensors.size(); ++n) compare(a.i_tensors[n], b.i_tensors[n]);
    for (std::size_t m = 0; m < a.g_tensors.size(); ++m) compare(a.g_tensors[m], b.g_tensors[m]);
    return worst;
}

std::vector<std::vector<ProbeRecord>> probe_stages(const ReducedModel& truth, const std::vector<double>& omegas,
                                                   const std::vector<double>& eps, double slow) {
    const ReducedModelSystem sut(truth);
    ProbeOptions opt;
    opt.slow_rate = slow;
    opt.settle_time_constants = 30.0;
    opt.avg_cycles = 2;
    opt.j_max = static_cast<int>(eps.size());
    std::vector<std::vector<ProbeRecord>> out;
    for (double e : eps) out.push_back(probe_sweep(sut, omegas, e, opt));
    return out;
}

}  // namespace

TEST_CASE("stage unknown counts") {
    CHECK(stage_unknown_count(1, 1, 1) == 1);
    CHECK(stage_unknown_count(1, 1, 2) == 2);
    CHECK(stage_unknown_count(3, 5, 1) == 15);
    CHECK(stage_unknown_count(3, 5, 2) == 3 * 3 + 5 * 6);
    CHECK(stage_unknown_count(2, 1, 3) == 2 * 3 + 4);
}

TEST_CASE("single-isostable order-3 model is recovered from noiseless probes") {
    const auto truth = random_model({-0.5}, {}, 1, 3, 11);
    const auto records = probe_stages(truth, grid(0.2, 0.15, 6), {1e-4, 1e-4, 1e-4}, 0.5);
    const auto base = ReducedModel::blank(truth.eigenvalues, {}, truth.y0, 3);
    const auto fit = fit_multi_output(base, records, 3);
    CHECK(worst_relative(fit.model, truth) < 1e-3);
    REQUIRE(fit.stages.size() == 3);
    for (const auto& st : fit.stages) {
        CHECK(st.rank == st.columns);
        CHECK(st.relative_residual < 1e-4);
    }
}

TEST_CASE("conjugate pair model is recovered and stays symmetric") {
    const auto truth = random_model({cplx{-0.3, 1.0}, cplx{-0.3, -1.0}}, {{0, 1}}, 2, 2, 5);
    const auto records = probe_stages(truth, grid(0.3, 0.2, 8), {1e-4, 1e-4}, 0.3);
    const auto base = ReducedModel::blank(truth.eigenvalues, truth.conjugate_pairs, truth.y0, 2);
    const auto fit = fit_multi_output(base, records, 2);
    CHECK(worst_relative(fit.model, truth) < 1e-3);
    CHECK(fit.model.conjugate_symmetry_defect() < 1e-12);
}

TEST_CASE("distinct real modes leave a structural null space at stage 2") {
    // Single tones only see the quadratic kernel on (iw, iw) and (iw, -iw); for
    // M real modes C(M, 2) directions stay undetermined. Any member of the
    // solution family reproduces every single-tone response.
    const auto truth = random_model({-1.2, -4.7, -30.8}, {}, 5, 2, 3);
    const auto omegas = grid(0.1, 0.15, 12);
    const auto records = probe_stages(truth, omegas, {1e-4, 1e-3}, 1.2);
    const auto base = ReducedModel::blank(truth.eigenvalues, {}, truth.y0, 2);
    const auto fit = fit_multi_output(base, records, 2);
    REQUIRE(fit.stages.size() == 2);
    CHECK(fit.stages[1].columns == 39);
    CHECK(fit.stages[1].rank == 36);

    const auto again = probe_stages(fit.model, omegas, {1e-4, 1e-3}, 1.2);
    for (std::size_t s = 0; s < 2; ++s) {
        for (std::size_t r = 0; r < omegas.size(); ++r) {
            for (std::size_t m = 0; m < 5; ++m) {
                const auto& a = records[s][r];
                const auto& b = again[s][r];
                const double scale = std::abs(a.sin[m][s + 1]) + std::abs(a.cos[m][s + 1]);
                CHECK(std::abs(a.sin[m][s + 1] - b.sin[m][s + 1]) <= 1e-4 * scale);
                CHECK(std::abs(a.cos[m][s + 1] - b.cos[m][s + 1]) <= 1e-4 * scale);
                if (s == 1) CHECK(std::abs(a.dc[m] - b.dc[m]) <= 1e-4 * scale);
            }
        }
    }

    SolveOptions strict;
    strict.require_full_rank = true;
    try {
        (void)fit_multi_output(base, records, 2, strict);
        FAIL("expected RankDeficient");
    } catch (const Error& err) {
        CHECK(err.code() == ErrorCode::RankDeficient);
    }
}

TEST_CASE("stage building checks its inputs") {
    const auto truth = random_model({-0.5}, {}, 1, 2, 2);
    const auto records = probe_stages(truth, grid(0.2, 0.2, 3), {1e-3, 1e-3}, 0.5);
    const auto base = ReducedModel::blank(truth.eigenvalues, {}, truth.y0, 2);
    const auto psi0 = compute_psi_harmonics(base, {0.2, 0.4, 0.6}, 0);
    // Stage 2 without a fitted stage 1.
    CHECK_THROWS_AS((void)build_stage(base, records[1], 2, psi0), Error);
    // Grids that disagree.
    const auto other = compute_psi_harmonics(base, {0.2, 0.4, 0.7}, 1);
    CHECK_THROWS_AS((void)build_stage(base, records[1], 2, other), Error);
    // Too few rows for the unknowns.
    const auto one = probe_stages(truth, {0.3}, {1e-3}, 0.5);
    auto wide = ReducedModel::blank({-0.5, -2.0}, {}, truth.y0, 1);
    const auto psi = compute_psi_harmonics(wide, {0.3}, 0);
    const auto problem = build_stage(wide, one[0], 1, psi);
    CHECK_THROWS_AS((void)solve_stage(problem, wide), Error);
}

TEST_CASE("stage problem rows follow the measured integrals") {
    const auto truth = random_model({-0.5}, {}, 1, 2, 9);
    const auto omegas = grid(0.2, 0.2, 4);
    const auto records = probe_stages(truth, omegas, {1e-3, 1e-2}, 0.5);
    const auto base = ReducedModel::blank(truth.eigenvalues, {}, truth.y0, 2);
    const auto psi = compute_psi_harmonics(base, omegas, 0);
    const auto p1 = build_stage(base, records[0], 1, psi);
    CHECK(p1.xi.rows() == 8);
    CHECK(p1.xi.cols() == 1);
    const auto s1 = solve_stage(p1, base);
    CHECK(std::abs(s1.values.at(UnknownId::g_tensor(0, MultiIndex{0})) - truth.g_tensors[0].get(MultiIndex{0})) < 1e-4);
    auto stage1 = base;
    apply_solution(stage1, s1);
    const auto psi1 = propagate_harmonics(p1, s1, psi);
    CHECK(psi1.order() == 1);
    const auto p2 = build_stage(stage1, records[1], 2, psi1);
    CHECK(p2.xi.rows() == 12);
    CHECK(p2.xi.cols() == 2);
}
