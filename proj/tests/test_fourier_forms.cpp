#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "isored/error.hpp"
#include "isored/fourier_forms.hpp"

using namespace isored;

namespace {

const UnknownId kU1 = UnknownId::g_tensor(0, MultiIndex{0});
const UnknownId kU2 = UnknownId::i_tensor(0, MultiIndex{0, 0});

cplx cval(const LinearForm& f) { return f.evaluate({}); }

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

// Discrete Fourier integrals of a sampled function over one period.
std::pair<cplx, cplx> sampled_harmonic(const HarmonicSeries& s, int k, int samples = 4096) {
    const double period = 2.0 * std::numbers::pi / s.omega();
    cplx a{}, b{};
    for (int i = 0; i < samples; ++i) {
        const double t = period * i / samples;
        const cplx v = s.evaluate(t);
        a += v * std::sin(k * s.omega() * t);
        b += v * std::cos(k * s.omega() * t);
    }
    const double scale = 2.0 / samples;
    if (k == 0) return {0.0, b / static_cast<double>(samples)};
    return {a * scale, b * scale};
}

}  // namespace

TEST_CASE("multiply applies product-to-sum identities") {
    const double w = 0.7;
    auto sc = multiply(HarmonicSeries::sine(w, 1, 1.0), HarmonicSeries::cosine(w, 1, 1.0));
    CHECK(sc.max_harmonic() == 2);
    CHECK(std::abs(cval(sc.sin_coeff(2)) - 0.5) < 1e-15);
    CHECK(cval(sc.cos_coeff(0)) == cplx{});

    auto ss = multiply(HarmonicSeries::sine(w, 1, 1.0), HarmonicSeries::sine(w, 1, 1.0));
    CHECK(std::abs(cval(ss.cos_coeff(0)) - 0.5) < 1e-15);
    CHECK(std::abs(cval(ss.cos_coeff(2)) + 0.5) < 1e-15);

    auto dc = multiply(HarmonicSeries::sine(w, 1, LinearForm::unknown(kU1, 2.0)), HarmonicSeries::constant(w, 3.0));
    CHECK(dc.sin_coeff(1).coefficient(kU1) == cplx{6.0});
    CHECK(dc.max_harmonic() == 1);
}

TEST_CASE("multiply enforces its contract") {
    CHECK_THROWS_AS((void)multiply(HarmonicSeries::sine(1.0, 1, 1.0), HarmonicSeries::sine(2.0, 1, 1.0)), Error);
    try {
        (void)multiply(HarmonicSeries::sine(1.0, 1, LinearForm::unknown(kU1)),
                       HarmonicSeries::sine(1.0, 1, LinearForm::unknown(kU2)));
        FAIL("expected NonlinearUnknowns");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NonlinearUnknowns);
    }
    // Unknowns on the right factor are handled symmetrically.
    auto p = multiply(HarmonicSeries::sine(1.0, 2, 1.0), HarmonicSeries::cosine(1.0, 1, LinearForm::unknown(kU1)));
    CHECK(std::abs(p.sin_coeff(3).coefficient(kU1) - 0.5) < 1e-15);
    CHECK(std::abs(p.sin_coeff(1).coefficient(kU1) - 0.5) < 1e-15);
}

TEST_CASE("steady_state_solve closed forms") {
    auto a = steady_state_solve(HarmonicSeries::sine(1.0, 1, 1.0), -1.0);
    CHECK(std::abs(cval(a.sin_coeff(1)) - 0.5) < 1e-15);
    CHECK(std::abs(cval(a.cos_coeff(1)) + 0.5) < 1e-15);

    auto b = steady_state_solve(HarmonicSeries::constant(1.0, 4.0), -2.0);
    CHECK(std::abs(cval(b.cos_coeff(0)) - 2.0) < 1e-15);

    auto c = steady_state_solve(HarmonicSeries::sine(0.02, 1, 1.0), -0.05);
    CHECK(std::abs(cval(c.sin_coeff(1)) - 0.05 / 0.0029) < 1e-12);
    CHECK(std::abs(cval(c.cos_coeff(1)) + 0.02 / 0.0029) < 1e-12);

    CHECK_THROWS_AS((void)steady_state_solve(HarmonicSeries::sine(1.0, 1, 1.0), cplx{0.0, 1.0}), Error);
}

TEST_CASE("steady state satisfies the forced ODE pointwise") {
    std::mt19937_64 rng(11);
    const double w = 0.9;
    const cplx lambda{-0.3, 0.4};
    auto forcing = random_series(rng, w, 4);
    auto psi = steady_state_solve(forcing, lambda);
    // d/dt of the series, by hand
    for (double t : {0.0, 0.37, 2.1, 5.5}) {
        cplx deriv{};
        for (int k = 1; k <= psi.max_harmonic(); ++k) {
            deriv += cval(psi.sin_coeff(k)) * (k * w) * std::cos(k * w * t);
            deriv -= cval(psi.cos_coeff(k)) * (k * w) * std::sin(k * w * t);
        }
        CHECK(std::abs(deriv - (lambda * psi.evaluate(t) + forcing.evaluate(t))) < 1e-12);
    }
}

TEST_CASE("extract_harmonic and substitute") {
    const double w = 1.3;
    auto [s2, c2] = extract_harmonic(HarmonicSeries::sine(w, 2, 3.0), 2);
    CHECK(cval(s2) == cplx{3.0});
    CHECK(cval(c2) == cplx{});
    HarmonicSeries sc = HarmonicSeries::sine(w, 1, 1.0);
    sc.add_cos(1, 1.0);
    auto [s, c] = extract_harmonic(sc, 2);
    CHECK(s.is_zero());
    CHECK(c.is_zero());
    HarmonicSeries dc = HarmonicSeries::constant(w, 5.0);
    dc.add_sin(1, 2.0);
    auto [s0, c0] = extract_harmonic(dc, 0);
    CHECK(s0.is_zero());
    CHECK(cval(c0) == cplx{5.0});

    auto with_u = HarmonicSeries::sine(w, 1, LinearForm::unknown(kU1, 2.0));
    auto sub = substitute(with_u, {{kU1, 3.0}});
    CHECK(!sub.has_unknowns());
    CHECK(cval(sub.sin_coeff(1)) == cplx{6.0});
    CHECK(substitute(sc, {}) == sc);

    auto both = with_u;
    both.add_cos(1, LinearForm::unknown(kU2));
    try {
        (void)substitute(both, {{kU1, 1.0}});
        FAIL("expected MissingUnknown");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::MissingUnknown);
        CHECK(std::string(e.what()).find(kU2.to_string()) != std::string::npos);
    }
}

TEST_CASE("harmonic cap is enforced") {
    HarmonicSeries s(1.0);
    s.add_sin(HarmonicSeries::kMaxHarmonic, 1.0);
    CHECK_THROWS_AS(s.add_sin(HarmonicSeries::kMaxHarmonic + 1, 1.0), Error);
}

TEST_CASE("canonical form trims trailing harmonics and zero terms") {
    HarmonicSeries s = HarmonicSeries::sine(1.0, 3, 1.0);
    s.add_sin(3, -1.0);
    CHECK(s.max_harmonic() == 0);
    LinearForm f = LinearForm::unknown(kU1, 2.0);
    f -= LinearForm::unknown(kU1, 2.0);
    CHECK(f.is_zero());
    CHECK(f.terms().empty());
}

TEST_CASE("sin forcing then steady solve raises max harmonic by exactly one") {
    std::mt19937_64 rng(5);
    for (int p = 0; p <= 6; ++p) {
        auto s = random_series(rng, 0.4, p);
        auto next = steady_state_solve(multiply(HarmonicSeries::sine(0.4, 1, 1.0), s), cplx{-0.2, 0.0});
        CHECK(next.max_harmonic() == p + 1);
    }
}

TEST_CASE("sampled Fourier integrals reproduce coefficients") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 10; ++trial) {
        auto a = random_series(rng, 1.1, 3);
        auto b = random_series(rng, 1.1, 2);
        auto prod = steady_state_solve(multiply(a, b), cplx{-0.5, 0.2});
        for (int k = 0; k <= prod.max_harmonic(); ++k) {
            auto [s, c] = sampled_harmonic(prod, k);
            const double scale = 1.0 + std::abs(cval(prod.sin_coeff(k))) + std::abs(cval(prod.cos_coeff(k)));
            CHECK(std::abs(s - cval(prod.sin_coeff(k))) <= 1e-10 * scale);
            CHECK(std::abs(c - cval(prod.cos_coeff(k))) <= 1e-10 * scale);
        }
    }
}

TEST_CASE("linearity in a single unknown") {
    std::mt19937_64 rng(3);
    auto known = random_series(rng, 0.8, 2);
    auto unit = HarmonicSeries::sine(0.8, 1, LinearForm::unknown(kU1, 1.0));
    auto scaled = HarmonicSeries::sine(0.8, 1, LinearForm::unknown(kU1, 2.5));
    auto r1 = steady_state_solve(multiply(unit, known), -0.7);
    auto r2 = steady_state_solve(multiply(scaled, known), -0.7);
    r1 *= 2.5;
    for (int k = 0; k <= r1.max_harmonic(); ++k) {
        CHECK(std::abs(r1.sin_coeff(k).coefficient(kU1) - r2.sin_coeff(k).coefficient(kU1)) < 1e-14);
        CHECK(std::abs(r1.cos_coeff(k).coefficient(kU1) - r2.cos_coeff(k).coefficient(kU1)) < 1e-14);
    }
}

TEST_CASE("conjugating inputs conjugates the steady state") {
    std::mt19937_64 rng(8);
    auto f = random_series(rng, 0.6, 3);
    const cplx lambda{-0.4, 0.9};
    auto direct = steady_state_solve(f, lambda).conj();
    auto mirrored = steady_state_solve(f.conj(), std::conj(lambda));
    for (int k = 0; k <= direct.max_harmonic(); ++k) {
        CHECK(std::abs(cval(direct.sin_coeff(k)) - cval(mirrored.sin_coeff(k))) < 1e-14);
        CHECK(std::abs(cval(direct.cos_coeff(k)) - cval(mirrored.cos_coeff(k))) < 1e-14);
    }
}
