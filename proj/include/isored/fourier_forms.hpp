#pragma once

// Exact algebra over finite Fourier series in one base frequency whose
// coefficients are affine linear forms in named unknown model coefficients.
//
// This is the machinery that turns the steady-state response of a reduced
// model to u = eps sin(wt) into rows of a linear least-squares problem: each
// stage's unknowns enter linearly, so a constant-plus-map representation is
// exact and no general symbolic algebra is needed.

#include <complex>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "isored/multi_index.hpp"

namespace isored {

/// Names one unknown expansion coefficient: either I_{n,A}^{b...} or g_{m,y}^{b...}.
struct UnknownId {
    enum class Kind { ITensor, GTensor };

    Kind kind = Kind::ITensor;
    int index = 0;  // isostable n for ITensor, output m for GTensor (zero-based)
    MultiIndex multi_index;

    static UnknownId i_tensor(int n, MultiIndex mi) { return {Kind::ITensor, n, std::move(mi)}; }
    static UnknownId g_tensor(int m, MultiIndex mi) { return {Kind::GTensor, m, std::move(mi)}; }

    [[nodiscard]] std::string to_string() const;

    auto operator<=>(const UnknownId&) const = default;
};

using UnknownValues = std::map<UnknownId, cplx>;

/// constant + sum_i coeff_i * unknown_i, with zero coefficients dropped.
class LinearForm {
public:
    LinearForm() = default;
    LinearForm(cplx constant) : constant_(constant) {}  // NOLINT(google-explicit-constructor)
    LinearForm(double constant) : constant_(constant, 0.0) {}  // NOLINT(google-explicit-constructor)

    static LinearForm unknown(const UnknownId& id, cplx coefficient = 1.0);

    [[nodiscard]] cplx constant() const noexcept { return constant_; }
    [[nodiscard]] const std::map<UnknownId, cplx>& terms() const noexcept { return terms_; }
    [[nodiscard]] bool has_unknowns() const noexcept { return !terms_.empty(); }
    [[nodiscard]] bool is_zero() const noexcept { return terms_.empty() && constant_ == cplx{}; }

    /// Coefficient of `id`, zero when absent.
    [[nodiscard]] cplx coefficient(const UnknownId& id) const;

    /// Resolves every unknown. Throws MissingUnknown listing unresolved ids.
    [[nodiscard]] cplx evaluate(const UnknownValues& values) const;

    [[nodiscard]] LinearForm conj() const;

    LinearForm& operator+=(const LinearForm& other);
    LinearForm& operator-=(const LinearForm& other);
    LinearForm& operator*=(cplx scale);

    friend LinearForm operator+(LinearForm a, const LinearForm& b) { return a += b; }
    friend LinearForm operator-(LinearForm a, const LinearForm& b) { return a -= b; }
    friend LinearForm operator*(LinearForm a, cplx s) { return a *= s; }
    friend LinearForm operator*(cplx s, LinearForm a) { return a *= s; }

    friend bool operator==(const LinearForm&, const LinearForm&) = default;

private:
    cplx constant_{};
    std::map<UnknownId, cplx> terms_;
};

/// sum_{k=0}^{K} s_k sin(k w t) + c_k cos(k w t) with LinearForm coefficients.
///
/// The sine coefficient of harmonic 0 is identically zero; the DC value lives
/// in the cosine slot. K is trimmed to the highest harmonic with a nonzero
/// coefficient and may not exceed kMaxHarmonic.
class HarmonicSeries {
public:
    static constexpr int kMaxHarmonic = 16;

    /// The zero series at frequency `omega` (must be > 0).
    explicit HarmonicSeries(double omega);

    static HarmonicSeries sine(double omega, int k, const LinearForm& coefficient = 1.0);
    static HarmonicSeries cosine(double omega, int k, const LinearForm& coefficient = 1.0);
    static HarmonicSeries constant(double omega, const LinearForm& value);

    [[nodiscard]] double omega() const noexcept { return omega_; }
    [[nodiscard]] int max_harmonic() const noexcept { return static_cast<int>(cos_.size()) - 1; }

    /// Coefficients of harmonic k; zero forms when k is out of range.
    [[nodiscard]] const LinearForm& sin_coeff(int k) const;
    [[nodiscard]] const LinearForm& cos_coeff(int k) const;

    void add_sin(int k, const LinearForm& coefficient);
    void add_cos(int k, const LinearForm& coefficient);

    [[nodiscard]] bool has_unknowns() const;

    /// Value at time t. Throws MissingUnknown if any coefficient carries unknowns.
    [[nodiscard]] cplx evaluate(double t) const;

    [[nodiscard]] HarmonicSeries conj() const;

    HarmonicSeries& operator+=(const HarmonicSeries& other);
    HarmonicSeries& operator*=(cplx scale);

    friend HarmonicSeries operator+(HarmonicSeries a, const HarmonicSeries& b) { return a += b; }
    friend HarmonicSeries operator*(HarmonicSeries a, cplx s) { return a *= s; }
    friend HarmonicSeries operator*(cplx s, HarmonicSeries a) { return a *= s; }

    friend bool operator==(const HarmonicSeries&, const HarmonicSeries&) = default;

private:
    void grow_to(int k);
    void canonicalize();

    double omega_;
    std::vector<LinearForm> sin_;  // sin_[0] always zero
    std::vector<LinearForm> cos_;
};

/// Exact product via product-to-sum identities. At most one factor may carry unknowns.
[[nodiscard]] HarmonicSeries multiply(const HarmonicSeries& a, const HarmonicSeries& b);

/// Periodic steady state of psi' = lambda psi + forcing(t), Re(lambda) < 0.
[[nodiscard]] HarmonicSeries steady_state_solve(const HarmonicSeries& forcing, cplx lambda);

/// (sin_coeff(k), cos_coeff(k)); zero forms for out-of-range k.
[[nodiscard]] std::pair<LinearForm, LinearForm> extract_harmonic(const HarmonicSeries& series, int k);

/// Replaces every unknown with its value. Throws MissingUnknown if any id is unresolved.
[[nodiscard]] HarmonicSeries substitute(const HarmonicSeries& series, const UnknownValues& values);

}  // namespace isored
