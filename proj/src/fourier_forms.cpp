#include "isored/fourier_forms.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include "isored/error.hpp"

namespace isored {

namespace {

const LinearForm kZeroForm{};

void add_term(std::map<UnknownId, cplx>& terms, const UnknownId& id, cplx value) {
    if (value == cplx{}) return;
    auto [it, inserted] = terms.try_emplace(id, value);
    if (!inserted) {
        it->second += value;
        if (it->second == cplx{}) terms.erase(it);
    }
}

std::string list_ids(const std::set<UnknownId>& ids) {
    std::ostringstream os;
    bool first = true;
    for (const auto& id : ids) {
        if (!first) os << ", ";
        os << id.to_string();
        first = false;
    }
    return os.str();
}

}  // namespace

std::string UnknownId::to_string() const {
    std::ostringstream os;
    if (kind == Kind::ITensor) {
        os << "I[" << index + 1 << "]" << multi_index.to_string();
    } else {
        os << "g[" << index + 1 << "]" << multi_index.to_string();
    }
    return os.str();
}

LinearForm LinearForm::unknown(const UnknownId& id, cplx coefficient) {
    LinearForm f;
    add_term(f.terms_, id, coefficient);
    return f;
}

cplx LinearForm::coefficient(const UnknownId& id) const {
    auto it = terms_.find(id);
    return it == terms_.end() ? cplx{} : it->second;
}

cplx LinearForm::evaluate(const UnknownValues& values) const {
    cplx total = constant_;
    std::set<UnknownId> missing;
    for (const auto& [id, c] : terms_) {
        auto it = values.find(id);
        if (it == values.end()) {
            missing.insert(id);
        } else {
            total += c * it->second;
        }
    }
    if (!missing.empty()) {
        throw Error(ErrorCode::MissingUnknown, "unresolved unknowns: " + list_ids(missing));
    }
    return total;
}

LinearForm LinearForm::conj() const {
    LinearForm out(std::conj(constant_));
    for (const auto& [id, c] : terms_) out.terms_.emplace(id, std::conj(c));
    return out;
}

LinearForm& LinearForm::operator+=(const LinearForm& other) {
    constant_ += other.constant_;
    for (const auto& [id, c] : other.terms_) add_term(terms_, id, c);
    return *this;
}

LinearForm& LinearForm::operator-=(const LinearForm& other) {
    constant_ -= other.constant_;
    for (const auto& [id, c] : other.terms_) add_term(terms_, id, -c);
    return *this;
}

LinearForm& LinearForm::operator*=(cplx scale) {
    constant_ *= scale;
    if (scale == cplx{}) {
        terms_.clear();
        return *this;
    }
    for (auto it = terms_.begin(); it != terms_.end();) {
        it->second *= scale;
        if (it->second == cplx{}) {
            it = terms_.erase(it);
        } else {
            ++it;
        }
    }
    return *this;
}

// ---------------------------------------------------------------------------

HarmonicSeries::HarmonicSeries(double omega) : omega_(omega), sin_(1), cos_(1) {
    require(omega > 0.0 && std::isfinite(omega), ErrorCode::InvalidArgument,
            "base frequency must be positive and finite");
}

HarmonicSeries HarmonicSeries::sine(double omega, int k, const LinearForm& coefficient) {
    HarmonicSeries s(omega);
    s.add_sin(k, coefficient);
    return s;
}

HarmonicSeries HarmonicSeries::cosine(double omega, int k, const LinearForm& coefficient) {
    HarmonicSeries s(omega);
    s.add_cos(k, coefficient);
    return s;
}

HarmonicSeries HarmonicSeries::constant(double omega, const LinearForm& value) {
    return cosine(omega, 0, value);
}

const LinearForm& HarmonicSeries::sin_coeff(int k) const {
    if (k < 0 || k > max_harmonic()) return kZeroForm;
    return sin_[static_cast<std::size_t>(k)];
}

const LinearForm& HarmonicSeries::cos_coeff(int k) const {
    if (k < 0 || k > max_harmonic()) return kZeroForm;
    return cos_[static_cast<std::size_t>(k)];
}

void HarmonicSeries::grow_to(int k) {
    require(k >= 0, ErrorCode::InvalidArgument, "negative harmonic index");
    require(k <= kMaxHarmonic, ErrorCode::HarmonicCapExceeded,
            "harmonic " + std::to_string(k) + " exceeds cap " + std::to_string(kMaxHarmonic));
    if (k > max_harmonic()) {
        sin_.resize(static_cast<std::size_t>(k) + 1);
        cos_.resize(static_cast<std::size_t>(k) + 1);
    }
}

void HarmonicSeries::add_sin(int k, const LinearForm& coefficient) {
    if (k == 0 || coefficient.is_zero()) return;  // sin(0) == 0
    grow_to(k);
    sin_[static_cast<std::size_t>(k)] += coefficient;
    canonicalize();
}

void HarmonicSeries::add_cos(int k, const LinearForm& coefficient) {
    if (coefficient.is_zero()) return;
    grow_to(k);
    cos_[static_cast<std::size_t>(k)] += coefficient;
    canonicalize();
}

void HarmonicSeries::canonicalize() {
    while (cos_.size() > 1 && sin_.back().is_zero() && cos_.back().is_zero()) {
        sin_.pop_back();
        cos_.pop_back();
    }
}

bool HarmonicSeries::has_unknowns() const {
    for (std::size_t k = 0; k < cos_.size(); ++k) {
        if (sin_[k].has_unknowns() || cos_[k].has_unknowns()) return true;
    }
    return false;
}

cplx HarmonicSeries::evaluate(double t) const {
    static const UnknownValues kNone;
    cplx value = cos_[0].evaluate(kNone);
    for (int k = 1; k <= max_harmonic(); ++k) {
        const double phase = k * omega_ * t;
        value += sin_[static_cast<std::size_t>(k)].evaluate(kNone) * std::sin(phase);
        value += cos_[static_cast<std::size_t>(k)].evaluate(kNone) * std::cos(phase);
    }
    return value;
}

HarmonicSeries HarmonicSeries::conj() const {
    HarmonicSeries out(*this);
    for (std::size_t k = 0; k < cos_.size(); ++k) {
        out.sin_[k] = sin_[k].conj();
        out.cos_[k] = cos_[k].conj();
    }
    return out;
}

HarmonicSeries& HarmonicSeries::operator+=(const HarmonicSeries& other) {
    require(omega_ == other.omega_, ErrorCode::MixedFrequency, "cannot add series at different frequencies");
    grow_to(other.max_harmonic());
    for (int k = 0; k <= other.max_harmonic(); ++k) {
        sin_[static_cast<std::size_t>(k)] += other.sin_[static_cast<std::size_t>(k)];
        cos_[static_cast<std::size_t>(k)] += other.cos_[static_cast<std::size_t>(k)];
    }
    canonicalize();
    return *this;
}

HarmonicSeries& HarmonicSeries::operator*=(cplx scale) {
    for (std::size_t k = 0; k < cos_.size(); ++k) {
        sin_[k] *= scale;
        cos_[k] *= scale;
    }
    canonicalize();
    return *this;
}

// ---------------------------------------------------------------------------

HarmonicSeries multiply(const HarmonicSeries& a, const HarmonicSeries& b) {
    require(a.omega() == b.omega(), ErrorCode::MixedFrequency, "cannot multiply series at different frequencies");
    const bool a_unknown = a.has_unknowns();
    const bool b_unknown = b.has_unknowns();
    require(!(a_unknown && b_unknown), ErrorCode::NonlinearUnknowns,
            "product of two unknown-carrying series is not linear");
    // Keep the unknown-carrying factor on the left so only its partner's constants are used.
    const HarmonicSeries& left = b_unknown ? b : a;
    const HarmonicSeries& right = b_unknown ? a : b;

    HarmonicSeries out(a.omega());
    for (int i = 0; i <= left.max_harmonic(); ++i) {
        const LinearForm& ls = left.sin_coeff(i);
        const LinearForm& lc = left.cos_coeff(i);
        if (ls.is_zero() && lc.is_zero()) continue;
        for (int j = 0; j <= right.max_harmonic(); ++j) {
            const cplx rs = right.sin_coeff(j).constant();
            const cplx rc = right.cos_coeff(j).constant();
            if (rs == cplx{} && rc == cplx{}) continue;
            const int sum = i + j;
            const int diff = std::abs(i - j);
            const double diff_sign = (i >= j) ? 1.0 : -1.0;  // sin(i-j) = sign * sin(|i-j|)
            // sin(i) sin(j) = 1/2 (cos(i-j) - cos(i+j))
            if (!ls.is_zero() && rs != cplx{}) {
                out.add_cos(diff, ls * (0.5 * rs));
                out.add_cos(sum, ls * (-0.5 * rs));
            }
            // cos(i) cos(j) = 1/2 (cos(i-j) + cos(i+j))
            if (!lc.is_zero() && rc != cplx{}) {
                out.add_cos(diff, lc * (0.5 * rc));
                out.add_cos(sum, lc * (0.5 * rc));
            }
            // sin(i) cos(j) = 1/2 (sin(i+j) + sin(i-j))
            if (!ls.is_zero() && rc != cplx{}) {
                out.add_sin(sum, ls * (0.5 * rc));
                out.add_sin(diff, ls * (0.5 * rc * diff_sign));
            }
            // cos(i) sin(j) = 1/2 (sin(i+j) - sin(i-j))
            if (!lc.is_zero() && rs != cplx{}) {
                out.add_sin(sum, lc * (0.5 * rs));
                out.add_sin(diff, lc * (-0.5 * rs * diff_sign));
            }
        }
    }
    return out;
}

HarmonicSeries steady_state_solve(const HarmonicSeries& forcing, cplx lambda) {
    require(lambda.real() < 0.0, ErrorCode::UnstableEigenvalue,
            "steady state requires Re(lambda) < 0");
    const double omega = forcing.omega();
    HarmonicSeries out(omega);
    // DC balance: 0 = lambda c + f0
    out.add_cos(0, forcing.cos_coeff(0) * (-1.0 / lambda));
    const double guard = 1e-12 * (1.0 + std::norm(lambda));
    for (int k = 1; k <= forcing.max_harmonic(); ++k) {
        const double kw = k * omega;
        const cplx denom = lambda * lambda + kw * kw;
        require(std::abs(denom) >= guard, ErrorCode::ResonantDenominator,
                "resonant denominator at harmonic " + std::to_string(k));
        const LinearForm& gamma = forcing.sin_coeff(k);
        const LinearForm& delta = forcing.cos_coeff(k);
        // sin: (-gamma lambda + delta k w) / denom ; cos: (-gamma k w - delta lambda) / denom
        out.add_sin(k, gamma * (-lambda / denom) + delta * (kw / denom));
        out.add_cos(k, gamma * (-kw / denom) + delta * (-lambda / denom));
    }
    return out;
}

std::pair<LinearForm, LinearForm> extract_harmonic(const HarmonicSeries& series, int k) {
    return {series.sin_coeff(k), series.cos_coeff(k)};
}

HarmonicSeries substitute(const HarmonicSeries& series, const UnknownValues& values) {
    HarmonicSeries out(series.omega());
    std::set<UnknownId> missing;
    auto resolve = [&](const LinearForm& f) {
        cplx total = f.constant();
        for (const auto& [id, c] : f.terms()) {
            auto it = values.find(id);
            if (it == values.end()) {
                missing.insert(id);
            } else {
                total += c * it->second;
            }
        }
        return LinearForm(total);
    };
    for (int k = 0; k <= series.max_harmonic(); ++k) {
        out.add_sin(k, resolve(series.sin_coeff(k)));
        out.add_cos(k, resolve(series.cos_coeff(k)));
    }
    if (!missing.empty()) {
        throw Error(ErrorCode::MissingUnknown, "unresolved unknowns: " + list_ids(missing));
    }
    return out;
}

}  // namespace isored
