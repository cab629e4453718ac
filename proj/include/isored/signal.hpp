#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace isored {

/// eps * sin(omega t)
struct Sinusoid {
    double epsilon = 0.0;
    double omega = 0.0;
};

struct SineTerm {
    double amplitude = 0.0;
    double omega = 0.0;
    double phase = 0.0;  // amplitude * sin(omega t + phase)
};

/// Sum of sinusoids; the empty sum is the zero input.
struct SineSum {
    std::vector<SineTerm> terms;
};

/// a * sin(t^2 / b)
struct Chirp {
    double amplitude = 0.0;
    double b = 1.0;
};

enum class Interpolation { Linear, ZeroOrderHold };

/// Tabulated input. Times must be strictly increasing; values are held
/// constant before the first and after the last sample.
struct SampledTable {
    std::vector<double> times;
    std::vector<double> values;
    Interpolation rule = Interpolation::Linear;
};

/// Scalar input u(t) applied along the fixed input direction.
class InputSignal {
public:
    using Variant = std::variant<Sinusoid, SineSum, Chirp, SampledTable>;

    InputSignal() : value_(SineSum{}) {}
    InputSignal(Variant v);  // NOLINT(google-explicit-constructor)

    static InputSignal zero() { return InputSignal(SineSum{}); }
    static InputSignal sinusoid(double epsilon, double omega) { return InputSignal(Sinusoid{epsilon, omega}); }

    /// Zero-order-hold Gaussian samples with standard deviation `amplitude`,
    /// redrawn every `hold` time units on [0, duration].
    static InputSignal random_hold(double amplitude, double hold, double duration, std::uint64_t seed);

    [[nodiscard]] double operator()(double t) const;
    [[nodiscard]] const Variant& variant() const noexcept { return value_; }

    /// Stable textual description (also used to derive noise streams).
    [[nodiscard]] std::string describe() const;

private:
    Variant value_;
};

void to_json(nlohmann::json& j, const InputSignal& u);
void from_json(const nlohmann::json& j, InputSignal& u);

}  // namespace isored
