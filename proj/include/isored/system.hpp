#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "isored/signal.hpp"

namespace isored {

/// Uniformly sampled multi-output time series.
struct Trajectory {
    std::vector<std::string> names;  // one per output column
    std::vector<double> times;
    std::vector<std::vector<double>> y;  // y[sample][output]

    [[nodiscard]] std::size_t samples() const noexcept { return times.size(); }
    [[nodiscard]] std::size_t outputs() const noexcept { return names.size(); }
    [[nodiscard]] std::vector<double> column(std::size_t m) const;
};

/// Black-box full model driven by a scalar input along a fixed direction.
///
/// run() always starts from the unforced steady state at t = 0 and returns
/// samples at t = i * sample_dt for i = 0..round(t_end / sample_dt).
/// Implementations integrate with an internal step that divides sample_dt
/// so sample instants are exact. Deterministic systems must return
/// identical samples for identical inputs.
class SystemUnderTest {
public:
    virtual ~SystemUnderTest() = default;

    [[nodiscard]] virtual std::size_t outputs() const = 0;
    [[nodiscard]] virtual std::vector<std::string> output_names() const;
    /// Steady output under u = 0.
    [[nodiscard]] virtual std::vector<double> baseline() const = 0;
    [[nodiscard]] virtual Trajectory run(const InputSignal& u, double t_end, double sample_dt) const = 0;
    /// True when run() contains process noise.
    [[nodiscard]] virtual bool stochastic() const { return false; }
};

/// Number of samples run() returns for a given horizon.
[[nodiscard]] std::size_t sample_count(double t_end, double sample_dt);

/// Substeps of at most `max_step` that exactly tile `sample_dt`.
[[nodiscard]] int substeps(double sample_dt, double max_step);

/// 64-bit FNV-1a; used for noise stream derivation and content addressing.
[[nodiscard]] std::uint64_t fnv1a(std::string_view text);

/// CSV with a header row "t,<name>..." and one row per sample.
void write_csv(std::ostream& os, const Trajectory& traj);
void write_csv(const std::string& path, const Trajectory& traj);
/// Throws IoError on malformed input.
[[nodiscard]] Trajectory read_csv(std::istream& is);
[[nodiscard]] Trajectory read_csv(const std::string& path);

}  // namespace isored
