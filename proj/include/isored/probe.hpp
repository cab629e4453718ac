#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "isored/multi_index.hpp"
#include "isored/system.hpp"

namespace isored {

/// One steady-state sinusoidal experiment u = eps sin(w t).
///
/// For output m and harmonic k the stored integrals are cycle averages of
///   w * int_0^{2pi/w} y(t) sin(k w t) dt   and   w * int_0^{2pi/w} y(t) cos(k w t) dt,
/// i.e. pi times the Fourier coefficients (2 pi times the mean for k = 0).
struct ProbeRecord {
    double omega = 0.0;
    double epsilon = 0.0;
    int cycles_settled = 0;
    int cycles_averaged = 0;
    int samples_per_cycle = 0;
    int j_max = 0;
    std::vector<double> y0;
    std::vector<std::vector<double>> sin;      // [m][k], sin[m][0] == 0
    std::vector<std::vector<double>> cos;      // [m][k], cos[m][0] == w * int y dt
    std::vector<std::vector<double>> sin_var;  // cycle-to-cycle variance of each integral
    std::vector<std::vector<double>> cos_var;
    std::vector<double> dc;                    // w * int y dt - 2 pi y0
    double settle_defect = 0.0;                // largest settle mismatch relative to its threshold

    [[nodiscard]] std::size_t outputs() const noexcept { return y0.size(); }

    friend bool operator==(const ProbeRecord&, const ProbeRecord&) = default;
};

struct ProbeOptions {
    int settle_cycles = 0;              // 0 selects the default rule (needs slow_rate)
    double slow_rate = 0.0;             // |Re lambda| of the slowest mode, 0 when unknown
    double settle_time_constants = 8.0;
    int avg_cycles = 100;
    int samples_per_cycle = 64;
    int j_max = 3;
    double settle_tolerance = 1e-3;
    bool check_settled = true;
    int workers = 0;  // parallel probes in a sweep; 0 uses every hardware thread
};

/// max(10, ceil(time_constants / slow_rate * w / 2pi)) cycles.
[[nodiscard]] int default_settle_cycles(double omega, double slow_rate, double time_constants = 8.0);

/// Per-cycle trapezoid integrals of one output column. Exposed for testing.
struct CycleIntegrals {
    std::vector<std::vector<double>> sin;  // [cycle][k]
    std::vector<std::vector<double>> cos;
};
[[nodiscard]] CycleIntegrals cycle_integrals(const std::vector<double>& samples, int samples_per_cycle, int cycles,
                                             int first_cycle, int j_max);

/// Throws NotSettled, SamplingTooCoarse, InvalidArgument.
[[nodiscard]] ProbeRecord run_probe(const SystemUnderTest& sut, double omega, double epsilon,
                                    const ProbeOptions& options);

/// One record per frequency, in input order. `on_record` is called (serialized)
/// as each probe completes.
/// Errors are rethrown with the offending frequency in the message.
[[nodiscard]] std::vector<ProbeRecord> probe_sweep(const SystemUnderTest& sut, const std::vector<double>& frequencies,
                                                   double epsilon, const ProbeOptions& options,
                                                   const std::function<void(const ProbeRecord&)>& on_record = {});

/// Stage-j measurement vector for output m: (sin, cos) rows of harmonic j per
/// record, plus the DC row at j == 2. Throws MissingHarmonic.
[[nodiscard]] std::vector<cplx> assemble_gamma(const std::vector<ProbeRecord>& records, int stage, int output);

nlohmann::json to_json(const ProbeRecord& record);
[[nodiscard]] ProbeRecord probe_from_json(const nlohmann::json& j);

/// One JSON document per line.
void write_probe_records(std::ostream& os, const std::vector<ProbeRecord>& records);
[[nodiscard]] std::vector<ProbeRecord> read_probe_records(std::istream& is);
void write_probe_records(const std::string& path, const std::vector<ProbeRecord>& records);
[[nodiscard]] std::vector<ProbeRecord> read_probe_records(const std::string& path);

}  // namespace isored
