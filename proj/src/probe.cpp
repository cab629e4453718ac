#include "isored/probe.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <numbers>
#include <set>
#include <sstream>
#include <thread>

#include "isored/error.hpp"

namespace isored {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double variance(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double mu = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - mu) * (x - mu);
    return s / static_cast<double>(v.size() - 1);
}

}  // namespace

int default_settle_cycles(double omega, double slow_rate, double time_constants) {
    require(slow_rate > 0.0, ErrorCode::InvalidArgument,
            "settle cycles must be given explicitly when no decay-rate estimate exists");
    const double cycles = time_constants / slow_rate * omega / kTwoPi;
    return std::max(10, static_cast<int>(std::ceil(cycles)));
}

CycleIntegrals cycle_integrals(const std::vector<double>& samples, int samples_per_cycle, int cycles,
                               int first_cycle, int j_max) {
    const auto n = static_cast<std::size_t>(samples_per_cycle);
    require(samples.size() >= (static_cast<std::size_t>(first_cycle + cycles)) * n + 1, ErrorCode::TooFewSamples,
            "trajectory shorter than the requested cycles");
    // Composite trapezoid over one period; w * h = 2 pi / N.
    const double wh = kTwoPi / static_cast<double>(samples_per_cycle);
    std::vector<double> sk(n + 1), ck(n + 1);
    CycleIntegrals out;
    out.sin.assign(static_cast<std::size_t>(cycles), std::vector<double>(static_cast<std::size_t>(j_max) + 1, 0.0));
    out.cos = out.sin;
    for (int k = 0; k <= j_max; ++k) {
        for (std::size_t i = 0; i <= n; ++i) {
            const double phase = k * wh * static_cast<double>(i);
            sk[i] = std::sin(phase);
            ck[i] = std::cos(phase);
        }
        for (int c = 0; c < cycles; ++c) {
            const std::size_t base = static_cast<std::size_t>(first_cycle + c) * n;
            double s = 0.5 * (samples[base] * sk[0] + samples[base + n] * sk[n]);
            double co = 0.5 * (samples[base] * ck[0] + samples[base + n] * ck[n]);
            for (std::size_t i = 1; i < n; ++i) {
                s += samples[base + i] * sk[i];
                co += samples[base + i] * ck[i];
            }
            out.sin[static_cast<std::size_t>(c)][static_cast<std::size_t>(k)] = k == 0 ? 0.0 : s * wh;
            out.cos[static_cast<std::size_t>(c)][static_cast<std::size_t>(k)] = co * wh;
        }
    }
    return out;
}

ProbeRecord run_probe(const SystemUnderTest& sut, double omega, double epsilon, const ProbeOptions& options) {
    require(omega > 0.0 && std::isfinite(omega), ErrorCode::InvalidArgument, "probe frequency must be positive");
    require(epsilon > 0.0, ErrorCode::InvalidArgument, "probe amplitude must be positive");
    require(options.samples_per_cycle >= 64, ErrorCode::SamplingTooCoarse,
            "need at least 64 samples per cycle, got " + std::to_string(options.samples_per_cycle));
    require(options.avg_cycles >= 1, ErrorCode::InvalidArgument, "need at least one averaged cycle");
    require(options.j_max >= 1 && options.j_max <= 16, ErrorCode::InvalidArgument, "j_max must be in 1..16");

    ProbeRecord rec;
    rec.omega = omega;
    rec.epsilon = epsilon;
    rec.cycles_settled = options.settle_cycles > 0
                             ? options.settle_cycles
                             : default_settle_cycles(omega, options.slow_rate, options.settle_time_constants);
    rec.cycles_averaged = options.avg_cycles;
    rec.samples_per_cycle = options.samples_per_cycle;
    rec.j_max = options.j_max;
    rec.y0 = sut.baseline();

    const double period = kTwoPi / omega;
    const int total_cycles = rec.cycles_settled + rec.cycles_averaged;
    const double sample_dt = period / options.samples_per_cycle;
    const auto traj = sut.run(InputSignal::sinusoid(epsilon, omega), total_cycles * period, sample_dt);
    require(traj.outputs() == rec.y0.size(), ErrorCode::DimensionMismatch, "system output width disagrees with baseline");

    const std::size_t ny = rec.outputs();
    const auto kn = static_cast<std::size_t>(options.j_max) + 1;
    rec.sin.assign(ny, std::vector<double>(kn));
    rec.cos = rec.sin;
    rec.sin_var = rec.sin;
    rec.cos_var = rec.sin;
    rec.dc.assign(ny, 0.0);

    const bool noisy = sut.stochastic();
    for (std::size_t m = 0; m < ny; ++m) {
        const auto column = traj.column(m);
        const auto avg = cycle_integrals(column, options.samples_per_cycle, rec.cycles_averaged, rec.cycles_settled,
                                         options.j_max);
        for (std::size_t k = 0; k < kn; ++k) {
            std::vector<double> s, c;
            for (int cyc = 0; cyc < rec.cycles_averaged; ++cyc) {
                s.push_back(avg.sin[static_cast<std::size_t>(cyc)][k]);
                c.push_back(avg.cos[static_cast<std::size_t>(cyc)][k]);
            }
            rec.sin[m][k] = mean(s);
            rec.cos[m][k] = mean(c);
            rec.sin_var[m][k] = variance(s);
            rec.cos_var[m][k] = variance(c);
        }
        rec.dc[m] = rec.cos[m][0] - kTwoPi * rec.y0[m];

        if (!options.check_settled || rec.cycles_settled < 1) continue;
        const auto last = cycle_integrals(column, options.samples_per_cycle, 1, rec.cycles_settled - 1, options.j_max);
        double scale = std::abs(rec.dc[m]);
        for (std::size_t k = 1; k < kn; ++k) scale = std::max({scale, std::abs(rec.sin[m][k]), std::abs(rec.cos[m][k])});
        for (std::size_t k = 0; k < kn; ++k) {
            const double first_s = avg.sin[0][k];
            const double first_c = k == 0 ? avg.cos[0][k] - kTwoPi * rec.y0[m] : avg.cos[0][k];
            const double last_s = last.sin[0][k];
            const double last_c = k == 0 ? last.cos[0][k] - kTwoPi * rec.y0[m] : last.cos[0][k];
            const double noise_s = noisy ? 3.0 * std::sqrt(2.0 * rec.sin_var[m][k]) : 0.0;
            const double noise_c = noisy ? 3.0 * std::sqrt(2.0 * rec.cos_var[m][k]) : 0.0;
            const double thr_s = options.settle_tolerance * scale + noise_s;
            const double thr_c = options.settle_tolerance * scale + noise_c;
            const double ds = std::abs(first_s - last_s);
            const double dcos = std::abs(first_c - last_c);
            const double defect = std::max(thr_s > 0 ? ds / thr_s : (ds > 0 ? INFINITY : 0.0),
                                           thr_c > 0 ? dcos / thr_c : (dcos > 0 ? INFINITY : 0.0));
            rec.settle_defect = std::max(rec.settle_defect, defect);
            if (defect > 1.0) {
                std::ostringstream os;
                os << "output " << m + 1 << " harmonic " << k << " changed by " << std::max(ds, dcos)
                   << " between the last settling cycle and the first averaged cycle (threshold "
                   << std::min(thr_s, thr_c) << ")";
                throw Error(ErrorCode::NotSettled, os.str());
            }
        }
    }
    return rec;
}

std::vector<ProbeRecord> probe_sweep(const SystemUnderTest& sut, const std::vector<double>& frequencies,
                                     double epsilon, const ProbeOptions& options,
                                     const std::function<void(const ProbeRecord&)>& on_record) {
    std::set<double> seen;
    for (double w : frequencies) {
        require(w > 0.0, ErrorCode::InvalidArgument, "probe frequencies must be positive");
        require(seen.insert(w).second, ErrorCode::InvalidArgument, "duplicate probe frequency " + std::to_string(w));
    }
    std::vector<ProbeRecord> records(frequencies.size());
    std::vector<std::exception_ptr> failures(frequencies.size());
    std::atomic<std::size_t> next{0};
    std::mutex report;
    auto worker = [&] {
        for (std::size_t i = next++; i < frequencies.size(); i = next++) {
            try {
                records[i] = run_probe(sut, frequencies[i], epsilon, options);
            } catch (...) {
                failures[i] = std::current_exception();
                continue;
            }
            if (on_record) {
                const std::lock_guard<std::mutex> lock(report);
                on_record(records[i]);
            }
        }
    };
    unsigned workers = options.workers > 0 ? static_cast<unsigned>(options.workers)
                                           : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min<unsigned>(workers, static_cast<unsigned>(frequencies.size()));
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < workers; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (std::size_t i = 0; i < frequencies.size(); ++i) {
        if (!failures[i]) continue;
        try {
            std::rethrow_exception(failures[i]);
        } catch (const Error& e) {
            throw Error(e.code(), "probe at omega = " + std::to_string(frequencies[i]) + ": " + e.what());
        }
    }
    return records;
}

std::vector<cplx> assemble_gamma(const std::vector<ProbeRecord>& records, int stage, int output) {
    require(stage >= 1, ErrorCode::InvalidArgument, "stage must be >= 1");
    std::vector<cplx> gamma;
    for (const auto& r : records) {
        require(output >= 0 && static_cast<std::size_t>(output) < r.outputs(), ErrorCode::DimensionMismatch,
                "probe record lacks output " + std::to_string(output + 1));
        require(r.j_max >= stage, ErrorCode::MissingHarmonic,
                "probe at omega = " + std::to_string(r.omega) + " stops at harmonic " + std::to_string(r.j_max));
        const auto m = static_cast<std::size_t>(output);
        const auto k = static_cast<std::size_t>(stage);
        gamma.emplace_back(r.sin[m][k]);
        gamma.emplace_back(r.cos[m][k]);
        if (stage == 2) gamma.emplace_back(r.dc[m]);
    }
    return gamma;
}

nlohmann::json to_json(const ProbeRecord& r) {
    return {{"omega", r.omega},
            {"epsilon", r.epsilon},
            {"cycles_settled", r.cycles_settled},
            {"cycles_averaged", r.cycles_averaged},
            {"samples_per_cycle", r.samples_per_cycle},
            {"j_max", r.j_max},
            {"y0", r.y0},
            {"sin", r.sin},
            {"cos", r.cos},
            {"sin_var", r.sin_var},
            {"cos_var", r.cos_var},
            {"dc", r.dc},
            {"settle_defect", r.settle_defect}};
}

ProbeRecord probe_from_json(const nlohmann::json& j) {
    try {
        ProbeRecord r;
        r.omega = j.at("omega").get<double>();
        r.epsilon = j.at("epsilon").get<double>();
        r.cycles_settled = j.at("cycles_settled").get<int>();
        r.cycles_averaged = j.at("cycles_averaged").get<int>();
        r.samples_per_cycle = j.at("samples_per_cycle").get<int>();
        r.j_max = j.at("j_max").get<int>();
        r.y0 = j.at("y0").get<std::vector<double>>();
        r.sin = j.at("sin").get<std::vector<std::vector<double>>>();
        r.cos = j.at("cos").get<std::vector<std::vector<double>>>();
        r.sin_var = j.at("sin_var").get<std::vector<std::vector<double>>>();
        r.cos_var = j.at("cos_var").get<std::vector<std::vector<double>>>();
        r.dc = j.at("dc").get<std::vector<double>>();
        r.settle_defect = j.value("settle_defect", 0.0);
        const std::size_t ny = r.y0.size();
        require(r.sin.size() == ny && r.cos.size() == ny && r.dc.size() == ny, ErrorCode::IoError,
                "probe record arrays disagree with y0 width");
        for (std::size_t m = 0; m < ny; ++m) {
            require(static_cast<int>(r.sin[m].size()) == r.j_max + 1 && static_cast<int>(r.cos[m].size()) == r.j_max + 1,
                    ErrorCode::IoError, "probe record harmonic table has wrong length");
        }
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::IoError, std::string("malformed probe record: ") + e.what());
    }
}

void write_probe_records(std::ostream& os, const std::vector<ProbeRecord>& records) {
    for (const auto& r : records) os << to_json(r).dump() << '\n';
}

std::vector<ProbeRecord> read_probe_records(std::istream& is) {
    std::vector<ProbeRecord> out;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::IoError, std::string("unparsable probe line: ") + e.what());
        }
        out.push_back(probe_from_json(j));
    }
    return out;
}

void write_probe_records(const std::string& path, const std::vector<ProbeRecord>& records) {
    std::ofstream os(path);
    require(os.good(), ErrorCode::IoError, "cannot write " + path);
    write_probe_records(os, records);
}

std::vector<ProbeRecord> read_probe_records(const std::string& path) {
    std::ifstream is(path);
    require(is.good(), ErrorCode::IoError, "cannot read " + path);
    return read_probe_records(is);
}

}  // namespace isored
