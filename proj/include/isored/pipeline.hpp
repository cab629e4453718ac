#pragma once

// End-to-end identification: coarse eigenvalues, probe sweeps per stage,
// Newton refinement, stage fits, and validation against the full system.
// Long computations are checkpointed under the output directory with file
// names derived from a hash of the settings that produced them.

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "isored/fitting.hpp"
#include "isored/model.hpp"
#include "isored/probe.hpp"
#include "isored/spectral.hpp"
#include "isored/testbeds.hpp"

namespace isored {

enum class SystemKind { Simple, Burgers, Model };

struct SystemSpec {
    SystemKind kind = SystemKind::Simple;
    SimpleSystemConfig simple;
    BurgersConfig burgers;
    std::string model_file;  // kind == Model: a reduced model used as the system

    // Burgers only: 0 keeps the full profile as outputs, otherwise the leading
    // POD coefficients of a response to `pod_input` are the outputs.
    int pod_modes = 0;
    InputSignal pod_input = InputSignal(Chirp{0.7, 20.0});
    double pod_duration = 100.0;
    double pod_sample_dt = 0.01;
};

/// Unforced (or weakly excited) run used for the coarse eigenvalue estimate.
struct CoarseSpec {
    bool enabled = false;
    double duration = 20000.0;
    double sample_dt = 0.1;
    int window = 100;
    int pod_modes = 1;
    RateMap map = RateMap::Logarithm;
    double excitation = 0.0;       // random-hold amplitude; 0 relies on process noise
    double excitation_hold = 1.0;
};

struct PipelineConfig {
    SystemSpec system;
    int isostables = 1;
    int order = 1;
    std::vector<double> frequencies;
    std::vector<double> amplitudes;  // one per stage
    ProbeOptions probe;
    std::vector<cplx> eigenvalues;   // initial guess, or the final values when not refined
    std::vector<std::pair<int, int>> conjugate_pairs;
    CoarseSpec coarse;
    bool refine = true;
    std::vector<int> newton_outputs;  // zero-based; empty uses every output
    NewtonOptions newton;
    SolveOptions solve;
    std::uint64_t seed = 1;
    std::string out_dir = "run";

    /// Throws ConfigError naming the first bad field.
    void validate() const;
};

/// Parses the structured config (unknown keys are rejected). Output indices are
/// one-based in the document. Throws ConfigError.
[[nodiscard]] PipelineConfig parse_config(const nlohmann::json& document);
[[nodiscard]] PipelineConfig load_config(const std::string& path);
[[nodiscard]] nlohmann::json to_json(const PipelineConfig& config);

/// A system together with the POD basis its outputs are projected on, if any.
struct BuiltSystem {
    std::shared_ptr<const SystemUnderTest> sut;
    std::shared_ptr<const BurgersSystem> burgers;  // full PDE, when the system is Burgers
    std::optional<PodBasis> basis;
};

struct RunOptions {
    bool resume = false;  // reuse checkpoints found in out_dir
    std::function<void(const std::string&)> log;
};

/// Builds the configured system; computes (or, when resuming, reloads) the
/// output POD basis for Burgers.
[[nodiscard]] BuiltSystem build_system(const PipelineConfig& config, const RunOptions& options = {});

struct CoarseResult {
    std::vector<cplx> eigenvalues;
    std::vector<cplx> all_rates;
    double captured = 0.0;
};

[[nodiscard]] CoarseResult run_coarse(const PipelineConfig& config, const BuiltSystem& system,
                                      const RunOptions& options = {});

/// Probe records for one stage; checkpointed record by record so an
/// interrupted sweep resumes at the missing frequencies.
[[nodiscard]] std::vector<ProbeRecord> run_stage_probes(const PipelineConfig& config, const BuiltSystem& system,
                                                        int stage, const RunOptions& options = {},
                                                        std::size_t* simulated = nullptr);

/// Keeps only the listed outputs (zero-based) of each record.
[[nodiscard]] std::vector<ProbeRecord> select_outputs(std::vector<ProbeRecord> records,
                                                      const std::vector<int>& outputs);

struct IdentifyResult {
    ReducedModel model;
    nlohmann::json report;
    std::size_t simulations = 0;  // probe experiments actually run
};

/// Coarse estimate (when enabled), probes, refinement and fits 1..order.
/// Writes model.json and report.json into out_dir.
[[nodiscard]] IdentifyResult identify(const PipelineConfig& config, const RunOptions& options = {});

struct ValidationResult {
    Trajectory full;
    Trajectory reduced;
    std::vector<double> l2;  // per sample, only for Burgers systems
    double rms = 0.0;        // over all samples and outputs
    double max_abs = 0.0;
    double mean_l2 = 0.0;
    nlohmann::json report;
};

/// Simulates system and model under `u` from rest. Throws DimensionMismatch.
[[nodiscard]] ValidationResult validate_model(const BuiltSystem& system, const ReducedModel& model,
                                              const InputSignal& u, double t_end, double sample_dt);

/// Reduced-model outputs under `u`, starting from psi = 0.
[[nodiscard]] Trajectory predict(const ReducedModel& model, const InputSignal& u, double t_end, double sample_dt);

/// Paired CSV: t, then full_, reduced_ and err_ columns per output (and L2 when present).
void write_validation_csv(const std::string& path, const ValidationResult& result);

/// Hash used to name checkpoints.
[[nodiscard]] std::string content_key(const nlohmann::json& settings);

[[nodiscard]] nlohmann::json read_json(const std::string& path);
void write_json(const std::string& path, const nlohmann::json& document);

}  // namespace isored
