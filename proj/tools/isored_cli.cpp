#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "isored/error.hpp"
#include "isored/oracle.hpp"
#include "isored/pipeline.hpp"

using namespace isored;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Common {
    std::string config;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    bool resume = false;
};

// JSON given inline or as @path.
json json_argument(const std::string& text) {
    if (!text.empty() && text.front() == '@') return read_json(text.substr(1));
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ConfigError, "cannot parse '" + text + "': " + e.what());
    }
}

InputSignal input_argument(const std::string& text) {
    try {
        return json_argument(text).get<InputSignal>();
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        throw Error(ErrorCode::ConfigError, std::string("bad input signal: ") + e.what());
    }
}

std::vector<cplx> eigen_argument(const std::string& text) {
    std::vector<cplx> out;
    for (const auto& e : json_argument(text)) {
        if (e.is_number()) {
            out.emplace_back(e.get<double>(), 0.0);
        } else {
            out.emplace_back(e.at(0).get<double>(), e.at(1).get<double>());
        }
    }
    return out;
}

json eigen_json(const std::vector<cplx>& values) {
    json j = json::array();
    for (const auto& v : values) j.push_back({v.real(), v.imag()});
    return j;
}

PipelineConfig load(const Common& common) {
    require(!common.config.empty(), ErrorCode::ConfigError, "--config is required");
    auto config = load_config(common.config);
    if (common.seed) {
        config.seed = *common.seed;
        config.system.simple.seed = *common.seed;
    }
    if (!common.out_dir.empty()) config.out_dir = common.out_dir;
    return config;
}

std::string out_path(const Common& common, const std::string& fallback_dir, const std::string& name) {
    const std::string dir = common.out_dir.empty() ? fallback_dir : common.out_dir;
    fs::create_directories(dir);
    return (fs::path(dir) / name).string();
}

RunOptions run_options(const Common& common) {
    return RunOptions{common.resume, [](const std::string& text) { std::cerr << "[isored] " << text << '\n'; }};
}

int exit_code(ErrorCode code) {
    switch (code) {
        case ErrorCode::ConfigError:
        case ErrorCode::InvalidArgument: return 2;
        case ErrorCode::IoError:
        case ErrorCode::SchemaVersionMismatch: return 3;
        default: return 4;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Isostable reduced models identified from input-output data"};
    app.require_subcommand(1);
    Common common;
    app.add_option("--out-dir", common.out_dir, "Directory for outputs and checkpoints");
    app.add_option("--seed", common.seed, "Override the configured seed");
    app.add_flag("--resume", common.resume, "Reuse checkpoints in the output directory");

    std::string input = R"({"type":"sine_sum","terms":[]})";
    double t_end = 100.0;
    double sample_dt = 0.1;
    std::string out_file;

    auto* simulate = app.add_subcommand("simulate", "Run the configured system and write a trajectory CSV");
    simulate->add_option("--config", common.config)->required();
    simulate->add_option("--input", input, "Input signal JSON (or @file)");
    simulate->add_option("--t-end", t_end);
    simulate->add_option("--dt", sample_dt, "Sample period");
    simulate->add_option("--out", out_file, "CSV path (default <out-dir>/trajectory.csv)");

    std::string csv;
    int pod_modes = 0;
    double energy = 0.0;
    int window = 1;
    int coarse_count = 0;
    bool literal = false;
    auto* pod_cmd = app.add_subcommand("pod", "POD of a trajectory CSV, optionally with coarse eigenvalues");
    pod_cmd->add_option("--csv", csv)->required();
    pod_cmd->add_option("--modes", pod_modes, "Number of modes");
    pod_cmd->add_option("--energy", energy, "Captured-energy target instead of a mode count");
    pod_cmd->add_option("--window", window, "Samples per snapshot window K");
    pod_cmd->add_option("--eigenvalues", coarse_count, "Estimate this many slow eigenvalues");
    pod_cmd->add_flag("--literal-rates", literal, "Map propagator eigenvalues without the logarithm");

    int stage = 1;
    auto* probe = app.add_subcommand("probe", "Probe sweep for one stage of the configured pipeline");
    probe->add_option("--config", common.config)->required();
    probe->add_option("--stage", stage)->required();

    std::vector<std::string> probe_files;
    std::string eigenvalues;
    std::vector<int> outputs;
    auto* refine = app.add_subcommand("refine-eigs", "Newton refinement of eigenvalues on first-order probes");
    refine->add_option("--probes", probe_files, "Stage-1 probe records (JSON lines)")->required()->expected(1);
    refine->add_option("--initial", eigenvalues, "Initial eigenvalues, e.g. [-1,-2,-3]")->required();
    refine->add_option("--outputs", outputs, "One-based outputs used in the residual");

    int order = 1;
    std::string pairs;
    auto* fit = app.add_subcommand("fit", "Stage fits from probe records (one file per stage)");
    fit->add_option("--probes", probe_files, "Probe records for stages 1..J in order")->required();
    fit->add_option("--eigenvalues", eigenvalues)->required();
    fit->add_option("--pairs", pairs, "Conjugate pairs, one-based, e.g. [[1,2]]");
    fit->add_option("--out", out_file, "Model path (default <out-dir>/model.json)");

    std::string model_file;
    auto* predict_cmd = app.add_subcommand("predict", "Reduced-model outputs under an input");
    predict_cmd->add_option("--model", model_file)->required();
    predict_cmd->add_option("--input", input);
    predict_cmd->add_option("--t-end", t_end);
    predict_cmd->add_option("--dt", sample_dt);
    predict_cmd->add_option("--out", out_file);

    int truncate = 0;
    auto* validate = app.add_subcommand("validate", "Compare a model with the configured system");
    validate->add_option("--config", common.config)->required();
    validate->add_option("--model", model_file)->required();
    validate->add_option("--order", truncate, "Truncate the model to this order first");
    validate->add_option("--input", input);
    validate->add_option("--t-end", t_end);
    validate->add_option("--dt", sample_dt);

    double mu = -0.05;
    double lambda = -1.0;
    int isostables = 1;
    auto* oracle = app.add_subcommand("oracle", "Model of the two-state example from its equations");
    oracle->add_option("--mu", mu);
    oracle->add_option("--lambda", lambda);
    oracle->add_option("--isostables", isostables);
    oracle->add_option("--order", order);
    oracle->add_option("--out", out_file);

    auto* identify_cmd = app.add_subcommand("identify", "Run the whole identification pipeline");
    identify_cmd->add_option("--config", common.config)->required();

    for (auto* sub : app.get_subcommands({})) {
        sub->add_option("--out-dir", common.out_dir);
        sub->add_option("--seed", common.seed);
        sub->add_flag("--resume", common.resume);
    }

    CLI11_PARSE(app, argc, argv);

    try {
        if (simulate->parsed()) {
            const auto config = load(common);
            const auto system = build_system(config, run_options(common));
            const auto traj = system.sut->run(input_argument(input), t_end, sample_dt);
            const std::string path = out_file.empty() ? out_path(common, config.out_dir, "trajectory.csv") : out_file;
            write_csv(path, traj);
            std::cout << json{{"trajectory", path}, {"samples", traj.samples()}}.dump() << '\n';
        } else if (pod_cmd->parsed()) {
            require((pod_modes > 0) != (energy > 0.0), ErrorCode::ConfigError, "give exactly one of --modes, --energy");
            const auto traj = read_csv(csv);
            require(traj.samples() >= 2, ErrorCode::TooFewSamples, "trajectory has fewer than two samples");
            const double dt = traj.times[1] - traj.times[0];
            std::vector<double> y0(traj.outputs(), 0.0);
            const auto snaps = stack_snapshots(traj.y, window, dt, y0);
            const auto basis = pod(snaps.y, PodSelection{pod_modes, energy});
            json report{{"modes", basis.size()}, {"captured", basis.captured}, {"window", window}, {"dt", dt}};
            if (coarse_count > 0) {
                const auto est = coarse_eigenvalues(basis, window, dt, coarse_count,
                                                    literal ? RateMap::Literal : RateMap::Logarithm);
                report["eigenvalues"] = eigen_json(est.eigenvalues);
                report["all_rates"] = eigen_json(est.all_rates);
            }
            const std::string dir = common.out_dir.empty() ? "." : common.out_dir;
            Trajectory modes;
            for (int j = 0; j < basis.size(); ++j) modes.names.push_back("phi" + std::to_string(j + 1));
            for (Eigen::Index r = 0; r < basis.modes.rows(); ++r) {
                modes.times.push_back(static_cast<double>(r));
                modes.y.emplace_back(basis.modes.cols());
                for (Eigen::Index c = 0; c < basis.modes.cols(); ++c) modes.y.back()[static_cast<std::size_t>(c)] = basis.modes(r, c);
            }
            write_csv(out_path(common, dir, "pod_modes.csv"), modes);
            Trajectory coeff;
            for (int j = 0; j < basis.size(); ++j) coeff.names.push_back("mu" + std::to_string(j + 1));
            for (Eigen::Index c = 0; c < basis.coefficients.cols(); ++c) {
                coeff.times.push_back(static_cast<double>(c) * window * dt);
                coeff.y.emplace_back(basis.coefficients.rows());
                for (Eigen::Index r = 0; r < basis.coefficients.rows(); ++r) coeff.y.back()[static_cast<std::size_t>(r)] = basis.coefficients(r, c);
            }
            write_csv(out_path(common, dir, "pod_coefficients.csv"), coeff);
            write_json(out_path(common, dir, "pod.json"), report);
            std::cout << report.dump() << '\n';
        } else if (probe->parsed()) {
            const auto config = load(common);
            config.validate();
            require(stage >= 1 && stage <= config.order, ErrorCode::ConfigError, "--stage out of range");
            const auto system = build_system(config, run_options(common));
            std::size_t simulated = 0;
            const auto records = run_stage_probes(config, system, stage, run_options(common), &simulated);
            std::cout << json{{"stage", stage}, {"records", records.size()}, {"simulated", simulated}}.dump() << '\n';
        } else if (refine->parsed()) {
            FirstOrderModel start;
            start.eigenvalues = eigen_argument(eigenvalues);
            std::vector<int> zero_based;
            for (int m : outputs) zero_based.push_back(m - 1);
            const auto records = select_outputs(read_probe_records(probe_files.front()), zero_based);
            const auto result = newton_refine(records, start);
            json history = json::array();
            for (const auto& h : result.history) history.push_back(eigen_json(h));
            const json report{{"eigenvalues", eigen_json(result.model.eigenvalues)},
                              {"iterations", result.iterations},
                              {"initial_residual", result.initial_residual},
                              {"residual", result.residual},
                              {"eigenvalue_history", history},
                              {"residual_history", result.residual_history}};
            if (!common.out_dir.empty()) write_json(out_path(common, ".", "eigenvalues.json"), report);
            std::cout << report.dump(2) << '\n';
        } else if (fit->parsed()) {
            std::vector<std::vector<ProbeRecord>> records;
            for (const auto& f : probe_files) records.push_back(read_probe_records(f));
            require(!records.empty() && !records.front().empty(), ErrorCode::ConfigError, "no probe records");
            std::vector<std::pair<int, int>> pair_list;
            if (!pairs.empty()) {
                for (const auto& p : json_argument(pairs)) pair_list.emplace_back(p.at(0).get<int>() - 1, p.at(1).get<int>() - 1);
            }
            const auto base = ReducedModel::blank(eigen_argument(eigenvalues), pair_list, records.front().front().y0,
                                                  static_cast<int>(records.size()));
            const auto result = fit_multi_output(base, records, static_cast<int>(records.size()));
            const std::string path = out_file.empty() ? out_path(common, ".", "model.json") : out_file;
            write_json(path, serialize(result.model));
            json stages = json::array();
            for (const auto& st : result.stages) stages.push_back(to_json(st));
            std::cout << json{{"model", path}, {"stages", stages}}.dump(2) << '\n';
        } else if (predict_cmd->parsed()) {
            const auto model = deserialize(read_json(model_file));
            const auto traj = predict(model, input_argument(input), t_end, sample_dt);
            const std::string path = out_file.empty() ? out_path(common, ".", "prediction.csv") : out_file;
            write_csv(path, traj);
            std::cout << json{{"prediction", path}, {"samples", traj.samples()}}.dump() << '\n';
        } else if (validate->parsed()) {
            const auto config = load(common);
            config.validate();
            auto model = deserialize(read_json(model_file));
            if (truncate > 0) model = model.truncated(truncate);
            const auto system = build_system(config, run_options(common));
            const auto result = validate_model(system, model, input_argument(input), t_end, sample_dt);
            const std::string stem = "validation-order" + std::to_string(model.order);
            write_validation_csv(out_path(common, config.out_dir, stem + ".csv"), result);
            write_json(out_path(common, config.out_dir, stem + ".json"), result.report);
            std::cout << result.report.dump(2) << '\n';
        } else if (oracle->parsed()) {
            const auto model = oracle_model(simple_known_system(mu, lambda), isostables, order);
            const std::string path = out_file.empty() ? out_path(common, ".", "oracle_model.json") : out_file;
            write_json(path, serialize(model));
            std::cout << json{{"model", path}, {"eigenvalues", eigen_json(model.eigenvalues)}}.dump() << '\n';
        } else if (identify_cmd->parsed()) {
            const auto config = load(common);
            const auto result = identify(config, run_options(common));
            std::cout << json{{"model", (fs::path(config.out_dir) / "model.json").string()},
                              {"eigenvalues", result.report["eigenvalues"]},
                              {"simulations", result.simulations}}
                             .dump()
                      << '\n';
        }
    } catch (const Error& e) {
        std::cerr << json{{"error", std::string(to_string(e.code()))}, {"message", e.what()}}.dump() << '\n';
        return exit_code(e.code());
    } catch (const std::exception& e) {
        std::cerr << json{{"error", "Internal"}, {"message", e.what()}}.dump() << '\n';
        return 1;
    }
    return 0;
}
