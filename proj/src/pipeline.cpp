#include "isored/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "isored/error.hpp"
#include "isored/system.hpp"

namespace isored {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void say(const RunOptions& options, const std::string& text) {
    if (options.log) options.log(text);
}

// Object reader that rejects keys nobody asked for.
class Fields {
public:
    Fields(const json& object, std::string where) : object_(object), where_(std::move(where)) {
        if (!object_.is_object()) fail("expected an object");
    }

    template <typename T>
    void read(const char* key, T& target) {
        seen_.insert(key);
        const auto it = object_.find(key);
        if (it == object_.end()) return;
        try {
            target = it->template get<T>();
        } catch (const json::exception& e) {
            fail(std::string("field '") + key + "': " + e.what());
        }
    }

    [[nodiscard]] const json* child(const char* key) {
        seen_.insert(key);
        const auto it = object_.find(key);
        return it == object_.end() ? nullptr : &*it;
    }

    void finish() const {
        for (const auto& [key, value] : object_.items()) {
            if (!seen_.contains(key)) fail("unknown key '" + key + "'");
        }
    }

    [[noreturn]] void fail(const std::string& message) const {
        throw Error(ErrorCode::ConfigError, where_ + ": " + message);
    }

private:
    const json& object_;
    std::string where_;
    std::set<std::string> seen_;
};

json complex_json(cplx z) { return json::array({z.real(), z.imag()}); }

cplx parse_complex(const json& j, const std::string& where) {
    if (j.is_number()) return {j.get<double>(), 0.0};
    if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number()) {
        return {j[0].get<double>(), j[1].get<double>()};
    }
    throw Error(ErrorCode::ConfigError, where + ": expected a number or [re, im]");
}

std::string kind_name(SystemKind kind) {
    switch (kind) {
        case SystemKind::Simple: return "simple";
        case SystemKind::Burgers: return "burgers";
        case SystemKind::Model: return "model";
    }
    return "simple";
}

void config_require(bool condition, const std::string& message) {
    require(condition, ErrorCode::ConfigError, message);
}

json system_json(const SystemSpec& s) {
    json j{{"kind", kind_name(s.kind)}};
    switch (s.kind) {
        case SystemKind::Simple:
            j["mu"] = s.simple.mu;
            j["lambda"] = s.simple.lambda;
            j["noise"] = s.simple.noise;
            j["dt"] = s.simple.dt;
            break;
        case SystemKind::Burgers:
            j["reynolds"] = s.burgers.reynolds;
            j["grid_points"] = s.burgers.grid_points;
            j["left_value"] = s.burgers.left_value;
            j["right_value"] = s.burgers.right_value;
            j["dt"] = s.burgers.dt;
            j["advection"] = s.burgers.advection == Advection::Upwind ? "upwind" : "central";
            j["steady_horizon"] = s.burgers.steady_horizon;
            j["pod_modes"] = s.pod_modes;
            j["pod_input"] = s.pod_input;
            j["pod_duration"] = s.pod_duration;
            j["pod_sample_dt"] = s.pod_sample_dt;
            break;
        case SystemKind::Model: j["model_file"] = s.model_file; break;
    }
    return j;
}

json probe_json(const ProbeOptions& p) {
    return {{"settle_cycles", p.settle_cycles},   {"slow_rate", p.slow_rate},
            {"settle_time_constants", p.settle_time_constants},
            {"avg_cycles", p.avg_cycles},         {"samples_per_cycle", p.samples_per_cycle},
            {"j_max", p.j_max},                   {"settle_tolerance", p.settle_tolerance},
            {"check_settled", p.check_settled},   {"workers", p.workers}};
}

// What a checkpoint depends on: the system (with model contents when it is a file).
json system_identity(const PipelineConfig& config) {
    json j = system_json(config.system);
    if (config.system.kind == SystemKind::Model) j["model"] = read_json(config.system.model_file);
    if (config.system.kind == SystemKind::Simple && config.system.simple.noise > 0.0) j["seed"] = config.seed;
    return j;
}

json pod_to_json(const PodBasis& basis) {
    json modes = json::array();
    for (Eigen::Index c = 0; c < basis.modes.cols(); ++c) {
        modes.push_back(std::vector<double>(basis.modes.col(c).data(), basis.modes.col(c).data() + basis.modes.rows()));
    }
    return {{"modes", modes},
            {"energies", std::vector<double>(basis.energies.data(), basis.energies.data() + basis.energies.size())},
            {"captured", basis.captured}};
}

PodBasis pod_from_json(const json& j) {
    PodBasis basis;
    const auto& modes = j.at("modes");
    require(!modes.empty(), ErrorCode::IoError, "POD checkpoint has no modes");
    const auto rows = static_cast<Eigen::Index>(modes[0].size());
    basis.modes.resize(rows, static_cast<Eigen::Index>(modes.size()));
    for (std::size_t c = 0; c < modes.size(); ++c) {
        const auto col = modes[c].get<std::vector<double>>();
        require(static_cast<Eigen::Index>(col.size()) == rows, ErrorCode::IoError, "ragged POD checkpoint");
        basis.modes.col(static_cast<Eigen::Index>(c)) = Eigen::Map<const Eigen::VectorXd>(col.data(), rows);
    }
    const auto e = j.at("energies").get<std::vector<double>>();
    basis.energies = Eigen::Map<const Eigen::VectorXd>(e.data(), static_cast<Eigen::Index>(e.size()));
    basis.captured = j.at("captured").get<double>();
    return basis;
}

ProbeOptions effective_probe(const PipelineConfig& config, const std::vector<cplx>& eigenvalues) {
    ProbeOptions p = config.probe;
    if (p.settle_cycles == 0 && p.slow_rate == 0.0) {
        double slow = 0.0;
        for (const auto& lam : eigenvalues) {
            const double r = std::abs(lam.real());
            if (r > 0.0 && (slow == 0.0 || r < slow)) slow = r;
        }
        p.slow_rate = slow;
    }
    return p;
}

std::string checkpoint(const PipelineConfig& config, const std::string& name) {
    return (fs::path(config.out_dir) / name).string();
}

std::vector<double> row_of(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

std::string content_key(const json& settings) {
    char buffer[17];
    std::snprintf(buffer, sizeof buffer, "%016llx", static_cast<unsigned long long>(fnv1a(settings.dump())));
    return buffer;
}

json read_json(const std::string& path) {
    std::ifstream is(path);
    require(is.good(), ErrorCode::IoError, "cannot open " + path);
    try {
        return json::parse(is);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::IoError, path + ": " + e.what());
    }
}

void write_json(const std::string& path, const json& document) {
    const fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    const std::string temp = path + ".tmp";
    {
        std::ofstream os(temp);
        require(os.good(), ErrorCode::IoError, "cannot write " + path);
        os << document.dump(2) << '\n';
    }
    fs::rename(temp, target);
}

// ---------------------------------------------------------------------------
// Config

void PipelineConfig::validate() const {
    config_require(isostables >= 1, "isostables must be >= 1");
    config_require(order >= 1, "order must be >= 1");
    config_require(!frequencies.empty(), "frequencies must not be empty");
    std::set<double> seen;
    for (double w : frequencies) {
        config_require(w > 0.0 && std::isfinite(w), "frequencies must be positive");
        config_require(seen.insert(w).second, "duplicate frequency " + std::to_string(w));
    }
    config_require(static_cast<int>(amplitudes.size()) == order,
                   "amplitudes needs one entry per stage (" + std::to_string(order) + ")");
    for (double e : amplitudes) config_require(e > 0.0 && std::isfinite(e), "amplitudes must be positive");
    config_require(probe.j_max >= order, "probe.j_max must be >= order");
    config_require(probe.avg_cycles >= 1, "probe.avg_cycles must be >= 1");
    config_require(probe.samples_per_cycle >= 64, "probe.samples_per_cycle must be >= 64");
    config_require(probe.settle_cycles >= 0 && probe.slow_rate >= 0.0, "probe settle settings must be non-negative");
    config_require(probe.workers >= 0, "probe.workers must be >= 0");

    if (coarse.enabled) {
        config_require(coarse.window >= 1 && coarse.sample_dt > 0.0 && coarse.duration > 0.0,
                       "coarse window, sample_dt and duration must be positive");
        config_require(coarse.pod_modes >= isostables, "coarse.pod_modes must be >= isostables");
        config_require(coarse.excitation >= 0.0 && coarse.excitation_hold > 0.0, "bad coarse excitation");
        const double samples = coarse.duration / coarse.sample_dt + 1.0;
        config_require(samples >= static_cast<double>(coarse.window + 1) * coarse.window,
                       "coarse run too short for the window");
        config_require(eigenvalues.empty() || static_cast<int>(eigenvalues.size()) == isostables,
                       "eigenvalues must list one value per isostable");
    } else {
        config_require(static_cast<int>(eigenvalues.size()) == isostables,
                       "eigenvalues must list one value per isostable when the coarse step is disabled");
    }
    for (const auto& lam : eigenvalues) config_require(lam.real() < 0.0, "eigenvalue estimates must be stable");
    for (const auto& [a, b] : conjugate_pairs) {
        config_require(a >= 0 && b >= 0 && a < isostables && b < isostables && a != b,
                       "conjugate pair indices out of range");
    }
    if (probe.settle_cycles == 0 && probe.slow_rate == 0.0) {
        config_require(coarse.enabled || !eigenvalues.empty(),
                       "probe settling needs settle_cycles, slow_rate or eigenvalue estimates");
    }
    for (int m : newton_outputs) config_require(m >= 0, "newton outputs are one-based");
    config_require(newton.max_iterations >= 1 && newton.tolerance > 0.0, "bad newton settings");
    config_require(solve.condition_cap > 1.0 && solve.rank_tolerance > 0.0 && solve.rank_tolerance < 1.0,
                   "bad solve settings");
    config_require(!out_dir.empty(), "out_dir must not be empty");

    switch (system.kind) {
        case SystemKind::Simple: {
            auto s = system.simple;
            try {
                s.validate();
            } catch (const Error& e) {
                throw Error(ErrorCode::ConfigError, std::string("system: ") + e.what());
            }
            break;
        }
        case SystemKind::Burgers:
            try {
                system.burgers.validate();
            } catch (const Error& e) {
                throw Error(ErrorCode::ConfigError, std::string("system: ") + e.what());
            }
            config_require(system.pod_modes >= 0 && system.pod_modes <= system.burgers.grid_points,
                           "system.pod_modes out of range");
            if (system.pod_modes > 0) {
                config_require(system.pod_duration > 0.0 && system.pod_sample_dt > 0.0, "bad POD run settings");
            }
            break;
        case SystemKind::Model:
            config_require(!system.model_file.empty(), "system.model_file is required");
            config_require(fs::exists(system.model_file), "model file not found: " + system.model_file);
            break;
    }
}

PipelineConfig parse_config(const json& document) {
    PipelineConfig c;
    Fields top(document, "config");

    if (const json* sys = top.child("system")) {
        Fields f(*sys, "system");
        std::string kind = "simple";
        f.read("kind", kind);
        if (kind == "simple") {
            c.system.kind = SystemKind::Simple;
            f.read("mu", c.system.simple.mu);
            f.read("lambda", c.system.simple.lambda);
            f.read("noise", c.system.simple.noise);
            f.read("dt", c.system.simple.dt);
        } else if (kind == "burgers") {
            c.system.kind = SystemKind::Burgers;
            f.read("reynolds", c.system.burgers.reynolds);
            f.read("grid_points", c.system.burgers.grid_points);
            f.read("left_value", c.system.burgers.left_value);
            f.read("right_value", c.system.burgers.right_value);
            f.read("dt", c.system.burgers.dt);
            f.read("steady_horizon", c.system.burgers.steady_horizon);
            std::string advection = "central";
            f.read("advection", advection);
            if (advection == "upwind") {
                c.system.burgers.advection = Advection::Upwind;
            } else if (advection != "central") {
                f.fail("advection must be 'central' or 'upwind'");
            }
            f.read("pod_modes", c.system.pod_modes);
            if (const json* input = f.child("pod_input")) {
                try {
                    c.system.pod_input = input->get<InputSignal>();
                } catch (const std::exception& e) {
                    f.fail(std::string("pod_input: ") + e.what());
                }
            }
            f.read("pod_duration", c.system.pod_duration);
            f.read("pod_sample_dt", c.system.pod_sample_dt);
        } else if (kind == "model") {
            c.system.kind = SystemKind::Model;
            f.read("model_file", c.system.model_file);
        } else {
            f.fail("kind must be 'simple', 'burgers' or 'model'");
        }
        f.finish();
    }

    top.read("isostables", c.isostables);
    top.read("order", c.order);
    top.read("frequencies", c.frequencies);
    top.read("amplitudes", c.amplitudes);
    c.probe.j_max = 0;
    if (const json* p = top.child("probe")) {
        Fields f(*p, "probe");
        f.read("settle_cycles", c.probe.settle_cycles);
        f.read("slow_rate", c.probe.slow_rate);
        f.read("settle_time_constants", c.probe.settle_time_constants);
        f.read("avg_cycles", c.probe.avg_cycles);
        f.read("samples_per_cycle", c.probe.samples_per_cycle);
        f.read("j_max", c.probe.j_max);
        f.read("settle_tolerance", c.probe.settle_tolerance);
        f.read("check_settled", c.probe.check_settled);
        f.read("workers", c.probe.workers);
        f.finish();
    }
    if (c.probe.j_max == 0) c.probe.j_max = std::max(1, c.order);

    if (const json* eig = top.child("eigenvalues")) {
        if (!eig->is_array()) top.fail("eigenvalues must be an array");
        for (const auto& e : *eig) c.eigenvalues.push_back(parse_complex(e, "eigenvalues"));
    }
    if (const json* pairs = top.child("conjugate_pairs")) {
        try {
            for (const auto& p : pairs->get<std::vector<std::array<int, 2>>>()) c.conjugate_pairs.emplace_back(p[0] - 1, p[1] - 1);
        } catch (const json::exception& e) {
            top.fail(std::string("conjugate_pairs: ") + e.what());
        }
    }
    if (const json* co = top.child("coarse")) {
        Fields f(*co, "coarse");
        f.read("enabled", c.coarse.enabled);
        f.read("duration", c.coarse.duration);
        f.read("sample_dt", c.coarse.sample_dt);
        f.read("window", c.coarse.window);
        f.read("pod_modes", c.coarse.pod_modes);
        f.read("excitation", c.coarse.excitation);
        f.read("excitation_hold", c.coarse.excitation_hold);
        std::string map = "log";
        f.read("rate_map", map);
        if (map == "literal") {
            c.coarse.map = RateMap::Literal;
        } else if (map != "log") {
            f.fail("rate_map must be 'log' or 'literal'");
        }
        f.finish();
    }
    top.read("refine", c.refine);
    if (const json* nw = top.child("newton")) {
        Fields f(*nw, "newton");
        std::vector<int> outputs;
        f.read("outputs", outputs);
        for (int m : outputs) {
            if (m < 1) f.fail("outputs are one-based");
            c.newton_outputs.push_back(m - 1);
        }
        f.read("max_iterations", c.newton.max_iterations);
        f.read("tolerance", c.newton.tolerance);
        f.read("max_halvings", c.newton.max_halvings);
        f.read("project_coefficients", c.newton.project_coefficients);
        f.finish();
    }
    if (const json* sv = top.child("solve")) {
        Fields f(*sv, "solve");
        f.read("condition_cap", c.solve.condition_cap);
        f.read("rank_tolerance", c.solve.rank_tolerance);
        f.read("require_full_rank", c.solve.require_full_rank);
        f.finish();
    }
    top.read("seed", c.seed);
    top.read("out_dir", c.out_dir);
    top.finish();
    c.system.simple.seed = c.seed;
    return c;
}

PipelineConfig load_config(const std::string& path) {
    json doc;
    try {
        doc = read_json(path);
    } catch (const Error& e) {
        throw Error(ErrorCode::ConfigError, e.what());
    }
    return parse_config(doc);
}

json to_json(const PipelineConfig& c) {
    json j;
    j["system"] = system_json(c.system);
    j["isostables"] = c.isostables;
    j["order"] = c.order;
    j["frequencies"] = c.frequencies;
    j["amplitudes"] = c.amplitudes;
    j["probe"] = probe_json(c.probe);
    j["eigenvalues"] = json::array();
    for (const auto& lam : c.eigenvalues) j["eigenvalues"].push_back(complex_json(lam));
    j["conjugate_pairs"] = json::array();
    for (const auto& [a, b] : c.conjugate_pairs) j["conjugate_pairs"].push_back({a + 1, b + 1});
    j["coarse"] = {{"enabled", c.coarse.enabled},     {"duration", c.coarse.duration},
                   {"sample_dt", c.coarse.sample_dt}, {"window", c.coarse.window},
                   {"pod_modes", c.coarse.pod_modes}, {"rate_map", c.coarse.map == RateMap::Literal ? "literal" : "log"},
                   {"excitation", c.coarse.excitation}, {"excitation_hold", c.coarse.excitation_hold}};
    j["refine"] = c.refine;
    std::vector<int> outputs;
    for (int m : c.newton_outputs) outputs.push_back(m + 1);
    j["newton"] = {{"outputs", outputs},
                   {"max_iterations", c.newton.max_iterations},
                   {"tolerance", c.newton.tolerance},
                   {"max_halvings", c.newton.max_halvings},
                   {"project_coefficients", c.newton.project_coefficients}};
    j["solve"] = {{"condition_cap", c.solve.condition_cap},
                  {"rank_tolerance", c.solve.rank_tolerance},
                  {"require_full_rank", c.solve.require_full_rank}};
    j["seed"] = c.seed;
    j["out_dir"] = c.out_dir;
    return j;
}

// ---------------------------------------------------------------------------
// Steps

BuiltSystem build_system(const PipelineConfig& config, const RunOptions& options) {
    BuiltSystem built;
    switch (config.system.kind) {
        case SystemKind::Simple: {
            auto sc = config.system.simple;
            sc.seed = config.seed;
            built.sut = std::make_shared<SimpleSystem>(sc);
            break;
        }
        case SystemKind::Model:
            built.sut = std::make_shared<ReducedModelSystem>(deserialize(read_json(config.system.model_file)));
            break;
        case SystemKind::Burgers: {
            say(options, "computing the steady Burgers profile");
            built.burgers = std::make_shared<BurgersSystem>(config.system.burgers);
            built.sut = built.burgers;
            if (config.system.pod_modes == 0) break;
            const std::string path =
                checkpoint(config, "pod-" + content_key(system_json(config.system)) + ".json");
            PodBasis basis;
            if (options.resume && fs::exists(path)) {
                say(options, "reusing " + path);
                basis = pod_from_json(read_json(path));
            } else {
                say(options, "POD of the response to " + config.system.pod_input.describe());
                const auto traj =
                    built.burgers->run(config.system.pod_input, config.system.pod_duration, config.system.pod_sample_dt);
                const auto snaps = stack_snapshots(traj.y, 1, config.system.pod_sample_dt, built.burgers->baseline());
                basis = pod(snaps.y, PodSelection{config.system.pod_modes, 0.0});
                write_json(path, pod_to_json(basis));
            }
            built.basis = basis;
            built.sut = std::make_shared<PodOutputSystem>(built.burgers, basis.modes);
            break;
        }
    }
    return built;
}

CoarseResult run_coarse(const PipelineConfig& config, const BuiltSystem& system, const RunOptions& options) {
    const json settings{{"system", system_identity(config)},
                        {"duration", config.coarse.duration},
                        {"sample_dt", config.coarse.sample_dt},
                        {"window", config.coarse.window},
                        {"pod_modes", config.coarse.pod_modes},
                        {"excitation", config.coarse.excitation},
                        {"hold", config.coarse.excitation_hold},
                        {"seed", config.seed},
                        {"outputs", system.sut->outputs()}};
    const std::string path = checkpoint(config, "coarse-" + content_key(settings) + ".json");
    json doc;
    if (options.resume && fs::exists(path)) {
        say(options, "reusing " + path);
        doc = read_json(path);
    } else {
        const InputSignal u = config.coarse.excitation > 0.0
                                  ? InputSignal::random_hold(config.coarse.excitation, config.coarse.excitation_hold,
                                                             config.coarse.duration, config.seed)
                                  : InputSignal::zero();
        say(options, "unforced run of " + std::to_string(config.coarse.duration) + " time units");
        const auto traj = system.sut->run(u, config.coarse.duration, config.coarse.sample_dt);
        const auto snaps = stack_snapshots(traj.y, config.coarse.window, config.coarse.sample_dt, system.sut->baseline());
        const auto basis = pod(snaps.y, PodSelection{config.coarse.pod_modes, 0.0});
        basis.check();
        const auto est = coarse_eigenvalues(basis, config.coarse.window, config.coarse.sample_dt, config.isostables,
                                            config.coarse.map);
        doc["eigenvalues"] = json::array();
        for (const auto& lam : est.eigenvalues) doc["eigenvalues"].push_back(complex_json(lam));
        doc["all_rates"] = json::array();
        for (const auto& lam : est.all_rates) doc["all_rates"].push_back(complex_json(lam));
        doc["captured"] = basis.captured;
        write_json(path, doc);
    }
    CoarseResult r;
    for (const auto& e : doc.at("eigenvalues")) r.eigenvalues.push_back(parse_complex(e, path));
    for (const auto& e : doc.at("all_rates")) r.all_rates.push_back(parse_complex(e, path));
    r.captured = doc.at("captured").get<double>();
    return r;
}

std::vector<ProbeRecord> run_stage_probes(const PipelineConfig& config, const BuiltSystem& system, int stage,
                                          const RunOptions& options, std::size_t* simulated) {
    require(stage >= 1 && stage <= config.order, ErrorCode::InvalidArgument, "stage out of range");
    const ProbeOptions probe = effective_probe(config, config.eigenvalues);
    json probe_settings = probe_json(probe);
    probe_settings.erase("workers");
    const double eps = config.amplitudes[static_cast<std::size_t>(stage - 1)];
    const json settings{{"system", system_identity(config)},
                        {"probe", probe_settings},
                        {"epsilon", eps},
                        {"frequencies", config.frequencies}};
    const std::string path =
        checkpoint(config, "probes-s" + std::to_string(stage) + "-" + content_key(settings) + ".jsonl");
    const std::string partial = path + ".partial";

    std::map<double, ProbeRecord> have;
    if (options.resume) {
        for (const auto& file : {path, partial}) {
            if (!fs::exists(file)) continue;
            try {
                for (auto& r : read_probe_records(file)) have.emplace(r.omega, std::move(r));
            } catch (const Error&) {
                // A torn partial file is recomputed.
            }
        }
    }
    std::vector<double> todo;
    for (double w : config.frequencies) {
        if (!have.contains(w)) todo.push_back(w);
    }
    if (todo.empty()) {
        say(options, "reusing " + path);
    } else {
        say(options, "stage " + std::to_string(stage) + ": probing " + std::to_string(todo.size()) +
                         " frequencies at eps = " + std::to_string(eps));
        fs::create_directories(config.out_dir);
        std::ofstream log(partial, have.empty() ? std::ios::trunc : std::ios::app);
        require(log.good(), ErrorCode::IoError, "cannot write " + partial);
        for (const auto& [w, r] : have) log << to_json(r).dump() << '\n';
        auto fresh = probe_sweep(*system.sut, todo, eps, probe, [&](const ProbeRecord& r) {
            log << to_json(r).dump() << '\n';
            log.flush();
        });
        if (simulated != nullptr) *simulated += fresh.size();
        for (auto& r : fresh) have.emplace(r.omega, std::move(r));
    }
    std::vector<ProbeRecord> records;
    for (double w : config.frequencies) records.push_back(have.at(w));
    write_probe_records(path, records);
    if (fs::exists(partial)) fs::remove(partial);
    return records;
}

std::vector<ProbeRecord> select_outputs(std::vector<ProbeRecord> records, const std::vector<int>& outputs) {
    if (outputs.empty()) return records;
    for (auto& r : records) {
        ProbeRecord s = r;
        s.y0.clear();
        s.sin.clear();
        s.cos.clear();
        s.sin_var.clear();
        s.cos_var.clear();
        s.dc.clear();
        for (int m : outputs) {
            require(m >= 0 && static_cast<std::size_t>(m) < r.outputs(), ErrorCode::DimensionMismatch,
                    "output " + std::to_string(m + 1) + " does not exist");
            const auto k = static_cast<std::size_t>(m);
            s.y0.push_back(r.y0[k]);
            s.sin.push_back(r.sin[k]);
            s.cos.push_back(r.cos[k]);
            s.sin_var.push_back(r.sin_var[k]);
            s.cos_var.push_back(r.cos_var[k]);
            s.dc.push_back(r.dc[k]);
        }
        r = std::move(s);
    }
    return records;
}

IdentifyResult identify(const PipelineConfig& config, const RunOptions& options) {
    config.validate();
    fs::create_directories(config.out_dir);
    IdentifyResult result;
    json& report = result.report;
    report["config"] = to_json(config);

    const auto system = build_system(config, options);
    const auto outputs = static_cast<int>(system.sut->outputs());
    for (int m : config.newton_outputs) {
        config_require(m < outputs, "newton output " + std::to_string(m + 1) + " does not exist");
    }
    for (int s = 1; s <= config.order; ++s) {
        const long long rows =
            static_cast<long long>(config.frequencies.size()) * (s == 2 ? 3 : 2) * static_cast<long long>(outputs);
        const long long cols = stage_unknown_count(config.isostables, outputs, s);
        config_require(rows >= 2 * cols, "stage " + std::to_string(s) + " has " + std::to_string(rows) +
                                             " rows for " + std::to_string(cols) +
                                             " unknowns; add frequencies (need rows >= 2 unknowns)");
    }
    if (system.basis) report["pod"] = {{"modes", system.basis->size()}, {"captured", system.basis->captured}};

    std::vector<cplx> eigenvalues = config.eigenvalues;
    if (config.coarse.enabled) {
        const auto coarse = run_coarse(config, system, options);
        report["coarse"] = {{"captured", coarse.captured}, {"eigenvalues", json::array()}};
        for (const auto& lam : coarse.eigenvalues) report["coarse"]["eigenvalues"].push_back(complex_json(lam));
        if (eigenvalues.empty()) eigenvalues = coarse.eigenvalues;
        say(options, "coarse eigenvalues: " + report["coarse"]["eigenvalues"].dump());
    }

    PipelineConfig effective = config;
    effective.probe = effective_probe(config, eigenvalues);
    std::vector<std::vector<ProbeRecord>> records;
    for (int s = 1; s <= config.order; ++s) {
        records.push_back(run_stage_probes(effective, system, s, options, &result.simulations));
    }

    std::vector<std::pair<int, int>> pairs = config.conjugate_pairs;
    json history = json::array();
    if (config.refine) {
        FirstOrderModel start;
        start.eigenvalues = eigenvalues;
        start.conjugate_pairs = pairs;
        const auto newton = newton_refine(select_outputs(records[0], config.newton_outputs), start, config.newton);
        for (const auto& step : newton.history) {
            json row = json::array();
            for (const auto& lam : step) row.push_back(complex_json(lam));
            history.push_back(row);
        }
        report["newton"] = {{"iterations", newton.iterations},
                            {"initial_residual", newton.initial_residual},
                            {"residual", newton.residual},
                            {"residual_history", newton.residual_history},
                            {"eigenvalue_history", history}};
        eigenvalues = newton.model.eigenvalues;
        pairs = newton.model.conjugate_pairs;
        say(options, "refined eigenvalues after " + std::to_string(newton.iterations) + " iterations");
    }

    const auto base = ReducedModel::blank(eigenvalues, pairs, records[0].front().y0, config.order);
    const auto fit = fit_multi_output(base, records, config.order, config.solve);
    report["stages"] = json::array();
    for (const auto& st : fit.stages) report["stages"].push_back(to_json(st));
    report["eigenvalues"] = json::array();
    for (const auto& lam : fit.model.eigenvalues) report["eigenvalues"].push_back(complex_json(lam));

    result.model = fit.model;
    write_json(checkpoint(config, "model.json"), serialize(result.model));
    write_json(checkpoint(config, "report.json"), report);
    return result;
}

// ---------------------------------------------------------------------------
// Validation

Trajectory predict(const ReducedModel& model, const InputSignal& u, double t_end, double sample_dt) {
    auto traj = ReducedModelSystem(model).run(u, t_end, sample_dt);
    return traj;
}

ValidationResult validate_model(const BuiltSystem& system, const ReducedModel& model, const InputSignal& u,
                                double t_end, double sample_dt) {
    require(static_cast<std::size_t>(model.outputs()) == system.sut->outputs(), ErrorCode::DimensionMismatch,
            "model has " + std::to_string(model.outputs()) + " outputs, system has " +
                std::to_string(system.sut->outputs()));
    ValidationResult v;
    std::vector<Eigen::VectorXd> profiles;
    if (system.burgers) {
        const auto w = system.burgers->run(u, t_end, sample_dt);
        v.full.names = system.sut->output_names();
        v.full.times = w.times;
        const auto* pod = dynamic_cast<const PodOutputSystem*>(system.sut.get());
        for (const auto& row : w.y) {
            const Eigen::VectorXd wv = Eigen::Map<const Eigen::VectorXd>(row.data(), static_cast<Eigen::Index>(row.size()));
            profiles.push_back(wv);
            v.full.y.push_back(pod != nullptr ? row_of(pod->project(wv)) : row);
        }
    } else {
        v.full = system.sut->run(u, t_end, sample_dt);
    }
    v.reduced = predict(model, u, t_end, sample_dt);
    v.reduced.names = v.full.names;
    require(v.reduced.samples() == v.full.samples(), ErrorCode::DimensionMismatch, "sample counts differ");

    const std::size_t ny = v.full.outputs();
    std::vector<double> per_output(ny, 0.0);
    double sum = 0.0;
    for (std::size_t i = 0; i < v.full.samples(); ++i) {
        for (std::size_t m = 0; m < ny; ++m) {
            const double e = v.full.y[i][m] - v.reduced.y[i][m];
            per_output[m] += e * e;
            sum += e * e;
            v.max_abs = std::max(v.max_abs, std::abs(e));
        }
    }
    const auto n = static_cast<double>(v.full.samples());
    v.rms = std::sqrt(sum / (n * static_cast<double>(ny)));
    json outputs = json::array();
    for (std::size_t m = 0; m < ny; ++m) {
        outputs.push_back({{"name", v.full.names[m]}, {"rms", std::sqrt(per_output[m] / n)}});
    }

    if (!profiles.empty()) {
        const auto* pod = dynamic_cast<const PodOutputSystem*>(system.sut.get());
        double max_l2 = 0.0;
        for (std::size_t i = 0; i < profiles.size(); ++i) {
            const Eigen::VectorXd p =
                Eigen::Map<const Eigen::VectorXd>(v.reduced.y[i].data(), static_cast<Eigen::Index>(ny));
            const Eigen::VectorXd w_red = pod != nullptr ? pod->reconstruct(p) : p;
            v.l2.push_back(l2_error(w_red, profiles[i]));
            v.mean_l2 += v.l2.back();
            max_l2 = std::max(max_l2, v.l2.back());
        }
        v.mean_l2 /= static_cast<double>(profiles.size());
        v.report["l2"] = {{"mean", v.mean_l2}, {"max", max_l2}};
    }
    v.report["rms"] = v.rms;
    v.report["max_abs"] = v.max_abs;
    v.report["outputs"] = outputs;
    v.report["order"] = model.order;
    v.report["input"] = u;
    v.report["t_end"] = t_end;
    v.report["sample_dt"] = sample_dt;
    return v;
}

void write_validation_csv(const std::string& path, const ValidationResult& result) {
    const fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    std::ofstream os(path);
    require(os.good(), ErrorCode::IoError, "cannot write " + path);
    os.precision(12);
    os << "t";
    for (const auto& name : result.full.names) os << ",full_" << name;
    for (const auto& name : result.full.names) os << ",reduced_" << name;
    for (const auto& name : result.full.names) os << ",err_" << name;
    if (!result.l2.empty()) os << ",L2";
    os << '\n';
    for (std::size_t i = 0; i < result.full.samples(); ++i) {
        os << result.full.times[i];
        for (double y : result.full.y[i]) os << ',' << y;
        for (double y : result.reduced.y[i]) os << ',' << y;
        for (std::size_t m = 0; m < result.full.outputs(); ++m) os << ',' << std::abs(result.full.y[i][m] - result.reduced.y[i][m]);
        if (!result.l2.empty()) os << ',' << result.l2[i];
        os << '\n';
    }
}

}  // namespace isored
