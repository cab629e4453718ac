#include "isored/signal.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "isored/error.hpp"

namespace isored {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void validate(const SampledTable& table) {
    require(!table.times.empty(), ErrorCode::InvalidArgument, "sampled input needs at least one sample");
    require(table.times.size() == table.values.size(), ErrorCode::InvalidArgument,
            "sampled input times/values length mismatch");
    for (std::size_t i = 1; i < table.times.size(); ++i) {
        require(table.times[i] > table.times[i - 1], ErrorCode::InvalidArgument,
                "sampled input times must be strictly increasing");
    }
}

double sample_table(const SampledTable& table, double t) {
    const auto& ts = table.times;
    if (t <= ts.front()) return table.values.front();
    if (t >= ts.back()) return table.values.back();
    const auto it = std::upper_bound(ts.begin(), ts.end(), t);
    const auto hi = static_cast<std::size_t>(it - ts.begin());
    const std::size_t lo = hi - 1;
    if (table.rule == Interpolation::ZeroOrderHold) return table.values[lo];
    const double w = (t - ts[lo]) / (ts[hi] - ts[lo]);
    return (1.0 - w) * table.values[lo] + w * table.values[hi];
}

}  // namespace

InputSignal::InputSignal(Variant v) : value_(std::move(v)) {
    if (const auto* table = std::get_if<SampledTable>(&value_)) validate(*table);
    if (const auto* chirp = std::get_if<Chirp>(&value_)) {
        require(chirp->b != 0.0, ErrorCode::InvalidArgument, "chirp b must be nonzero");
    }
}

InputSignal InputSignal::random_hold(double amplitude, double hold, double duration, std::uint64_t seed) {
    require(hold > 0.0 && duration > 0.0, ErrorCode::InvalidArgument, "random input needs positive hold and duration");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    SampledTable table;
    table.rule = Interpolation::ZeroOrderHold;
    const auto count = static_cast<std::size_t>(std::ceil(duration / hold)) + 1;
    table.times.reserve(count);
    table.values.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        table.times.push_back(static_cast<double>(i) * hold);
        table.values.push_back(amplitude * normal(rng));
    }
    return InputSignal(std::move(table));
}

double InputSignal::operator()(double t) const {
    return std::visit(overloaded{
                          [t](const Sinusoid& s) { return s.epsilon * std::sin(s.omega * t); },
                          [t](const SineSum& s) {
                              double total = 0.0;
                              for (const auto& term : s.terms) {
                                  total += term.amplitude * std::sin(term.omega * t + term.phase);
                              }
                              return total;
                          },
                          [t](const Chirp& c) { return c.amplitude * std::sin(t * t / c.b); },
                          [t](const SampledTable& table) { return sample_table(table, t); },
                      },
                      value_);
}

std::string InputSignal::describe() const {
    nlohmann::json j = *this;
    return j.dump();
}

void to_json(nlohmann::json& j, const InputSignal& u) {
    std::visit(overloaded{
                   [&j](const Sinusoid& s) {
                       j = {{"type", "sinusoid"}, {"epsilon", s.epsilon}, {"omega", s.omega}};
                   },
                   [&j](const SineSum& s) {
                       nlohmann::json terms = nlohmann::json::array();
                       for (const auto& t : s.terms) {
                           terms.push_back({{"amplitude", t.amplitude}, {"omega", t.omega}, {"phase", t.phase}});
                       }
                       j = {{"type", "sine_sum"}, {"terms", terms}};
                   },
                   [&j](const Chirp& c) { j = {{"type", "chirp"}, {"amplitude", c.amplitude}, {"b", c.b}}; },
                   [&j](const SampledTable& t) {
                       j = {{"type", "table"},
                            {"times", t.times},
                            {"values", t.values},
                            {"interpolation", t.rule == Interpolation::Linear ? "linear" : "zoh"}};
                   },
               },
               u.variant());
}

void from_json(const nlohmann::json& j, InputSignal& u) {
    const std::string type = j.at("type").get<std::string>();
    if (type == "sinusoid") {
        u = InputSignal::sinusoid(j.at("epsilon").get<double>(), j.at("omega").get<double>());
    } else if (type == "sine_sum") {
        SineSum sum;
        for (const auto& t : j.at("terms")) {
            sum.terms.push_back({t.at("amplitude").get<double>(), t.at("omega").get<double>(),
                                 t.value("phase", 0.0)});
        }
        u = InputSignal(std::move(sum));
    } else if (type == "chirp") {
        u = InputSignal(Chirp{j.at("amplitude").get<double>(), j.at("b").get<double>()});
    } else if (type == "table") {
        SampledTable table;
        table.times = j.at("times").get<std::vector<double>>();
        table.values = j.at("values").get<std::vector<double>>();
        table.rule = j.value("interpolation", "linear") == "zoh" ? Interpolation::ZeroOrderHold : Interpolation::Linear;
        u = InputSignal(std::move(table));
    } else if (type == "random_hold") {
        u = InputSignal::random_hold(j.at("amplitude").get<double>(), j.at("hold").get<double>(),
                                     j.at("duration").get<double>(), j.value("seed", std::uint64_t{1}));
    } else {
        throw Error(ErrorCode::ConfigError, "unknown input type '" + type + "'");
    }
}

}  // namespace isored
