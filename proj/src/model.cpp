#include "isored/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "isored/error.hpp"

namespace isored {

void ExpansionTensor::set(const MultiIndex& index, cplx value) {
    require(index.order() <= order_cap_, ErrorCode::InvalidArgument,
            "entry " + index.to_string() + " exceeds order cap " + std::to_string(order_cap_));
    if (value == cplx{}) {
        entries_.erase(index);
    } else {
        entries_[index] = value;
    }
}

cplx ExpansionTensor::get(const MultiIndex& index) const {
    auto it = entries_.find(index);
    return it == entries_.end() ? cplx{} : it->second;
}

cplx ExpansionTensor::evaluate(std::span<const cplx> psi) const {
    cplx total{};
    for (const auto& [index, value] : entries_) {
        total += value * index.monomial(psi);
    }
    return total;
}

ExpansionTensor ExpansionTensor::truncated(int cap) const {
    ExpansionTensor out(std::min(cap, order_cap_));
    for (const auto& [index, value] : entries_) {
        if (index.order() <= cap) out.entries_.emplace(index, value);
    }
    return out;
}

// ---------------------------------------------------------------------------

ReducedModel ReducedModel::blank(std::vector<cplx> eigenvalues, std::vector<std::pair<int, int>> conjugate_pairs,
                                 std::vector<double> y0, int order) {
    require(order >= 1, ErrorCode::InvalidArgument, "model order must be >= 1");
    ReducedModel model;
    model.order = order;
    model.eigenvalues = std::move(eigenvalues);
    model.conjugate_pairs = std::move(conjugate_pairs);
    model.y0 = std::move(y0);
    for (int n = 0; n < model.isostables(); ++n) {
        ExpansionTensor t(order - 1);
        t.set(MultiIndex{}, 1.0);
        model.i_tensors.push_back(std::move(t));
    }
    model.g_tensors.assign(model.y0.size(), ExpansionTensor(order));
    return model;
}

ReducedModel ReducedModel::truncated(int new_order) const {
    require(new_order >= 1, ErrorCode::InvalidArgument, "model order must be >= 1");
    ReducedModel out = *this;
    out.order = new_order;
    for (auto& t : out.i_tensors) t = t.truncated(new_order - 1);
    for (auto& t : out.g_tensors) t = t.truncated(new_order);
    return out;
}

double ReducedModel::conjugate_symmetry_defect() const {
    const auto perm = conjugation_permutation(isostables(), conjugate_pairs);
    double defect = 0.0;
    auto check = [&](const ExpansionTensor& source, const ExpansionTensor& image) {
        std::set<MultiIndex> keys;
        for (const auto& [mi, v] : source.entries()) keys.insert(mi);
        for (const auto& mi : keys) {
            const cplx mirrored = image.get(mi.relabeled(perm));
            defect = std::max(defect, std::abs(mirrored - std::conj(source.get(mi))));
        }
    };
    for (int n = 0; n < isostables(); ++n) {
        const auto& image = i_tensors[static_cast<std::size_t>(perm[static_cast<std::size_t>(n)])];
        check(i_tensors[static_cast<std::size_t>(n)], image);
        check(image, i_tensors[static_cast<std::size_t>(n)]);
    }
    for (const auto& g : g_tensors) check(g, g);
    return defect;
}

void ReducedModel::validate() const {
    const int m = isostables();
    require(m >= 1, ErrorCode::InvariantViolation, "model needs at least one isostable");
    require(order >= 1, ErrorCode::InvariantViolation, "model order must be >= 1");
    require(static_cast<int>(i_tensors.size()) == m, ErrorCode::InvariantViolation, "one I tensor per isostable required");
    require(y0.size() == g_tensors.size(), ErrorCode::InvariantViolation, "one G tensor per output required");
    for (int n = 0; n < m; ++n) {
        const cplx lam = eigenvalues[static_cast<std::size_t>(n)];
        require(std::isfinite(lam.real()) && std::isfinite(lam.imag()) && lam.real() < 0.0,
                ErrorCode::InvariantViolation, "eigenvalue " + std::to_string(n + 1) + " must have Re < 0");
    }
    std::vector<int> seen(static_cast<std::size_t>(m), 0);
    for (const auto& [a, b] : conjugate_pairs) {
        require(a >= 0 && b >= 0 && a < m && b < m && a != b, ErrorCode::InvariantViolation,
                "conjugate pair out of range");
        require(++seen[static_cast<std::size_t>(a)] == 1 && ++seen[static_cast<std::size_t>(b)] == 1,
                ErrorCode::InvariantViolation, "isostable listed in more than one conjugate pair");
        const cplx la = eigenvalues[static_cast<std::size_t>(a)];
        const cplx lb = eigenvalues[static_cast<std::size_t>(b)];
        require(std::abs(lb - std::conj(la)) <= 1e-10 * (1.0 + std::abs(la)), ErrorCode::InvariantViolation,
                "conjugate pair eigenvalues are not conjugate");
    }
    for (int n = 0; n < m; ++n) {
        if (seen[static_cast<std::size_t>(n)] != 0) continue;
        const cplx lam = eigenvalues[static_cast<std::size_t>(n)];
        require(std::abs(lam.imag()) <= 1e-12 * std::abs(lam), ErrorCode::InvariantViolation,
                "unpaired eigenvalue " + std::to_string(n + 1) + " must be real");
    }
    for (int n = 0; n < m; ++n) {
        const auto& t = i_tensors[static_cast<std::size_t>(n)];
        require(t.order_cap() <= order - 1, ErrorCode::InvariantViolation, "I tensor order cap exceeds order - 1");
        require(t.get(MultiIndex{}) == cplx{1.0, 0.0}, ErrorCode::InvariantViolation,
                "I tensor " + std::to_string(n + 1) + " must have unit constant term");
        for (const auto& [mi, v] : t.entries()) {
            require(mi.max_index() < m, ErrorCode::InvariantViolation, "I tensor index out of range");
        }
    }
    for (const auto& t : g_tensors) {
        require(t.order_cap() <= order, ErrorCode::InvariantViolation, "G tensor order cap exceeds order");
        require(t.get(MultiIndex{}) == cplx{}, ErrorCode::InvariantViolation, "G tensor constant lives in y0");
        for (const auto& [mi, v] : t.entries()) {
            require(mi.max_index() < m, ErrorCode::InvariantViolation, "G tensor index out of range");
        }
    }
    double scale = 1.0;
    for (const auto& t : i_tensors) for (const auto& [mi, v] : t.entries()) scale = std::max(scale, std::abs(v));
    for (const auto& t : g_tensors) for (const auto& [mi, v] : t.entries()) scale = std::max(scale, std::abs(v));
    require(conjugate_symmetry_defect() <= 1e-8 * scale, ErrorCode::InvariantViolation,
            "tensor entries violate conjugate-pair symmetry");
}

// ---------------------------------------------------------------------------

cplx eval_I(const ReducedModel& model, int n, std::span<const cplx> psi) {
    require(n >= 0 && n < model.isostables(), ErrorCode::InvalidArgument, "isostable index out of range");
    return model.i_tensors[static_cast<std::size_t>(n)].evaluate(psi);
}

OutputValue eval_G(const ReducedModel& model, int m, std::span<const cplx> psi) {
    require(m >= 0 && m < model.outputs(), ErrorCode::InvalidArgument, "output index out of range");
    const cplx g = model.g_tensors[static_cast<std::size_t>(m)].evaluate(psi);
    if (std::abs(g.imag()) > 1e-8 * (1.0 + std::abs(g.real()))) {
        throw Error(ErrorCode::ConjugateSymmetryViolation,
                    "output " + std::to_string(m + 1) + " has imaginary part " + std::to_string(g.imag()));
    }
    return {model.y0[static_cast<std::size_t>(m)] + g.real(), std::abs(g.imag())};
}

ReducedTrajectory simulate_reduced(const ReducedModel& model, const InputSignal& u, std::vector<cplx> psi0,
                                   double t0, double t1, double dt, int sample_stride) {
    const int m = model.isostables();
    require(static_cast<int>(psi0.size()) == m, ErrorCode::DimensionMismatch, "initial state has wrong dimension");
    require(dt > 0.0 && t1 >= t0, ErrorCode::InvalidArgument, "need dt > 0 and t1 >= t0");
    require(sample_stride >= 1, ErrorCode::InvalidArgument, "sample stride must be >= 1");
    double max_rate = 0.0;
    for (const auto& lam : model.eigenvalues) max_rate = std::max(max_rate, std::abs(lam));
    require(dt * max_rate <= 0.1 + 1e-12, ErrorCode::StepTooLarge,
            "dt * max|lambda| = " + std::to_string(dt * max_rate) + " exceeds 0.1");

    const auto steps = static_cast<long long>(std::llround((t1 - t0) / dt));
    using State = std::vector<cplx>;
    auto rhs = [&](const State& psi, double t, State& out) {
        const double ut = u(t);
        for (int n = 0; n < m; ++n) {
            const auto k = static_cast<std::size_t>(n);
            out[k] = model.eigenvalues[k] * psi[k];
            if (ut != 0.0) out[k] += model.i_tensors[k].evaluate(psi) * ut;
        }
    };

    ReducedTrajectory traj;
    auto record = [&](double t, const State& psi) {
        std::vector<double> y(static_cast<std::size_t>(model.outputs()));
        for (int j = 0; j < model.outputs(); ++j) {
            const auto out = eval_G(model, j, psi);
            y[static_cast<std::size_t>(j)] = out.value;
            traj.max_imag_residual = std::max(traj.max_imag_residual, out.imag_residual);
        }
        traj.times.push_back(t);
        traj.psi.push_back(psi);
        traj.y.push_back(std::move(y));
    };

    State psi = std::move(psi0);
    State k1(psi.size()), k2(psi.size()), k3(psi.size()), k4(psi.size()), tmp(psi.size());
    record(t0, psi);
    for (long long step = 0; step < steps; ++step) {
        const double t = t0 + static_cast<double>(step) * dt;
        rhs(psi, t, k1);
        for (std::size_t i = 0; i < psi.size(); ++i) tmp[i] = psi[i] + 0.5 * dt * k1[i];
        rhs(tmp, t + 0.5 * dt, k2);
        for (std::size_t i = 0; i < psi.size(); ++i) tmp[i] = psi[i] + 0.5 * dt * k2[i];
        rhs(tmp, t + 0.5 * dt, k3);
        for (std::size_t i = 0; i < psi.size(); ++i) tmp[i] = psi[i] + dt * k3[i];
        rhs(tmp, t + dt, k4);
        for (std::size_t i = 0; i < psi.size(); ++i) {
            psi[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            const double mag = std::abs(psi[i]);
            if (!std::isfinite(mag) || mag > 1e12) {
                throw Error(ErrorCode::NonFiniteState, "reduced state blew up at t = " + std::to_string(t + dt));
            }
        }
        if ((step + 1) % sample_stride == 0) record(t0 + static_cast<double>(step + 1) * dt, psi);
    }
    return traj;
}

// ---------------------------------------------------------------------------

namespace {

nlohmann::json complex_to_json(cplx z) { return nlohmann::json::array({z.real(), z.imag()}); }

cplx complex_from_json(const nlohmann::json& j) {
    require(j.is_array() && j.size() == 2, ErrorCode::InvariantViolation, "complex numbers are [re, im] pairs");
    return {j[0].get<double>(), j[1].get<double>()};
}

nlohmann::json tensor_to_json(const ExpansionTensor& t, const char* owner_key, int owner) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& [mi, v] : t.entries()) {
        std::vector<int> one_based;
        for (int b : mi.indices()) one_based.push_back(b + 1);
        entries.push_back({{"index", one_based}, {"value", complex_to_json(v)}});
    }
    return {{owner_key, owner + 1}, {"order_cap", t.order_cap()}, {"entries", entries}};
}

ExpansionTensor tensor_from_json(const nlohmann::json& j) {
    ExpansionTensor t(j.at("order_cap").get<int>());
    for (const auto& e : j.at("entries")) {
        std::vector<int> idx;
        for (int b : e.at("index").get<std::vector<int>>()) {
            require(b >= 1, ErrorCode::InvariantViolation, "multi-index entries are one-based");
            idx.push_back(b - 1);
        }
        MultiIndex mi(std::move(idx));
        require(mi.order() <= t.order_cap(), ErrorCode::InvariantViolation, "tensor entry exceeds order cap");
        t.set(mi, complex_from_json(e.at("value")));
    }
    return t;
}

}  // namespace

nlohmann::json serialize(const ReducedModel& model) {
    nlohmann::json doc;
    doc["format"] = "isored-model";
    doc["version"] = kModelFormatVersion;
    doc["M"] = model.isostables();
    doc["order"] = model.order;
    doc["eigenvalues"] = nlohmann::json::array();
    for (const auto& lam : model.eigenvalues) doc["eigenvalues"].push_back(complex_to_json(lam));
    doc["conjugate_pairs"] = nlohmann::json::array();
    for (const auto& [a, b] : model.conjugate_pairs) doc["conjugate_pairs"].push_back({a + 1, b + 1});
    doc["y0"] = model.y0;
    doc["I_tensors"] = nlohmann::json::array();
    for (std::size_t n = 0; n < model.i_tensors.size(); ++n) {
        doc["I_tensors"].push_back(tensor_to_json(model.i_tensors[n], "isostable", static_cast<int>(n)));
    }
    doc["G_tensors"] = nlohmann::json::array();
    for (std::size_t m = 0; m < model.g_tensors.size(); ++m) {
        doc["G_tensors"].push_back(tensor_to_json(model.g_tensors[m], "output", static_cast<int>(m)));
    }
    return doc;
}

ReducedModel deserialize(const nlohmann::json& document) {
    const int version = document.value("version", -1);
    require(version == kModelFormatVersion, ErrorCode::SchemaVersionMismatch,
            "expected model format version " + std::to_string(kModelFormatVersion) + ", got " +
                std::to_string(version));
    try {
        ReducedModel model;
        model.order = document.at("order").get<int>();
        for (const auto& lam : document.at("eigenvalues")) model.eigenvalues.push_back(complex_from_json(lam));
        require(document.at("M").get<int>() == model.isostables(), ErrorCode::InvariantViolation,
                "M disagrees with the eigenvalue count");
        for (const auto& pair : document.at("conjugate_pairs")) {
            model.conjugate_pairs.emplace_back(pair.at(0).get<int>() - 1, pair.at(1).get<int>() - 1);
        }
        model.y0 = document.at("y0").get<std::vector<double>>();
        for (const auto& t : document.at("I_tensors")) model.i_tensors.push_back(tensor_from_json(t));
        for (const auto& t : document.at("G_tensors")) model.g_tensors.push_back(tensor_from_json(t));
        model.validate();
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvariantViolation, std::string("malformed model document: ") + e.what());
    }
}

}  // namespace isored
