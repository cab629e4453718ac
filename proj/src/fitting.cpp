#include "isored/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include "isored/error.hpp"

namespace isored {

namespace {

// Coefficients of a power series in eps whose entries are harmonic series.
using EpsPoly = std::vector<HarmonicSeries>;

bool is_zero(const HarmonicSeries& s) { return s.max_harmonic() == 0 && s.cos_coeff(0).is_zero(); }

EpsPoly poly_mul(const EpsPoly& a, const EpsPoly& b, double omega) {
    const std::size_t n = a.size();
    EpsPoly out(n, HarmonicSeries(omega));
    for (std::size_t i = 0; i < n; ++i) {
        if (is_zero(a[i])) continue;
        for (std::size_t j = 0; i + j < n; ++j) {
            if (is_zero(b[j])) continue;
            out[i + j] += multiply(a[i], b[j]);
        }
    }
    return out;
}

// eps-expansions of prod_i psi_{b_i}(eps) for the known orders of psi,
// truncated at eps^max_power. Prefix products are cached.
class ProductCache {
public:
    ProductCache(double omega, const std::vector<std::vector<HarmonicSeries>>& psi, int known_orders, int max_power)
        : omega_(omega), psi_(psi), known_(known_orders), size_(static_cast<std::size_t>(max_power) + 1) {}

    const EpsPoly& get(const MultiIndex& beta) {
        auto it = cache_.find(beta);
        if (it != cache_.end()) return it->second;
        EpsPoly value;
        if (beta.empty()) {
            value.assign(size_, HarmonicSeries(omega_));
            value[0] = HarmonicSeries::constant(omega_, 1.0);
        } else {
            std::vector<int> prefix(beta.indices().begin(), beta.indices().end() - 1);
            const EpsPoly head = get(MultiIndex(std::move(prefix)));
            value = poly_mul(head, single(beta.indices().back()), omega_);
        }
        return cache_.emplace(beta, std::move(value)).first->second;
    }

private:
    EpsPoly single(int n) const {
        EpsPoly p(size_, HarmonicSeries(omega_));
        const auto& orders = psi_[static_cast<std::size_t>(n)];
        for (int a = 1; a <= known_ && static_cast<std::size_t>(a) < size_; ++a) {
            p[static_cast<std::size_t>(a)] = orders[static_cast<std::size_t>(a - 1)];
        }
        return p;
    }

    double omega_;
    const std::vector<std::vector<HarmonicSeries>>& psi_;
    int known_;
    std::size_t size_;
    std::map<MultiIndex, EpsPoly> cache_;
};

HarmonicSeries times_unknown(const HarmonicSeries& s, const UnknownId& id) {
    return multiply(s, HarmonicSeries::constant(s.omega(), LinearForm::unknown(id)));
}

// O(eps^order) forcing of psi_n, with the order-1 entries of I left unknown
// when `unknown_top` is set.
HarmonicSeries forcing(const ReducedModel& model, int n, int order, ProductCache& cache, double omega,
                       bool unknown_top) {
    const int m = model.isostables();
    HarmonicSeries sum(omega);
    const auto& tensor = model.i_tensors[static_cast<std::size_t>(n)];
    for (int p = 0; p <= order - 1; ++p) {
        for (const auto& beta : multi_indices(m, p)) {
            const auto& prod = cache.get(beta)[static_cast<std::size_t>(order - 1)];
            if (is_zero(prod)) continue;
            if (unknown_top && p == order - 1) {
                sum += times_unknown(prod, UnknownId::i_tensor(n, beta));
            } else {
                const cplx c = tensor.get(beta);
                if (c == cplx{}) continue;
                HarmonicSeries term = prod;
                term *= c;
                sum += term;
            }
        }
    }
    return multiply(HarmonicSeries::sine(omega, 1, 1.0), sum);
}

std::pair<Eigen::VectorXd, Eigen::JacobiSVD<Eigen::MatrixXcd>> equilibrated_svd(const Eigen::MatrixXcd& a,
                                                                                const std::vector<UnknownId>& ids) {
    Eigen::VectorXd norms(a.cols());
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
        norms(j) = a.col(j).norm();
        require(norms(j) > 0.0, ErrorCode::RankDeficient,
                "unknown " + ids[static_cast<std::size_t>(j)].to_string() + " does not enter any row");
    }
    Eigen::MatrixXcd scaled = a * norms.cwiseInverse().asDiagonal();
    return {norms, Eigen::JacobiSVD<Eigen::MatrixXcd>(scaled, Eigen::ComputeThinU | Eigen::ComputeThinV)};
}

UnknownId partner(const UnknownId& id, const std::vector<int>& perm) {
    UnknownId out = id;
    if (id.kind == UnknownId::Kind::ITensor) out.index = perm[static_cast<std::size_t>(id.index)];
    out.multi_index = id.multi_index.relabeled(perm);
    return out;
}

}  // namespace

int PsiHarmonics::order() const noexcept {
    if (series.empty() || series.front().empty()) return 0;
    std::size_t lowest = series.front().front().size();
    for (const auto& rec : series) {
        for (const auto& n : rec) lowest = std::min(lowest, n.size());
    }
    return static_cast<int>(lowest);
}

std::pair<cplx, cplx> PsiHarmonics::top(std::size_t record, int n, int a) const {
    const auto& s = series.at(record).at(static_cast<std::size_t>(n)).at(static_cast<std::size_t>(a - 1));
    static const UnknownValues kNone;
    return {s.sin_coeff(a).evaluate(kNone), s.cos_coeff(a).evaluate(kNone)};
}

PsiHarmonics compute_psi_harmonics(const ReducedModel& model, const std::vector<double>& omegas, int max_order) {
    const int m = model.isostables();
    PsiHarmonics out;
    out.omegas = omegas;
    for (double w : omegas) {
        std::vector<std::vector<HarmonicSeries>> per_n(static_cast<std::size_t>(m));
        for (int a = 1; a <= max_order; ++a) {
            ProductCache cache(w, per_n, a - 1, a - 1);
            std::vector<HarmonicSeries> next;
            for (int n = 0; n < m; ++n) {
                next.push_back(steady_state_solve(forcing(model, n, a, cache, w, false),
                                                  model.eigenvalues[static_cast<std::size_t>(n)]));
            }
            for (int n = 0; n < m; ++n) per_n[static_cast<std::size_t>(n)].push_back(std::move(next[static_cast<std::size_t>(n)]));
        }
        out.series.push_back(std::move(per_n));
    }
    return out;
}

Eigen::VectorXcd StageProblem::rhs() const {
    Eigen::VectorXcd out(gamma.size());
    for (Eigen::Index i = 0; i < gamma.size(); ++i) out(i) = gamma(i) / row_scale(i) - r(i);
    return out;
}

long long stage_unknown_count(int isostables, int outputs, int stage) {
    const long long i_count = stage >= 2 ? isostables * multi_index_count(isostables, stage - 1) : 0;
    return i_count + outputs * multi_index_count(isostables, stage);
}

StageProblem build_stage(const ReducedModel& model, const std::vector<ProbeRecord>& records, int stage,
                         const PsiHarmonics& psi) {
    require(stage >= 1, ErrorCode::InvalidArgument, "stage must be >= 1");
    require(!records.empty(), ErrorCode::InvalidArgument, "stage needs at least one probe record");
    require(psi.order() >= stage - 1 || stage == 1, ErrorCode::MissingLowerStage,
            "stage " + std::to_string(stage) + " needs psi harmonics through order " + std::to_string(stage - 1));
    require(psi.omegas.size() == records.size(), ErrorCode::InconsistentProbeGrids,
            "psi harmonics and probe records disagree in length");
    require(model.order >= stage, ErrorCode::InvalidArgument, "model order below the requested stage");
    const int m_iso = model.isostables();
    const auto ny = records.front().outputs();
    require(model.outputs() == static_cast<int>(ny), ErrorCode::DimensionMismatch,
            "model and probe records disagree on output count");
    for (std::size_t r = 0; r < records.size(); ++r) {
        require(records[r].outputs() == ny, ErrorCode::InconsistentProbeGrids, "probe records disagree on output count");
        require(records[r].omega == psi.omegas[r], ErrorCode::InconsistentProbeGrids,
                "psi harmonics computed at a different frequency grid");
        require(records[r].j_max >= stage, ErrorCode::MissingHarmonic, "probe records stop below the stage harmonic");
    }

    StageProblem prob;
    prob.stage = stage;
    if (stage >= 2) {
        for (int n = 0; n < m_iso; ++n) {
            for (const auto& beta : multi_indices(m_iso, stage - 1)) prob.unknowns.push_back(UnknownId::i_tensor(n, beta));
        }
    }
    for (std::size_t m = 0; m < ny; ++m) {
        for (const auto& beta : multi_indices(m_iso, stage)) {
            prob.unknowns.push_back(UnknownId::g_tensor(static_cast<int>(m), beta));
        }
    }
    std::map<UnknownId, Eigen::Index> column;
    for (std::size_t j = 0; j < prob.unknowns.size(); ++j) column[prob.unknowns[j]] = static_cast<Eigen::Index>(j);

    const int per_record = stage == 2 ? 3 : 2;
    const auto q = static_cast<Eigen::Index>(records.size());
    const Eigen::Index rows = static_cast<Eigen::Index>(ny) * q * per_record;
    prob.xi = Eigen::MatrixXcd::Zero(rows, static_cast<Eigen::Index>(prob.unknowns.size()));
    prob.r = Eigen::VectorXcd::Zero(rows);
    prob.gamma = Eigen::VectorXcd::Zero(rows);
    prob.row_scale = Eigen::VectorXd::Zero(rows);

    auto fill_row = [&](Eigen::Index row, const LinearForm& f, double factor) {
        prob.r(row) = factor * f.constant();
        for (const auto& [id, c] : f.terms()) {
            auto it = column.find(id);
            require(it != column.end(), ErrorCode::NonlinearUnknowns, "stray unknown " + id.to_string() + " in stage row");
            prob.xi(row, it->second) = factor * c;
        }
    };

    for (std::size_t r = 0; r < records.size(); ++r) {
        const double w = records[r].omega;
        prob.omegas.push_back(w);
        const std::vector<std::vector<HarmonicSeries>> empty_psi(static_cast<std::size_t>(m_iso));
        const auto& known = stage >= 2 ? psi.series[r] : empty_psi;
        ProductCache cache(w, known, stage - 1, stage);

        std::vector<HarmonicSeries> next;
        for (int n = 0; n < m_iso; ++n) {
            next.push_back(steady_state_solve(forcing(model, n, stage, cache, w, stage >= 2),
                                              model.eigenvalues[static_cast<std::size_t>(n)]));
        }

        for (std::size_t m = 0; m < ny; ++m) {
            const auto& g = model.g_tensors[m];
            HarmonicSeries out(w);
            for (int n = 0; n < m_iso; ++n) {
                const MultiIndex beta{n};
                if (stage == 1) {
                    out += times_unknown(next[static_cast<std::size_t>(n)], UnknownId::g_tensor(static_cast<int>(m), beta));
                } else if (const cplx c = g.get(beta); c != cplx{}) {
                    HarmonicSeries term = next[static_cast<std::size_t>(n)];
                    term *= c;
                    out += term;
                }
            }
            for (int p = 2; p <= stage; ++p) {
                for (const auto& beta : multi_indices(m_iso, p)) {
                    const auto& prod = cache.get(beta)[static_cast<std::size_t>(stage)];
                    if (is_zero(prod)) continue;
                    if (p == stage) {
                        out += times_unknown(prod, UnknownId::g_tensor(static_cast<int>(m), beta));
                    } else if (const cplx c = g.get(beta); c != cplx{}) {
                        HarmonicSeries term = prod;
                        term *= c;
                        out += term;
                    }
                }
            }

            const auto [s_form, c_form] = extract_harmonic(out, stage);
            const Eigen::Index base =
                static_cast<Eigen::Index>(m) * q * per_record + static_cast<Eigen::Index>(r) * per_record;
            const double scale = std::numbers::pi * std::pow(records[r].epsilon, stage);
            fill_row(base, s_form, 1.0);
            fill_row(base + 1, c_form, 1.0);
            prob.gamma(base) = records[r].sin[m][static_cast<std::size_t>(stage)];
            prob.gamma(base + 1) = records[r].cos[m][static_cast<std::size_t>(stage)];
            prob.row_scale(base) = scale;
            prob.row_scale(base + 1) = scale;
            if (stage == 2) {
                // w int y dt - 2 pi y0 = 2 pi c0, i.e. pi eps^2 (2 c0) at this order.
                fill_row(base + 2, out.cos_coeff(0), 2.0);
                prob.gamma(base + 2) = records[r].dc[m];
                prob.row_scale(base + 2) = scale;
            }
        }
        prob.psi_next.push_back(std::move(next));
    }

    const auto [norms, svd] = equilibrated_svd(prob.xi, prob.unknowns);
    const auto& sv = svd.singularValues();
    prob.condition = sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1) : INFINITY;
    return prob;
}

StageSolution solve_stage(const StageProblem& problem, const ReducedModel& model, const SolveOptions& options) {
    const auto rows = problem.xi.rows();
    const auto cols = problem.xi.cols();
    require(cols > 0, ErrorCode::InvalidArgument, "stage has no unknowns");
    require(rows >= 2 * cols, ErrorCode::RankDeficient,
            "stage " + std::to_string(problem.stage) + " has " + std::to_string(rows) + " rows for " +
                std::to_string(cols) + " unknowns; add probe frequencies");

    auto [norms, svd] = equilibrated_svd(problem.xi, problem.unknowns);
    const Eigen::VectorXd sv = svd.singularValues();
    StageSolution sol;
    sol.rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        if (sv(i) > options.rank_tolerance * sv(0)) ++sol.rank;
    }
    require(sol.rank == cols || !options.require_full_rank, ErrorCode::RankDeficient,
            "stage matrix rank " + std::to_string(sol.rank) + " < " + std::to_string(cols) + " unknowns");
    require(sol.rank > 0, ErrorCode::RankDeficient, "stage matrix is zero");
    // Over the retained singular values; the discarded directions get the minimum-norm solution.
    sol.condition = sv(0) / sv(sol.rank - 1);
    require(sol.condition <= options.condition_cap, ErrorCode::IllConditioned,
            "stage " + std::to_string(problem.stage) + " condition number " + std::to_string(sol.condition) +
                " exceeds cap " + std::to_string(options.condition_cap));

    svd.setThreshold(options.rank_tolerance);
    const Eigen::VectorXcd b = problem.rhs();
    const Eigen::VectorXcd x = norms.cwiseInverse().asDiagonal() * svd.solve(b);

    const auto perm = conjugation_permutation(model.isostables(), model.conjugate_pairs);
    UnknownValues raw;
    for (Eigen::Index j = 0; j < cols; ++j) raw[problem.unknowns[static_cast<std::size_t>(j)]] = x(j);
    Eigen::VectorXcd projected(cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
        const auto& id = problem.unknowns[static_cast<std::size_t>(j)];
        auto it = raw.find(partner(id, perm));
        require(it != raw.end(), ErrorCode::InvariantViolation, "conjugate partner of " + id.to_string() + " missing");
        sol.symmetry_defect = std::max(sol.symmetry_defect, std::abs(x(j) - std::conj(it->second)));
        projected(j) = 0.5 * (x(j) + std::conj(it->second));
        sol.values[id] = projected(j);
    }
    sol.residual_norm = (problem.xi * projected - b).norm();
    sol.relative_residual = b.norm() > 0.0 ? sol.residual_norm / b.norm() : sol.residual_norm;
    return sol;
}

PsiHarmonics propagate_harmonics(const StageProblem& problem, const StageSolution& solution, PsiHarmonics psi) {
    require(psi.series.size() == problem.psi_next.size(), ErrorCode::InconsistentProbeGrids,
            "psi harmonics and stage problem disagree in length");
    require(psi.order() == problem.stage - 1, ErrorCode::MissingLowerStage, "psi harmonics are not at the previous stage");
    for (std::size_t r = 0; r < problem.psi_next.size(); ++r) {
        if (psi.series[r].empty()) psi.series[r].resize(problem.psi_next[r].size());
        for (std::size_t n = 0; n < problem.psi_next[r].size(); ++n) {
            psi.series[r][n].push_back(substitute(problem.psi_next[r][n], solution.values));
        }
    }
    return psi;
}

void apply_solution(ReducedModel& model, const StageSolution& solution) {
    for (const auto& [id, v] : solution.values) {
        auto& tensor = id.kind == UnknownId::Kind::ITensor ? model.i_tensors.at(static_cast<std::size_t>(id.index))
                                                           : model.g_tensors.at(static_cast<std::size_t>(id.index));
        tensor.set(id.multi_index, v);
    }
}

FitResult fit_multi_output(const ReducedModel& base, const std::vector<std::vector<ProbeRecord>>& records_by_stage,
                           int max_order, const SolveOptions& options) {
    require(max_order >= 1, ErrorCode::InvalidArgument, "fit order must be >= 1");
    require(static_cast<int>(records_by_stage.size()) >= max_order, ErrorCode::MissingHarmonic,
            "need probe records for every stage up to " + std::to_string(max_order));
    require(!records_by_stage.front().empty(), ErrorCode::InvalidArgument, "stage 1 has no probe records");
    const auto& y0 = records_by_stage.front().front().y0;
    for (int s = 0; s < max_order; ++s) {
        require(!records_by_stage[static_cast<std::size_t>(s)].empty(), ErrorCode::InvalidArgument,
                "stage " + std::to_string(s + 1) + " has no probe records");
        for (const auto& r : records_by_stage[static_cast<std::size_t>(s)]) {
            require(r.y0.size() == y0.size(), ErrorCode::InconsistentProbeGrids, "probe records disagree on output count");
            for (std::size_t m = 0; m < y0.size(); ++m) {
                require(std::abs(r.y0[m] - y0[m]) <= 1e-12 * (1.0 + std::abs(y0[m])), ErrorCode::InconsistentProbeGrids,
                        "probe records disagree on the output baseline");
            }
        }
    }

    FitResult result;
    result.model = ReducedModel::blank(base.eigenvalues, base.conjugate_pairs, y0, max_order);
    for (int s = 1; s <= max_order; ++s) {
        const auto& recs = records_by_stage[static_cast<std::size_t>(s - 1)];
        std::vector<double> omegas;
        for (const auto& r : recs) omegas.push_back(r.omega);
        const auto psi = compute_psi_harmonics(result.model, omegas, s - 1);
        const auto problem = build_stage(result.model, recs, s, psi);
        const auto solution = solve_stage(problem, result.model, options);
        apply_solution(result.model, solution);
        StageReport rep;
        rep.stage = s;
        rep.rows = static_cast<int>(problem.xi.rows());
        rep.columns = static_cast<int>(problem.xi.cols());
        rep.condition = solution.condition;
        rep.rank = solution.rank;
        rep.residual_norm = solution.residual_norm;
        rep.relative_residual = solution.relative_residual;
        rep.symmetry_defect = solution.symmetry_defect;
        rep.values = solution.values;
        result.stages.push_back(std::move(rep));
    }
    result.model.validate();
    return result;
}

nlohmann::json to_json(const StageReport& report) {
    nlohmann::json values = nlohmann::json::array();
    for (const auto& [id, v] : report.values) {
        values.push_back({{"unknown", id.to_string()}, {"value", {v.real(), v.imag()}}});
    }
    return {{"stage", report.stage},
            {"rows", report.rows},
            {"columns", report.columns},
            {"rank", report.rank},
            {"condition", report.condition},
            {"residual_norm", report.residual_norm},
            {"relative_residual", report.relative_residual},
            {"symmetry_defect", report.symmetry_defect},
            {"values", values}};
}

}  // namespace isored
