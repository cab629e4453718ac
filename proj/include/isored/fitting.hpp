#pragma once

// Stage-wise least-squares identification of reduced-model coefficients
// from steady-state probe records.
//
// Stage s fits the order s-1 entries of every I_n together with the order s
// entries of every G_m. For each probe frequency the order-s steady state of
// the reduced model under u = eps sin(wt) is assembled with the stage's
// unknowns left symbolic; its harmonic-s Fourier coefficients (plus the mean
// at stage 2) are affine in those unknowns and are matched against the
// measured integrals:
//   Gamma / (pi eps^s) = Xi Upsilon + R.

#include <vector>

#include <Eigen/Dense>

#include "isored/fourier_forms.hpp"
#include "isored/model.hpp"
#include "isored/probe.hpp"

namespace isored {

/// Numeric steady-state series psi_n^{(a)} per probe frequency.
struct PsiHarmonics {
    std::vector<double> omegas;
    std::vector<std::vector<std::vector<HarmonicSeries>>> series;  // [record][n][a - 1]

    [[nodiscard]] int order() const noexcept;
    /// Top coefficients (alpha, beta) of psi_n^{(a)}: sin and cos of harmonic a.
    [[nodiscard]] std::pair<cplx, cplx> top(std::size_t record, int n, int a) const;
};

/// psi^{(1)} .. psi^{(max_order)} at each frequency, using I up to order max_order - 1.
[[nodiscard]] PsiHarmonics compute_psi_harmonics(const ReducedModel& model, const std::vector<double>& omegas,
                                                 int max_order);

struct StageProblem {
    int stage = 1;
    std::vector<UnknownId> unknowns;
    std::vector<double> omegas;
    Eigen::MatrixXcd xi;
    Eigen::VectorXcd r;
    Eigen::VectorXcd gamma;       // raw measured integrals, row-aligned with xi
    Eigen::VectorXd row_scale;    // pi eps^s per row
    std::vector<std::vector<HarmonicSeries>> psi_next;  // [record][n], unknown-carrying psi^{(s)}
    double condition = 0.0;       // of the column-equilibrated xi

    /// Gamma / (pi eps^s) - R.
    [[nodiscard]] Eigen::VectorXcd rhs() const;
};

/// Number of unknowns at a stage: M C(M+s-2, s-1) I entries (none at stage 1) plus
/// N_y C(M+s-1, s) G entries.
[[nodiscard]] long long stage_unknown_count(int isostables, int outputs, int stage);

/// Builds the stage-s system. `model` must hold I through order s-2 and G
/// through order s-1 (and the eigenvalues); `psi` must hold orders 1..s-1 at
/// the records' frequencies. Throws MissingLowerStage, InconsistentProbeGrids.
[[nodiscard]] StageProblem build_stage(const ReducedModel& model, const std::vector<ProbeRecord>& records, int stage,
                                       const PsiHarmonics& psi);

struct StageSolution {
    UnknownValues values;
    double residual_norm = 0.0;    // || Xi Upsilon - rhs || after symmetrization
    double relative_residual = 0.0;
    double condition = 0.0;
    double symmetry_defect = 0.0;  // largest |v - conj(v_partner)| before projection
    int rank = 0;
};

struct SolveOptions {
    double condition_cap = 1e8;
    double rank_tolerance = 1e-12;  // relative to the largest singular value
    /// Single-tone probes cannot separate some order-2 cross terms (products of
    /// distinct real modes); by default those directions get the minimum-norm
    /// (pseudoinverse) solution instead of an error.
    bool require_full_rank = false;
};

/// Least squares via truncated SVD of the column-equilibrated matrix, followed
/// by conjugate-pair projection. Throws RankDeficient (too few rows, or rank
/// loss when full rank is required), IllConditioned (over retained values).
[[nodiscard]] StageSolution solve_stage(const StageProblem& problem, const ReducedModel& model,
                                        const SolveOptions& options = {});

/// Appends the fitted order-s series (unknowns substituted) to `psi`.
[[nodiscard]] PsiHarmonics propagate_harmonics(const StageProblem& problem, const StageSolution& solution,
                                               PsiHarmonics psi);

/// Writes a stage's solution into the model tensors.
void apply_solution(ReducedModel& model, const StageSolution& solution);

struct StageReport {
    int stage = 0;
    int rows = 0;
    int columns = 0;
    int rank = 0;
    double condition = 0.0;
    double residual_norm = 0.0;
    double relative_residual = 0.0;
    double symmetry_defect = 0.0;
    UnknownValues values;
};

struct FitResult {
    ReducedModel model;
    std::vector<StageReport> stages;
};

/// Fits stages 1..max_order. records_by_stage[s-1] holds the probes used for
/// stage s (same outputs and baseline throughout). `base` supplies the
/// eigenvalues, conjugate pairs and y0. Throws InconsistentProbeGrids.
[[nodiscard]] FitResult fit_multi_output(const ReducedModel& base,
                                         const std::vector<std::vector<ProbeRecord>>& records_by_stage, int max_order,
                                         const SolveOptions& options = {});

nlohmann::json to_json(const StageReport& report);

}  // namespace isored
