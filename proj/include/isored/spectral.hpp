#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "isored/multi_index.hpp"
#include "isored/probe.hpp"

namespace isored {

/// Non-overlapping windows of a uniformly sampled series, one window per column.
/// For N_y outputs a column stacks the K consecutive output vectors.
struct SnapshotMatrix {
    Eigen::MatrixXd y;  // (K * N_y) x L
    int window = 0;     // K
    double dt = 0.0;
    std::vector<double> y0;
};

/// Column i holds y(K i dt + m dt) - y0 for m = 0..K-1; a trailing partial
/// window is dropped. Throws TooFewSamples when no full window exists.
[[nodiscard]] SnapshotMatrix stack_snapshots(const std::vector<std::vector<double>>& samples, int window, double dt,
                                             const std::vector<double>& y0);
[[nodiscard]] SnapshotMatrix stack_snapshots(const std::vector<double>& samples, int window, double dt, double y0);

struct PodBasis {
    Eigen::MatrixXd modes;         // columns are orthonormal modes
    Eigen::VectorXd energies;      // all covariance eigenvalues, descending
    Eigen::MatrixXd coefficients;  // modes^T Y, one column per snapshot
    double captured = 0.0;         // retained / total energy

    [[nodiscard]] int size() const noexcept { return static_cast<int>(modes.cols()); }
    /// Orthonormality and ordering checks; throws InvariantViolation.
    void check() const;
};

/// Either a fixed mode count or the smallest count whose captured energy
/// reaches the target.
struct PodSelection {
    int modes = 0;
    double energy_target = 0.0;
};

/// Eigendecomposition of Y Y^T. Throws DegenerateCovariance.
[[nodiscard]] PodBasis pod(const Eigen::MatrixXd& snapshots, const PodSelection& selection);

/// Continuous rate from a propagator eigenvalue over one window stride.
enum class RateMap { Logarithm, Literal };
[[nodiscard]] cplx map_rate(cplx propagator_eigenvalue, double stride, RateMap map = RateMap::Logarithm);

struct CoarseEstimate {
    std::vector<cplx> eigenvalues;             // the M slowest, Re descending
    std::vector<cplx> propagator_eigenvalues;  // all, matching order of `all_rates`
    std::vector<cplx> all_rates;
};

/// Least-squares one-step propagator on the POD coefficients and its
/// eigenvalues mapped to rates. Throws InsufficientRank, UnstableEstimate.
[[nodiscard]] CoarseEstimate coarse_eigenvalues(const PodBasis& basis, int window, double dt, int count,
                                                RateMap map = RateMap::Logarithm);

/// Eigenvalue estimates plus first-order output coefficients g_m^{(n)}.
struct FirstOrderModel {
    std::vector<cplx> eigenvalues;
    std::vector<std::pair<int, int>> conjugate_pairs;
    Eigen::MatrixXcd g;  // outputs x isostables
};

struct NewtonOptions {
    int max_iterations = 100;
    double tolerance = 1e-9;
    int max_halvings = 8;
    /// Eliminate g by linear least squares at every iterate, so steps are taken
    /// in the eigenvalues only (variable projection). false steps (lambda, g) jointly.
    bool project_coefficients = true;
};

struct NewtonResult {
    FirstOrderModel model;
    int iterations = 0;
    double initial_residual = 0.0;
    double residual = 0.0;
    std::vector<std::vector<cplx>> history;  // eigenvalues after each accepted step
    std::vector<double> residual_history;
};

/// First-order residual h(Z): Gamma_1 / (pi eps) - Xi_1(lambda) g, stacked over outputs.
[[nodiscard]] Eigen::VectorXd first_order_residual(const std::vector<ProbeRecord>& records,
                                                   const FirstOrderModel& model);

/// Linear least-squares g for fixed eigenvalues (with conjugate symmetry).
[[nodiscard]] Eigen::MatrixXcd first_order_coefficients(const std::vector<ProbeRecord>& records,
                                                        const std::vector<cplx>& eigenvalues,
                                                        const std::vector<std::pair<int, int>>& conjugate_pairs);

/// Damped Gauss-Newton on (lambda, g). With projection (the default) the
/// coefficients always follow the eigenvalues through a linear refit; otherwise
/// an empty `initial.g` is fitted once at the initial eigenvalues.
/// Throws NoConvergence with the final residual.
[[nodiscard]] NewtonResult newton_refine(const std::vector<ProbeRecord>& records, FirstOrderModel initial,
                                         const NewtonOptions& options = {});

}  // namespace isored
