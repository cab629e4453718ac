#pragma once

// Ground truth for systems with known equations: isostable coordinates by
// long-horizon integration, and expansion tensors by order-by-order linear
// solves on polynomial compositions of the Taylor-expanded vector field.

#include <functional>
#include <map>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "isored/model.hpp"

namespace isored {

/// Vector-valued polynomial keyed by canonical multi-indices. Over state
/// components it represents a Taylor field in dx; over isostables it
/// represents dx(psi) or I_n(psi).
using VectorPolynomial = std::map<MultiIndex, Eigen::VectorXcd>;

struct KnownSystem {
    int dimension = 0;
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> field;  // unforced F(x)
    Eigen::VectorXd fixed_point;
    Eigen::VectorXd input_direction;  // A
    Eigen::MatrixXd output;           // y = C x
    /// Optional exact Taylor coefficients of F about the fixed point (orders >= 1).
    std::optional<VectorPolynomial> taylor;
};

/// Linearization data: eigenvalues ordered by |Re| ascending, right
/// eigenvectors v_k (columns) and left eigenvectors w_k (rows of W) with W V = I.
struct Linearization {
    Eigen::MatrixXd jacobian;
    Eigen::VectorXcd eigenvalues;
    Eigen::MatrixXcd right;  // columns v_k
    Eigen::MatrixXcd left;   // rows w_k^T
};

/// Throws InvariantViolation if F(x0) is not ~0 or w^T J != lambda w^T.
[[nodiscard]] Linearization linearize(const KnownSystem& sys);

/// Taylor coefficients of F through `max_order`: the analytic polynomial when
/// present, otherwise nested central differences with order-scaled steps and
/// one Richardson refinement.
[[nodiscard]] VectorPolynomial taylor_field(const KnownSystem& sys, int max_order);

/// Integrates the unforced system with RK4 (dt |lambda|max <= 0.05).
[[nodiscard]] Eigen::VectorXd flow(const KnownSystem& sys, const Eigen::VectorXd& x, double horizon);

struct DirectIsostableOptions {
    double horizon = 0.0;  // 0 picks a horizon from the spectrum
    double agreement = 1e-6;
};

/// psi_n(x) = lim w_n^T (phi(T, x) - x0) e^{-lambda_n T}, checked at T and 1.25 T.
/// Throws NotConverged, LimitUnstable.
[[nodiscard]] cplx direct_isostable(const KnownSystem& sys, const Linearization& lin, const Eigen::VectorXd& x, int n,
                                    const DirectIsostableOptions& options = {});

/// dx(psi) coefficients g^beta for the M slowest isostables through max_order.
/// Throws ResonantCombination.
[[nodiscard]] VectorPolynomial solve_g_tensors(const KnownSystem& sys, const Linearization& lin, int isostables,
                                               int max_order);

/// Gradient expansions I_n(psi) (vector-valued) through max_order; needs g
/// through max_order. Throws ResonantCombination.
[[nodiscard]] std::vector<VectorPolynomial> solve_I_tensors(const KnownSystem& sys, const Linearization& lin,
                                                            const VectorPolynomial& g, int isostables, int max_order);

struct RegressionResult {
    ExpansionTensor tensor;
    double residual = 0.0;
    double condition = 0.0;
};

/// Least-squares fit of sum_beta c_beta prod psi over canonical monomials of
/// order in [min_order, max_order]. Throws InvalidArgument, IllConditioned.
[[nodiscard]] RegressionResult regress_expansion(const std::vector<std::vector<cplx>>& psi,
                                                 const std::vector<cplx>& values, int isostables, int max_order,
                                                 int min_order = 0, double condition_cap = 1e12);

/// Forward-computed reduced model of the given order in the I^0 = 1 normalization.
[[nodiscard]] ReducedModel oracle_model(const KnownSystem& sys, int isostables, int order);

}  // namespace isored
