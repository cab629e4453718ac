#pragma once

#include <complex>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "isored/multi_index.hpp"
#include "isored/signal.hpp"

namespace isored {

/// Sparse polynomial coefficients indexed by canonical multi-indices; missing entries are zero.
class ExpansionTensor {
public:
    explicit ExpansionTensor(int order_cap = 0) : order_cap_(order_cap) {}

    [[nodiscard]] int order_cap() const noexcept { return order_cap_; }
    [[nodiscard]] const std::map<MultiIndex, cplx>& entries() const noexcept { return entries_; }

    /// Throws InvalidArgument if the index order exceeds the cap.
    void set(const MultiIndex& index, cplx value);
    [[nodiscard]] cplx get(const MultiIndex& index) const;

    /// sum entries * prod psi
    [[nodiscard]] cplx evaluate(std::span<const cplx> psi) const;

    /// Drops entries above `cap` and lowers the cap.
    [[nodiscard]] ExpansionTensor truncated(int cap) const;

    friend bool operator==(const ExpansionTensor&, const ExpansionTensor&) = default;

private:
    int order_cap_;
    std::map<MultiIndex, cplx> entries_;
};

/// Isostable reduced model
///   psi_n' = lambda_n psi_n + I_{n,A}(psi) u(t),   y_m = y0_m + Re G_m(psi).
/// An order-j model carries G to order j and each I_n to order j-1.
struct ReducedModel {
    int order = 1;
    std::vector<cplx> eigenvalues;
    std::vector<std::pair<int, int>> conjugate_pairs;  // zero-based (n, n')
    std::vector<ExpansionTensor> i_tensors;            // one per isostable
    std::vector<ExpansionTensor> g_tensors;            // one per output
    std::vector<double> y0;

    /// Model with I^0 = 1, every other coefficient zero.
    static ReducedModel blank(std::vector<cplx> eigenvalues, std::vector<std::pair<int, int>> conjugate_pairs,
                              std::vector<double> y0, int order);

    [[nodiscard]] int isostables() const noexcept { return static_cast<int>(eigenvalues.size()); }
    [[nodiscard]] int outputs() const noexcept { return static_cast<int>(g_tensors.size()); }

    /// Same model keeping G to `new_order` and I to `new_order - 1`.
    [[nodiscard]] ReducedModel truncated(int new_order) const;

    /// Largest violation of the conjugate-pair symmetry over all tensor entries (absolute).
    [[nodiscard]] double conjugate_symmetry_defect() const;

    /// Throws InvariantViolation on any broken invariant.
    void validate() const;

    friend bool operator==(const ReducedModel&, const ReducedModel&) = default;
};

/// I_{n,A}(psi).
[[nodiscard]] cplx eval_I(const ReducedModel& model, int n, std::span<const cplx> psi);

struct OutputValue {
    double value = 0.0;
    double imag_residual = 0.0;
};

/// y_m = y0_m + Re G_m(psi). Throws ConjugateSymmetryViolation when
/// |Im G_m| > 1e-8 (1 + |Re G_m|).
[[nodiscard]] OutputValue eval_G(const ReducedModel& model, int m, std::span<const cplx> psi);

struct ReducedTrajectory {
    std::vector<double> times;
    std::vector<std::vector<cplx>> psi;
    std::vector<std::vector<double>> y;
    double max_imag_residual = 0.0;
};

/// Fixed-step RK4 integration of the reduced model on [t0, t1], recording
/// every `sample_stride`-th step. Requires dt * max|lambda| <= 0.1.
[[nodiscard]] ReducedTrajectory simulate_reduced(const ReducedModel& model, const InputSignal& u,
                                                 std::vector<cplx> psi0, double t0, double t1, double dt,
                                                 int sample_stride = 1);

inline constexpr int kModelFormatVersion = 1;

[[nodiscard]] nlohmann::json serialize(const ReducedModel& model);
/// Throws SchemaVersionMismatch or InvariantViolation.
[[nodiscard]] ReducedModel deserialize(const nlohmann::json& document);

}  // namespace isored
