#pragma once

#include <complex>
#include <compare>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace isored {

using cplx = std::complex<double>;

/// Index of a monomial psi_{b1} psi_{b2} ... psi_{bp} in an expansion.
///
/// Indices are zero-based internally and always stored in non-increasing
/// order (b1 >= b2 >= ... >= bp), so equivalent orderings of the same
/// monomial compare equal. The empty index is the constant term.
class MultiIndex {
public:
    MultiIndex() = default;

    /// Sorts `indices` into canonical order. Throws InvalidArgument on negatives.
    explicit MultiIndex(std::vector<int> indices);
    MultiIndex(std::initializer_list<int> indices) : MultiIndex(std::vector<int>(indices)) {}

    [[nodiscard]] int order() const noexcept { return static_cast<int>(indices_.size()); }
    [[nodiscard]] bool empty() const noexcept { return indices_.empty(); }
    [[nodiscard]] const std::vector<int>& indices() const noexcept { return indices_; }
    [[nodiscard]] int operator[](std::size_t i) const { return indices_[i]; }

    /// Largest index stored, or -1 for the empty index.
    [[nodiscard]] int max_index() const noexcept { return indices_.empty() ? -1 : indices_.front(); }

    /// Index of the product monomial.
    [[nodiscard]] MultiIndex merged(const MultiIndex& other) const;

    /// Relabels every index through `permutation` and re-canonicalizes.
    [[nodiscard]] MultiIndex relabeled(std::span<const int> permutation) const;

    /// Evaluates prod psi[b_i]; the empty index evaluates to 1.
    [[nodiscard]] cplx monomial(std::span<const cplx> psi) const;

    /// Human-readable one-based form, e.g. "(2,1,1)".
    [[nodiscard]] std::string to_string() const;

    auto operator<=>(const MultiIndex&) const = default;

private:
    std::vector<int> indices_;
};

/// All canonical multi-indices of exactly `order` over `variables` indices,
/// enumerated like nested sums b1 = 0..M-1, b2 = 0..b1, ...
[[nodiscard]] std::vector<MultiIndex> multi_indices(int variables, int order);

/// All canonical multi-indices with order in [0, max_order].
[[nodiscard]] std::vector<MultiIndex> multi_indices_up_to(int variables, int max_order);

/// Number of canonical multi-indices of a given order: C(M + p - 1, p).
[[nodiscard]] long long multi_index_count(int variables, int order);

/// Permutation of 0..M-1 swapping each recorded conjugate pair.
[[nodiscard]] std::vector<int> conjugation_permutation(
    int variables, std::span<const std::pair<int, int>> conjugate_pairs);

}  // namespace isored
