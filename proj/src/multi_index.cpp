#include "isored/multi_index.hpp"

#include <algorithm>
#include <functional>
#include <sstream>

#include "isored/error.hpp"

namespace isored {

MultiIndex::MultiIndex(std::vector<int> indices) : indices_(std::move(indices)) {
    for (int b : indices_) {
        require(b >= 0, ErrorCode::InvalidArgument, "multi-index entries must be non-negative");
    }
    std::sort(indices_.begin(), indices_.end(), std::greater<>());
}

MultiIndex MultiIndex::merged(const MultiIndex& other) const {
    std::vector<int> out;
    out.reserve(indices_.size() + other.indices_.size());
    std::merge(indices_.begin(), indices_.end(), other.indices_.begin(), other.indices_.end(),
               std::back_inserter(out), std::greater<>());
    MultiIndex result;
    result.indices_ = std::move(out);
    return result;
}

MultiIndex MultiIndex::relabeled(std::span<const int> permutation) const {
    std::vector<int> out;
    out.reserve(indices_.size());
    for (int b : indices_) {
        require(b < static_cast<int>(permutation.size()), ErrorCode::InvalidArgument,
                "permutation too short for multi-index");
        out.push_back(permutation[static_cast<std::size_t>(b)]);
    }
    return MultiIndex(std::move(out));
}

cplx MultiIndex::monomial(std::span<const cplx> psi) const {
    cplx value{1.0, 0.0};
    for (int b : indices_) {
        value *= psi[static_cast<std::size_t>(b)];
    }
    return value;
}

std::string MultiIndex::to_string() const {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < indices_.size(); ++i) {
        if (i != 0) os << ',';
        os << indices_[i] + 1;
    }
    os << ')';
    return os.str();
}

std::vector<MultiIndex> multi_indices(int variables, int order) {
    require(variables >= 1, ErrorCode::InvalidArgument, "need at least one variable");
    require(order >= 0, ErrorCode::InvalidArgument, "negative order");
    std::vector<MultiIndex> out;
    std::vector<int> current;
    std::function<void(int, int)> recurse = [&](int depth, int upper) {
        if (depth == order) {
            out.emplace_back(current);
            return;
        }
        for (int b = 0; b <= upper; ++b) {
            current.push_back(b);
            recurse(depth + 1, b);
            current.pop_back();
        }
    };
    recurse(0, variables - 1);
    return out;
}

std::vector<MultiIndex> multi_indices_up_to(int variables, int max_order) {
    std::vector<MultiIndex> out;
    for (int p = 0; p <= max_order; ++p) {
        auto level = multi_indices(variables, p);
        out.insert(out.end(), level.begin(), level.end());
    }
    return out;
}

long long multi_index_count(int variables, int order) {
    // C(M + p - 1, p) computed incrementally; exact for the sizes used here.
    long long result = 1;
    for (int i = 1; i <= order; ++i) {
        result = result * (variables + i - 1) / i;
    }
    return result;
}

std::vector<int> conjugation_permutation(int variables,
                                         std::span<const std::pair<int, int>> conjugate_pairs) {
    std::vector<int> perm(static_cast<std::size_t>(variables));
    for (int i = 0; i < variables; ++i) perm[static_cast<std::size_t>(i)] = i;
    for (const auto& [a, b] : conjugate_pairs) {
        require(a >= 0 && b >= 0 && a < variables && b < variables && a != b,
                ErrorCode::InvalidArgument, "conjugate pair index out of range");
        perm[static_cast<std::size_t>(a)] = b;
        perm[static_cast<std::size_t>(b)] = a;
    }
    return perm;
}

}  // namespace isored
