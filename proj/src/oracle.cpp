#include "isored/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "isored/error.hpp"

namespace isored {

namespace {

using ScalarPolynomial = std::map<MultiIndex, cplx>;

ScalarPolynomial multiply(const ScalarPolynomial& a, const ScalarPolynomial& b, int max_order) {
    ScalarPolynomial out;
    for (const auto& [ia, va] : a) {
        for (const auto& [ib, vb] : b) {
            if (ia.order() + ib.order() > max_order) continue;
            out[ia.merged(ib)] += va * vb;
        }
    }
    return out;
}

void add_scaled(ScalarPolynomial& acc, const ScalarPolynomial& p, cplx scale) {
    if (scale == cplx{}) return;
    for (const auto& [i, v] : p) acc[i] += scale * v;
}

ScalarPolynomial component(const VectorPolynomial& p, int j) {
    ScalarPolynomial out;
    for (const auto& [i, v] : p) {
        if (v(j) != cplx{}) out[i] = v(j);
    }
    return out;
}

// prod_i dx_{alpha_i}(psi) for state multi-indices alpha, cached by prefix.
class CompositionCache {
public:
    CompositionCache(const VectorPolynomial& dx, int dimension, int max_order) : max_order_(max_order) {
        for (int j = 0; j < dimension; ++j) components_.push_back(component(dx, j));
    }

    const ScalarPolynomial& get(const MultiIndex& alpha) {
        auto it = cache_.find(alpha);
        if (it != cache_.end()) return it->second;
        ScalarPolynomial value;
        if (alpha.empty()) {
            value[MultiIndex{}] = 1.0;
        } else {
            std::vector<int> prefix(alpha.indices().begin(), alpha.indices().end() - 1);
            const ScalarPolynomial head = get(MultiIndex(std::move(prefix)));
            value = multiply(head, components_[static_cast<std::size_t>(alpha.indices().back())], max_order_);
        }
        return cache_.emplace(alpha, std::move(value)).first->second;
    }

private:
    int max_order_;
    std::vector<ScalarPolynomial> components_;
    std::map<MultiIndex, ScalarPolynomial> cache_;
};

MultiIndex without_one(const MultiIndex& alpha, int j) {
    std::vector<int> rest = alpha.indices();
    rest.erase(std::find(rest.begin(), rest.end(), j));
    return MultiIndex(std::move(rest));
}

int multiplicity(const MultiIndex& alpha, int j) {
    return static_cast<int>(std::count(alpha.indices().begin(), alpha.indices().end(), j));
}

double factorial_weight(const MultiIndex& alpha) {
    double w = 1.0;
    int run = 0;
    for (std::size_t i = 0; i < alpha.indices().size(); ++i) {
        run = (i > 0 && alpha[i] == alpha[i - 1]) ? run + 1 : 1;
        w *= run;
    }
    return w;
}

// Mixed partial derivative d^alpha F(x) by nested central differences.
Eigen::VectorXd nested_difference(const KnownSystem& sys, const Eigen::VectorXd& x, const std::vector<int>& dirs,
                                  std::size_t depth, double h) {
    if (depth == dirs.size()) return sys.field(x);
    Eigen::VectorXd xp = x, xm = x;
    xp(dirs[depth]) += h;
    xm(dirs[depth]) -= h;
    return (nested_difference(sys, xp, dirs, depth + 1, h) - nested_difference(sys, xm, dirs, depth + 1, h)) /
           (2.0 * h);
}

double min_real_gap(const Eigen::VectorXcd& eigs, cplx target) {
    double gap = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < eigs.size(); ++k) gap = std::min(gap, std::abs(eigs(k) - target));
    return gap;
}

}  // namespace

VectorPolynomial taylor_field(const KnownSystem& sys, int max_order) {
    require(max_order >= 1, ErrorCode::InvalidArgument, "Taylor order must be >= 1");
    if (sys.taylor) {
        VectorPolynomial out;
        for (const auto& [alpha, c] : *sys.taylor) {
            require(c.size() == sys.dimension, ErrorCode::DimensionMismatch, "Taylor coefficient has the wrong length");
            if (alpha.order() >= 1 && alpha.order() <= max_order) out[alpha] = c;
        }
        return out;
    }
    require(static_cast<bool>(sys.field), ErrorCode::MissingDerivativeTensor, "system has neither a field nor Taylor data");
    require(max_order <= 4, ErrorCode::MissingDerivativeTensor, "finite-difference Taylor data is capped at order 4");
    VectorPolynomial out;
    const double eps = std::numeric_limits<double>::epsilon();
    for (int d = 1; d <= max_order; ++d) {
        const double h = std::pow(eps, 1.0 / (d + 2)) * (1.0 + sys.fixed_point.cwiseAbs().maxCoeff());
        for (const auto& alpha : multi_indices(sys.dimension, d)) {
            const Eigen::VectorXd coarse = nested_difference(sys, sys.fixed_point, alpha.indices(), 0, h);
            const Eigen::VectorXd fine = nested_difference(sys, sys.fixed_point, alpha.indices(), 0, 0.5 * h);
            const Eigen::VectorXd deriv = (4.0 * fine - coarse) / 3.0;
            out[alpha] = (deriv / factorial_weight(alpha)).cast<cplx>();
        }
    }
    return out;
}

Linearization linearize(const KnownSystem& sys) {
    require(sys.dimension >= 1 && sys.fixed_point.size() == sys.dimension, ErrorCode::DimensionMismatch,
            "fixed point has the wrong dimension");
    if (sys.field) {
        const double residual = sys.field(sys.fixed_point).cwiseAbs().maxCoeff();
        require(residual <= 1e-10, ErrorCode::InvariantViolation,
                "F(x0) = " + std::to_string(residual) + " is not a fixed point");
    }
    const auto first = taylor_field(sys, 1);
    Linearization lin;
    lin.jacobian = Eigen::MatrixXd::Zero(sys.dimension, sys.dimension);
    for (const auto& [alpha, c] : first) lin.jacobian.col(alpha[0]) = c.real();

    Eigen::EigenSolver<Eigen::MatrixXd> eig(lin.jacobian);
    require(eig.info() == Eigen::Success, ErrorCode::InvariantViolation, "Jacobian eigendecomposition failed");
    std::vector<int> order(static_cast<std::size_t>(sys.dimension));
    std::iota(order.begin(), order.end(), 0);
    const Eigen::VectorXcd values = eig.eigenvalues();
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        const double ra = std::abs(values(a).real());
        const double rb = std::abs(values(b).real());
        if (std::abs(ra - rb) > 1e-12 * (1.0 + ra)) return ra < rb;
        return values(a).imag() > values(b).imag();
    });
    lin.eigenvalues.resize(sys.dimension);
    lin.right.resize(sys.dimension, sys.dimension);
    for (int k = 0; k < sys.dimension; ++k) {
        lin.eigenvalues(k) = values(order[static_cast<std::size_t>(k)]);
        lin.right.col(k) = eig.eigenvectors().col(order[static_cast<std::size_t>(k)]);
    }
    lin.left = lin.right.inverse();
    const Eigen::MatrixXcd jc = lin.jacobian.cast<cplx>();
    for (int k = 0; k < sys.dimension; ++k) {
        const double defect = (lin.left.row(k) * jc - lin.eigenvalues(k) * lin.left.row(k)).cwiseAbs().maxCoeff();
        require(defect <= 1e-8 * (1.0 + std::abs(lin.eigenvalues(k))) * (1.0 + lin.left.row(k).cwiseAbs().maxCoeff()),
                ErrorCode::InvariantViolation, "left eigenvector check failed");
    }
    return lin;
}

Eigen::VectorXd flow(const KnownSystem& sys, const Eigen::VectorXd& x, double horizon) {
    require(static_cast<bool>(sys.field), ErrorCode::InvalidArgument, "flow needs the vector field");
    require(horizon >= 0.0, ErrorCode::InvalidArgument, "horizon must be non-negative");
    const auto lin = linearize(sys);
    const double rate = lin.eigenvalues.cwiseAbs().maxCoeff();
    const double dt_max = rate > 0.0 ? 0.05 / rate : horizon;
    const auto steps = std::max<long long>(1, static_cast<long long>(std::ceil(horizon / dt_max)));
    const double dt = horizon / static_cast<double>(steps);
    Eigen::VectorXd state = x;
    for (long long i = 0; i < steps; ++i) {
        const Eigen::VectorXd k1 = sys.field(state);
        const Eigen::VectorXd k2 = sys.field(state + 0.5 * dt * k1);
        const Eigen::VectorXd k3 = sys.field(state + 0.5 * dt * k2);
        const Eigen::VectorXd k4 = sys.field(state + dt * k3);
        state += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        require(state.allFinite(), ErrorCode::NotConverged, "trajectory left the finite range");
    }
    return state;
}

cplx direct_isostable(const KnownSystem& sys, const Linearization& lin, const Eigen::VectorXd& x, int n,
                      const DirectIsostableOptions& options) {
    require(n >= 0 && n < sys.dimension, ErrorCode::InvalidArgument, "isostable index out of range");
    const cplx lam = lin.eigenvalues(n);
    double horizon = options.horizon;
    if (horizon <= 0.0) {
        double rate = std::abs(lam.real());
        for (Eigen::Index k = 0; k < lin.eigenvalues.size(); ++k) {
            const double gap = std::abs(lin.eigenvalues(k).real()) - std::abs(lam.real());
            if (gap > 1e-9 * (1.0 + std::abs(lam.real()))) rate = std::min(rate, gap);
        }
        horizon = std::log(1e10) / rate;
    }
    const Eigen::VectorXd dx0 = x - sys.fixed_point;
    const Eigen::VectorXd at_t = flow(sys, x, horizon);
    const Eigen::VectorXd at_late = flow(sys, at_t, 0.25 * horizon);
    // Convergence is judged on the slowest mode's time scale.
    const double slow = std::abs(lin.eigenvalues(0).real());
    const double settle = std::max(0.0, std::log(1e6) / slow - 1.25 * horizon);
    const Eigen::VectorXd settled = settle > 0.0 ? flow(sys, at_late, settle) : at_late;
    require((settled - sys.fixed_point).norm() <= 1e-4 * std::max(1.0, dx0.norm()), ErrorCode::NotConverged,
            "trajectory did not approach the fixed point");

    const cplx v1 = (lin.left.row(n) * (at_t - sys.fixed_point).cast<cplx>())(0) * std::exp(-lam * horizon);
    const cplx v2 = (lin.left.row(n) * (at_late - sys.fixed_point).cast<cplx>())(0) * std::exp(-lam * 1.25 * horizon);
    const double scale = std::max({std::abs(v1), std::abs(v2), 1e-300});
    require(std::abs(v1 - v2) <= options.agreement * std::max(scale, 1e-12 * dx0.norm()), ErrorCode::LimitUnstable,
            "isostable limit disagrees between horizons (" + std::to_string(std::abs(v1 - v2)) + ")");
    return v2;
}

VectorPolynomial solve_g_tensors(const KnownSystem& sys, const Linearization& lin, int isostables, int max_order) {
    require(isostables >= 1 && isostables <= sys.dimension, ErrorCode::InvalidArgument, "isostable count out of range");
    require(max_order >= 1, ErrorCode::InvalidArgument, "order must be >= 1");
    const auto field = taylor_field(sys, max_order);
    const Eigen::MatrixXcd jc = lin.jacobian.cast<cplx>();
    const double lam_scale = 1.0 + lin.eigenvalues.cwiseAbs().maxCoeff();
    VectorPolynomial g;
    for (int n = 0; n < isostables; ++n) g[MultiIndex{n}] = lin.right.col(n);
    for (int p = 2; p <= max_order; ++p) {
        CompositionCache cache(g, sys.dimension, p);
        for (const auto& beta : multi_indices(isostables, p)) {
            cplx sum_lam{};
            for (int b : beta.indices()) sum_lam += lin.eigenvalues(b);
            require(min_real_gap(lin.eigenvalues, sum_lam) > 1e-8 * lam_scale, ErrorCode::ResonantCombination,
                    "eigenvalue sum for " + beta.to_string() + " is resonant");
            Eigen::VectorXcd q = Eigen::VectorXcd::Zero(sys.dimension);
            for (const auto& [alpha, c] : field) {
                if (alpha.order() < 2) continue;
                const auto& prod = cache.get(alpha);
                auto it = prod.find(beta);
                if (it != prod.end()) q += c * it->second;
            }
            const Eigen::MatrixXcd lhs = jc - sum_lam * Eigen::MatrixXcd::Identity(sys.dimension, sys.dimension);
            g[beta] = lhs.partialPivLu().solve(-q);
        }
    }
    return g;
}

std::vector<VectorPolynomial> solve_I_tensors(const KnownSystem& sys, const Linearization& lin,
                                              const VectorPolynomial& g, int isostables, int max_order) {
    require(isostables >= 1 && isostables <= sys.dimension, ErrorCode::InvalidArgument, "isostable count out of range");
    require(max_order >= 0, ErrorCode::InvalidArgument, "order must be >= 0");
    for (const auto& beta : multi_indices_up_to(isostables, max_order)) {
        if (beta.order() >= 1) {
            require(g.count(beta) == 1, ErrorCode::MissingDerivativeTensor,
                    "g tensor " + beta.to_string() + " is needed for the I expansion");
        }
    }
    const auto field = taylor_field(sys, max_order + 1);
    const Eigen::MatrixXcd jt = lin.jacobian.transpose().cast<cplx>();
    const double lam_scale = 1.0 + lin.eigenvalues.cwiseAbs().maxCoeff();
    const int dim = sys.dimension;
    VectorPolynomial dx;
    for (const auto& [beta, v] : g) {
        if (beta.order() <= max_order) dx[beta] = v;
    }
    CompositionCache cache(dx, dim, max_order);

    std::vector<VectorPolynomial> result(static_cast<std::size_t>(isostables));
    for (int n = 0; n < isostables; ++n) {
        auto& in = result[static_cast<std::size_t>(n)];
        in[MultiIndex{}] = lin.left.row(n).transpose();
        for (int p = 1; p <= max_order; ++p) {
            // q_j = coefficient of Delta J^T I_{<p}: sum over alpha, j of mult_j(alpha) prod(alpha \ j) (c_alpha . I)
            std::vector<ScalarPolynomial> q(static_cast<std::size_t>(dim));
            for (const auto& [alpha, c] : field) {
                if (alpha.order() < 2) continue;
                ScalarPolynomial ci;
                for (const auto& [beta, vec] : in) {
                    const cplx v = c.transpose() * vec;
                    if (v != cplx{}) ci[beta] = v;
                }
                std::vector<int> seen;
                for (int j : alpha.indices()) {
                    if (std::find(seen.begin(), seen.end(), j) != seen.end()) continue;
                    seen.push_back(j);
                    const auto& rest = cache.get(without_one(alpha, j));
                    add_scaled(q[static_cast<std::size_t>(j)], multiply(rest, ci, p), static_cast<double>(multiplicity(alpha, j)));
                }
            }
            for (const auto& beta : multi_indices(isostables, p)) {
                cplx sum_lam{};
                for (int b : beta.indices()) sum_lam += lin.eigenvalues(b);
                const cplx shift = sum_lam - lin.eigenvalues(n);
                require(min_real_gap(lin.eigenvalues, -shift) > 1e-8 * lam_scale, ErrorCode::ResonantCombination,
                        "I expansion for isostable " + std::to_string(n + 1) + " resonant at " + beta.to_string());
                Eigen::VectorXcd rhs(dim);
                for (int j = 0; j < dim; ++j) {
                    const auto& qj = q[static_cast<std::size_t>(j)];
                    auto it = qj.find(beta);
                    rhs(j) = it == qj.end() ? cplx{} : -it->second;
                }
                const Eigen::MatrixXcd lhs = jt + shift * Eigen::MatrixXcd::Identity(dim, dim);
                in[beta] = lhs.partialPivLu().solve(rhs);
            }
        }
    }
    return result;
}

RegressionResult regress_expansion(const std::vector<std::vector<cplx>>& psi, const std::vector<cplx>& values,
                                   int isostables, int max_order, int min_order, double condition_cap) {
    require(psi.size() == values.size(), ErrorCode::DimensionMismatch, "sample and value counts differ");
    require(min_order >= 0 && max_order >= min_order, ErrorCode::InvalidArgument, "bad order range");
    std::vector<MultiIndex> basis;
    for (const auto& beta : multi_indices_up_to(isostables, max_order)) {
        if (beta.order() >= min_order) basis.push_back(beta);
    }
    require(psi.size() >= 2 * basis.size(), ErrorCode::InvalidArgument,
            "need at least twice as many samples as monomials (" + std::to_string(basis.size()) + ")");
    const auto rows = static_cast<Eigen::Index>(psi.size());
    const auto cols = static_cast<Eigen::Index>(basis.size());
    Eigen::MatrixXcd a(rows, cols);
    Eigen::VectorXcd b(rows);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const auto& p = psi[static_cast<std::size_t>(i)];
        require(static_cast<int>(p.size()) == isostables, ErrorCode::DimensionMismatch, "sample has the wrong dimension");
        for (Eigen::Index j = 0; j < cols; ++j) a(i, j) = basis[static_cast<std::size_t>(j)].monomial(p);
        b(i) = values[static_cast<std::size_t>(i)];
    }
    Eigen::VectorXd norms = a.colwise().norm().transpose();
    require(norms.minCoeff() > 0.0, ErrorCode::IllConditioned, "a monomial vanishes on every sample");
    const Eigen::MatrixXcd scaled = a * norms.cwiseInverse().asDiagonal();
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(scaled, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    RegressionResult out;
    out.condition = sv(0) / sv(sv.size() - 1);
    require(out.condition <= condition_cap, ErrorCode::IllConditioned,
            "regression condition number " + std::to_string(out.condition));
    const Eigen::VectorXcd x = norms.cwiseInverse().asDiagonal() * svd.solve(b);
    out.tensor = ExpansionTensor(max_order);
    for (Eigen::Index j = 0; j < cols; ++j) out.tensor.set(basis[static_cast<std::size_t>(j)], x(j));
    out.residual = (a * x - b).norm();
    return out;
}

ReducedModel oracle_model(const KnownSystem& sys, int isostables, int order) {
    require(order >= 1, ErrorCode::InvalidArgument, "model order must be >= 1");
    require(sys.input_direction.size() == sys.dimension, ErrorCode::DimensionMismatch, "input direction has wrong size");
    require(sys.output.cols() == sys.dimension, ErrorCode::DimensionMismatch, "output matrix has wrong width");
    const auto lin = linearize(sys);
    const auto g = solve_g_tensors(sys, lin, isostables, order);
    const auto in = solve_I_tensors(sys, lin, g, isostables, order - 1);

    std::vector<cplx> eigs;
    for (int n = 0; n < isostables; ++n) eigs.push_back(lin.eigenvalues(n));
    std::vector<std::pair<int, int>> pairs;
    std::vector<bool> used(static_cast<std::size_t>(isostables), false);
    for (int n = 0; n < isostables; ++n) {
        if (used[static_cast<std::size_t>(n)] || eigs[static_cast<std::size_t>(n)].imag() == 0.0) continue;
        bool found = false;
        for (int k = n + 1; k < isostables; ++k) {
            const auto tol = 1e-9 * (1.0 + std::abs(eigs[static_cast<std::size_t>(n)]));
            if (!used[static_cast<std::size_t>(k)] &&
                std::abs(eigs[static_cast<std::size_t>(k)] - std::conj(eigs[static_cast<std::size_t>(n)])) <= tol) {
                pairs.emplace_back(n, k);
                used[static_cast<std::size_t>(n)] = used[static_cast<std::size_t>(k)] = true;
                eigs[static_cast<std::size_t>(k)] = std::conj(eigs[static_cast<std::size_t>(n)]);
                found = true;
                break;
            }
        }
        require(found, ErrorCode::InvalidArgument, "isostable count splits a complex-conjugate pair");
    }

    const Eigen::VectorXcd a = sys.input_direction.cast<cplx>();
    std::vector<cplx> c(static_cast<std::size_t>(isostables));
    for (int n = 0; n < isostables; ++n) {
        c[static_cast<std::size_t>(n)] = (lin.left.row(n) * a)(0);
        require(std::abs(c[static_cast<std::size_t>(n)]) > 1e-12, ErrorCode::InvalidArgument,
                "isostable " + std::to_string(n + 1) + " is not excited by the input direction");
    }
    auto scale_of = [&](const MultiIndex& beta) {
        cplx s = 1.0;
        for (int b : beta.indices()) s *= c[static_cast<std::size_t>(b)];
        return s;
    };

    Eigen::VectorXd y0 = sys.output * sys.fixed_point;
    ReducedModel model =
        ReducedModel::blank(eigs, pairs, std::vector<double>(y0.data(), y0.data() + y0.size()), order);
    const Eigen::MatrixXcd out = sys.output.cast<cplx>();
    for (const auto& [beta, v] : g) {
        const Eigen::VectorXcd yv = out * v * scale_of(beta);
        for (Eigen::Index m = 0; m < yv.size(); ++m) model.g_tensors[static_cast<std::size_t>(m)].set(beta, yv(m));
    }
    for (int n = 0; n < isostables; ++n) {
        for (const auto& [beta, v] : in[static_cast<std::size_t>(n)]) {
            const cplx value = beta.empty() ? cplx{1.0} : (v.transpose() * a)(0) * scale_of(beta) / c[static_cast<std::size_t>(n)];
            model.i_tensors[static_cast<std::size_t>(n)].set(beta, value);
        }
    }
    // Clean rounding-level asymmetry so the conjugate-pair invariant holds exactly.
    const auto perm = conjugation_permutation(isostables, pairs);
    ReducedModel sym = model;
    for (int n = 0; n < isostables; ++n) {
        for (const auto& [beta, v] : model.i_tensors[static_cast<std::size_t>(n)].entries()) {
            const cplx mirror = model.i_tensors[static_cast<std::size_t>(perm[static_cast<std::size_t>(n)])].get(beta.relabeled(perm));
            sym.i_tensors[static_cast<std::size_t>(n)].set(beta, beta.empty() ? cplx{1.0} : 0.5 * (v + std::conj(mirror)));
        }
    }
    for (std::size_t m = 0; m < model.g_tensors.size(); ++m) {
        for (const auto& [beta, v] : model.g_tensors[m].entries()) {
            sym.g_tensors[m].set(beta, 0.5 * (v + std::conj(model.g_tensors[m].get(beta.relabeled(perm)))));
        }
    }
    sym.validate();
    return sym;
}

}  // namespace isored
