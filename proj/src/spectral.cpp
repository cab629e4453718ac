#include "isored/spectral.hpp"

#include <algorithm>
#include <numeric>
#include <cmath>
#include <numbers>
#include <sstream>

#include "isored/error.hpp"

namespace isored {

SnapshotMatrix stack_snapshots(const std::vector<std::vector<double>>& samples, int window, double dt,
                               const std::vector<double>& y0) {
    require(window >= 1, ErrorCode::InvalidArgument, "window length must be >= 1");
    require(dt > 0.0, ErrorCode::InvalidArgument, "sample period must be positive");
    const auto k = static_cast<std::size_t>(window);
    const std::size_t columns = samples.size() / k;
    require(columns >= 1, ErrorCode::TooFewSamples,
            std::to_string(samples.size()) + " samples do not fill one window of " + std::to_string(window));
    const std::size_t ny = y0.size();
    SnapshotMatrix out;
    out.window = window;
    out.dt = dt;
    out.y0 = y0;
    out.y.resize(static_cast<Eigen::Index>(k * ny), static_cast<Eigen::Index>(columns));
    for (std::size_t i = 0; i < columns; ++i) {
        for (std::size_t m = 0; m < k; ++m) {
            const auto& row = samples[i * k + m];
            require(row.size() == ny, ErrorCode::DimensionMismatch, "sample width disagrees with baseline");
            for (std::size_t c = 0; c < ny; ++c) {
                out.y(static_cast<Eigen::Index>(m * ny + c), static_cast<Eigen::Index>(i)) = row[c] - y0[c];
            }
        }
    }
    return out;
}

SnapshotMatrix stack_snapshots(const std::vector<double>& samples, int window, double dt, double y0) {
    std::vector<std::vector<double>> rows;
    rows.reserve(samples.size());
    for (double v : samples) rows.push_back({v});
    return stack_snapshots(rows, window, dt, std::vector<double>{y0});
}

void PodBasis::check() const {
    const Eigen::MatrixXd gram = modes.transpose() * modes;
    const double defect = (gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff();
    require(modes.cols() == 0 || defect <= 1e-10, ErrorCode::InvariantViolation, "POD modes are not orthonormal");
    for (Eigen::Index i = 0; i < energies.size(); ++i) {
        require(energies(i) >= 0.0, ErrorCode::InvariantViolation, "negative POD energy");
        require(i == 0 || energies(i) <= energies(i - 1), ErrorCode::InvariantViolation, "POD energies not descending");
    }
}

PodBasis pod(const Eigen::MatrixXd& snapshots, const PodSelection& selection) {
    require(snapshots.size() > 0, ErrorCode::DegenerateCovariance, "empty snapshot matrix");
    const Eigen::MatrixXd cov = snapshots * snapshots.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    require(eig.info() == Eigen::Success, ErrorCode::DegenerateCovariance, "covariance eigendecomposition failed");
    const Eigen::Index n = cov.rows();
    // Eigen returns ascending order.
    Eigen::VectorXd energies = eig.eigenvalues().reverse().cwiseMax(0.0);
    const Eigen::MatrixXd vectors = eig.eigenvectors().rowwise().reverse();
    const double total = energies.sum();
    require(total > 0.0 && energies(0) > 1e-300, ErrorCode::DegenerateCovariance, "snapshot covariance is numerically zero");

    int keep = selection.modes;
    if (keep <= 0) {
        require(selection.energy_target > 0.0 && selection.energy_target <= 1.0, ErrorCode::InvalidArgument,
                "POD selection needs a mode count or an energy target in (0, 1]");
        double acc = 0.0;
        keep = 0;
        while (keep < n) {
            acc += energies(keep);
            ++keep;
            if (acc >= selection.energy_target * total) break;
        }
    }
    require(keep <= n, ErrorCode::InvalidArgument, "more POD modes requested than snapshot dimension");

    PodBasis basis;
    basis.modes = vectors.leftCols(keep);
    // Fix each mode's sign so its largest-magnitude entry is positive.
    for (Eigen::Index j = 0; j < keep; ++j) {
        Eigen::Index arg = 0;
        basis.modes.col(j).cwiseAbs().maxCoeff(&arg);
        if (basis.modes(arg, j) < 0.0) basis.modes.col(j) *= -1.0;
    }
    basis.energies = energies;
    basis.coefficients = basis.modes.transpose() * snapshots;
    basis.captured = energies.head(keep).sum() / total;
    basis.check();
    return basis;
}

cplx map_rate(cplx propagator_eigenvalue, double stride, RateMap map) {
    require(stride > 0.0, ErrorCode::InvalidArgument, "window stride must be positive");
    if (map == RateMap::Literal) return propagator_eigenvalue / stride;
    return std::log(propagator_eigenvalue) / stride;
}

CoarseEstimate coarse_eigenvalues(const PodBasis& basis, int window, double dt, int count, RateMap map) {
    require(count >= 1, ErrorCode::InvalidArgument, "need at least one eigenvalue");
    require(basis.size() >= count, ErrorCode::InsufficientRank,
            "POD basis has " + std::to_string(basis.size()) + " modes, fewer than " + std::to_string(count));
    const Eigen::Index l = basis.coefficients.cols();
    require(l >= count + 2, ErrorCode::InsufficientRank, "too few coefficient snapshots for the propagator");
    const Eigen::MatrixXd x_minus = basis.coefficients.leftCols(l - 1);
    const Eigen::MatrixXd x_plus = basis.coefficients.rightCols(l - 1);
    // A = X+ pinv(X-), via least squares on the transposed system.
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(x_minus.transpose());
    require(cod.rank() == x_minus.rows(), ErrorCode::InsufficientRank, "POD coefficient history is rank deficient");
    const Eigen::MatrixXd a = cod.solve(x_plus.transpose()).transpose();
    Eigen::EigenSolver<Eigen::MatrixXd> eig(a);
    require(eig.info() == Eigen::Success, ErrorCode::InsufficientRank, "propagator eigendecomposition failed");

    const double stride = window * dt;
    CoarseEstimate est;
    for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i) {
        est.propagator_eigenvalues.push_back(eig.eigenvalues()(i));
        est.all_rates.push_back(map_rate(eig.eigenvalues()(i), stride, map));
    }
    std::vector<cplx> sorted = est.all_rates;
    std::stable_sort(sorted.begin(), sorted.end(), [](cplx a1, cplx b1) { return a1.real() > b1.real(); });
    est.eigenvalues.assign(sorted.begin(), sorted.begin() + count);
    for (const auto& lam : est.eigenvalues) {
        if (!(lam.real() < 0.0) || !std::isfinite(lam.real())) {
            std::ostringstream os;
            os << "estimated rate " << lam.real() << (lam.imag() >= 0 ? "+" : "") << lam.imag() << "i is not decaying";
            throw Error(ErrorCode::UnstableEstimate, os.str());
        }
    }
    return est;
}

// ---------------------------------------------------------------------------

namespace {

struct Group {
    int lead = 0;
    int partner = -1;  // -1 for a real mode
    [[nodiscard]] bool paired() const { return partner >= 0; }
    [[nodiscard]] int width() const { return paired() ? 2 : 1; }
};

std::vector<Group> groups_of(int m, const std::vector<std::pair<int, int>>& pairs) {
    std::vector<int> second(static_cast<std::size_t>(m), -1);
    std::vector<int> first(static_cast<std::size_t>(m), -1);
    for (const auto& [a, b] : pairs) {
        const int lo = std::min(a, b);
        const int hi = std::max(a, b);
        first[static_cast<std::size_t>(lo)] = hi;
        second[static_cast<std::size_t>(hi)] = lo;
    }
    std::vector<Group> out;
    for (int n = 0; n < m; ++n) {
        if (second[static_cast<std::size_t>(n)] >= 0) continue;
        out.push_back({n, first[static_cast<std::size_t>(n)]});
    }
    return out;
}

struct Layout {
    std::vector<Group> groups;
    int lambda_vars = 0;
    int outputs = 0;
    [[nodiscard]] int size() const { return lambda_vars * (1 + outputs); }
};

Layout layout_of(const FirstOrderModel& model, int outputs) {
    Layout l;
    l.groups = groups_of(static_cast<int>(model.eigenvalues.size()), model.conjugate_pairs);
    for (const auto& g : l.groups) l.lambda_vars += g.width();
    l.outputs = outputs;
    return l;
}

Eigen::VectorXd pack(const FirstOrderModel& model, const Layout& l) {
    Eigen::VectorXd z(l.size());
    int i = 0;
    for (const auto& g : l.groups) {
        const cplx lam = model.eigenvalues[static_cast<std::size_t>(g.lead)];
        z(i++) = lam.real();
        if (g.paired()) z(i++) = lam.imag();
    }
    for (int m = 0; m < l.outputs; ++m) {
        for (const auto& g : l.groups) {
            const cplx v = model.g(m, g.lead);
            z(i++) = v.real();
            if (g.paired()) z(i++) = v.imag();
        }
    }
    return z;
}

FirstOrderModel unpack(const Eigen::VectorXd& z, const FirstOrderModel& shape, const Layout& l) {
    FirstOrderModel out = shape;
    out.g.resize(l.outputs, static_cast<Eigen::Index>(shape.eigenvalues.size()));
    int i = 0;
    for (const auto& g : l.groups) {
        if (g.paired()) {
            const cplx lam{z(i), z(i + 1)};
            i += 2;
            out.eigenvalues[static_cast<std::size_t>(g.lead)] = lam;
            out.eigenvalues[static_cast<std::size_t>(g.partner)] = std::conj(lam);
        } else {
            out.eigenvalues[static_cast<std::size_t>(g.lead)] = z(i++);
        }
    }
    for (int m = 0; m < l.outputs; ++m) {
        for (const auto& g : l.groups) {
            if (g.paired()) {
                const cplx v{z(i), z(i + 1)};
                i += 2;
                out.g(m, g.lead) = v;
                out.g(m, g.partner) = std::conj(v);
            } else {
                out.g(m, g.lead) = z(i++);
            }
        }
    }
    return out;
}

// s = -lambda / (w^2 + lambda^2), c = -w / (w^2 + lambda^2) and their lambda-derivatives.
struct Response {
    cplx s, c, ds, dc;
};

Response response(cplx lam, double w) {
    const cplx d = w * w + lam * lam;
    return {-lam / d, -w / d, -(w * w - lam * lam) / (d * d), 2.0 * lam * w / (d * d)};
}

void check_records(const std::vector<ProbeRecord>& records) {
    require(!records.empty(), ErrorCode::InvalidArgument, "first-order fit needs probe records");
    for (const auto& r : records) {
        require(r.outputs() == records.front().outputs(), ErrorCode::InconsistentProbeGrids,
                "probe records disagree on output count");
        require(r.j_max >= 1, ErrorCode::MissingHarmonic, "probe records lack harmonic 1");
    }
}

Eigen::VectorXd residual(const std::vector<ProbeRecord>& records, const FirstOrderModel& model) {
    const auto ny = static_cast<Eigen::Index>(records.front().outputs());
    const auto q = static_cast<Eigen::Index>(records.size());
    Eigen::VectorXd h(2 * q * ny);
    for (Eigen::Index m = 0; m < ny; ++m) {
        for (Eigen::Index r = 0; r < q; ++r) {
            const auto& rec = records[static_cast<std::size_t>(r)];
            cplx ps{}, pc{};
            for (std::size_t n = 0; n < model.eigenvalues.size(); ++n) {
                const auto resp = response(model.eigenvalues[n], rec.omega);
                ps += model.g(m, static_cast<Eigen::Index>(n)) * resp.s;
                pc += model.g(m, static_cast<Eigen::Index>(n)) * resp.c;
            }
            const double scale = std::numbers::pi * rec.epsilon;
            const Eigen::Index row = 2 * (m * q + r);
            h(row) = rec.sin[static_cast<std::size_t>(m)][1] / scale - ps.real();
            h(row + 1) = rec.cos[static_cast<std::size_t>(m)][1] / scale - pc.real();
        }
    }
    return h;
}

Eigen::MatrixXd jacobian(const std::vector<ProbeRecord>& records, const FirstOrderModel& model, const Layout& l) {
    const auto ny = static_cast<Eigen::Index>(l.outputs);
    const auto q = static_cast<Eigen::Index>(records.size());
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(2 * q * ny, l.size());
    for (Eigen::Index m = 0; m < ny; ++m) {
        for (Eigen::Index r = 0; r < q; ++r) {
            const double w = records[static_cast<std::size_t>(r)].omega;
            const Eigen::Index row = 2 * (m * q + r);
            int lam_col = 0;
            int g_col = l.lambda_vars + static_cast<int>(m) * l.lambda_vars;
            for (const auto& grp : l.groups) {
                const cplx lam = model.eigenvalues[static_cast<std::size_t>(grp.lead)];
                const cplx g = model.g(m, grp.lead);
                const auto resp = response(lam, w);
                if (!grp.paired()) {
                    jac(row, lam_col) = -(g * resp.ds).real();
                    jac(row + 1, lam_col) = -(g * resp.dc).real();
                    jac(row, g_col) = -resp.s.real();
                    jac(row + 1, g_col) = -resp.c.real();
                } else {
                    // contribution 2 Re(g f(lambda)) with lambda = a + ib, g = p + iq
                    const cplx i1{0.0, 1.0};
                    jac(row, lam_col) = -2.0 * (g * resp.ds).real();
                    jac(row, lam_col + 1) = -2.0 * (g * resp.ds * i1).real();
                    jac(row + 1, lam_col) = -2.0 * (g * resp.dc).real();
                    jac(row + 1, lam_col + 1) = -2.0 * (g * resp.dc * i1).real();
                    jac(row, g_col) = -2.0 * resp.s.real();
                    jac(row, g_col + 1) = -2.0 * (i1 * resp.s).real();
                    jac(row + 1, g_col) = -2.0 * resp.c.real();
                    jac(row + 1, g_col + 1) = -2.0 * (i1 * resp.c).real();
                }
                lam_col += grp.width();
                g_col += grp.width();
            }
        }
    }
    return jac;
}

// d/dz_k of the coefficient block dh/dg, for eigenvalue variable k.
Eigen::MatrixXd coefficient_block_derivative(const std::vector<ProbeRecord>& records, const FirstOrderModel& model,
                                            const Layout& l, int k) {
    const auto ny = static_cast<Eigen::Index>(l.outputs);
    const auto q = static_cast<Eigen::Index>(records.size());
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(2 * q * ny, l.size() - l.lambda_vars);
    const cplx i1{0.0, 1.0};
    int lam_col = 0;
    for (const auto& grp : l.groups) {
        if (k >= lam_col && k < lam_col + grp.width()) {
            // derivative of f(lambda) along the variable: real part, or i times for the imaginary part
            const cplx dir = k == lam_col ? cplx{1.0} : i1;
            const cplx lam = model.eigenvalues[static_cast<std::size_t>(grp.lead)];
            for (Eigen::Index m = 0; m < ny; ++m) {
                const int gc = lam_col + static_cast<int>(m) * l.lambda_vars;
                for (Eigen::Index r = 0; r < q; ++r) {
                    const auto resp = response(lam, records[static_cast<std::size_t>(r)].omega);
                    const Eigen::Index row = 2 * (m * q + r);
                    const cplx ds = dir * resp.ds;
                    const cplx dc = dir * resp.dc;
                    if (!grp.paired()) {
                        d(row, gc) = -ds.real();
                        d(row + 1, gc) = -dc.real();
                    } else {
                        d(row, gc) = -2.0 * ds.real();
                        d(row, gc + 1) = -2.0 * (i1 * ds).real();
                        d(row + 1, gc) = -2.0 * dc.real();
                        d(row + 1, gc + 1) = -2.0 * (i1 * dc).real();
                    }
                }
            }
        }
        lam_col += grp.width();
    }
    return d;
}

bool all_stable(const FirstOrderModel& model) {
    return std::all_of(model.eigenvalues.begin(), model.eigenvalues.end(),
                       [](cplx l) { return l.real() < 0.0 && std::isfinite(l.real()) && std::isfinite(l.imag()); });
}

// Modes reordered slowest first (Re descending, positive imaginary part leading a pair).
FirstOrderModel sorted_by_decay(const FirstOrderModel& model) {
    const auto m = model.eigenvalues.size();
    std::vector<int> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        const cplx la = model.eigenvalues[static_cast<std::size_t>(a)];
        const cplx lb = model.eigenvalues[static_cast<std::size_t>(b)];
        if (la.real() != lb.real()) return la.real() > lb.real();
        return la.imag() > lb.imag();
    });
    std::vector<int> position(m);
    FirstOrderModel out = model;
    for (std::size_t i = 0; i < m; ++i) {
        const auto from = static_cast<std::size_t>(order[i]);
        position[from] = static_cast<int>(i);
        out.eigenvalues[i] = model.eigenvalues[from];
        out.g.col(static_cast<Eigen::Index>(i)) = model.g.col(static_cast<Eigen::Index>(from));
    }
    for (auto& [a, b] : out.conjugate_pairs) {
        a = position[static_cast<std::size_t>(a)];
        b = position[static_cast<std::size_t>(b)];
        if (a > b) std::swap(a, b);
    }
    return out;
}

}  // namespace

Eigen::VectorXd first_order_residual(const std::vector<ProbeRecord>& records, const FirstOrderModel& model) {
    check_records(records);
    return residual(records, model);
}

Eigen::MatrixXcd first_order_coefficients(const std::vector<ProbeRecord>& records, const std::vector<cplx>& eigenvalues,
                                          const std::vector<std::pair<int, int>>& conjugate_pairs) {
    check_records(records);
    FirstOrderModel model{eigenvalues, conjugate_pairs,
                          Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(records.front().outputs()),
                                                 static_cast<Eigen::Index>(eigenvalues.size()))};
    const Layout l = layout_of(model, static_cast<int>(records.front().outputs()));
    // h is affine in g: h(g) = h(0) + J_g g.
    const Eigen::VectorXd h0 = residual(records, model);
    const Eigen::MatrixXd jg = jacobian(records, model, l).rightCols(l.size() - l.lambda_vars);
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(jg);
    require(cod.rank() == jg.cols(), ErrorCode::RankDeficient, "first-order coefficients are not identifiable");
    const Eigen::VectorXd gvars = cod.solve(-h0);
    Eigen::VectorXd z = pack(model, l);
    z.tail(gvars.size()) = gvars;
    return unpack(z, model, l).g;
}

NewtonResult newton_refine(const std::vector<ProbeRecord>& records, FirstOrderModel initial,
                           const NewtonOptions& options) {
    check_records(records);
    const int ny = static_cast<int>(records.front().outputs());
    require(!initial.eigenvalues.empty(), ErrorCode::InvalidArgument, "need initial eigenvalues");
    require(all_stable(initial), ErrorCode::UnstableEigenvalue, "initial eigenvalues must have Re < 0");
    if (initial.g.size() == 0 || options.project_coefficients) {
        initial.g = first_order_coefficients(records, initial.eigenvalues, initial.conjugate_pairs);
    }
    require(initial.g.rows() == ny && initial.g.cols() == static_cast<Eigen::Index>(initial.eigenvalues.size()),
            ErrorCode::DimensionMismatch, "initial coefficients have the wrong shape");

    const Layout l = layout_of(initial, ny);
    Eigen::VectorXd z = pack(initial, l);
    FirstOrderModel current = unpack(z, initial, l);
    Eigen::VectorXd h = residual(records, current);

    // Candidate for z + step * dz; with projection only the eigenvalue block
    // of dz is used and the coefficients are refitted.
    auto candidate_at = [&](const Eigen::VectorXd& trial) {
        FirstOrderModel c = unpack(trial, initial, l);
        if (options.project_coefficients && all_stable(c)) {
            c.g = first_order_coefficients(records, c.eigenvalues, c.conjugate_pairs);
        }
        return c;
    };

    NewtonResult result;
    result.initial_residual = h.norm();
    result.residual_history.push_back(h.norm());
    for (int it = 1; it <= options.max_iterations; ++it) {
        const Eigen::MatrixXd jac = jacobian(records, current, l);
        Eigen::VectorXd dz = Eigen::VectorXd::Zero(z.size());
        if (options.project_coefficients) {
            // h = b + B(lambda) g with g = argmin; the derivative of the projected
            // residual is P dB g - pinv(B)^T dB^T h (Golub-Pereyra).
            const Eigen::MatrixXd jg = jac.rightCols(l.size() - l.lambda_vars);
            const Eigen::MatrixXd jl = jac.leftCols(l.lambda_vars);
            Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> gcod(jg);
            Eigen::MatrixXd reduced = jl - jg * gcod.solve(jl);
            const Eigen::MatrixXd pinv_t = gcod.solve(Eigen::MatrixXd::Identity(jg.rows(), jg.rows())).transpose();
            for (int k = 0; k < l.lambda_vars; ++k) {
                reduced.col(k) -= pinv_t * (coefficient_block_derivative(records, current, l, k).transpose() * h);
            }
            dz.head(l.lambda_vars) = reduced.completeOrthogonalDecomposition().solve(-h);
        } else {
            dz = jac.completeOrthogonalDecomposition().solve(-h);
        }
        if (!dz.allFinite()) break;
        const double bound = options.tolerance * (1.0 + z.norm());

        double step = 1.0;
        bool accepted = false;
        Eigen::VectorXd moved;
        for (int halving = 0; halving <= options.max_halvings; ++halving, step *= 0.5) {
            const Eigen::VectorXd trial = z + step * dz;
            const FirstOrderModel candidate = candidate_at(trial);
            if (!all_stable(candidate)) continue;
            const Eigen::VectorXd h_trial = residual(records, candidate);
            if (h_trial.norm() <= h.norm()) {
                const Eigen::VectorXd z_new = pack(candidate, l);
                moved = z_new - z;
                z = z_new;
                current = candidate;
                h = h_trial;
                accepted = true;
                break;
            }
        }
        result.iterations = it;
        if (accepted) {
            result.history.push_back(current.eigenvalues);
            result.residual_history.push_back(h.norm());
            if (moved.norm() <= bound) {
                result.model = sorted_by_decay(current);
                result.residual = h.norm();
                return result;
            }
        } else if (dz.norm() <= bound) {
            // The remaining step is below the tolerance; rounding blocks any further decrease.
            result.model = sorted_by_decay(current);
            result.residual = h.norm();
            return result;
        } else {
            break;
        }
    }
    std::ostringstream os;
    os << "Newton refinement stopped after " << result.iterations << " iterations with residual " << h.norm();
    throw Error(ErrorCode::NoConvergence, os.str());
}

}  // namespace isored
