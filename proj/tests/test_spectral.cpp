#include <doctest.h>

#include <cmath>
#include <variant>

#include "isored/error.hpp"
#include "isored/spectral.hpp"
#include "isored/testbeds.hpp"

using namespace isored;

namespace {

// psi_n' = lambda_n psi_n + eps sin(w t) from rest, solved in closed form.
class ExactLinear final : public SystemUnderTest {
public:
    ExactLinear(std::vector<double> lambdas, std::vector<double> gains)
        : lambdas_(std::move(lambdas)), gains_(std::move(gains)) {}

    [[nodiscard]] std::size_t outputs() const override { return 1; }
    [[nodiscard]] std::vector<double> baseline() const override { return {0.0}; }
    [[nodiscard]] Trajectory run(const InputSignal& u, double t_end, double sample_dt) const override {
        const auto& s = std::get<Sinusoid>(u.variant());
        Trajectory traj;
        traj.names = {"y"};
        for (std::size_t i = 0; i < sample_count(t_end, sample_dt); ++i) {
            const double t = static_cast<double>(i) * sample_dt;
            double y = 0.0;
            for (std::size_t n = 0; n < lambdas_.size(); ++n) {
                const double l = lambdas_[n];
                const double den = s.omega * s.omega + l * l;
                const double a = -l / den, b = -s.omega / den;
                y += gains_[n] * s.epsilon *
                     (a * std::sin(s.omega * t) + b * std::cos(s.omega * t) - b * std::exp(l * t));
            }
            traj.times.push_back(t);
            traj.y.push_back({y});
        }
        return traj;
    }

private:
    std::vector<double> lambdas_;
    std::vector<double> gains_;
};

std::vector<ProbeRecord> linear_probes(const std::vector<double>& lambdas, const std::vector<double>& gains) {
    const ExactLinear sut(lambdas, gains);
    ProbeOptions opt;
    double slow = 1e9;
    for (double l : lambdas) slow = std::min(slow, std::abs(l));
    opt.slow_rate = slow;
    opt.settle_time_constants = 40.0;
    opt.avg_cycles = 2;
    opt.j_max = 1;
    return probe_sweep(sut, {0.1, 0.2, 0.35, 0.5, 0.8, 1.2, 2.0}, 0.01, opt);
}

}  // namespace

TEST_CASE("snapshot stacking shapes") {
    std::vector<double> s(10);
    for (int i = 0; i < 10; ++i) s[static_cast<std::size_t>(i)] = i;
    const auto y = stack_snapshots(s, 3, 0.1, 0.0);
    CHECK(y.y.rows() == 3);
    CHECK(y.y.cols() == 3);
    CHECK(y.y(0, 1) == 3.0);
    CHECK(y.y(2, 2) == 8.0);
    const auto flat = stack_snapshots(std::vector<double>(12, 2.5), 4, 0.1, 2.5);
    CHECK(flat.y.norm() == 0.0);
    CHECK_THROWS_AS((void)stack_snapshots(std::vector<double>(2, 0.0), 3, 0.1, 0.0), Error);
}

TEST_CASE("POD of rank-one data") {
    Eigen::MatrixXd y(4, 30);
    const Eigen::Vector4d v(1.0, -2.0, 0.5, 3.0);
    for (int c = 0; c < 30; ++c) y.col(c) = std::sin(0.3 * c) * v;
    const auto basis = pod(y, PodSelection{0, 0.999});
    CHECK(basis.size() == 1);
    CHECK(basis.captured == doctest::Approx(1.0));
    CHECK(std::abs(std::abs(basis.modes.col(0).dot(v.normalized())) - 1.0) < 1e-12);
    basis.check();
    CHECK_THROWS_AS((void)pod(Eigen::MatrixXd::Zero(3, 5), PodSelection{1, 0.0}), Error);
}

TEST_CASE("POD modes are orthonormal and energies descend") {
    Eigen::MatrixXd y = Eigen::MatrixXd::Random(6, 40);
    const auto basis = pod(y, PodSelection{4, 0.0});
    CHECK((basis.modes.transpose() * basis.modes - Eigen::MatrixXd::Identity(4, 4)).norm() < 1e-10);
    for (Eigen::Index i = 1; i < basis.energies.size(); ++i) CHECK(basis.energies(i) <= basis.energies(i - 1));
    CHECK(basis.energies.minCoeff() >= 0.0);
}

TEST_CASE("coarse rates of exponential data") {
    const double dt = 0.05;
    const int k = 4;
    std::vector<double> one;
    for (int i = 0; i < 2000; ++i) one.push_back(std::exp(-0.5 * i * dt));
    const auto b1 = pod(stack_snapshots(one, k, dt, 0.0).y, PodSelection{1, 0.0});
    const auto e1 = coarse_eigenvalues(b1, k, dt, 1);
    CHECK(std::abs(e1.eigenvalues[0].real() + 0.5) < 0.005);

    std::vector<double> two;
    for (int i = 0; i < 2000; ++i) two.push_back(std::exp(-0.2 * i * dt) + 0.7 * std::exp(-1.5 * i * dt));
    const auto b2 = pod(stack_snapshots(two, k, dt, 0.0).y, PodSelection{2, 0.0});
    const auto e2 = coarse_eigenvalues(b2, k, dt, 2);
    CHECK(std::abs(e2.eigenvalues[0].real() + 0.2) < 2e-4);
    CHECK(std::abs(e2.eigenvalues[1].real() + 1.5) < 1.5e-3);
    CHECK_THROWS_AS((void)coarse_eigenvalues(b2, k, dt, 3), Error);
}

TEST_CASE("rate maps") {
    const cplx mu = std::exp(cplx{-0.2, 0.0});
    CHECK(std::abs(map_rate(mu, 2.0) - cplx{-0.1}) < 1e-15);
    CHECK(std::abs(map_rate(mu, 2.0, RateMap::Literal) - mu / 2.0) < 1e-15);
}

TEST_CASE("growing data is rejected") {
    std::vector<double> s;
    for (int i = 0; i < 400; ++i) s.push_back(std::exp(0.01 * i));
    const auto b = pod(stack_snapshots(s, 2, 1.0, 0.0).y, PodSelection{1, 0.0});
    try {
        (void)coarse_eigenvalues(b, 2, 1.0, 1);
        FAIL("expected UnstableEstimate");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::UnstableEstimate);
    }
}

TEST_CASE("Newton recovers an exactly linear single mode quickly") {
    const auto records = linear_probes({-0.3}, {1.7});
    FirstOrderModel start;
    start.eigenvalues = {-0.25};
    const auto r = newton_refine(records, start);
    CHECK(std::abs(r.model.eigenvalues[0] - cplx{-0.3}) < 1e-8);
    CHECK(r.iterations <= 5);
    CHECK(std::abs(r.model.g(0, 0) - cplx{1.7}) < 1e-7);
    for (std::size_t i = 1; i < r.residual_history.size(); ++i) {
        CHECK(r.residual_history[i] <= r.residual_history[i - 1]);
    }
}

TEST_CASE("Newton without projection agrees on an easy problem") {
    const auto records = linear_probes({-0.3}, {1.7});
    FirstOrderModel start;
    start.eigenvalues = {-0.28};
    NewtonOptions opt;
    opt.project_coefficients = false;
    const auto r = newton_refine(records, start, opt);
    CHECK(std::abs(r.model.eigenvalues[0] - cplx{-0.3}) < 1e-8);
}

TEST_CASE("Newton leaves an exact fit unchanged") {
    const auto records = linear_probes({-0.3}, {1.7});
    FirstOrderModel start;
    start.eigenvalues = {-0.3};
    start.g = first_order_coefficients(records, start.eigenvalues, {});
    const auto r = newton_refine(records, start);
    CHECK(std::abs(r.model.eigenvalues[0] - start.eigenvalues[0]) < 1e-10);
    CHECK(r.residual <= r.initial_residual);
}

TEST_CASE("Newton separates two real modes") {
    const auto records = linear_probes({-0.2, -1.5}, {1.0, -0.8});
    FirstOrderModel start;
    start.eigenvalues = {-0.3, -1.0};
    const auto r = newton_refine(records, start);
    CHECK(std::abs(r.model.eigenvalues[0] - cplx{-0.2}) < 1e-7);
    CHECK(std::abs(r.model.eigenvalues[1] - cplx{-1.5}) < 1e-6);
    CHECK(first_order_residual(records, r.model).norm() < 1e-6);
}
