#include <doctest.h>

#include <cmath>
#include <numbers>

#include "isored/error.hpp"
#include "isored/probe.hpp"
#include "isored/testbeds.hpp"

using namespace isored;

TEST_CASE("simple system: origin is fixed and x1 decays exactly exponentially") {
    SimpleSystemConfig cfg;
    const auto rest = simulate_simple(cfg, InputSignal::zero(), Eigen::Vector2d::Zero(), 50.0, 20);
    for (const auto& x : rest.x) CHECK(x.norm() == 0.0);

    const double x1 = 0.4;
    const Eigen::Vector2d start(x1, x1 - x1 * x1 - x1 * x1 * x1);
    const auto traj = simulate_simple(cfg, InputSignal::zero(), start, 100.0, 100);
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
        CHECK(std::abs(traj.x[i](0) - x1 * std::exp(cfg.mu * traj.times[i])) < 1e-10);
    }
    CHECK(std::abs(traj.x.back()(1)) < 0.01);
}

TEST_CASE("simple system: x1 carries no second harmonic") {
    SimpleSystemConfig cfg;
    const double w = 0.5, eps = 0.2;
    const int n = 64;
    cfg.dt = 2.0 * std::numbers::pi / w / n / 4.0;
    const int cycles = 40;
    const auto traj = simulate_simple(cfg, InputSignal::sinusoid(eps, w), Eigen::Vector2d::Zero(),
                                      cycles * 2.0 * std::numbers::pi / w, 4);
    std::vector<double> x1, x2;
    for (const auto& x : traj.x) {
        x1.push_back(x(0));
        x2.push_back(x(1));
    }
    const auto a = cycle_integrals(x1, n, 1, cycles - 1, 2);
    const auto b = cycle_integrals(x2, n, 1, cycles - 1, 2);
    const double first = std::hypot(a.sin[0][1], a.cos[0][1]);
    CHECK(std::hypot(a.sin[0][2], a.cos[0][2]) < 1e-9 * first);
    CHECK(std::hypot(b.sin[0][2], b.cos[0][2]) > 1e-4 * first);
}

TEST_CASE("simple system: step limit and noise reproducibility") {
    SimpleSystemConfig bad;
    bad.dt = 0.1;
    CHECK_THROWS_AS(bad.validate(), Error);

    SimpleSystemConfig cfg;
    cfg.noise = 0.0005;
    cfg.seed = 7;
    const auto a = simulate_simple(cfg, InputSignal::zero(), Eigen::Vector2d::Zero(), 100.0, 2);
    const auto b = simulate_simple(cfg, InputSignal::zero(), Eigen::Vector2d::Zero(), 100.0, 2);
    CHECK(a.x == b.x);
    cfg.seed = 8;
    const auto c = simulate_simple(cfg, InputSignal::zero(), Eigen::Vector2d::Zero(), 100.0, 2);
    CHECK(a.x != c.x);

    const SimpleSystem sut(cfg);
    CHECK(sut.stochastic());
    const auto r1 = sut.run(InputSignal::sinusoid(0.1, 0.3), 50.0, 0.5);
    const auto r2 = sut.run(InputSignal::sinusoid(0.1, 0.3), 50.0, 0.5);
    CHECK(r1.y == r2.y);
}

TEST_CASE("Burgers: uniform state with equal boundaries is exact") {
    BurgersConfig cfg;
    const Eigen::VectorXd w0 = Eigen::VectorXd::Constant(cfg.grid_points, 0.3);
    const auto traj = simulate_burgers(cfg, InputSignal::zero(), w0, 1.0, 1000);
    for (const auto& w : traj.w) CHECK((w - w0).cwiseAbs().maxCoeff() == 0.0);
    CHECK((steady_profile(cfg) - w0).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(burgers_rhs(cfg, w0, 0.0).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("Burgers: step state is monotone and grid converged") {
    BurgersConfig coarse;
    coarse.left_value = 0.4;
    const auto wc = steady_profile(coarse);
    for (Eigen::Index i = 1; i < wc.size(); ++i) CHECK(wc(i) <= wc(i - 1));
    CHECK(burgers_rhs(coarse, wc, 0.0).cwiseAbs().maxCoeff() <= 1e-10);

    BurgersConfig fine = coarse;
    fine.grid_points = 2 * coarse.grid_points - 1;
    fine.dt = coarse.dt / 4.0;
    const auto wf = steady_profile(fine);
    Eigen::VectorXd sampled(wc.size());
    for (Eigen::Index i = 0; i < wc.size(); ++i) sampled(i) = wf(2 * i);
    CHECK(std::sqrt(l2_error(wc, sampled)) <= 1e-3);
}

TEST_CASE("Burgers: configuration checks") {
    BurgersConfig cfg;
    cfg.dt = 1e-3;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = BurgersConfig{};
    cfg.grid_points = 2;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = BurgersConfig{};
    CHECK_THROWS_AS((void)simulate_burgers(cfg, InputSignal::zero(), Eigen::VectorXd::Zero(5), 1.0, 1), Error);
}

TEST_CASE("Burgers: probe integrals are grid converged") {
    BurgersConfig coarse;
    BurgersConfig fine;
    fine.grid_points = 2 * coarse.grid_points - 1;
    fine.dt = coarse.dt / 4.0;
    const BurgersSystem a(coarse);
    const BurgersSystem b(fine);
    ProbeOptions opt;
    opt.settle_cycles = 6;
    opt.avg_cycles = 1;
    opt.j_max = 2;
    for (double w : {1.0, 2.0}) {
        const auto ra = run_probe(a, w, 0.05, opt);
        const auto rb = run_probe(b, w, 0.05, opt);
        double scale = 0.0, diff = 0.0;
        for (std::size_t m = 0; m < ra.outputs(); ++m) {
            const std::size_t f = 2 * m;
            for (std::size_t k = 1; k <= 2; ++k) {
                scale = std::max({scale, std::abs(ra.sin[m][k]), std::abs(ra.cos[m][k])});
                diff = std::max({diff, std::abs(ra.sin[m][k] - rb.sin[f][k]), std::abs(ra.cos[m][k] - rb.cos[f][k])});
            }
        }
        CHECK(diff <= 1e-4 * scale);
    }
}

TEST_CASE("POD output adapter") {
    BurgersConfig cfg;
    cfg.left_value = 0.4;
    auto burgers = std::make_shared<BurgersSystem>(cfg);
    Eigen::MatrixXd modes = Eigen::MatrixXd::Zero(cfg.grid_points, 2);
    for (int i = 1; i < cfg.grid_points - 1; ++i) {
        const double x = i * cfg.dx();
        modes(i, 0) = std::sin(std::numbers::pi * x);
        modes(i, 1) = std::sin(2.0 * std::numbers::pi * x);
    }
    modes.col(0).normalize();
    modes.col(1).normalize();
    const PodOutputSystem pod(burgers, modes);
    CHECK(pod.outputs() == 2);
    CHECK(pod.project(burgers->steady()).cwiseAbs().maxCoeff() < 1e-15);
    const Eigen::VectorXd p = pod.project(burgers->steady() + modes.col(0));
    CHECK(std::abs(p(0) - 1.0) < 1e-12);
    CHECK(std::abs(p(1)) < 1e-12);
    CHECK((pod.reconstruct(p) - burgers->steady() - modes.col(0)).norm() < 1e-12);
    CHECK_THROWS_AS(PodOutputSystem(burgers, Eigen::MatrixXd::Zero(10, 1)), Error);
    const auto traj = pod.run(InputSignal::sinusoid(0.05, 1.0), 2.0, 0.5);
    CHECK(traj.outputs() == 2);
    CHECK(traj.samples() == 5);
}

TEST_CASE("L2 error quadrature") {
    const Eigen::VectorXd a = Eigen::VectorXd::Constant(11, 1.0);
    const Eigen::VectorXd b = Eigen::VectorXd::Constant(11, 0.5);
    CHECK(l2_error(a, b) == doctest::Approx(0.25));
    Eigen::VectorXd ramp(101);
    for (int i = 0; i <= 100; ++i) ramp(i) = i / 100.0;
    CHECK(l2_error(ramp, Eigen::VectorXd::Zero(101)) == doctest::Approx(1.0 / 3.0).epsilon(1e-4));
}
