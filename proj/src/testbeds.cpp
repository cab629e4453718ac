#include "isored/testbeds.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "isored/error.hpp"

namespace isored {

void SimpleSystemConfig::validate() const {
    require(mu < 0.0 && lambda < 0.0, ErrorCode::InvalidArgument, "mu and lambda must be negative");
    require(noise >= 0.0, ErrorCode::InvalidArgument, "noise intensity must be non-negative");
    require(dt > 0.0, ErrorCode::InvalidArgument, "dt must be positive");
    require(dt * std::max(std::abs(mu), std::abs(lambda)) <= 0.05 + 1e-12, ErrorCode::StepTooLarge,
            "dt * max(|mu|, |lambda|) exceeds 0.05");
}

namespace {

Eigen::Vector2d simple_field(const SimpleSystemConfig& c, const Eigen::Vector2d& x, double u) {
    const double x1 = x(0);
    return {c.mu * x1 + u, c.lambda * (-x1 + x(1) + x1 * x1 + x1 * x1 * x1)};
}

}  // namespace

SimpleTrajectory simulate_simple(const SimpleSystemConfig& config, const InputSignal& u, const Eigen::Vector2d& x_init,
                                 double t_end, int stride) {
    config.validate();
    require(t_end >= 0.0 && stride >= 1, ErrorCode::InvalidArgument, "need t_end >= 0 and stride >= 1");
    const double dt = config.dt;
    const auto steps = static_cast<long long>(std::llround(t_end / dt));
    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double kick = std::sqrt(2.0 * config.noise * dt);

    SimpleTrajectory out;
    Eigen::Vector2d x = x_init;
    out.times.push_back(0.0);
    out.x.push_back(x);
    for (long long i = 0; i < steps; ++i) {
        const double t = static_cast<double>(i) * dt;
        if (config.noise > 0.0) {
            const Eigen::Vector2d noise{kick * normal(rng), 0.0};
            const Eigen::Vector2d f0 = simple_field(config, x, u(t));
            const Eigen::Vector2d pred = x + dt * f0 + noise;
            x += 0.5 * dt * (f0 + simple_field(config, pred, u(t + dt))) + noise;
        } else {
            const double um = u(t + 0.5 * dt);
            const Eigen::Vector2d k1 = simple_field(config, x, u(t));
            const Eigen::Vector2d k2 = simple_field(config, x + 0.5 * dt * k1, um);
            const Eigen::Vector2d k3 = simple_field(config, x + 0.5 * dt * k2, um);
            const Eigen::Vector2d k4 = simple_field(config, x + dt * k3, u(t + dt));
            x += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        require(x.allFinite() && x.cwiseAbs().maxCoeff() < 1e12, ErrorCode::NonFiniteState,
                "simple system diverged at t = " + std::to_string(t));
        if ((i + 1) % stride == 0) {
            out.times.push_back(static_cast<double>(i + 1) * dt);
            out.x.push_back(x);
        }
    }
    return out;
}

SimpleSystem::SimpleSystem(SimpleSystemConfig config) : config_(config) { config_.validate(); }

Trajectory SimpleSystem::run(const InputSignal& u, double t_end, double sample_dt) const {
    SimpleSystemConfig cfg = config_;
    const int sub = substeps(sample_dt, config_.dt);
    cfg.dt = sample_dt / sub;
    cfg.seed = config_.seed ^ fnv1a(u.describe());
    const auto n = sample_count(t_end, sample_dt);
    const auto sim = simulate_simple(cfg, u, Eigen::Vector2d::Zero(), static_cast<double>(n - 1) * sample_dt, sub);
    Trajectory traj;
    traj.names = output_names();
    for (std::size_t i = 0; i < n; ++i) {
        traj.times.push_back(static_cast<double>(i) * sample_dt);
        traj.y.push_back({sim.x[i](1)});
    }
    return traj;
}

KnownSystem simple_known_system(double mu, double lambda) {
    KnownSystem sys;
    sys.dimension = 2;
    sys.field = [mu, lambda](const Eigen::VectorXd& x) {
        Eigen::VectorXd f(2);
        f(0) = mu * x(0);
        f(1) = lambda * (-x(0) + x(1) + x(0) * x(0) + x(0) * x(0) * x(0));
        return f;
    };
    sys.fixed_point = Eigen::VectorXd::Zero(2);
    sys.input_direction = Eigen::VectorXd::Unit(2, 0);
    sys.output = Eigen::MatrixXd(1, 2);
    sys.output << 0.0, 1.0;
    VectorPolynomial taylor;
    auto term = [&](std::vector<int> idx, double a, double b) {
        Eigen::VectorXcd c(2);
        c << a, b;
        taylor[MultiIndex(std::move(idx))] = c;
    };
    term({0}, mu, -lambda);
    term({1}, 0.0, lambda);
    term({0, 0}, 0.0, lambda);
    term({0, 0, 0}, 0.0, lambda);
    sys.taylor = std::move(taylor);
    return sys;
}

void BurgersConfig::validate() const {
    require(reynolds > 0.0, ErrorCode::InvalidArgument, "Reynolds number must be positive");
    require(grid_points >= 3, ErrorCode::InvalidArgument, "need at least 3 grid points");
    require(dt > 0.0, ErrorCode::InvalidArgument, "dt must be positive");
    require(dt <= 0.4 * dx() * dx() * reynolds, ErrorCode::CflViolation,
            "dt exceeds the diffusive limit 0.4 dx^2 Re = " + std::to_string(0.4 * dx() * dx() * reynolds));
}

Eigen::VectorXd burgers_rhs(const BurgersConfig& config, const Eigen::VectorXd& w, double u_left) {
    const auto n = w.size();
    const double h = config.dx();
    const double nu = 1.0 / (config.reynolds * h * h);
    Eigen::VectorXd dw = Eigen::VectorXd::Zero(n);
    const double left = config.left_value + u_left;
    for (Eigen::Index i = 1; i + 1 < n; ++i) {
        const double wl = i == 1 ? left : w(i - 1);
        const double wr = i + 2 == n ? config.right_value : w(i + 1);
        const double wi = w(i);
        double adv = 0.0;
        if (config.advection == Advection::Central) {
            adv = wi * (wr - wl) / (2.0 * h);
        } else {
            adv = wi >= 0.0 ? wi * (wi - wl) / h : wi * (wr - wi) / h;
        }
        dw(i) = nu * (wr - 2.0 * wi + wl) - adv;
    }
    return dw;
}

BurgersTrajectory simulate_burgers(const BurgersConfig& config, const InputSignal& u, const Eigen::VectorXd& w_init,
                                   double t_end, int stride) {
    config.validate();
    require(w_init.size() == config.grid_points, ErrorCode::DimensionMismatch, "initial profile has wrong length");
    require(t_end >= 0.0 && stride >= 1, ErrorCode::InvalidArgument, "need t_end >= 0 and stride >= 1");
    const double dt = config.dt;
    const double h = config.dx();
    const auto steps = static_cast<long long>(std::llround(t_end / dt));
    const auto last = w_init.size() - 1;

    Eigen::VectorXd w = w_init;
    w(0) = config.left_value + u(0.0);
    w(last) = config.right_value;
    BurgersTrajectory out;
    out.times.push_back(0.0);
    out.w.push_back(w);
    Eigen::VectorXd k1, k2, k3, k4;
    for (long long i = 0; i < steps; ++i) {
        const double t = static_cast<double>(i) * dt;
        const double um = u(t + 0.5 * dt);
        k1 = burgers_rhs(config, w, u(t));
        k2 = burgers_rhs(config, w + 0.5 * dt * k1, um);
        k3 = burgers_rhs(config, w + 0.5 * dt * k2, um);
        k4 = burgers_rhs(config, w + dt * k3, u(t + dt));
        w += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        w(0) = config.left_value + u(t + dt);
        if ((i + 1) % stride == 0 || i + 1 == steps) {
            require(w.allFinite(), ErrorCode::NonFiniteState, "Burgers state is not finite at t = " + std::to_string(t));
            const double peak = w.cwiseAbs().maxCoeff();
            require(dt <= 0.5 * h / std::max(peak, 1e-300), ErrorCode::CflViolation,
                    "advective CFL violated (max|w| = " + std::to_string(peak) + ")");
            if ((i + 1) % stride == 0) {
                out.times.push_back(static_cast<double>(i + 1) * dt);
                out.w.push_back(w);
            }
        }
    }
    return out;
}

Eigen::VectorXd steady_profile(const BurgersConfig& config) {
    config.validate();
    const auto n = config.grid_points;
    Eigen::VectorXd w = Eigen::VectorXd::LinSpaced(n, config.left_value, config.right_value);
    const double dt = config.dt;
    const auto steps = static_cast<long long>(std::ceil(config.steady_horizon / dt));
    const auto zero = InputSignal::zero();
    for (long long i = 0; i <= steps; ++i) {
        if (i % 100 == 0) {
            const double rate = burgers_rhs(config, w, 0.0).cwiseAbs().maxCoeff();
            if (rate <= 1e-10) return w;
        }
        const auto k1 = burgers_rhs(config, w, 0.0);
        const auto k2 = burgers_rhs(config, w + 0.5 * dt * k1, 0.0);
        const auto k3 = burgers_rhs(config, w + 0.5 * dt * k2, 0.0);
        const auto k4 = burgers_rhs(config, w + dt * k3, 0.0);
        w += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        require(w.allFinite(), ErrorCode::NonFiniteState, "steady march diverged");
    }
    throw Error(ErrorCode::NotConverged, "Burgers profile did not settle within " +
                                             std::to_string(config.steady_horizon) + " time units");
}

BurgersSystem::BurgersSystem(BurgersConfig config) : config_(config), steady_(steady_profile(config_)) {}

std::vector<std::string> BurgersSystem::output_names() const {
    std::vector<std::string> names;
    for (int i = 0; i < config_.grid_points; ++i) names.push_back("w" + std::to_string(i));
    return names;
}

std::vector<double> BurgersSystem::baseline() const { return {steady_.data(), steady_.data() + steady_.size()}; }

Trajectory BurgersSystem::run(const InputSignal& u, double t_end, double sample_dt) const {
    BurgersConfig cfg = config_;
    const int sub = substeps(sample_dt, config_.dt);
    cfg.dt = sample_dt / sub;
    const auto n = sample_count(t_end, sample_dt);
    const auto sim = simulate_burgers(cfg, u, steady_, static_cast<double>(n - 1) * sample_dt, sub);
    Trajectory traj;
    traj.names = output_names();
    for (std::size_t i = 0; i < n; ++i) {
        traj.times.push_back(static_cast<double>(i) * sample_dt);
        traj.y.emplace_back(sim.w[i].data(), sim.w[i].data() + sim.w[i].size());
    }
    return traj;
}

PodOutputSystem::PodOutputSystem(std::shared_ptr<const SystemUnderTest> inner, Eigen::MatrixXd modes)
    : inner_(std::move(inner)), modes_(std::move(modes)) {
    require(inner_ != nullptr, ErrorCode::InvalidArgument, "wrapped system is null");
    require(static_cast<std::size_t>(modes_.rows()) == inner_->outputs() && modes_.cols() >= 1,
            ErrorCode::BasisDimensionMismatch,
            "basis rows (" + std::to_string(modes_.rows()) + ") differ from system outputs (" +
                std::to_string(inner_->outputs()) + ")");
    const auto base = inner_->baseline();
    reference_ = Eigen::Map<const Eigen::VectorXd>(base.data(), static_cast<Eigen::Index>(base.size()));
}

std::vector<std::string> PodOutputSystem::output_names() const {
    std::vector<std::string> names;
    for (Eigen::Index j = 0; j < modes_.cols(); ++j) names.push_back("p" + std::to_string(j + 1));
    return names;
}

std::vector<double> PodOutputSystem::baseline() const { return std::vector<double>(outputs(), 0.0); }

Eigen::VectorXd PodOutputSystem::project(const Eigen::VectorXd& w) const {
    require(w.size() == modes_.rows(), ErrorCode::BasisDimensionMismatch, "profile length differs from basis");
    return modes_.transpose() * (w - reference_);
}

Eigen::VectorXd PodOutputSystem::reconstruct(const Eigen::VectorXd& p) const {
    require(p.size() == modes_.cols(), ErrorCode::BasisDimensionMismatch, "coefficient count differs from basis");
    return reference_ + modes_ * p;
}

Trajectory PodOutputSystem::run(const InputSignal& u, double t_end, double sample_dt) const {
    const auto full = inner_->run(u, t_end, sample_dt);
    Trajectory traj;
    traj.names = output_names();
    traj.times = full.times;
    for (const auto& row : full.y) {
        const Eigen::VectorXd p =
            project(Eigen::Map<const Eigen::VectorXd>(row.data(), static_cast<Eigen::Index>(row.size())));
        traj.y.emplace_back(p.data(), p.data() + p.size());
    }
    return traj;
}

ReducedModelSystem::ReducedModelSystem(ReducedModel model) : model_(std::move(model)) { model_.validate(); }

Trajectory ReducedModelSystem::run(const InputSignal& u, double t_end, double sample_dt) const {
    double rate = 0.0;
    for (const auto& lam : model_.eigenvalues) rate = std::max(rate, std::abs(lam));
    const int sub = substeps(sample_dt, rate > 0.0 ? 0.1 / rate : sample_dt);
    const auto n = sample_count(t_end, sample_dt);
    const auto sim = simulate_reduced(model_, u, std::vector<cplx>(static_cast<std::size_t>(model_.isostables())), 0.0,
                                      static_cast<double>(n - 1) * sample_dt, sample_dt / sub, sub);
    Trajectory traj;
    traj.names = output_names();
    for (std::size_t i = 0; i < n; ++i) {
        traj.times.push_back(static_cast<double>(i) * sample_dt);
        traj.y.push_back(sim.y[i]);
    }
    return traj;
}

double l2_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    require(a.size() == b.size() && a.size() >= 2, ErrorCode::DimensionMismatch, "profiles differ in length");
    const Eigen::VectorXd d2 = (a - b).array().square();
    const double h = 1.0 / static_cast<double>(a.size() - 1);
    return h * (d2.sum() - 0.5 * (d2(0) + d2(d2.size() - 1)));
}

}  // namespace isored
