#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "isored/model.hpp"
#include "isored/oracle.hpp"
#include "isored/spectral.hpp"
#include "isored/system.hpp"

namespace isored {

// ---------------------------------------------------------------------------
// Two-state example: x1' = mu x1 + u (+ noise), x2' = lambda (-x1 + x2 + x1^2 + x1^3)

struct SimpleSystemConfig {
    double mu = -0.05;
    double lambda = -1.0;
    double noise = 0.0;  // intensity D
    double dt = 0.05;
    std::uint64_t seed = 1;

    void validate() const;
};

struct SimpleTrajectory {
    std::vector<double> times;
    std::vector<Eigen::Vector2d> x;
};

/// RK4 when D = 0, stochastic Heun with increment sqrt(2 D dt) N(0,1) on x1
/// otherwise. Samples every `stride` steps. Throws StepTooLarge.
[[nodiscard]] SimpleTrajectory simulate_simple(const SimpleSystemConfig& config, const InputSignal& u,
                                               const Eigen::Vector2d& x_init, double t_end, int stride = 1);

/// Output y = x2. The noise stream for a run is derived from the seed and the input description.
class SimpleSystem final : public SystemUnderTest {
public:
    explicit SimpleSystem(SimpleSystemConfig config);

    [[nodiscard]] std::size_t outputs() const override { return 1; }
    [[nodiscard]] std::vector<std::string> output_names() const override { return {"x2"}; }
    [[nodiscard]] std::vector<double> baseline() const override { return {0.0}; }
    [[nodiscard]] Trajectory run(const InputSignal& u, double t_end, double sample_dt) const override;
    [[nodiscard]] bool stochastic() const override { return config_.noise > 0.0; }

    [[nodiscard]] const SimpleSystemConfig& config() const noexcept { return config_; }

private:
    SimpleSystemConfig config_;
};

/// Noise-free equations with exact Taylor data, for the oracle.
[[nodiscard]] KnownSystem simple_known_system(double mu = -0.05, double lambda = -1.0);

// ---------------------------------------------------------------------------
// Viscous Burgers' equation on [0, 1] with Dirichlet ends; w_L = left + u(t).

enum class Advection { Central, Upwind };

struct BurgersConfig {
    double reynolds = 10.0;
    int grid_points = 152;  // including both boundary nodes
    double right_value = 0.3;
    double left_value = 0.3;
    double dt = 1e-4;
    Advection advection = Advection::Central;
    double steady_horizon = 400.0;

    [[nodiscard]] double dx() const { return 1.0 / (grid_points - 1); }
    void validate() const;
};

/// Samples of the full profile (boundaries included) every `stride` steps.
struct BurgersTrajectory {
    std::vector<double> times;
    std::vector<Eigen::VectorXd> w;
};

/// Method of lines with RK4. Throws CflViolation, NonFiniteState.
[[nodiscard]] BurgersTrajectory simulate_burgers(const BurgersConfig& config, const InputSignal& u,
                                                 const Eigen::VectorXd& w_init, double t_end, int stride);

/// Interior time derivative of w (boundaries zero) for input value `u_left`.
[[nodiscard]] Eigen::VectorXd burgers_rhs(const BurgersConfig& config, const Eigen::VectorXd& w, double u_left);

/// Marches from the linear interpolant of the boundary values until
/// ||dw/dt||_inf <= 1e-10. Throws NotConverged.
[[nodiscard]] Eigen::VectorXd steady_profile(const BurgersConfig& config);

/// Full profile as outputs ("w0".."w151"), starting from the steady profile.
class BurgersSystem final : public SystemUnderTest {
public:
    explicit BurgersSystem(BurgersConfig config);

    [[nodiscard]] std::size_t outputs() const override { return static_cast<std::size_t>(config_.grid_points); }
    [[nodiscard]] std::vector<std::string> output_names() const override;
    [[nodiscard]] std::vector<double> baseline() const override;
    [[nodiscard]] Trajectory run(const InputSignal& u, double t_end, double sample_dt) const override;

    [[nodiscard]] const BurgersConfig& config() const noexcept { return config_; }
    [[nodiscard]] const Eigen::VectorXd& steady() const noexcept { return steady_; }

private:
    BurgersConfig config_;
    Eigen::VectorXd steady_;
};

/// Outputs p = modes^T (w - reference) of a wrapped system; baseline is zero.
class PodOutputSystem final : public SystemUnderTest {
public:
    /// Throws BasisDimensionMismatch when the mode length differs from the
    /// wrapped output count.
    PodOutputSystem(std::shared_ptr<const SystemUnderTest> inner, Eigen::MatrixXd modes);

    [[nodiscard]] std::size_t outputs() const override { return static_cast<std::size_t>(modes_.cols()); }
    [[nodiscard]] std::vector<std::string> output_names() const override;
    [[nodiscard]] std::vector<double> baseline() const override;
    [[nodiscard]] Trajectory run(const InputSignal& u, double t_end, double sample_dt) const override;

    [[nodiscard]] Eigen::VectorXd project(const Eigen::VectorXd& w) const;
    [[nodiscard]] Eigen::VectorXd reconstruct(const Eigen::VectorXd& p) const;
    [[nodiscard]] const Eigen::MatrixXd& modes() const noexcept { return modes_; }

private:
    std::shared_ptr<const SystemUnderTest> inner_;
    Eigen::MatrixXd modes_;
    Eigen::VectorXd reference_;
};

/// A reduced model driven as a black box, starting from psi = 0.
class ReducedModelSystem final : public SystemUnderTest {
public:
    explicit ReducedModelSystem(ReducedModel model);

    [[nodiscard]] std::size_t outputs() const override { return static_cast<std::size_t>(model_.outputs()); }
    [[nodiscard]] std::vector<double> baseline() const override { return model_.y0; }
    [[nodiscard]] Trajectory run(const InputSignal& u, double t_end, double sample_dt) const override;

private:
    ReducedModel model_;
};

/// Snapshot L2 error integral over [0, 1]: trapezoid of (a - b)^2 on a uniform grid.
[[nodiscard]] double l2_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

}  // namespace isored
