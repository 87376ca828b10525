#pragma once

#include "lure/errors.hpp"
#include "lure/step.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace lure {

struct StepFailure {
    ErrorKind kind = ErrorKind::SolverDiverged;
    int step = 0;  // index of the step that failed (x_step -> x_{step+1})
    std::string message;
};

/// Discrete trajectory on the uniform grid t_i = i T / n_steps. Multipliers are
/// in the system sign (lambda = -mu) and outputs[i] = C states[i] + D lambdas[i].
struct Trajectory {
    std::vector<double> times;
    std::vector<Vector> states;
    std::vector<Vector> lambdas;
    std::vector<Vector> outputs;
    std::vector<double> residuals;
    std::vector<int> iterations;
    /// Hypomonotonicity margin between consecutive multiplier/output pairs
    /// (entry i compares samples i and i+1); nonnegative when the declared
    /// Lipschitz constants of K are valid.
    std::vector<double> hypo_margin;
    int fallback_steps = 0;
    std::optional<StepFailure> failure;

    bool complete() const { return !failure.has_value(); }
    std::size_t size() const { return states.size(); }
};

/// The implicit scheme y_i = x_i + h f(t_i, x_i) - h kappa x_i,
/// x_{i+1} = resolvent at (t_{i+1}, x_i). Throws NotAdmissible unless force is
/// set; a step failure is reported on the returned (partial) trajectory.
Trajectory simulate(const LureSystem& sys, const Vector& x0, double T, int n_steps,
                    const SolverOptions& opts, bool force = false);

/// Trajectories at n0, 2 n0, ..., 2^(levels-1) n0 steps.
std::vector<Trajectory> richardson_refine(const LureSystem& sys, const Vector& x0, double T, int n0,
                                          int levels, const SolverOptions& opts);

/// States of a refined trajectory at the nodes of an n_coarse grid.
std::vector<Vector> on_coarse_grid(const Trajectory& traj, int n_coarse);

/// Tolerance used when counting hypomonotonicity violations.
double hypo_tolerance(const Vector& a1, const Vector& b1, const Vector& a2, const Vector& b2);
std::size_t hypo_violations(const Trajectory& traj);

/// Header t,x_1..x_n,lambda_1..lambda_m,y_1..y_m,residual,iters; 17 significant digits.
void write_csv(std::ostream& out, const Trajectory& traj);
/// Polyline chart of ||x(t)|| and each lambda component.
void write_svg(std::ostream& out, const Trajectory& traj);

}  // namespace lure
