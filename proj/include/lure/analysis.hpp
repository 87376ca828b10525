#pragma once

#include "lure/integrate.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace lure {

struct EnvelopePoint {
    double t = 0.0;
    double lhs = 0.0;
    double rhs = 0.0;
};

/// Observed quantity against a claimed exponential envelope on the grid.
struct RateReport {
    double claimed_rate = 0.0;
    std::vector<EnvelopePoint> envelope;
    double max_violation = 0.0;  // max(lhs - rhs); <= 0 means the envelope holds
    bool pass = false;
    double tightest_ratio = 0.0;  // max lhs / rhs
};

/// {claimed_rate, max_violation, pass, tightest_ratio, envelope: [[t, lhs, rhs], ...]}.
std::string to_json(const RateReport& report, int indent = 2);

/// Relative envelope tolerance and the O(h) additive slack 5 h (1 + ||x0||).
inline constexpr double kEnvelopeTol = 1e-6;
double discretization_slack(double h, double x0_norm);

/// gamma = Lf + (Lh + ||B - C^T||)^2 / (4 c1). Throws MissingConstant when
/// the carrier is not decomposed or c1 is undefined while the numerator is not 0.
double lipschitz_rate(const LureSystem& sys);

/// Two simulations from x0a and x0b checked against
/// ||x0a - x0b|| e^{gamma t} (1 + tol) + slack.
RateReport lipschitz_dependence_check(const LureSystem& sys, const Vector& x0a, const Vector& x0b,
                                      double T, int n_steps, const SolverOptions& opts);

enum class AttractivityVariant { WithUniqueness, WithoutUniqueness };  // thm3, thm4

/// delta = sigma - (Lh + ||B - C^T||)^2 / (4 c1) (with uniqueness) or
/// sigma - ||B - C^T||^2 / (4 c1) (without). Throws MissingConstant or
/// HypothesisFailed (delta <= 0).
double attractivity_rate(const LureSystem& sys, AttractivityVariant variant);

/// ||x(t_i)|| <= e^{-delta t_i} ||x0|| (1 + tol) + slack. The hypothesis on 0
/// in K is checked on a 64 x 64 sample grid; a failure throws HypothesisFailed.
RateReport attractivity_check(const LureSystem& sys, const Vector& x0, double T, int n_steps,
                              AttractivityVariant variant, const SolverOptions& opts);

/// Upper bound (||C|| / c2) d_H(S1, S2) on the pseudo-distance between the
/// induced feedback operators.
double dis_bound(const Matrix& C, double c2, const ConvexSet& s1, const ConvexSet& s2);

struct PerturbResult {
    LureSystem system;
    bool decomposed = true;  // false: range condition fails, built in general mode
    std::optional<std::string> warning;
    Matrix H;
    double lh = 0.0;
};

/// Rewrites (A_bar, B, C_bar, D, K_time) as the state-dependent system with
/// output matrix C and carrier K_time(t) - (C_bar - C) x.
PerturbResult perturb_transform(const Matrix& A_bar, const Matrix& B, const Matrix& C_bar, const Matrix& D,
                                const MovingSet& K_time, const Matrix& C);

/// Least-squares slope of log(successive max differences on the coarsest grid)
/// against log(h). NaN when every difference is zero (the levels agree exactly).
double convergence_order(const std::vector<Trajectory>& trajs);

/// max_i ||x_{i+1} - x_i|| / h.
double discrete_derivative_bound(const Trajectory& traj);

/// Re-solves each accepted step with a perturbed input and compares.
struct ResolventReport {
    std::size_t samples = 0;
    std::size_t violations = 0;               // ||dx|| > ||dy|| / (1 + h kappa)
    std::size_t monotonicity_violations = 0;  // <dmu, C dx> < <D dmu, dmu> - tol
    double max_ratio = 0.0;                   // max ||dx|| / ||dy||
    double bound = 1.0;                       // 1 / (1 + h kappa)
};

ResolventReport resolvent_check(const LureSystem& sys, const Trajectory& traj, const SolverOptions& opts,
                                std::uint64_t seed = 7);

/// Discrete Lyapunov decrease ||x_{i+1}||^2 <= ||x_i||^2 (1 - 2 delta h) + 10 h^2 ||x0||^2;
/// returns the number of violating steps.
std::size_t lyapunov_violations(const Trajectory& traj, double delta);

}  // namespace lure
