#pragma once

#include "lure/linalg.hpp"
#include "lure/moving.hpp"

#include <functional>
#include <optional>
#include <utility>

namespace lure {

/// f(t, x) with its declared Lipschitz constant in x. When the drift is affine,
/// f(t, x) = A x + e(t), the matrix is kept so that exact constants can be
/// recomputed under changes of variables.
struct Drift {
    std::function<Vector(double, const Vector&)> eval;
    double lipschitz = 0.0;
    std::optional<Matrix> linear_part;

    static Drift affine(Matrix A, VectorOfTime offset = {}, std::optional<double> lipschitz = {});
    static Drift zero(int n);

    Vector operator()(double t, const Vector& x) const { return eval(t, x); }
};

/// x' = f(t, x) + B lambda, y = C x + D lambda, lambda in -N_{K(t,x)}(y).
struct LureSystem {
    Matrix B;
    Matrix C;
    Matrix D;
    Drift drift;
    MovingSet K;
    PassivityCertificate cert;
    /// Decay hypothesis <f(t,x), x> <= -sigma ||x||^2, when declared.
    std::optional<double> sigma;

    int n() const { return static_cast<int>(B.rows()); }
    int m() const { return static_cast<int>(B.cols()); }

    /// Checks dimensions and builds the passivity certificate with storage P.
    static LureSystem make(Matrix B, Matrix C, Matrix D, Drift drift, MovingSet K,
                           std::optional<Matrix> P = std::nullopt,
                           bool require_kernel_inclusion = true,
                           std::optional<double> sigma = std::nullopt);
};

/// The same system in coordinates x~ = L^T x where P = L L^T; the storage
/// matrix of the result is the identity.
std::pair<LureSystem, StorageTransform> to_identity_storage(const LureSystem& sys);

struct SolverOptions {
    double tol = 1e-10;
    int max_newton = 100;
    int max_fixed_point = 1000;

    /// Defaults, with tol overridden by LURE_STEP_TOL when set.
    static SolverOptions from_env();
};

inline constexpr double kMinStep = 1e-14;

/// One resolvent solve. mu is the internal multiplier (mu in N_K(w));
/// lambda = -mu is the system's multiplier; w = C x_next - D mu = C x_next + D lambda.
struct StepResult {
    Vector x_next;
    Vector mu;
    Vector lambda;
    Vector w;
    double residual = 0.0;
    int iterations = 0;
    bool used_fallback = false;
};

/// Solves (1 - h kappa) x + h B mu = y_in, mu in N_{K(t_next, x_prev)}(C x - D mu),
/// reporting the minimal-norm multiplier among solutions.
StepResult solve_step(const LureSystem& sys, double t_next, const Vector& x_prev,
                      const Vector& y_in, double h, const SolverOptions& opts);

/// solve_step for box-valued carriers (semismooth Newton on the natural map
/// with a forward-backward-forward fallback).
StepResult inner_solve_box(const LureSystem& sys, double t_next, const Vector& x_prev,
                           const Vector& y_in, double h, const SolverOptions& opts);

/// Test oracle for box carriers with m <= 3: enumerates all 3^m activity
/// patterns of the coupled (x, mu) system and returns the feasible solution of
/// least ||mu||. Throws NoSolution when no pattern is consistent.
StepResult brute_force_step_oracle(const LureSystem& sys, double t_next, const Vector& x_prev,
                                   const Vector& y_in, double h);

/// Solution of the multiplier inclusion mu in N_K(q - M mu).
struct MultiplierSolution {
    Vector mu;
    double residual = 0.0;
    int iterations = 0;
    bool converged = false;
    bool used_fallback = false;
};

/// Solves mu in N_K(q - M mu) for monotone M. For box carriers the result is
/// the least-norm solution along ker([M; coupling]).
MultiplierSolution solve_multiplier_inclusion(const Matrix& M, const Vector& q, const ConvexSet& K,
                                              const Matrix& coupling, const SolverOptions& opts);

enum class Admissibility { Admissible, NotAdmissible, Undetermined };

struct AdmissibilityResult {
    Admissibility verdict = Admissibility::Undetermined;
    Vector mu;  // minimal-norm multiplier when admissible
    double residual = 0.0;
};

/// x0 is admissible iff mu in N_{K(0,x0)}(C x0 - D mu) has a solution. A failed
/// solve is NotAdmissible only when the inclusion is provably infeasible.
AdmissibilityResult admissible(const LureSystem& sys, const Vector& x0, const SolverOptions& opts);

}  // namespace lure
