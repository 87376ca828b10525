#include "lure/step.hpp"

#include "lure/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <string>

namespace lure {

// ---------------------------------------------------------------------------
// System construction
// ---------------------------------------------------------------------------

Drift Drift::affine(Matrix A, VectorOfTime offset, std::optional<double> lipschitz) {
    Drift d;
    const double a_norm = spectral_norm(A);
    if (lipschitz && *lipschitz < a_norm * (1.0 - 1e-12)) {
        throw Error(ErrorKind::ValidationError,
                    "declared Lf = " + std::to_string(*lipschitz) + " is below ||A|| = " +
                        std::to_string(a_norm));
    }
    d.lipschitz = lipschitz.value_or(a_norm);
    d.linear_part = A;
    if (offset) {
        d.eval = [A = std::move(A), offset = std::move(offset)](double t, const Vector& x) {
            return Vector(A * x + offset(t));
        };
    } else {
        d.eval = [A = std::move(A)](double, const Vector& x) { return Vector(A * x); };
    }
    return d;
}

Drift Drift::zero(int n) { return affine(Matrix::Zero(n, n)); }

LureSystem LureSystem::make(Matrix B, Matrix C, Matrix D, Drift drift, MovingSet K,
                            std::optional<Matrix> P, bool require_kernel_inclusion,
                            std::optional<double> sigma) {
    const auto n = B.rows();
    const auto m = B.cols();
    if (C.rows() != m || C.cols() != n || D.rows() != m || D.cols() != m) {
        throw Error(ErrorKind::DimensionMismatch, "expected B n x m, C m x n, D m x m");
    }
    if (P && (P->rows() != n || P->cols() != n)) {
        throw Error(ErrorKind::DimensionMismatch, "storage matrix P must be n x n");
    }
    if (!drift.eval) throw Error(ErrorKind::ValidationError, "drift evaluator missing");
    const Matrix storage = P.value_or(Matrix::Identity(n, n));
    PassivityCertificate cert = certify(storage, B, C, D, require_kernel_inclusion);
    return LureSystem{std::move(B), std::move(C), std::move(D), std::move(drift), std::move(K),
                      std::move(cert), sigma};
}

std::pair<LureSystem, StorageTransform> to_identity_storage(const LureSystem& sys) {
    StorageTransform tr(sys.cert.P);
    if (tr.is_identity()) return {sys, tr};
    const Matrix& Lt = tr.Lt();
    const Matrix& Lt_inv = tr.Lt_inv();

    LureSystem out = sys;
    out.B = Lt * sys.B;
    out.C = sys.C * Lt_inv;
    Drift drift;
    auto f = sys.drift.eval;
    drift.eval = [f, Lt, Lt_inv](double t, const Vector& xt) { return Vector(Lt * f(t, Lt_inv * xt)); };
    if (sys.drift.linear_part) {
        drift.linear_part = Matrix(Lt * *sys.drift.linear_part * Lt_inv);
        drift.lipschitz = spectral_norm(*drift.linear_part);
    } else {
        drift.lipschitz = sys.drift.lipschitz * spectral_norm(Lt) * spectral_norm(Lt_inv);
    }
    out.drift = std::move(drift);
    out.K = sys.K.with_state_map(Lt_inv);

    // kappa stays: ||L^{-1}(PB - C^T)||^2 / c1 <= ||PB - C^T||^2 / (alpha c1).
    out.cert.P = Matrix::Identity(sys.n(), sys.n());
    out.cert.alpha = 1.0;
    out.cert.c2.reset();
    try {
        out.cert.c2 = smallest_positive_eigenvalue(out.C * out.C.transpose());
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::NoPositiveEigenvalue) throw;
    }
    if (sys.sigma) {
        // <f~(x~), x~> = <f(x), P x>; only the P = I statement carries over exactly.
        out.sigma.reset();
    }
    return {std::move(out), tr};
}

SolverOptions SolverOptions::from_env() {
    SolverOptions opts;
    if (const char* env = std::getenv("LURE_STEP_TOL")) {
        char* end = nullptr;
        const double v = std::strtod(env, &end);
        if (end != env && v > 0.0 && std::isfinite(v)) opts.tol = v;
    }
    return opts;
}

// ---------------------------------------------------------------------------
// Multiplier inclusion mu in N_K(q - M mu)
// ---------------------------------------------------------------------------

namespace {

struct NaturalMap {
    const Matrix& M;
    const Vector& q;
    const ConvexSet& K;

    Vector residual(const Vector& mu) const {
        const Vector w = q - M * mu;
        return w - project(K, w + mu);
    }
};

// Semismooth Newton on Phi(mu) = w - P_K(w + mu), w = q - M mu. Returns true on
// convergence; mu and iterations are updated in place.
bool newton(const NaturalMap& map, Vector& mu, int max_iter, double tol, int& iterations,
            double& res_norm) {
    const auto m = mu.size();
    const Matrix I = Matrix::Identity(m, m);
    Vector r = map.residual(mu);
    res_norm = r.norm();
    for (int it = 0; it < max_iter; ++it) {
        if (res_norm <= tol) return true;
        ++iterations;
        const Vector w = map.q - map.M * mu;
        const Matrix Jp = projection_jacobian(map.K, w + mu);
        const Matrix J = -(I - Jp) * map.M - Jp;

        Vector d;
        Eigen::ColPivHouseholderQR<Matrix> qr(J);
        if (qr.isInvertible()) {
            d = qr.solve(-r);
        } else {
            d = Eigen::CompleteOrthogonalDecomposition<Matrix>(J).solve(-r);
        }
        if (!d.allFinite()) return false;

        double step = 1.0;
        bool accepted = false;
        for (int ls = 0; ls < 40; ++ls) {
            const Vector trial = mu + step * d;
            const Vector r_trial = map.residual(trial);
            const double n_trial = r_trial.norm();
            if (n_trial <= (1.0 - 1e-4 * step) * res_norm || n_trial <= tol) {
                mu = trial;
                r = r_trial;
                res_norm = n_trial;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) return false;
    }
    return res_norm <= tol;
}

// Tseng's forward-backward-forward splitting for 0 in (M mu - q) + d sigma_K(mu),
// where d sigma_K = N_K^{-1}; converges for monotone M with rho < 1/||M||.
bool forward_backward_forward(const NaturalMap& map, Vector& mu, int max_iter, double tol,
                              int& iterations, double& res_norm) {
    const double m_norm = spectral_norm(map.M);
    const double rho = m_norm > 0.0 ? std::min(1.0, 0.9 / m_norm) : 1.0;
    auto prox = [&](const Vector& v) { return Vector(v - rho * project(map.K, v / rho)); };
    for (int it = 0; it < max_iter; ++it) {
        ++iterations;
        const Vector forward = map.M * mu - map.q;
        const Vector bar = prox(mu - rho * forward);
        mu = bar - rho * (map.M * bar - map.M * mu);
        res_norm = map.residual(mu).norm();
        if (res_norm <= tol) return true;
        if (!mu.allFinite()) return false;
    }
    return false;
}

// Least-norm solution along ker([M; coupling]) with the activity pattern of the
// (unchanged) output w held fixed. Box carriers only.
Vector least_norm_multiplier(const Matrix& M, const Vector& q, const Box& box, const Matrix& coupling,
                             const Vector& mu, double tol) {
    const auto m = mu.size();
    Matrix stacked(M.rows() + coupling.rows(), m);
    stacked << M, coupling;
    const Matrix Z = kernel_basis(stacked);
    if (Z.cols() == 0) return mu;

    const Vector w = q - M * mu;
    std::vector<Eigen::RowVectorXd> rows;
    std::vector<double> rhs;
    const double slack = 1e-12 * (1.0 + mu.norm());
    for (Eigen::Index i = 0; i < m; ++i) {
        const double band = 1e-8 * (1.0 + std::abs(w(i)));
        const bool at_lo = std::isfinite(box.lower(i)) && std::abs(w(i) - box.lower(i)) <= band;
        const bool at_up = std::isfinite(box.upper(i)) && std::abs(w(i) - box.upper(i)) <= band;
        if (at_lo && at_up) continue;
        if (!at_up) {  // mu_i <= 0
            rows.push_back(Z.row(i));
            rhs.push_back(-mu(i) + slack);
        }
        if (!at_lo) {  // mu_i >= 0
            rows.push_back(-Z.row(i));
            rhs.push_back(mu(i) + slack);
        }
    }
    Polyhedron feasible{Matrix(static_cast<Eigen::Index>(rows.size()), Z.cols()),
                        Vector(static_cast<Eigen::Index>(rhs.size()))};
    for (std::size_t k = 0; k < rows.size(); ++k) {
        feasible.A.row(static_cast<Eigen::Index>(k)) = rows[k];
        feasible.b(static_cast<Eigen::Index>(k)) = rhs[k];
    }
    try {
        const Vector c = project_polyhedron(feasible, Vector(-Z.transpose() * mu)).point;
        const Vector candidate = mu + Z * c;
        NaturalMap map{M, q, ConvexSet(box)};
        if (map.residual(candidate).norm() <= std::max(tol, map.residual(mu).norm())) return candidate;
    } catch (const Error&) {
        // Pattern misclassified near a bound: keep the solver's multiplier.
    }
    return mu;
}

}  // namespace

MultiplierSolution solve_multiplier_inclusion(const Matrix& M, const Vector& q, const ConvexSet& K,
                                              const Matrix& coupling, const SolverOptions& opts) {
    const auto m = q.size();
    if (M.rows() != m || M.cols() != m || K.dim() != m || (coupling.size() > 0 && coupling.cols() != m)) {
        throw Error(ErrorKind::DimensionMismatch, "multiplier inclusion dimensions");
    }
    MultiplierSolution sol;
    sol.mu = Vector::Zero(m);
    NaturalMap map{M, q, K};

    sol.converged = newton(map, sol.mu, opts.max_newton, opts.tol, sol.iterations, sol.residual);
    if (!sol.converged) {
        sol.used_fallback = true;
        sol.converged =
            forward_backward_forward(map, sol.mu, opts.max_fixed_point, opts.tol, sol.iterations, sol.residual);
        if (!sol.converged) {
            sol.converged = newton(map, sol.mu, opts.max_newton, opts.tol, sol.iterations, sol.residual);
        }
    }
    if (!sol.converged) return sol;

    if (const auto box = as_box(K)) {
        const Matrix coup = coupling.size() > 0 ? coupling : Matrix(0, m);
        sol.mu = least_norm_multiplier(M, q, *box, coup, sol.mu, opts.tol);
        sol.residual = map.residual(sol.mu).norm();
    }
    return sol;
}

// ---------------------------------------------------------------------------
// Step
// ---------------------------------------------------------------------------

namespace {

struct StepProblem {
    ConvexSet K;
    double a;  // 1 - h kappa
    Matrix M;
    Vector q;
    Matrix coupling;
};

StepProblem setup_step(const LureSystem& sys, double t_next, const Vector& x_prev, const Vector& y_in,
                       double h) {
    if (!(h >= kMinStep)) {
        throw Error(ErrorKind::StepTooSmall, "step size " + std::to_string(h) + " below 1e-14");
    }
    const double a = 1.0 - h * sys.cert.kappa;
    if (!(a > 0.0)) {
        throw Error(ErrorKind::StepTooLarge, "1 - h kappa must be positive");
    }
    if (x_prev.size() != sys.n() || y_in.size() != sys.n()) {
        throw Error(ErrorKind::DimensionMismatch, "state vectors must have dimension n");
    }
    ConvexSet K = sys.K.evaluate(t_next, x_prev);
    if (K.dim() != sys.m()) throw Error(ErrorKind::DimensionMismatch, "carrier dimension must be m");
    const double ha = h / a;
    return {std::move(K), a, ha * sys.C * sys.B + sys.D, sys.C * y_in / a, ha * sys.B};
}

StepResult finish_step(const LureSystem& sys, const StepProblem& prob, const Vector& y_in, double h,
                       const MultiplierSolution& sol) {
    StepResult out;
    out.mu = sol.mu;
    out.lambda = -sol.mu;
    out.x_next = (y_in - h * sys.B * sol.mu) / prob.a;
    out.w = sys.C * out.x_next - sys.D * sol.mu;
    const double state_res =
        (prob.a * out.x_next + h * sys.B * sol.mu - y_in).norm() / (1.0 + y_in.norm());
    out.residual = std::max(normal_cone_residual(prob.K, out.w, out.mu), state_res);
    out.iterations = sol.iterations;
    out.used_fallback = sol.used_fallback;
    return out;
}

StepResult solve_prepared(const LureSystem& sys, const StepProblem& prob, const Vector& y_in, double h,
                          const SolverOptions& opts) {
    const MultiplierSolution sol = solve_multiplier_inclusion(prob.M, prob.q, prob.K, prob.coupling, opts);
    if (!sol.converged) {
        throw Error(ErrorKind::SolverDiverged,
                    "step residual " + std::to_string(sol.residual) + " after " +
                        std::to_string(sol.iterations) + " iterations");
    }
    return finish_step(sys, prob, y_in, h, sol);
}

}  // namespace

StepResult solve_step(const LureSystem& sys, double t_next, const Vector& x_prev, const Vector& y_in,
                      double h, const SolverOptions& opts) {
    const StepProblem prob = setup_step(sys, t_next, x_prev, y_in, h);
    return solve_prepared(sys, prob, y_in, h, opts);
}

StepResult inner_solve_box(const LureSystem& sys, double t_next, const Vector& x_prev, const Vector& y_in,
                           double h, const SolverOptions& opts) {
    const StepProblem prob = setup_step(sys, t_next, x_prev, y_in, h);
    const auto box = as_box(prob.K);
    if (!box) throw Error(ErrorKind::HypothesisFailed, "inner_solve_box needs a box carrier");
    const StepProblem flat{ConvexSet(*box), prob.a, prob.M, prob.q, prob.coupling};
    return solve_prepared(sys, flat, y_in, h, opts);
}

// ---------------------------------------------------------------------------
// Admissibility
// ---------------------------------------------------------------------------

AdmissibilityResult admissible(const LureSystem& sys, const Vector& x0, const SolverOptions& opts) {
    if (x0.size() != sys.n()) throw Error(ErrorKind::DimensionMismatch, "x0 must have dimension n");
    const ConvexSet K = sys.K.evaluate(0.0, x0);
    const Vector q = sys.C * x0;
    AdmissibilityResult res;
    const MultiplierSolution sol = solve_multiplier_inclusion(sys.D, q, K, Matrix(0, sys.m()), opts);
    res.mu = sol.mu;
    res.residual = sol.residual;
    if (sol.converged) {
        res.verdict = Admissibility::Admissible;
        return res;
    }
    const auto box = as_box(K);
    if (!box) return res;

    // Feasibility of {mu : q - D mu in K, mu in the barrier cone of K}; for a
    // monotone box inclusion an empty feasible set certifies non-solvability.
    const auto m = sys.m();
    std::vector<Eigen::RowVectorXd> rows;
    std::vector<double> rhs;
    for (Eigen::Index i = 0; i < m; ++i) {
        const Eigen::RowVectorXd d_row = sys.D.row(i);
        Eigen::RowVectorXd e = Eigen::RowVectorXd::Zero(m);
        e(i) = 1.0;
        if (std::isfinite(box->lower(i))) {
            rows.push_back(d_row);
            rhs.push_back(q(i) - box->lower(i));
        } else {
            rows.push_back(-e);
            rhs.push_back(0.0);
        }
        if (std::isfinite(box->upper(i))) {
            rows.push_back(-d_row);
            rhs.push_back(box->upper(i) - q(i));
        } else {
            rows.push_back(e);
            rhs.push_back(0.0);
        }
    }
    Polyhedron feasible{Matrix(static_cast<Eigen::Index>(rows.size()), m),
                        Vector(static_cast<Eigen::Index>(rhs.size()))};
    for (std::size_t k = 0; k < rows.size(); ++k) {
        feasible.A.row(static_cast<Eigen::Index>(k)) = rows[k];
        feasible.b(static_cast<Eigen::Index>(k)) = rhs[k];
    }
    try {
        project_polyhedron(feasible, Vector::Zero(m));
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::EmptySet) res.verdict = Admissibility::NotAdmissible;
    }
    return res;
}

}  // namespace lure
