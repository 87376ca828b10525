#include "lure/step.hpp"

#include "lure/errors.hpp"

#include <cmath>
#include <limits>

namespace lure {

// Each coordinate is free (mu_i = 0, w_i inside), at its lower bound
// (w_i = lo_i, mu_i <= 0) or at its upper bound (w_i = up_i, mu_i >= 0). For
// each pattern the coupled linear system in (x, mu) is solved directly,
// without eliminating x, and the result is filtered for consistency.
StepResult brute_force_step_oracle(const LureSystem& sys, double t_next, const Vector& x_prev,
                                   const Vector& y_in, double h) {
    const int n = sys.n();
    const int m = sys.m();
    if (m > 3) throw Error(ErrorKind::DimensionMismatch, "oracle supports m <= 3");
    if (!(h >= kMinStep)) throw Error(ErrorKind::StepTooSmall, "step size below 1e-14");
    const double a = 1.0 - h * sys.cert.kappa;
    if (!(a > 0.0)) throw Error(ErrorKind::StepTooLarge, "1 - h kappa must be positive");
    const auto box = as_box(sys.K.evaluate(t_next, x_prev));
    if (!box) throw Error(ErrorKind::HypothesisFailed, "oracle needs a box carrier");

    constexpr double feas_tol = 1e-9;
    int patterns = 1;
    for (int i = 0; i < m; ++i) patterns *= 3;

    std::optional<StepResult> best;
    for (int code = 0; code < patterns; ++code) {
        std::vector<int> kind(static_cast<std::size_t>(m));  // 0 free, 1 lower, 2 upper
        bool possible = true;
        for (int i = 0, c = code; i < m; ++i, c /= 3) {
            kind[static_cast<std::size_t>(i)] = c % 3;
            if (c % 3 == 1 && !std::isfinite(box->lower(i))) possible = false;
            if (c % 3 == 2 && !std::isfinite(box->upper(i))) possible = false;
        }
        if (!possible) continue;

        Matrix sys_mat = Matrix::Zero(n + m, n + m);
        Vector rhs = Vector::Zero(n + m);
        sys_mat.topLeftCorner(n, n) = a * Matrix::Identity(n, n);
        sys_mat.topRightCorner(n, m) = h * sys.B;
        rhs.head(n) = y_in;
        for (int i = 0; i < m; ++i) {
            const int k = kind[static_cast<std::size_t>(i)];
            if (k == 0) {
                sys_mat(n + i, n + i) = 1.0;
            } else {
                sys_mat.block(n + i, 0, 1, n) = sys.C.row(i);
                sys_mat.block(n + i, n, 1, m) = -sys.D.row(i);
                rhs(n + i) = k == 1 ? box->lower(i) : box->upper(i);
            }
        }
        const Eigen::CompleteOrthogonalDecomposition<Matrix> cod(sys_mat);
        Vector z = cod.solve(rhs);
        const double scale = 1.0 + rhs.norm();
        if ((sys_mat * z - rhs).norm() > feas_tol * scale) continue;  // inconsistent pattern
        // Within the pattern's affine solution set, move to the least ||mu||.
        const Matrix N = kernel_basis(sys_mat);
        if (N.cols() > 0) {
            const Matrix Nmu = N.bottomRows(m);
            const Vector c = Eigen::CompleteOrthogonalDecomposition<Matrix>(Nmu).solve(Vector(-z.tail(m)));
            z += N * c;
        }

        const Vector x = z.head(n);
        const Vector mu = z.tail(m);
        const Vector w = sys.C * x - sys.D * mu;
        bool ok = true;
        for (int i = 0; i < m && ok; ++i) {
            const double tol = feas_tol * (1.0 + std::abs(w(i)));
            ok = w(i) >= box->lower(i) - tol && w(i) <= box->upper(i) + tol;
            const int k = kind[static_cast<std::size_t>(i)];
            if (k == 1) ok = ok && mu(i) <= feas_tol;
            if (k == 2) ok = ok && mu(i) >= -feas_tol;
        }
        if (!ok) continue;

        if (!best || mu.norm() < best->mu.norm()) {
            StepResult r;
            r.x_next = x;
            r.mu = mu;
            r.lambda = -mu;
            r.w = w;
            r.residual = normal_cone_residual(ConvexSet(*box), w, mu);
            best = r;
        }
    }
    if (!best) throw Error(ErrorKind::NoSolution, "no activity pattern is consistent");
    return *best;
}

}  // namespace lure
