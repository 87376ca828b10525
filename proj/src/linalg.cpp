#include "lure/linalg.hpp"

#include "lure/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace lure {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::DimensionMismatch: return "DimensionMismatch";
        case ErrorKind::NotSymmetric: return "NotSymmetric";
        case ErrorKind::NotPSD: return "NotPSD";
        case ErrorKind::NoPositiveEigenvalue: return "NoPositiveEigenvalue";
        case ErrorKind::KernelInclusionViolated: return "KernelInclusionViolated";
        case ErrorKind::EmptySet: return "EmptySet";
        case ErrorKind::InfiniteDistance: return "InfiniteDistance";
        case ErrorKind::Unbounded: return "Unbounded";
        case ErrorKind::SolverDiverged: return "SolverDiverged";
        case ErrorKind::StepTooLarge: return "StepTooLarge";
        case ErrorKind::StepTooSmall: return "StepTooSmall";
        case ErrorKind::NoSolution: return "NoSolution";
        case ErrorKind::NotAdmissible: return "NotAdmissible";
        case ErrorKind::MissingConstant: return "MissingConstant";
        case ErrorKind::HypothesisFailed: return "HypothesisFailed";
        case ErrorKind::RangeConditionViolated: return "RangeConditionViolated";
        case ErrorKind::ParseError: return "ParseError";
        case ErrorKind::ValidationError: return "ValidationError";
    }
    return "Unknown";
}

namespace {

void require_square(const Matrix& M, const char* name) {
    if (M.rows() != M.cols()) {
        throw Error(ErrorKind::DimensionMismatch,
                    std::string(name) + " must be square, got " + std::to_string(M.rows()) + "x" +
                        std::to_string(M.cols()));
    }
}

Eigen::JacobiSVD<Matrix> full_svd(const Matrix& M) {
    return Eigen::JacobiSVD<Matrix>(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
}

int rank_from_singular_values(const Vector& sv, double rel_tol) {
    if (sv.size() == 0 || sv(0) <= 0.0) return 0;
    const double threshold = rel_tol * sv(0);
    int rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        if (sv(i) > threshold) ++rank;
    }
    return rank;
}

}  // namespace

double spectral_norm(const Matrix& M) {
    if (M.size() == 0) return 0.0;
    Eigen::JacobiSVD<Matrix> svd(M);
    return svd.singularValues()(0);
}

Matrix symmetric_part(const Matrix& M) {
    require_square(M, "matrix");
    return 0.5 * (M + M.transpose());
}

double smallest_positive_eigenvalue(const Matrix& M, double rel_tol) {
    require_square(M, "matrix");
    const double scale = M.cwiseAbs().maxCoeff();
    if (scale == 0.0) {
        throw Error(ErrorKind::NoPositiveEigenvalue, "zero matrix has no positive eigenvalue");
    }
    if ((M - M.transpose()).cwiseAbs().maxCoeff() > rel_tol * scale) {
        throw Error(ErrorKind::NotSymmetric, "matrix is not symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetric_part(M), Eigen::EigenvaluesOnly);
    const Vector& ev = eig.eigenvalues();  // ascending
    const double largest = ev(ev.size() - 1);
    if (ev(0) < -rel_tol * std::max(std::abs(largest), scale)) {
        throw Error(ErrorKind::NotPSD, "matrix has eigenvalue " + std::to_string(ev(0)));
    }
    const double threshold = rel_tol * largest;
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        if (ev(i) > threshold && ev(i) > 0.0) return ev(i);
    }
    throw Error(ErrorKind::NoPositiveEigenvalue, "all eigenvalues are below the rank threshold");
}

bool is_positive_semidefinite(const Matrix& M, double tol) {
    require_square(M, "matrix");
    if (M.size() == 0) return true;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetric_part(M), Eigen::EigenvaluesOnly);
    return eig.eigenvalues()(0) >= -tol;
}

int numerical_rank(const Matrix& M, double rel_tol) {
    if (M.size() == 0) return 0;
    Eigen::JacobiSVD<Matrix> svd(M);
    return rank_from_singular_values(svd.singularValues(), rel_tol);
}

Matrix range_basis(const Matrix& M, double rel_tol) {
    if (M.size() == 0) return Matrix(M.rows(), 0);
    auto svd = full_svd(M);
    const int rank = rank_from_singular_values(svd.singularValues(), rel_tol);
    return svd.matrixU().leftCols(rank);
}

Matrix kernel_basis(const Matrix& M, double rel_tol) {
    if (M.size() == 0) return Matrix::Identity(M.cols(), M.cols());
    auto svd = full_svd(M);
    const int rank = rank_from_singular_values(svd.singularValues(), rel_tol);
    return svd.matrixV().rightCols(M.cols() - rank);
}

Matrix range_projector(const Matrix& M, double rel_tol) {
    const Matrix U = range_basis(M, rel_tol);
    return U * U.transpose();
}

bool range_included(const Matrix& A, const Matrix& B, double rel_tol) {
    if (A.rows() != B.rows()) {
        throw Error(ErrorKind::DimensionMismatch, "range_included: row counts differ");
    }
    const double norm_a = spectral_norm(A);
    if (norm_a == 0.0) return true;
    const Matrix residual = A - range_projector(B, rel_tol) * A;
    return spectral_norm(residual) <= rel_tol * norm_a;
}

namespace {

void check_system_dims(const Matrix& D, const Matrix& P, const Matrix& B, const Matrix& C) {
    const auto n = P.rows();
    const auto m = D.rows();
    if (P.cols() != n || D.cols() != m || B.rows() != n || B.cols() != m || C.rows() != m ||
        C.cols() != n) {
        throw Error(ErrorKind::DimensionMismatch,
                    "expected P n x n, B n x m, C m x n, D m x m with n = " + std::to_string(n) +
                        ", m = " + std::to_string(m));
    }
}

// ||PB - C^T||, with values at rounding level of the operands reported as 0.
double passivity_gap(const Matrix& P, const Matrix& B, const Matrix& C, double tol) {
    const Matrix PB = P * B;
    const double gap = spectral_norm(PB - C.transpose());
    const double scale = std::max(spectral_norm(PB), spectral_norm(C));
    return gap <= tol * scale ? 0.0 : gap;
}

}  // namespace

bool kernel_inclusion(const Matrix& D, const Matrix& P, const Matrix& B, const Matrix& C,
                      double tol) {
    check_system_dims(D, P, B, C);
    const Matrix E = P * B - C.transpose();
    const double norm_e = passivity_gap(P, B, C, tol);
    if (norm_e == 0.0) return true;
    const Matrix kernel = kernel_basis(D + D.transpose(), tol);
    for (Eigen::Index j = 0; j < kernel.cols(); ++j) {
        const Vector v = kernel.col(j);
        if ((E * v).norm() > tol * norm_e * v.norm()) return false;
    }
    return true;
}

double kappa_bound(const Matrix& P, const Matrix& B, const Matrix& C, const Matrix& D) {
    check_system_dims(D, P, B, C);
    const double gap = passivity_gap(P, B, C, kRankTol);
    if (gap == 0.0) return 0.0;
    const double alpha = smallest_positive_eigenvalue(P);
    const double c1 = smallest_positive_eigenvalue(D + D.transpose());
    return -gap * gap / (4.0 * alpha * c1);
}

double select_kappa(const Matrix& P, const Matrix& B, const Matrix& C, const Matrix& D) {
    if (!kernel_inclusion(D, P, B, C)) {
        throw Error(ErrorKind::KernelInclusionViolated, "ker(D + D^T) is not inside ker(PB - C^T)");
    }
    return kappa_bound(P, B, C, D);
}

bool check_passive(const Matrix& A, const Matrix& B, const Matrix& C, const Matrix& D,
                   const Matrix& P, double tol) {
    const auto n = P.rows();
    const auto m = D.rows();
    if (A.rows() != n || A.cols() != n) {
        throw Error(ErrorKind::DimensionMismatch, "A must be n x n");
    }
    check_system_dims(D, P, B, C);
    Matrix block(n + m, n + m);
    const Matrix off = P * B - C.transpose();
    block.topLeftCorner(n, n) = P * A + A.transpose() * P;
    block.topRightCorner(n, m) = off;
    block.bottomLeftCorner(m, n) = off.transpose();
    block.bottomRightCorner(m, m) = -(D + D.transpose());
    const double scale = std::max(1.0, block.cwiseAbs().maxCoeff());
    return is_positive_semidefinite(-block, tol * scale);
}

PassivityCertificate certify(const Matrix& P, const Matrix& B, const Matrix& C, const Matrix& D,
                             bool require_kernel_inclusion) {
    check_system_dims(D, P, B, C);
    PassivityCertificate cert;
    cert.P = P;
    const double p_scale = std::max(1.0, P.cwiseAbs().maxCoeff());
    if ((P - P.transpose()).cwiseAbs().maxCoeff() > kRankTol * p_scale) {
        throw Error(ErrorKind::NotSymmetric, "storage matrix P is not symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetric_part(P), Eigen::EigenvaluesOnly);
    cert.alpha = eig.eigenvalues()(0);
    if (!(cert.alpha > 0.0)) {
        throw Error(ErrorKind::NotPSD, "storage matrix P is not positive definite");
    }
    try {
        cert.c1 = smallest_positive_eigenvalue(D + D.transpose());
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::NoPositiveEigenvalue) throw;
    }
    try {
        cert.c2 = smallest_positive_eigenvalue(C * C.transpose());
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::NoPositiveEigenvalue) throw;
    }
    cert.kernel_inclusion = kernel_inclusion(D, P, B, C);
    if (!cert.kernel_inclusion && require_kernel_inclusion) {
        throw Error(ErrorKind::KernelInclusionViolated, "ker(D + D^T) is not inside ker(PB - C^T)");
    }
    cert.kappa = kappa_bound(P, B, C, D);
    return cert;
}

StorageTransform::StorageTransform(const Matrix& P) {
    const auto n = P.rows();
    identity_ = P.isIdentity(0.0);
    if (identity_) {
        lt_ = Matrix::Identity(n, n);
        lt_inv_ = Matrix::Identity(n, n);
        return;
    }
    Eigen::LLT<Matrix> llt(P);
    if (llt.info() != Eigen::Success) {
        throw Error(ErrorKind::NotPSD, "storage matrix P is not positive definite");
    }
    lt_ = llt.matrixU();
    lt_inv_ = lt_.triangularView<Eigen::Upper>().solve(Matrix::Identity(n, n));
}

Vector StorageTransform::to_identity(const Vector& x) const {
    return identity_ ? x : Vector(lt_ * x);
}

Vector StorageTransform::from_identity(const Vector& xt) const {
    return identity_ ? xt : Vector(lt_inv_ * xt);
}

}  // namespace lure
