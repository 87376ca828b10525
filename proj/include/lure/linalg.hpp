#pragma once

#include <Eigen/Dense>

#include <optional>

namespace lure {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Relative threshold (against the largest singular value / eigenvalue) below
/// which a singular value or eigenvalue is treated as zero.
inline constexpr double kRankTol = 1e-9;

/// Largest singular value.
double spectral_norm(const Matrix& M);

Matrix symmetric_part(const Matrix& M);

/// Smallest eigenvalue of M that is strictly above rel_tol * (largest eigenvalue).
/// Throws NotSymmetric / NotPSD when M violates the preconditions (checked
/// relative to rel_tol * max|entry|), NoPositiveEigenvalue when no eigenvalue
/// clears the threshold.
double smallest_positive_eigenvalue(const Matrix& M, double rel_tol = kRankTol);

/// True iff the symmetric part of the square matrix M has min eigenvalue >= -tol.
bool is_positive_semidefinite(const Matrix& M, double tol = kRankTol);

/// Orthonormal basis (columns) of the range of M; singular values below
/// rel_tol * sigma_max are treated as zero.
Matrix range_basis(const Matrix& M, double rel_tol = kRankTol);

/// Orthonormal basis (columns) of the null space of M. A zero matrix has the
/// whole space as kernel.
Matrix kernel_basis(const Matrix& M, double rel_tol = kRankTol);

/// Orthogonal projector onto rge(M).
Matrix range_projector(const Matrix& M, double rel_tol = kRankTol);

int numerical_rank(const Matrix& M, double rel_tol = kRankTol);

/// rge(A) subset of rge(B), both with the same row count.
bool range_included(const Matrix& A, const Matrix& B, double rel_tol = kRankTol);

/// ker(D + D^T) subset of ker(PB - C^T): every kernel basis vector v satisfies
/// ||(PB - C^T) v|| <= tol * ||PB - C^T|| * ||v||.
bool kernel_inclusion(const Matrix& D, const Matrix& P, const Matrix& B, const Matrix& C,
                      double tol = kRankTol);

/// The extreme admissible kappa making (kappa I, B, C, D) passive with storage P:
/// 0 when PB = C^T, otherwise -||PB - C^T||^2 / (4 alpha c1).
/// Throws KernelInclusionViolated when the kernel condition fails.
double select_kappa(const Matrix& P, const Matrix& B, const Matrix& C, const Matrix& D);

/// Same formula as select_kappa without the kernel-inclusion gate. The value is
/// only a passivity certificate when kernel_inclusion holds.
double kappa_bound(const Matrix& P, const Matrix& B, const Matrix& C, const Matrix& D);

/// -[[PA + A^T P, PB - C^T], [B^T P - C, -(D + D^T)]] is PSD within tol.
bool check_passive(const Matrix& A, const Matrix& B, const Matrix& C, const Matrix& D,
                   const Matrix& P, double tol = kRankTol);

struct PassivityCertificate {
    Matrix P;
    double kappa = 0.0;
    std::optional<double> c1;  // smallest positive eigenvalue of D + D^T
    std::optional<double> c2;  // smallest positive eigenvalue of C C^T
    double alpha = 1.0;        // smallest eigenvalue of P
    bool kernel_inclusion = true;
};

/// Builds the certificate for (B, C, D) with storage P. When
/// require_kernel_inclusion is false a failed kernel condition is recorded on
/// the certificate and kappa falls back to kappa_bound.
PassivityCertificate certify(const Matrix& P, const Matrix& B, const Matrix& C, const Matrix& D,
                             bool require_kernel_inclusion = true);

/// Change of variables x~ = L^T x for P = L L^T, which turns the storage matrix
/// into the identity.
class StorageTransform {
public:
    explicit StorageTransform(const Matrix& P);

    bool is_identity() const { return identity_; }
    Vector to_identity(const Vector& x) const;    // L^T x
    Vector from_identity(const Vector& xt) const;  // L^{-T} x~
    const Matrix& Lt() const { return lt_; }
    const Matrix& Lt_inv() const { return lt_inv_; }

private:
    bool identity_ = true;
    Matrix lt_;
    Matrix lt_inv_;
};

}  // namespace lure
