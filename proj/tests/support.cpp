#include "support.hpp"

#include <cmath>
#include <limits>

namespace lure::testing {

Matrix random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
    std::normal_distribution<double> g;
    Matrix M(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) M(i, j) = g(rng);
    return M;
}

Vector random_vector(std::mt19937_64& rng, Eigen::Index size) { return random_matrix(rng, size, 1); }

RandomStep random_step(std::mt19937_64& rng, int max_m, bool random_storage) {
    std::uniform_int_distribution<int> pick_m(1, max_m);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const int m = pick_m(rng);
    const int n = std::uniform_int_distribution<int>(m, m + 2)(rng);
    const int rank = std::uniform_int_distribution<int>(0, m)(rng);

    const Matrix U = random_matrix(rng, m, rank);
    const Matrix X = random_matrix(rng, rank, rank);
    Matrix D = U * U.transpose() + U * (X - X.transpose()) * U.transpose();
    if (rank == 0) D = Matrix::Zero(m, m);
    const Matrix Pi = rank == 0 ? Matrix::Zero(m, m) : range_projector(D + D.transpose());

    Matrix C;
    do {
        C = random_matrix(rng, m, n);
    } while (numerical_rank(C) < m);

    Matrix P = Matrix::Identity(n, n);
    if (random_storage && unif(rng) < 0.5) {
        const Matrix R = random_matrix(rng, n, n);
        P = R * R.transpose() + 0.5 * Matrix::Identity(n, n);
    }
    const Matrix E = random_matrix(rng, n, m) * (unif(rng) < 0.2 ? 0.0 : 1.0);
    const Matrix B = P.llt().solve(Matrix(C.transpose() + E * Pi));

    constexpr double inf = std::numeric_limits<double>::infinity();
    Vector lo(m), up(m);
    for (int i = 0; i < m; ++i) {
        const double a = 2.0 * unif(rng) - 1.0;
        const double width = 0.1 + 2.0 * unif(rng);
        const double kind = unif(rng);
        lo(i) = kind < 0.15 ? -inf : a;
        up(i) = (kind > 0.85 || kind < 0.05) ? inf : a + width;
    }
    const ConvexSet K{Box{lo, up}};
    LureSystem sys = LureSystem::make(B, C, D, Drift::zero(n), MovingSet::constant(K, n), P);

    RandomStep out{std::move(sys), random_vector(rng, n), 2.0 * random_vector(rng, n),
                   0.01 + 0.49 * unif(rng)};
    return out;
}

std::string scenario_path(const std::string& name) { return std::string(LURE_SCENARIO_DIR) + "/" + name + ".json"; }

}  // namespace lure::testing
