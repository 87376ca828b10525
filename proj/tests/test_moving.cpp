#include <catch2/catch_amalgamated.hpp>

#include "lure/errors.hpp"
#include "lure/moving.hpp"
#include "support.hpp"

#include <cmath>
#include <limits>
#include <random>

using namespace lure;
using Catch::Approx;

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out(i++) = x;
    return out;
}

std::vector<LipschitzSample> grid_samples(int state_dim, std::mt19937_64& rng, int count) {
    std::uniform_real_distribution<double> u(0.0, 6.0);
    std::vector<LipschitzSample> out;
    for (int k = 0; k < count; ++k) {
        out.push_back({u(rng), u(rng), testing::random_vector(rng, state_dim), testing::random_vector(rng, state_dim)});
    }
    return out;
}

}  // namespace

TEST_CASE("evaluation of decomposed carriers", "[moving]") {
    const ConvexSet base(Box{vec({0.0, 0.0}), vec({inf, inf})});
    const auto k = MovingSet::time_only([base](double) { return base; }, 2, 0.0);
    const auto v = as_box(k.evaluate(3.0, vec({1.0, 2.0})));
    REQUIRE(v);
    CHECK(v->lower(0) == 0.0);

    // K(t) - (Cbar - C) x with Cbar - C = 0.1 I.
    const Matrix H = -0.1 * Matrix::Identity(2, 2);
    const auto ks = MovingSet::decomposed(
        [](double t) { return ConvexSet(Box{vec({-t, -1.0}), vec({inf, inf})}); }, H,
        [](double) { return Vector::Zero(2); }, 1.0, 0.0);
    const auto w = as_box(ks.evaluate(2.0, vec({1.0, -3.0})));
    REQUIRE(w);
    CHECK(w->lower(0) == Approx(-2.1));
    CHECK(w->lower(1) == Approx(-0.7));
    CHECK(ks.lk2() == Approx(0.1));
    CHECK(ks.lk1() == Approx(1.0));
}

TEST_CASE("decomposed carrier translates with H x", "[moving][property]") {
    std::mt19937_64 rng(31);
    const Matrix H = testing::random_matrix(rng, 2, 3);
    const auto ks = MovingSet::decomposed(
        [](double t) { return ConvexSet(Box{vec({std::sin(t), -1.0}), vec({2.0 + std::sin(t), 1.0})}); }, H,
        [](double t) { return vec({0.5 * t, 0.0}); }, 1.0, 0.5);
    for (int k = 0; k < 50; ++k) {
        const Vector x = testing::random_vector(rng, 3);
        const double t = 0.1 * k;
        const auto a = as_box(ks.evaluate(t, x));
        const auto b = as_box(ks.evaluate(t, Vector::Zero(3)));
        CHECK((a->lower - b->lower - H * x).norm() <= 1e-12);
        CHECK((a->upper - b->upper - H * x).norm() <= 1e-12);
    }
    // Decomposed form satisfies the general contract.
    const auto report = verify_lipschitz(ks, Matrix::Identity(2, 3), 1.0, grid_samples(3, rng, 500));
    CHECK(report.violations.empty());
    CHECK(report.max_observed_ratio <= 1.0 + 1e-9);
}

TEST_CASE("declared Lh below ||H|| is rejected", "[moving]") {
    CHECK_THROWS_AS(MovingSet::decomposed([](double) { return ConvexSet::whole_space(1); }, Matrix::Constant(1, 1, 2.0),
                                          [](double) { return Vector::Zero(1); }, 0.0, 0.0, 1.0),
                    Error);
}

TEST_CASE("verify_lipschitz", "[moving]") {
    std::mt19937_64 rng(32);
    const auto constant = MovingSet::constant(ConvexSet(Box{vec({0.0}), vec({1.0})}), 1);
    const auto r0 = verify_lipschitz(constant, Matrix::Identity(1, 1), 1.0, grid_samples(1, rng, 100));
    CHECK(r0.max_observed_ratio == 0.0);
    CHECK(r0.violations.empty());

    const auto sine = MovingSet::time_only([](double t) { return ConvexSet(Box{vec({std::sin(t)}), vec({inf})}); }, 1, 1.0);
    const auto r1 = verify_lipschitz(sine, Matrix::Identity(1, 1), 1.0, grid_samples(1, rng, 1000));
    CHECK(r1.violations.empty());

    const auto too_fast = MovingSet::time_only([](double t) { return ConvexSet(Box{vec({3.0 * t}), vec({inf})}); }, 1, 1.0);
    CHECK_FALSE(verify_lipschitz(too_fast, Matrix::Identity(1, 1), 1.0, grid_samples(1, rng, 50)).violations.empty());

    const auto steep = MovingSet::general([](double, const Vector& x) { return ConvexSet(Box{x, x.array() + 1.0}); }, 0.0, 4.0);
    const auto r2 = verify_lipschitz(steep, 3.0 * Matrix::Identity(1, 1), 9.0, {});
    CHECK(r2.bound_breached);  // lk2 = 4 > c2 / ||C|| = 3
    CHECK(r2.lk2_limit == Approx(3.0));
}

TEST_CASE("hypomonotonicity margin", "[moving]") {
    // Same set, normal-cone pairs: plain monotonicity.
    const Vector a1 = vec({1.0}), b1 = vec({1.0});
    const Vector a2 = vec({0.0}), b2 = vec({0.5});
    CHECK(hypomonotonicity_margin(a1, b1, 0.0, vec({0.0}), a2, b2, 0.0, vec({0.0}), 1.0, 1.0) == Approx(0.5));
    // Moving upper bound [.., t]: a1 in N(b1 = 0) at t=0, a2 in N(b2 = 1) at t=1.
    const double m = hypomonotonicity_margin(vec({1.0}), vec({0.0}), 0.0, vec({0.0}), vec({1.0}), vec({1.0}), 1.0,
                                             vec({0.0}), 1.0, 0.0);
    CHECK(m >= 0.0);
}
