#include <catch2/catch_amalgamated.hpp>

#include "lure/analysis.hpp"
#include "lure/errors.hpp"
#include "lure/scenario.hpp"
#include "support.hpp"

#include <json.hpp>

#include <cmath>
#include <limits>

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

Matrix diag(double a, double b) {
    Matrix M = Matrix::Zero(2, 2);
    M(0, 0) = a;
    M(1, 1) = b;
    return M;
}

Scenario scenario(const std::string& name) { return load_scenario(testing::scenario_path(name)); }

ErrorKind kind_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("no error thrown");
    return ErrorKind::ParseError;
}

// Decay family A = -sigma I, B = D = diag(0, 1), C = B + 0.1 I, K = [-1, 1]^2.
LureSystem decay_system(double sigma, double declared) {
    const Matrix B = diag(0.0, 1.0);
    return LureSystem::make(B, B + 0.1 * Matrix::Identity(2, 2), B, Drift::affine(-sigma * Matrix::Identity(2, 2)),
                            MovingSet::constant(ConvexSet(Box{vec({-1.0, -1.0}), vec({1.0, 1.0})}), 2), std::nullopt,
                            false, declared);
}

}  // namespace

TEST_CASE("decay rates of the example family", "[analysis]") {
    const auto decay = build_system(scenario("example_thm4"));
    CHECK(attractivity_rate(decay, AttractivityVariant::WithoutUniqueness) == Approx(0.99875));
    CHECK(attractivity_rate(decay, AttractivityVariant::WithUniqueness) == Approx(0.99875));

    const auto lip = build_system(scenario("example_lipschitz"));
    const double L = 0.005 + 0.1;
    CHECK(attractivity_rate(lip, AttractivityVariant::WithUniqueness) == Approx(1.0 - L * L / 8.0));
    CHECK(lipschitz_rate(lip) == Approx(1.0 + L * L / 8.0));

    CHECK(kind_of([] { attractivity_rate(decay_system(1.0, 0.001), AttractivityVariant::WithoutUniqueness); }) ==
          ErrorKind::HypothesisFailed);
    const auto sweep = build_system(scenario("example_sweep2d"));
    CHECK(kind_of([&] { attractivity_rate(sweep, AttractivityVariant::WithoutUniqueness); }) ==
          ErrorKind::MissingConstant);
}

TEST_CASE("attractivity envelope", "[analysis]") {
    const auto sc = scenario("example_thm4");
    const auto sys = build_system(sc);
    const auto r = attractivity_check(sys, sc.x0, sc.T, sc.n_steps, AttractivityVariant::WithoutUniqueness,
                                      SolverOptions{});
    CHECK(r.pass);
    CHECK(r.claimed_rate == Approx(0.99875));
    CHECK(r.envelope.size() == static_cast<std::size_t>(sc.n_steps) + 1);
    CHECK(r.pass == (r.max_violation <= 0.0));

    const auto zero = attractivity_check(sys, Vector::Zero(2), 1.0, 50, AttractivityVariant::WithoutUniqueness,
                                         SolverOptions{});
    CHECK(zero.pass);
    for (const auto& p : zero.envelope) CHECK(p.lhs == 0.0);
}

TEST_CASE("attractivity requires the origin in K", "[analysis]") {
    auto sc = scenario("example_thm4");
    sc.set.lower = {ScalarSpec{0.2}, ScalarSpec{0.2}};
    const auto sys = build_system(sc);
    CHECK(kind_of([&] {
              attractivity_check(sys, sc.x0, 1.0, 20, AttractivityVariant::WithoutUniqueness, SolverOptions{});
          }) == ErrorKind::HypothesisFailed);
}

TEST_CASE("envelope is monotone in sigma", "[analysis][property]") {
    bool passed_before = false;
    for (double sigma : {0.5, 1.0, 2.0, 4.0}) {
        const auto sys = decay_system(sigma, sigma);
        const auto r = attractivity_check(sys, vec({5.0, 3.0}), 3.0, 600, AttractivityVariant::WithoutUniqueness,
                                          SolverOptions{});
        CHECK(r.pass);
        if (passed_before) CHECK(r.pass);
        passed_before = r.pass;
    }
}

TEST_CASE("discrete Lyapunov decrease on the decay family", "[analysis][property]") {
    const auto sc = scenario("example_thm4");
    const auto sys = build_system(sc);
    const double delta = attractivity_rate(sys, AttractivityVariant::WithoutUniqueness);
    for (int n : {250, 1000, 4000}) {
        const auto traj = simulate(sys, sc.x0, sc.T, n, SolverOptions{});
        CHECK(lyapunov_violations(traj, delta) == 0);
    }
}

TEST_CASE("Lipschitz dependence on the initial state", "[analysis]") {
    const auto sc = scenario("example_lipschitz");
    const auto sys = build_system(sc);
    const Vector x0b = sc.x0 + vec({0.6, 0.8});
    const auto r = lipschitz_dependence_check(sys, sc.x0, x0b, sc.T, sc.n_steps, SolverOptions{});
    CHECK(r.pass);
    CHECK(r.claimed_rate == Approx(lipschitz_rate(sys)));
    CHECK(r.envelope.front().lhs == Approx(1.0));

    const auto same = lipschitz_dependence_check(sys, sc.x0, sc.x0, 1.0, 50, SolverOptions{});
    CHECK(same.pass);
    for (const auto& p : same.envelope) CHECK(p.lhs == 0.0);

    // Whole space, f = -x: the difference decays like e^{-t}.
    const auto triv = scenario("example_trivial");
    const auto tsys = build_system(triv);
    const auto rt = lipschitz_dependence_check(tsys, triv.x0, vec({0.0, 0.0}), triv.T, triv.n_steps, SolverOptions{});
    CHECK(rt.pass);
    CHECK(rt.claimed_rate == Approx(1.0));
}

TEST_CASE("Lipschitz rate needs the decomposed form and c1", "[analysis]") {
    const auto perturbed = build_system(scenario("example_sec4_perturbed"));
    CHECK(kind_of([&] { lipschitz_rate(perturbed); }) == ErrorKind::MissingConstant);

    // D = 0 with a state-dependent part: L = Lh > 0 but c1 is undefined.
    const Matrix one = Matrix::Constant(1, 1, 1.0);
    const auto no_c1 = LureSystem::make(one, one, Matrix::Zero(1, 1), Drift::zero(1),
                                        MovingSet::decomposed([](double) { return ConvexSet(Box{vec({0.0}), vec({inf})}); },
                                                              0.5 * one, [](double) { return Vector::Zero(1); }, 0.0, 0.0));
    CHECK(kind_of([&] { lipschitz_rate(no_c1); }) == ErrorKind::MissingConstant);
}

TEST_CASE("dis bound", "[analysis]") {
    const Box a{vec({-1.0, -1.0}), vec({1.0, 1.0})};
    const Box b{vec({-1.0, -0.5}), vec({1.5, 1.0})};
    CHECK(dis_bound(Matrix::Identity(2, 2), 1.0, ConvexSet(a), ConvexSet(a)) == 0.0);

    Matrix rot(2, 2);
    rot << std::cos(0.3), -std::sin(0.3), std::sin(0.3), std::cos(0.3);
    CHECK(dis_bound(rot, 1.0, ConvexSet(a), ConvexSet(b)) == Approx(hausdorff_box(a, b)));

    // C = B + 0.1 I: ||C|| = 1.1, c2 = 0.01, factor 110.
    const Matrix C = diag(0.1, 1.1);
    const auto cert = certify(Matrix::Identity(2, 2), diag(0.0, 1.0), C, diag(0.0, 1.0), false);
    REQUIRE(cert.c2);
    const double d = dis_bound(C, *cert.c2, ConvexSet(a), ConvexSet(b));
    CHECK(d == Approx(110.0 * hausdorff_box(a, b)));
    CHECK(d == Approx(dis_bound(C, *cert.c2, ConvexSet(b), ConvexSet(a))));

    const Box half{vec({0.0, 0.0}), vec({inf, 1.0})};
    CHECK_THROWS_AS(dis_bound(C, *cert.c2, ConvexSet(a), ConvexSet(half)), Error);
}

TEST_CASE("perturbed-output rewrite", "[analysis]") {
    const auto ref = scenario("example_timevarying");
    const auto ref_sys = build_system(ref);
    const Matrix B = ref.B, D = ref.D, C = ref.C;

    SECTION("C_bar = C leaves the dynamics unchanged") {
        const auto r = perturb_transform(ref.A, B, C, D, ref_sys.K, C);
        CHECK(r.decomposed);
        CHECK_FALSE(r.warning);
        CHECK(r.H.isZero(0.0));
        const auto a = simulate(ref_sys, ref.x0, ref.T, 200, SolverOptions{});
        const auto b = simulate(r.system, ref.x0, ref.T, 200, SolverOptions{});
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a.states[i] == b.states[i]);
            CHECK(a.lambdas[i] == b.lambdas[i]);
        }
    }

    SECTION("example: C_bar = B + 0.1 I") {
        const Matrix C_bar = B + 0.1 * Matrix::Identity(2, 2);
        const auto r = perturb_transform(ref.A, B, C_bar, D, ref_sys.K, C);
        CHECK((r.H + 0.1 * Matrix::Identity(2, 2)).norm() <= 1e-15);
        CHECK(r.lh == Approx(0.1));
        // rge(0.1 I) is not inside rge(D + D^T) = span(e2).
        CHECK_FALSE(r.decomposed);
        CHECK(r.warning);
        CHECK_FALSE(r.system.K.is_decomposed());
        CHECK(r.system.sigma == Approx(1.0));
        // K_bar(t, x) = [f1(t) - 0.1 x1, inf) x [f2(t) - 0.1 x2, inf); f1(1.5) = -0.625, f2(1.5) = 0.25.
        const auto kb = as_box(r.system.K.evaluate(1.5, vec({2.0, -1.0})));
        REQUIRE(kb);
        CHECK(kb->lower(0) == Approx(-0.625 - 0.2));
        CHECK(kb->lower(1) == Approx(0.25 + 0.1));
        CHECK(std::isinf(kb->upper(0)));
        const auto traj = simulate(r.system, ref.x0, ref.T, ref.n_steps, SolverOptions{});
        CHECK(traj.complete());
        // The raw tuple with C_bar fails the kernel condition.
        CHECK_FALSE(kernel_inclusion(D, Matrix::Identity(2, 2), B, C_bar));
    }

    SECTION("C_bar = C + eps (D + D^T) keeps uniqueness") {
        const Matrix C_bar = C + 0.05 * (D + D.transpose());
        const auto r = perturb_transform(ref.A, B, C_bar, D, ref_sys.K, C);
        CHECK(r.decomposed);
        CHECK_FALSE(r.warning);
        CHECK(r.system.K.is_decomposed());
        CHECK(lipschitz_rate(r.system) == Approx(1.0 + 0.1 * 0.1 / 8.0));
    }

    SECTION("state-dependent reference is rejected") {
        const auto lip = build_system(scenario("example_lipschitz"));
        CHECK_THROWS_AS(perturb_transform(ref.A, B, C, D, lip.K, C), Error);
    }
}

TEST_CASE("convergence orders", "[analysis]") {
    const auto triv = scenario("example_trivial");
    const auto t = richardson_refine(build_system(triv), triv.x0, triv.T, 50, 5, SolverOptions{});
    CHECK(convergence_order(t) == Approx(1.0).margin(0.1));

    const auto sweep = scenario("example_sweep2d");
    const auto s = richardson_refine(build_system(sweep), sweep.x0, sweep.T, 50, 5, SolverOptions{});
    CHECK(convergence_order(s) >= 0.8);
}

TEST_CASE("resolvent diagnostics on the corpus", "[analysis][property]") {
    for (const char* name : {"example_trivial", "example_sweep1d", "example_sweep2d", "example_thm4", "example_lipschitz",
                             "example_sec4", "example_timevarying", "example_sec4_perturbed"}) {
        INFO(name);
        const auto sc = scenario(name);
        const auto sys = build_system(sc);
        const auto traj = simulate(sys, sc.x0, sc.T, sc.n_steps, SolverOptions{});
        const auto r = resolvent_check(sys, traj, SolverOptions{});
        CHECK(r.samples == traj.size() - 1);
        CHECK(r.violations == 0);
        CHECK(r.monotonicity_violations == 0);
        CHECK(r.max_ratio <= r.bound + 1e-8);
    }
}

TEST_CASE("rate report JSON", "[analysis]") {
    RateReport r;
    r.claimed_rate = 0.5;
    r.envelope = {{0.0, 1.0, 2.0}, {0.1, 1.5, 1.0}};
    r.max_violation = 0.5;
    r.pass = false;
    r.tightest_ratio = 1.5;
    const auto j = nlohmann::json::parse(to_json(r));
    CHECK(j.at("claimed_rate") == 0.5);
    CHECK(j.at("pass") == false);
    CHECK(j.at("max_violation") == 0.5);
    REQUIRE(j.at("envelope").size() == 2);
    CHECK(j.at("envelope")[1][1] == 1.5);
}
