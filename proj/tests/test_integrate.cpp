#include <catch2/catch_amalgamated.hpp>

#include "lure/analysis.hpp"
#include "lure/errors.hpp"
#include "lure/integrate.hpp"
#include "lure/scenario.hpp"
#include "support.hpp"

#include <cmath>
#include <cstdlib>
#include <limits>
#include <sstream>

using namespace lure;
using Catch::Approx;

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

struct Loaded {
    Scenario sc;
    LureSystem sys;
};

Loaded load(const std::string& name) {
    Scenario sc = load_scenario(testing::scenario_path(name));
    LureSystem sys = build_system(sc);
    return {std::move(sc), std::move(sys)};
}

Trajectory run(const Loaded& l, int n_steps = -1) {
    return simulate(l.sys, l.sc.x0, l.sc.T, n_steps > 0 ? n_steps : l.sc.n_steps, SolverOptions{});
}

Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out(i++) = x;
    return out;
}

std::string csv(const Trajectory& t) {
    std::ostringstream os;
    write_csv(os, t);
    return os.str();
}

const char* kCorpus[] = {"example_trivial", "example_sweep1d", "example_sweep2d", "example_thm4",
                         "example_lipschitz", "example_sec4", "example_timevarying", "example_sec4_perturbed"};

}  // namespace

TEST_CASE("uniform grid and initial state", "[integrate]") {
    const auto l = load("example_trivial");
    const auto traj = run(l);
    REQUIRE(traj.complete());
    REQUIRE(traj.size() == 201);
    CHECK(traj.states.front() == l.sc.x0);
    for (std::size_t i = 0; i < traj.size(); ++i) CHECK(traj.times[i] == i * (l.sc.T / l.sc.n_steps));
}

TEST_CASE("drift-only scenario follows the exponential", "[integrate]") {
    const auto l = load("example_trivial");
    const auto traj = run(l);
    const double h = l.sc.T / l.sc.n_steps;
    for (std::size_t i = 0; i < traj.size(); ++i) {
        const Vector exact = std::exp(-traj.times[i]) * l.sc.x0;
        CHECK((traj.states[i] - exact).norm() <= 2.0 * h * l.sc.x0.norm());
        CHECK(traj.lambdas[i].norm() == 0.0);
    }
}

TEST_CASE("catching-up on a moving half-line", "[integrate]") {
    const auto l = load("example_sweep1d");
    const auto traj = run(l);
    REQUIRE(traj.complete());
    const double h = l.sc.T / l.sc.n_steps;
    for (std::size_t i = 0; i < traj.size(); ++i) {
        const double t = traj.times[i];
        CHECK(std::abs(traj.states[i](0) - std::max(0.0, t - 1.0)) <= h);
    }
    // Each step is the projection of y_i = x_i onto K(t_{i+1}).
    for (std::size_t i = 0; i + 1 < traj.size(); ++i) {
        const double lower = traj.times[i + 1] - 1.0;
        CHECK(std::abs(traj.states[i + 1](0) - std::max(traj.states[i](0), lower)) <= 1e-10);
    }
}

TEST_CASE("outputs are C x + D lambda as stored", "[integrate][property]") {
    for (const char* name : kCorpus) {
        const auto l = load(name);
        const auto traj = run(l);
        REQUIRE(traj.complete());
        for (std::size_t i = 0; i < traj.size(); ++i) {
            CHECK(traj.outputs[i] == l.sys.C * traj.states[i] + l.sys.D * traj.lambdas[i]);
        }
    }
}

TEST_CASE("per-step residuals stay below the tolerance", "[integrate][property]") {
    const SolverOptions opts;
    for (const char* name : kCorpus) {
        const auto l = load(name);
        const auto traj = run(l);
        for (double r : traj.residuals) CHECK(r <= opts.tol);
    }
}

TEST_CASE("hypomonotonicity diagnostic holds on the corpus", "[integrate][property]") {
    for (const char* name : kCorpus) {
        INFO(name);
        const auto l = load(name);
        const auto traj = run(l);
        CHECK(traj.hypo_margin.size() == traj.size() - 1);
        CHECK(hypo_violations(traj) == 0);
    }
}

TEST_CASE("simulation is deterministic", "[integrate]") {
    for (const char* name : {"example_sweep2d", "example_sec4_perturbed"}) {
        const auto l = load(name);
        CHECK(csv(run(l)) == csv(run(l)));
    }
}

TEST_CASE("discrete derivative stays bounded under refinement", "[integrate][property]") {
    for (const char* name : {"example_sweep1d", "example_sweep2d", "example_thm4", "example_sec4"}) {
        INFO(name);
        const auto l = load(name);
        const auto levels = richardson_refine(l.sys, l.sc.x0, l.sc.T, 100, 4, SolverOptions{});
        for (std::size_t k = 0; k + 1 < levels.size(); ++k) {
            CHECK(discrete_derivative_bound(levels[k + 1]) <= 1.1 * discrete_derivative_bound(levels[k]));
        }
    }
}

TEST_CASE("refinement of an equilibrium is exact", "[integrate]") {
    const auto l = load("example_trivial");
    const auto levels = richardson_refine(l.sys, Vector::Zero(2), 1.0, 10, 3, SolverOptions{});
    for (const auto& t : levels) {
        for (const auto& x : t.states) CHECK(x.norm() == 0.0);
    }
    CHECK(std::isnan(convergence_order(levels)));
    CHECK_THROWS_AS(richardson_refine(l.sys, l.sc.x0, 1.0, 10, 1, SolverOptions{}), Error);
}

TEST_CASE("inadmissible initial states", "[integrate]") {
    const Matrix one = Matrix::Constant(1, 1, 1.0);
    const auto sys = LureSystem::make(one, one, Matrix::Zero(1, 1), Drift::zero(1),
                                      MovingSet::constant(ConvexSet(Box{vec({1.0}), vec({2.0})}), 1));
    try {
        simulate(sys, vec({0.0}), 1.0, 10, SolverOptions{});
        FAIL("expected NotAdmissible");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::NotAdmissible);
    }
    // Forced: the first step catches up with the set.
    const auto traj = simulate(sys, vec({0.0}), 1.0, 10, SolverOptions{}, true);
    REQUIRE(traj.complete());
    CHECK(traj.states[1](0) == Approx(1.0));
}

TEST_CASE("a failing step returns the partial trajectory", "[integrate]") {
    const Matrix one = Matrix::Constant(1, 1, 1.0);
    Drift bad{[](double t, const Vector& x) -> Vector {
                  return t < 0.5 ? Vector(-x) : Vector::Constant(1, std::numeric_limits<double>::quiet_NaN());
              },
              1.0, std::nullopt};
    const auto sys = LureSystem::make(one, one, Matrix::Zero(1, 1), bad,
                                      MovingSet::constant(ConvexSet(Box{vec({-1.0}), vec({1.0})}), 1));
    const auto traj = simulate(sys, vec({0.5}), 1.0, 100, SolverOptions{});
    REQUIRE(traj.failure);
    CHECK(traj.failure->step == 50);
    CHECK(traj.size() == 51);

    const auto tiny = simulate(sys, vec({0.5}), 1e-13, 100, SolverOptions{});
    REQUIRE(tiny.failure);
    CHECK(tiny.failure->kind == ErrorKind::StepTooSmall);
    CHECK(tiny.size() == 1);
}

TEST_CASE("CSV layout and round trip", "[integrate]") {
    const auto l = load("example_sec4");
    const auto traj = run(l, 20);
    const std::string text = csv(traj);
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    CHECK(line == "t,x_1,x_2,lambda_1,lambda_2,y_1,y_2,residual,iters");
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        std::istringstream cells(line);
        std::string cell;
        std::vector<double> v;
        while (std::getline(cells, cell, ',')) v.push_back(std::strtod(cell.c_str(), nullptr));
        REQUIRE(v.size() == 9);
        CHECK(v[0] == traj.times[rows]);
        CHECK(v[1] == traj.states[rows](0));
        CHECK(v[2] == traj.states[rows](1));
        CHECK(v[4] == traj.lambdas[rows](1));
        CHECK(v[6] == traj.outputs[rows](1));
        ++rows;
    }
    CHECK(rows == traj.size());
}

TEST_CASE("SVG output", "[integrate]") {
    const auto l = load("example_sec4");
    std::ostringstream os;
    write_svg(os, run(l, 50));
    const std::string svg = os.str();
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("polyline") != std::string::npos);
    CHECK(svg.rfind("</svg>") != std::string::npos);
}

TEST_CASE("unbounded sets in both directions", "[integrate]") {
    const Matrix one = Matrix::Constant(1, 1, 1.0);
    const auto sys = LureSystem::make(one, one, Matrix::Zero(1, 1), Drift::affine(one),
                                      MovingSet::constant(ConvexSet(Box{vec({-inf}), vec({1.0})}), 1));
    const auto traj = simulate(sys, vec({0.5}), 2.0, 200, SolverOptions{});
    REQUIRE(traj.complete());
    // Exponential growth capped at 1; the multiplier holds the state there.
    CHECK(traj.states.back()(0) == Approx(1.0));
    CHECK(traj.lambdas.back()(0) == Approx(-1.0).margin(1e-9));
}
