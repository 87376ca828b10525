#include <catch2/catch_amalgamated.hpp>

#include "lure/analysis.hpp"
#include "lure/errors.hpp"
#include "lure/scenario.hpp"
#include "support.hpp"

#include <fstream>
#include <sstream>

using namespace lure;
using Catch::Approx;
using Catch::Matchers::ContainsSubstring;

namespace {

std::string read(const std::string& name) {
    std::ifstream in(testing::scenario_path(name));
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// Minimal valid scenario text with placeholders substituted by the caller.
std::string minimal(const std::string& D = "[[1]]", const std::string& extra = "") {
    return R"({
  "name": "m",
  "n": 1,
  "m": 1,
  "drift": { "A": [[-1]] },
  "B": [[1]],
  "C": [[1]],
  "D": )" + D + R"(,
  "set": { "lower": [-1], "upper": [1] },
  "x0": [0.5],
  "T": 1,
  "n_steps": 10)" + extra + "\n}\n";
}

std::string error_of(const std::function<void()>& f, ErrorKind expected) {
    try {
        f();
    } catch (const Error& e) {
        CHECK(e.kind() == expected);
        return e.what();
    }
    FAIL("no error thrown");
    return {};
}

const char* kBundled[] = {"example_trivial", "example_sweep1d", "example_sweep2d", "example_thm4",
                          "example_lipschitz", "example_sec4", "example_timevarying", "example_sec4_perturbed"};

}  // namespace

TEST_CASE("bundled scenarios load and round-trip", "[scenario]") {
    for (const char* name : kBundled) {
        INFO(name);
        const Scenario sc = load_scenario(testing::scenario_path(name));
        const Scenario again = load_scenario_text(emit_scenario(sc));
        CHECK(again == sc);
        CHECK(emit_scenario(again) == emit_scenario(sc));
    }
}

TEST_CASE("example certificate values", "[scenario]") {
    const Scenario sc = load_scenario(testing::scenario_path("example_sec4"));
    const LureSystem sys = build_system(sc);
    CHECK(sys.cert.kappa == Approx(-0.00125));
    CHECK_FALSE(sys.cert.kernel_inclusion);
    REQUIRE(sc.sigma);
    CHECK(*sc.sigma == 1.0);
    const auto k = effective_constants(sc);
    // Steepest slopes 0.5 and 1.5 of the two lower tables.
    CHECK(k.lh1 == Approx(std::sqrt(0.25 + 2.25)));
    CHECK(k.LK2 == 0.0);
    CHECK(k.Lf == Approx(1.0));
}

TEST_CASE("validation names the violated assumption", "[scenario]") {
    SECTION("D not PSD") {
        const auto what = error_of([] { load_scenario_text(minimal("[[-1]]")); }, ErrorKind::ValidationError);
        CHECK_THAT(what, ContainsSubstring("Assumption 2"));
    }
    SECTION("kernel inclusion without a waiver") {
        auto sc = parse_scenario(read("example_sec4"));
        sc.waive.clear();
        const auto what = error_of([&] { require_valid(sc); }, ErrorKind::ValidationError);
        CHECK_THAT(what, ContainsSubstring("Assumption 2: kernel inclusion"));
    }
    SECTION("LK2 above c2 / ||C||") {
        const auto what = error_of([] { load_scenario_text(minimal("[[1]]", R"(,
  "constants": { "LK2": 1.5 })")); },
                                   ErrorKind::ValidationError);
        CHECK_THAT(what, ContainsSubstring("Assumption 1 bound"));
    }
    SECTION("range of H in decomposed mode") {
        auto sc = parse_scenario(read("example_timevarying"));
        sc.set.H = -0.1 * Matrix::Identity(2, 2);
        const auto what = error_of([&] { require_valid(sc); }, ErrorKind::ValidationError);
        CHECK_THAT(what, ContainsSubstring("Assumption 1'"));
        sc.set.mode = "general";
        CHECK_NOTHROW(require_valid(sc));
    }
    SECTION("declared constants below derived ones") {
        const auto what = error_of([] { load_scenario_text(minimal("[[1]]", R"(,
  "constants": { "Lf": 0.5 })")); },
                                   ErrorKind::ValidationError);
        CHECK_THAT(what, ContainsSubstring("declared constants"));
    }
    SECTION("decay hypothesis") {
        const auto what = error_of([] { load_scenario_text(minimal("[[1]]", R"(,
  "sigma": 2)")); },
                                   ErrorKind::ValidationError);
        CHECK_THAT(what, ContainsSubstring("decay hypothesis"));
    }
    SECTION("dimensions") {
        auto sc = parse_scenario(minimal());
        sc.x0 = Vector::Zero(3);
        const auto what = error_of([&] { require_valid(sc); }, ErrorKind::ValidationError);
        CHECK_THAT(what, ContainsSubstring("dimensions"));
    }
    SECTION("time tables") {
        auto sc = parse_scenario(read("example_sweep1d"));
        sc.set.lower[0] = ScalarSpec{TimeTable{{0.0, 0.0}, {-1.0, 1.0}}};
        const auto what = error_of([&] { require_valid(sc); }, ErrorKind::ValidationError);
        CHECK_THAT(what, ContainsSubstring("time tables"));
    }
    SECTION("output matrix rank") {
        auto sc = parse_scenario(read("example_timevarying"));
        sc.C << 1.0, 1.0, 1.0, 1.0;  // rank one, not a coordinate subspace
        bool failed = false;
        for (const auto& c : validate(sc)) failed = failed || (c.name == "output matrix rank" && !c.ok);
        CHECK(failed);
    }
}

TEST_CASE("rank-deficient C with a coordinate range", "[scenario]") {
    auto sc = parse_scenario(read("example_timevarying"));
    CHECK_NOTHROW(require_valid(sc));
    // K(0, x0) must meet rge(C) = span(e2): lower bound of the first component above 0.
    sc.set.lower[0] = ScalarSpec{0.5};
    const auto what = error_of([&] { require_valid(sc); }, ErrorKind::ValidationError);
    CHECK_THAT(what, ContainsSubstring("output matrix rank"));
}

TEST_CASE("waivers are reported", "[scenario]") {
    const auto checks = validate(parse_scenario(read("example_thm4")));
    bool seen = false;
    for (const auto& c : checks) {
        if (c.name == "Assumption 2: kernel inclusion") {
            seen = true;
            CHECK_FALSE(c.ok);
            CHECK(c.waived);
        } else {
            CHECK(c.ok);
        }
    }
    CHECK(seen);
}

TEST_CASE("parse errors carry positions and field paths", "[scenario]") {
    const auto syntax = error_of([] { parse_scenario("{\n  \"name\": \"x\",\n  \"n\": ,\n}"); }, ErrorKind::ParseError);
    CHECK_THAT(syntax, ContainsSubstring("line 3"));

    const auto missing = error_of([] { parse_scenario(R"({"name": "x", "n": 1, "m": 1})"); }, ErrorKind::ParseError);
    CHECK_THAT(missing, ContainsSubstring("drift"));

    std::string ragged = minimal();
    ragged.replace(ragged.find("[[-1]]"), 6, "[[-1], [1, 2]]");
    CHECK_THAT(error_of([&] { parse_scenario(ragged); }, ErrorKind::ParseError), ContainsSubstring("drift.A[1]"));

    CHECK_THAT(error_of([] { parse_scenario(minimal("[[1]]", R"(, "waive": ["everything"])")); }, ErrorKind::ParseError),
               ContainsSubstring("waive"));
    CHECK_THAT(error_of([] { parse_scenario(minimal("[[\"big\"]]")); }, ErrorKind::ParseError),
               ContainsSubstring("D[0][0]"));
    CHECK_THAT(error_of([] { parse_scenario(minimal("[[1]]", R"(, "colour": 1)")); }, ErrorKind::ParseError),
               ContainsSubstring("colour"));
    CHECK_THROWS_AS(load_scenario("/nonexistent/scenario.json"), Error);
}

TEST_CASE("infinite bounds are encoded as strings", "[scenario]") {
    const Scenario sc = parse_scenario(read("example_sweep1d"));
    const std::string text = emit_scenario(sc);
    CHECK_THAT(text, ContainsSubstring("\"inf\""));
    CHECK(std::isinf(evaluate(sc.set.upper, 0.0)(0)));
}

TEST_CASE("scenario-level perturbation matches the system-level rewrite", "[scenario]") {
    const Scenario ref = load_scenario(testing::scenario_path("example_timevarying"));
    const Matrix C_bar = parse_matrix_file(read("cbar_sec4"));
    const auto ps = perturb_scenario(ref, C_bar);
    CHECK(ps.warning);
    CHECK(ps.scenario.set.mode == "general");
    CHECK_NOTHROW(require_valid(ps.scenario));

    // The bundled file is the emitted scenario.
    const Scenario bundled = load_scenario(testing::scenario_path("example_sec4_perturbed"));
    CHECK(bundled == ps.scenario);

    const auto direct = perturb_transform(ref.A, ref.B, C_bar, ref.D, build_system(ref).K, ref.C);
    const auto a = simulate(build_system(ps.scenario), ref.x0, ref.T, ref.n_steps, SolverOptions{});
    const auto b = simulate(direct.system, ref.x0, ref.T, ref.n_steps, SolverOptions{});
    REQUIRE(a.complete());
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.states[i] == b.states[i]);

    // Perturbation inside rge(D + D^T) stays decomposed.
    const auto inside = perturb_scenario(ref, ref.C + 0.05 * (ref.D + ref.D.transpose()));
    CHECK_FALSE(inside.warning);
    CHECK(inside.scenario.set.mode == "decomposed");
    CHECK_NOTHROW(require_valid(inside.scenario));

    CHECK_THROWS_AS(perturb_scenario(ref, Matrix::Identity(3, 3)), Error);
    CHECK_THROWS_AS(perturb_scenario(bundled, C_bar), Error);
}

TEST_CASE("matrix files", "[scenario]") {
    CHECK(parse_matrix_file("[[1, 2], [3, 4]]")(1, 0) == 3.0);
    CHECK(parse_matrix_file(R"({"C_bar": [[0.5]]})")(0, 0) == 0.5);
    CHECK_THROWS_AS(parse_matrix_file(R"({"a": [[1]], "b": [[2]]})"), Error);
    CHECK_THROWS_AS(parse_matrix_file("[[1, 2], [3]]"), Error);
    CHECK_THROWS_AS(parse_matrix_file("[[1, 2"), Error);
}
