#pragma once

#include "lure/step.hpp"
#include "lure/table.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace lure {

/// Box carrier K(t, x) = [lower(t), upper(t)] + H x + g(t).
struct ScenarioSet {
    std::string mode = "decomposed";  // "decomposed" or "general"
    VectorSpec lower;
    VectorSpec upper;
    std::optional<Matrix> H;
    std::optional<VectorSpec> g;

    friend bool operator==(const ScenarioSet&, const ScenarioSet&);
};

/// Declared constants; missing ones are derived from the data.
struct ScenarioConstants {
    std::optional<double> Lf;
    std::optional<double> LK1;
    std::optional<double> LK2;
    std::optional<double> Lh;

    friend bool operator==(const ScenarioConstants&, const ScenarioConstants&) = default;
};

/// Assumptions that cannot be checked finitely; recorded as declared.
struct DeclaredFlags {
    std::optional<bool> assumption3;
    std::optional<bool> assumption4;

    friend bool operator==(const DeclaredFlags&, const DeclaredFlags&) = default;
};

struct Scenario {
    std::string name;
    int n = 0;
    int m = 0;
    Matrix A;
    std::optional<VectorSpec> e;  // drift offset e(t)
    Matrix B;
    Matrix C;
    Matrix D;
    std::optional<Matrix> P;
    ScenarioSet set;
    Vector x0;
    double T = 1.0;
    int n_steps = 100;
    std::optional<double> sigma;
    ScenarioConstants constants;
    std::vector<std::string> waive;  // only "kernel_inclusion" is recognised
    DeclaredFlags declared;

    bool waived(std::string_view what) const;

    friend bool operator==(const Scenario&, const Scenario&);
};

/// Parses scenario JSON. Syntax errors are reported as ParseError with
/// line:column; structural errors name the offending field.
Scenario parse_scenario(std::string_view text);
std::string emit_scenario(const Scenario& sc);

struct ValidationCheck {
    std::string name;  // e.g. "Assumption 2: kernel inclusion"
    bool ok = true;
    bool waived = false;
    std::string detail;
};

/// Load-time checks: dimensions, time tables, D PSD, kernel inclusion, P,
/// output matrix rank, the Assumption 1 bound, the range condition of H
/// (decomposed mode), declared constants and the decay hypothesis.
std::vector<ValidationCheck> validate(const Scenario& sc);

/// Throws ValidationError naming the first failed (non-waived) check.
void require_valid(const Scenario& sc);

/// parse + require_valid.
Scenario load_scenario(const std::string& path);
Scenario load_scenario_text(std::string_view text);

/// Effective constants after defaults.
struct EffectiveConstants {
    double Lf = 0.0;
    double lh1 = 0.0;  // time Lipschitz constant of the box part
    double lh2 = 0.0;  // time Lipschitz constant of g
    double Lh = 0.0;   // state Lipschitz constant (>= ||H||)
    double LK1 = 0.0;
    double LK2 = 0.0;
};
EffectiveConstants effective_constants(const Scenario& sc);

MovingSet build_carrier(const Scenario& sc);
LureSystem build_system(const Scenario& sc);

/// The perturbed-output rewrite at the scenario level: the reference scenario
/// (time-only carrier, output matrix C) measured through C_bar becomes the
/// state-dependent scenario with H = -(C_bar - C). General mode is used, with
/// a warning, when rge(C_bar - C) is not inside rge(D + D^T).
struct PerturbedScenario {
    Scenario scenario;
    std::optional<std::string> warning;
};
PerturbedScenario perturb_scenario(const Scenario& reference, const Matrix& C_bar,
                                   const std::optional<Matrix>& A_bar = std::nullopt);

/// Reads a matrix from JSON text: either a nested array or an object with a
/// single matrix-valued member.
Matrix parse_matrix_file(std::string_view text);

}  // namespace lure
