// Scenario-driven front end: check, simulate, converge, attract, lipdep, perturb.
//
// Exit codes: 0 success, 1 usage, 2 parse/validation/hypothesis failure,
// 3 solver divergence.

#include "lure/analysis.hpp"
#include "lure/errors.hpp"
#include "lure/scenario.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace lure;

namespace {

enum Exit { kOk = 0, kUsage = 1, kInvalid = 2, kDiverged = 3 };

int exit_code(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::SolverDiverged:
    case ErrorKind::StepTooSmall:
    case ErrorKind::StepTooLarge:
        return kDiverged;
    default:
        return kInvalid;
    }
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::ParseError, "cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

Vector to_vector(const std::vector<double>& v) {
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

const char* verdict_name(Admissibility a) {
    switch (a) {
    case Admissibility::Admissible: return "admissible";
    case Admissibility::NotAdmissible: return "not admissible";
    default: return "undetermined";
    }
}

int cmd_check(const std::string& path, const std::string& cbar_path) {
    const Scenario sc = parse_scenario(read_file(path));
    std::cout << "scenario " << sc.name << "\n";
    bool ok = true;
    for (const auto& c : validate(sc)) {
        const char* tag = c.ok ? "PASS" : c.waived ? "FAIL (waived)" : "FAIL";
        std::cout << "  [" << tag << "] " << c.name;
        if (!c.detail.empty() && !c.ok) std::cout << ": " << c.detail;
        std::cout << "\n";
        ok = ok && (c.ok || c.waived);
    }
    if (!ok) return kInvalid;

    const LureSystem sys = build_system(sc);
    const auto& cert = sys.cert;
    const Matrix kI = cert.kappa * Matrix::Identity(sys.n(), sys.n());
    std::cout << "kernel_inclusion: " << (cert.kernel_inclusion ? "true" : "false") << "\n";
    std::cout << "kappa: " << num(cert.kappa) << "\n";
    std::cout << "c1: " << (cert.c1 ? num(*cert.c1) : "undefined") << "\n";
    std::cout << "c2: " << (cert.c2 ? num(*cert.c2) : "undefined") << "\n";
    std::cout << "passive(kappa I): " << (check_passive(kI, sys.B, sys.C, sys.D, cert.P) ? "true" : "false") << "\n";
    std::cout << "passive(2 kappa I): " << (check_passive(2.0 * kI, sys.B, sys.C, sys.D, cert.P) ? "true" : "false")
              << "\n";
    if (sc.sigma) std::cout << "sigma: " << num(*sc.sigma) << "\n";
    const auto k = effective_constants(sc);
    std::cout << "constants: Lf=" << num(k.Lf) << " LK1=" << num(k.LK1) << " LK2=" << num(k.LK2)
              << " Lh=" << num(k.Lh) << "\n";

    if (!cbar_path.empty()) {
        const Matrix C_bar = parse_matrix_file(read_file(cbar_path));
        if (C_bar.rows() != sc.C.rows() || C_bar.cols() != sc.C.cols()) {
            throw Error(ErrorKind::DimensionMismatch, "C_bar must have the shape of C");
        }
        const bool ki = kernel_inclusion(sc.D, cert.P, sc.B, C_bar);
        std::cout << "kernel_inclusion(C_bar): " << (ki ? "true" : "false") << "\n";
    }

    const auto adm = admissible(sys, sc.x0, SolverOptions::from_env());
    std::cout << "x0: " << verdict_name(adm.verdict) << "\n";
    return adm.verdict == Admissibility::NotAdmissible ? kInvalid : kOk;
}

int cmd_simulate(const std::string& path, const std::string& out_path, const std::string& plot_path) {
    const Scenario sc = load_scenario(path);
    const LureSystem sys = build_system(sc);
    const Trajectory traj = simulate(sys, sc.x0, sc.T, sc.n_steps, SolverOptions::from_env());
    if (out_path.empty()) {
        write_csv(std::cout, traj);
    } else {
        std::ofstream out(out_path);
        if (!out) throw Error(ErrorKind::ParseError, "cannot write " + out_path);
        write_csv(out, traj);
    }
    if (!plot_path.empty()) {
        std::ofstream svg(plot_path);
        if (!svg) throw Error(ErrorKind::ParseError, "cannot write " + plot_path);
        write_svg(svg, traj);
    }
    if (traj.failure) {
        std::cerr << "simulation stopped at step " << traj.failure->step << ": " << traj.failure->message << "\n";
        return exit_code(traj.failure->kind);
    }
    return kOk;
}

int cmd_converge(const std::string& path, int levels, int n0) {
    const Scenario sc = load_scenario(path);
    const LureSystem sys = build_system(sc);
    const auto trajs = richardson_refine(sys, sc.x0, sc.T, n0, levels, SolverOptions::from_env());
    for (std::size_t k = 0; k + 1 < trajs.size(); ++k) {
        const auto a = on_coarse_grid(trajs[k], n0);
        const auto b = on_coarse_grid(trajs[k + 1], n0);
        double diff = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) diff = std::max(diff, (a[i] - b[i]).lpNorm<Eigen::Infinity>());
        std::cout << "n=" << (n0 << k) << " -> " << (n0 << (k + 1)) << ": max difference " << num(diff) << "\n";
    }
    std::cout << "order: " << num(convergence_order(trajs)) << "\n";
    return kOk;
}

int cmd_attract(const std::string& path, const std::string& variant) {
    const Scenario sc = load_scenario(path);
    const LureSystem sys = build_system(sc);
    const auto v = variant == "thm3" ? AttractivityVariant::WithUniqueness : AttractivityVariant::WithoutUniqueness;
    const auto report = attractivity_check(sys, sc.x0, sc.T, sc.n_steps, v, SolverOptions::from_env());
    std::cout << to_json(report) << "\n";
    return report.pass ? kOk : kInvalid;
}

int cmd_lipdep(const std::string& path, const std::vector<double>& x0b) {
    const Scenario sc = load_scenario(path);
    const LureSystem sys = build_system(sc);
    if (static_cast<int>(x0b.size()) != sc.n) throw Error(ErrorKind::DimensionMismatch, "--x0b must have n entries");
    const auto report =
        lipschitz_dependence_check(sys, sc.x0, to_vector(x0b), sc.T, sc.n_steps, SolverOptions::from_env());
    std::cout << to_json(report) << "\n";
    return report.pass ? kOk : kInvalid;
}

int cmd_perturb(const std::string& path, const std::string& cbar_path, const std::string& abar_path,
                const std::string& out_path) {
    const Scenario ref = load_scenario(path);
    const Matrix C_bar = parse_matrix_file(read_file(cbar_path));
    std::optional<Matrix> A_bar;
    if (!abar_path.empty()) A_bar = parse_matrix_file(read_file(abar_path));
    const auto result = perturb_scenario(ref, C_bar, A_bar);
    if (result.warning) std::cerr << "warning: " << *result.warning << "\n";
    require_valid(result.scenario);
    const std::string text = emit_scenario(result.scenario);
    if (out_path.empty()) {
        std::cout << text;
    } else {
        std::ofstream out(out_path);
        if (!out) throw Error(ErrorKind::ParseError, "cannot write " + out_path);
        out << text;
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Simulation and certification of set-valued Lur'e systems"};
    app.require_subcommand(1);

    std::string scenario, out, plot, cbar, abar, variant = "thm4";
    int levels = 5, n0 = 50;
    std::vector<double> x0b;

    auto* check = app.add_subcommand("check", "Certification report");
    check->add_option("scenario", scenario, "Scenario file")->required();
    check->add_option("--cbar", cbar, "Matrix file with a perturbed output matrix to test");

    auto* sim = app.add_subcommand("simulate", "Run the implicit scheme and write the trajectory");
    sim->add_option("scenario", scenario, "Scenario file")->required();
    sim->add_option("--out", out, "CSV output (stdout when omitted)");
    sim->add_option("--plot", plot, "SVG plot output");

    auto* conv = app.add_subcommand("converge", "Refinement study");
    conv->add_option("scenario", scenario, "Scenario file")->required();
    conv->add_option("--levels", levels, "Number of levels")->check(CLI::Range(2, 12));
    conv->add_option("--n0", n0, "Steps on the coarsest level")->check(CLI::PositiveNumber);

    auto* attract = app.add_subcommand("attract", "Exponential attractivity report (JSON)");
    attract->add_option("scenario", scenario, "Scenario file")->required();
    attract->add_option("--variant", variant, "thm3 (with uniqueness) or thm4 (without)")
        ->check(CLI::IsMember({"thm3", "thm4"}));

    auto* lipdep = app.add_subcommand("lipdep", "Lipschitz dependence on the initial state (JSON)");
    lipdep->add_option("scenario", scenario, "Scenario file")->required();
    lipdep->add_option("--x0b", x0b, "Second initial state, comma separated")->required()->delimiter(',');

    auto* perturb = app.add_subcommand("perturb", "Emit the state-dependent rewrite for a perturbed output matrix");
    perturb->add_option("scenario", scenario, "Reference scenario (time-only carrier)")->required();
    perturb->add_option("--cbar", cbar, "Matrix file with C_bar")->required();
    perturb->add_option("--abar", abar, "Matrix file with A_bar");
    perturb->add_option("--out", out, "Output scenario file (stdout when omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*check) return cmd_check(scenario, cbar);
        if (*sim) return cmd_simulate(scenario, out, plot);
        if (*conv) return cmd_converge(scenario, levels, n0);
        if (*attract) return cmd_attract(scenario, variant);
        if (*lipdep) return cmd_lipdep(scenario, x0b);
        if (*perturb) return cmd_perturb(scenario, cbar, abar, out);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code(e.kind());
    }
    return kUsage;
}
