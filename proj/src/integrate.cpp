#include "lure/integrate.hpp"

#include "lure/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

namespace lure {

namespace {

void append(Trajectory& traj, double t, Vector x, const Vector& mu, const Matrix& C, const Matrix& D,
            double residual, int iterations) {
    Vector lambda = -mu;
    traj.outputs.push_back(C * x + D * lambda);
    traj.times.push_back(t);
    traj.states.push_back(std::move(x));
    traj.lambdas.push_back(std::move(lambda));
    traj.residuals.push_back(residual);
    traj.iterations.push_back(iterations);
}

}  // namespace

Trajectory simulate(const LureSystem& sys, const Vector& x0, double T, int n_steps,
                    const SolverOptions& opts, bool force) {
    if (!(T > 0.0)) throw Error(ErrorKind::ValidationError, "T must be positive");
    if (n_steps < 1) throw Error(ErrorKind::ValidationError, "n_steps must be at least 1");
    if (x0.size() != sys.n()) throw Error(ErrorKind::DimensionMismatch, "x0 must have dimension n");

    const AdmissibilityResult adm = admissible(sys, x0, opts);
    if (adm.verdict != Admissibility::Admissible && !force) {
        throw Error(ErrorKind::NotAdmissible,
                    adm.verdict == Admissibility::NotAdmissible
                        ? "the initial multiplier inclusion has no solution"
                        : "could not solve the initial multiplier inclusion (residual " +
                              std::to_string(adm.residual) + ")");
    }

    const auto [work, tr] = to_identity_storage(sys);
    const double h = T / n_steps;
    const double kappa = work.cert.kappa;
    const double lk1 = sys.K.lk1();
    const double lk2 = sys.K.lk2();

    Trajectory traj;
    traj.times.reserve(static_cast<std::size_t>(n_steps) + 1);
    append(traj, 0.0, x0, adm.mu, sys.C, sys.D, adm.residual, 0);

    // Set arguments of the previous sample, for the hypomonotonicity diagnostic.
    Vector prev_mu = adm.mu;
    Vector prev_w = sys.C * x0 - sys.D * adm.mu;
    double prev_t = 0.0;
    Vector prev_arg = x0;

    Vector xt = tr.to_identity(x0);
    for (int i = 0; i < n_steps; ++i) {
        const double t_i = i * h;
        const double t_next = (i + 1) * h;
        const Vector y = xt + h * work.drift(t_i, xt) - h * kappa * xt;
        StepResult step;
        try {
            step = solve_step(work, t_next, xt, y, h, opts);
        } catch (const Error& e) {
            traj.failure = StepFailure{e.kind(), i, e.what()};
            break;
        }
        if (step.used_fallback) ++traj.fallback_steps;
        const Vector x_prev = traj.states.back();
        Vector x_next = tr.from_identity(step.x_next);
        traj.hypo_margin.push_back(hypomonotonicity_margin(prev_mu, prev_w, prev_t, prev_arg, step.mu,
                                                           step.w, t_next, x_prev, lk1, lk2));
        prev_mu = step.mu;
        prev_w = step.w;
        prev_t = t_next;
        prev_arg = x_prev;

        xt = step.x_next;
        append(traj, t_next, std::move(x_next), step.mu, sys.C, sys.D, step.residual, step.iterations);
    }
    return traj;
}

std::vector<Trajectory> richardson_refine(const LureSystem& sys, const Vector& x0, double T, int n0,
                                          int levels, const SolverOptions& opts) {
    if (levels < 2) throw Error(ErrorKind::ValidationError, "refinement needs at least 2 levels");
    if (n0 < 1) throw Error(ErrorKind::ValidationError, "n0 must be at least 1");
    std::vector<Trajectory> out;
    for (int l = 0; l < levels; ++l) {
        Trajectory traj = simulate(sys, x0, T, n0 << l, opts);
        if (traj.failure) {
            throw Error(traj.failure->kind, "level " + std::to_string(l) + ": " + traj.failure->message);
        }
        out.push_back(std::move(traj));
    }
    return out;
}

std::vector<Vector> on_coarse_grid(const Trajectory& traj, int n_coarse) {
    const auto steps = static_cast<int>(traj.size()) - 1;
    if (n_coarse < 1 || steps % n_coarse != 0) {
        throw Error(ErrorKind::DimensionMismatch, "trajectory grid is not a refinement of the coarse grid");
    }
    const int stride = steps / n_coarse;
    std::vector<Vector> out;
    for (int i = 0; i <= n_coarse; ++i) out.push_back(traj.states[static_cast<std::size_t>(i * stride)]);
    return out;
}

double hypo_tolerance(const Vector& a1, const Vector& b1, const Vector& a2, const Vector& b2) {
    return 1e-9 * (1.0 + (a1.norm() + a2.norm()) * (1.0 + b1.norm() + b2.norm()));
}

std::size_t hypo_violations(const Trajectory& traj) {
    std::size_t count = 0;
    for (std::size_t i = 0; i < traj.hypo_margin.size(); ++i) {
        // Margins were computed from the internal multipliers mu = -lambda; the
        // outputs are w = C x - D mu = y.
        const Vector a1 = -traj.lambdas[i];
        const Vector a2 = -traj.lambdas[i + 1];
        if (traj.hypo_margin[i] < -hypo_tolerance(a1, traj.outputs[i], a2, traj.outputs[i + 1])) ++count;
    }
    return count;
}

namespace {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

void write_csv(std::ostream& out, const Trajectory& traj) {
    if (traj.states.empty()) return;
    const auto n = traj.states.front().size();
    const auto m = traj.lambdas.front().size();
    out << "t";
    for (Eigen::Index k = 1; k <= n; ++k) out << ",x_" << k;
    for (Eigen::Index k = 1; k <= m; ++k) out << ",lambda_" << k;
    for (Eigen::Index k = 1; k <= m; ++k) out << ",y_" << k;
    out << ",residual,iters\n";
    for (std::size_t i = 0; i < traj.size(); ++i) {
        out << fmt17(traj.times[i]);
        for (Eigen::Index k = 0; k < n; ++k) out << ',' << fmt17(traj.states[i](k));
        for (Eigen::Index k = 0; k < m; ++k) out << ',' << fmt17(traj.lambdas[i](k));
        for (Eigen::Index k = 0; k < m; ++k) out << ',' << fmt17(traj.outputs[i](k));
        out << ',' << fmt17(traj.residuals[i]) << ',' << traj.iterations[i] << '\n';
    }
}

void write_svg(std::ostream& out, const Trajectory& traj) {
    constexpr double width = 800.0, height = 400.0, pad = 40.0;
    static constexpr const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

    std::vector<std::vector<double>> series;
    std::vector<std::string> labels;
    std::vector<double> norms;
    for (const auto& x : traj.states) norms.push_back(x.norm());
    series.push_back(norms);
    labels.emplace_back("|x|");
    const auto m = traj.lambdas.empty() ? 0 : traj.lambdas.front().size();
    for (Eigen::Index k = 0; k < m; ++k) {
        std::vector<double> s;
        for (const auto& l : traj.lambdas) s.push_back(l(k));
        series.push_back(std::move(s));
        labels.push_back("lambda_" + std::to_string(k + 1));
    }

    double lo = 0.0, hi = 0.0;
    for (const auto& s : series) {
        for (double v : s) {
            if (!std::isfinite(v)) continue;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    if (hi - lo < 1e-300) hi = lo + 1.0;
    const double t0 = traj.times.empty() ? 0.0 : traj.times.front();
    double t1 = traj.times.empty() ? 1.0 : traj.times.back();
    if (t1 <= t0) t1 = t0 + 1.0;
    auto px = [&](double t) { return pad + (t - t0) / (t1 - t0) * (width - 2 * pad); };
    auto py = [&](double v) { return height - pad - (v - lo) / (hi - lo) * (height - 2 * pad); };

    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<line x1=\"" << pad << "\" y1=\"" << py(0.0) << "\" x2=\"" << width - pad << "\" y2=\"" << py(0.0)
        << "\" stroke=\"#999\" stroke-width=\"0.5\"/>\n";
    for (std::size_t s = 0; s < series.size(); ++s) {
        const char* color = colors[s % std::size(colors)];
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.2\" points=\"";
        for (std::size_t i = 0; i < series[s].size(); ++i) {
            if (!std::isfinite(series[s][i])) continue;
            out << px(traj.times[i]) << ',' << py(series[s][i]) << ' ';
        }
        out << "\"/>\n";
        out << "<text x=\"" << width - pad - 80 << "\" y=\"" << pad + 14.0 * static_cast<double>(s)
            << "\" font-size=\"12\" fill=\"" << color << "\">" << labels[s] << "</text>\n";
    }
    out << "<text x=\"" << pad << "\" y=\"" << height - 10 << "\" font-size=\"12\">t in [" << t0 << ", " << t1
        << "], range [" << lo << ", " << hi << "]</text>\n";
    out << "</svg>\n";
}

}  // namespace lure
