#include "lure/analysis.hpp"

#include "json_format.hpp"
#include "lure/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace lure {

std::string to_json(const RateReport& report, int indent) {
    nlohmann::ordered_json j;
    j["claimed_rate"] = report.claimed_rate;
    j["max_violation"] = report.max_violation;
    j["pass"] = report.pass;
    j["tightest_ratio"] = report.tightest_ratio;
    auto env = nlohmann::ordered_json::array();
    for (const auto& p : report.envelope) env.push_back({p.t, p.lhs, p.rhs});
    j["envelope"] = std::move(env);
    return detail::dump_readable(j, indent);
}

double discretization_slack(double h, double x0_norm) { return 5.0 * h * (1.0 + x0_norm); }

namespace {

RateReport envelope_report(double rate, std::vector<EnvelopePoint> points) {
    RateReport r;
    r.claimed_rate = rate;
    r.max_violation = -std::numeric_limits<double>::infinity();
    for (const auto& p : points) {
        r.max_violation = std::max(r.max_violation, p.lhs - p.rhs);
        if (p.rhs > 0.0) r.tightest_ratio = std::max(r.tightest_ratio, p.lhs / p.rhs);
    }
    r.pass = r.max_violation <= 0.0;
    r.envelope = std::move(points);
    return r;
}

// Quadratic growth term L^2 / (4 c1); 0 when L = 0, MissingConstant when c1 is needed but absent.
double coupling_term(double L, const PassivityCertificate& cert) {
    if (L == 0.0) return 0.0;
    if (!cert.c1) throw Error(ErrorKind::MissingConstant, "c1 is undefined (D + D^T = 0) while the coupling is nonzero");
    return L * L / (4.0 * *cert.c1);
}

double b_minus_ct(const LureSystem& sys) { return spectral_norm(sys.B - sys.C.transpose()); }

Trajectory must_simulate(const LureSystem& sys, const Vector& x0, double T, int n_steps, const SolverOptions& opts) {
    Trajectory traj = simulate(sys, x0, T, n_steps, opts);
    if (traj.failure) throw Error(traj.failure->kind, traj.failure->message);
    return traj;
}

std::vector<int> first_primes(int count) {
    std::vector<int> primes;
    for (int c = 2; static_cast<int>(primes.size()) < count; ++c) {
        bool prime = true;
        for (int p : primes) {
            if (p * p > c) break;
            if (c % p == 0) {
                prime = false;
                break;
            }
        }
        if (prime) primes.push_back(c);
    }
    return primes;
}

double radical_inverse(int index, int base) {
    double result = 0.0;
    double f = 1.0 / base;
    for (int i = index; i > 0; i /= base) {
        result += f * (i % base);
        f /= base;
    }
    return result;
}

}  // namespace

double lipschitz_rate(const LureSystem& sys) {
    const auto work = to_identity_storage(sys).first;
    const auto* dec = work.K.decomposition();
    if (!dec) throw Error(ErrorKind::MissingConstant, "the Lipschitz dependence bound needs a decomposed carrier");
    return work.drift.lipschitz + coupling_term(dec->lh + b_minus_ct(work), work.cert);
}

RateReport lipschitz_dependence_check(const LureSystem& sys, const Vector& x0a, const Vector& x0b, double T,
                                      int n_steps, const SolverOptions& opts) {
    const double gamma = lipschitz_rate(sys);
    const StorageTransform tr(sys.cert.P);
    const Trajectory a = must_simulate(sys, x0a, T, n_steps, opts);
    const Trajectory b = must_simulate(sys, x0b, T, n_steps, opts);
    const double d0 = (tr.to_identity(x0a) - tr.to_identity(x0b)).norm();
    const double slack = discretization_slack(T / n_steps, std::max(x0a.norm(), x0b.norm()));

    std::vector<EnvelopePoint> points;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double t = a.times[i];
        const double lhs = (tr.to_identity(a.states[i]) - tr.to_identity(b.states[i])).norm();
        points.push_back({t, lhs, d0 * std::exp(gamma * t) * (1.0 + kEnvelopeTol) + slack});
    }
    return envelope_report(gamma, std::move(points));
}

double attractivity_rate(const LureSystem& sys, AttractivityVariant variant) {
    if (!sys.sigma) throw Error(ErrorKind::MissingConstant, "decay constant sigma is not declared");
    if (!StorageTransform(sys.cert.P).is_identity()) {
        throw Error(ErrorKind::MissingConstant, "the decay hypothesis is stated for identity storage only");
    }
    double L = b_minus_ct(sys);
    if (variant == AttractivityVariant::WithUniqueness) {
        const auto* dec = sys.K.decomposition();
        if (!dec) throw Error(ErrorKind::MissingConstant, "the uniqueness variant needs a decomposed carrier");
        L += dec->lh;
    }
    const double delta = *sys.sigma - coupling_term(L, sys.cert);
    if (!(delta > 0.0)) {
        throw Error(ErrorKind::HypothesisFailed,
                    "sigma = " + std::to_string(*sys.sigma) + " does not exceed L^2 / (4 c1) = " +
                        std::to_string(*sys.sigma - delta));
    }
    return delta;
}

RateReport attractivity_check(const LureSystem& sys, const Vector& x0, double T, int n_steps,
                              AttractivityVariant variant, const SolverOptions& opts) {
    const double delta = attractivity_rate(sys, variant);

    // Sampled check of 0 in K(t, x) (or in K(t, 0) for the uniqueness variant)
    // on 64 times x 64 states of [lo, hi].
    constexpr int kTimes = 64;
    constexpr int kStates = 64;
    const auto n = sys.n();
    const auto primes = first_primes(n);
    const Vector origin = Vector::Zero(sys.m());
    auto check_origin = [&](const Vector& lo, const Vector& hi, int states) {
        for (int ti = 0; ti < kTimes; ++ti) {
            const double t = T * ti / (kTimes - 1);
            for (int si = 0; si < states; ++si) {
                Vector x(n);
                for (int k = 0; k < n; ++k) {
                    x(k) = lo(k) + radical_inverse(si + 1, primes[static_cast<std::size_t>(k)]) * (hi(k) - lo(k));
                }
                if (!contains(sys.K.evaluate(t, x), origin, 1e-12)) {
                    throw Error(ErrorKind::HypothesisFailed, "0 is not in K(t, x) at t = " + std::to_string(t));
                }
            }
        }
    };
    // x = 0 first: cheap, and a failure there usually makes the run itself infeasible.
    check_origin(Vector::Zero(n), Vector::Zero(n), 1);

    const Trajectory traj = must_simulate(sys, x0, T, n_steps, opts);
    if (variant == AttractivityVariant::WithoutUniqueness) {
        Vector lo = x0, hi = x0;
        for (const auto& x : traj.states) {
            lo = lo.cwiseMin(x);
            hi = hi.cwiseMax(x);
        }
        check_origin(lo, hi, kStates);
    }

    const double x0n = x0.norm();
    const double slack = discretization_slack(T / n_steps, x0n);
    std::vector<EnvelopePoint> points;
    for (std::size_t i = 0; i < traj.size(); ++i) {
        const double t = traj.times[i];
        points.push_back({t, traj.states[i].norm(), std::exp(-delta * t) * x0n * (1.0 + kEnvelopeTol) + slack});
    }
    return envelope_report(delta, std::move(points));
}

double dis_bound(const Matrix& C, double c2, const ConvexSet& s1, const ConvexSet& s2) {
    if (!(c2 > 0.0)) throw Error(ErrorKind::ValidationError, "c2 must be positive");
    const auto a = as_box(s1);
    const auto b = as_box(s2);
    if (!a || !b) throw Error(ErrorKind::HypothesisFailed, "dis_bound is exact for boxes only");
    return spectral_norm(C) / c2 * hausdorff_box(*a, *b);
}

PerturbResult perturb_transform(const Matrix& A_bar, const Matrix& B, const Matrix& C_bar, const Matrix& D,
                                const MovingSet& K_time, const Matrix& C) {
    if (C_bar.rows() != C.rows() || C_bar.cols() != C.cols()) {
        throw Error(ErrorKind::DimensionMismatch, "C_bar must have the shape of C");
    }
    const auto* dec = K_time.decomposition();
    if (!dec || !dec->H.isZero(0.0)) {
        throw Error(ErrorKind::ValidationError, "the reference carrier must depend on time only");
    }
    const Matrix H = -(C_bar - C);
    MovingSet K = MovingSet::decomposed(dec->k1, H, dec->g, dec->lh1, dec->lh2);
    bool decomposed = true;
    std::optional<std::string> warning;
    if (!H.isZero(0.0) && !range_included(C_bar - C, D + D.transpose())) {
        decomposed = false;
        warning = "rge(C_bar - C) is not contained in rge(D + D^T); uniqueness is not guaranteed, "
                  "the carrier is used in general mode";
        K = K.as_general();
    }
    const double sigma = -Eigen::SelfAdjointEigenSolver<Matrix>(symmetric_part(A_bar)).eigenvalues().maxCoeff();
    std::optional<double> decay;
    if (sigma > 0.0) decay = sigma;
    return PerturbResult{LureSystem::make(B, C, D, Drift::affine(A_bar), std::move(K), std::nullopt, true, decay),
                         decomposed, std::move(warning), H, spectral_norm(H)};
}

double convergence_order(const std::vector<Trajectory>& trajs) {
    if (trajs.size() < 2) throw Error(ErrorKind::ValidationError, "need at least two refinement levels");
    const int n0 = static_cast<int>(trajs.front().size()) - 1;
    std::vector<double> log_h, log_d;
    for (std::size_t k = 0; k + 1 < trajs.size(); ++k) {
        const auto a = on_coarse_grid(trajs[k], n0);
        const auto b = on_coarse_grid(trajs[k + 1], n0);
        double d = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, (a[i] - b[i]).lpNorm<Eigen::Infinity>());
        if (d == 0.0) continue;
        const auto& t = trajs[k].times;
        log_h.push_back(std::log(t[1] - t[0]));
        log_d.push_back(std::log(d));
    }
    if (log_h.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    const auto count = static_cast<double>(log_h.size());
    double mh = 0.0, md = 0.0;
    for (std::size_t k = 0; k < log_h.size(); ++k) {
        mh += log_h[k] / count;
        md += log_d[k] / count;
    }
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < log_h.size(); ++k) {
        num += (log_h[k] - mh) * (log_d[k] - md);
        den += (log_h[k] - mh) * (log_h[k] - mh);
    }
    return num / den;
}

double discrete_derivative_bound(const Trajectory& traj) {
    double best = 0.0;
    for (std::size_t i = 0; i + 1 < traj.size(); ++i) {
        const double h = traj.times[i + 1] - traj.times[i];
        best = std::max(best, (traj.states[i + 1] - traj.states[i]).norm() / h);
    }
    return best;
}

ResolventReport resolvent_check(const LureSystem& sys, const Trajectory& traj, const SolverOptions& opts,
                                std::uint64_t seed) {
    ResolventReport report;
    if (traj.size() < 2) return report;
    const auto [work, tr] = to_identity_storage(sys);
    const double h = traj.times[1] - traj.times[0];
    const double kappa = work.cert.kappa;
    report.bound = 1.0 + h * kappa > 0.0 ? 1.0 / (1.0 + h * kappa) : std::numeric_limits<double>::infinity();

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    std::uniform_real_distribution<double> expo(-4.0, 0.0);
    for (std::size_t i = 0; i + 1 < traj.size(); ++i) {
        const Vector x = tr.to_identity(traj.states[i]);
        const double t_next = traj.times[i + 1];
        const Vector y1 = x + h * work.drift(traj.times[i], x) - h * kappa * x;
        Vector dir(x.size());
        for (Eigen::Index k = 0; k < dir.size(); ++k) dir(k) = gauss(rng);
        const Vector y2 = y1 + std::pow(10.0, expo(rng)) * (1.0 + y1.norm()) * dir.normalized();

        StepResult s1, s2;
        try {
            s1 = solve_step(work, t_next, x, y1, h, opts);
            s2 = solve_step(work, t_next, x, y2, h, opts);
        } catch (const Error&) {
            continue;
        }
        ++report.samples;
        const double dy = (y1 - y2).norm();
        const Vector dx = s1.x_next - s2.x_next;
        const Vector dmu = s1.mu - s2.mu;
        report.max_ratio = std::max(report.max_ratio, dx.norm() / dy);
        const double tol = 1e-8 * (1.0 + y1.norm() + y2.norm());
        if (dx.norm() > report.bound * dy + tol) ++report.violations;
        const double lhs = dmu.dot(work.C * dx);
        const double rhs = dmu.dot(work.D * dmu);
        if (lhs < rhs - 1e-8 * (1.0 + dmu.norm()) * (1.0 + dx.norm() + dmu.norm())) ++report.monotonicity_violations;
    }
    return report;
}

std::size_t lyapunov_violations(const Trajectory& traj, double delta) {
    if (traj.size() < 2) return 0;
    const double h = traj.times[1] - traj.times[0];
    const double x0sq = traj.states.front().squaredNorm();
    std::size_t count = 0;
    for (std::size_t i = 0; i + 1 < traj.size(); ++i) {
        const double lhs = traj.states[i + 1].squaredNorm();
        const double rhs = traj.states[i].squaredNorm() * (1.0 - 2.0 * delta * h) + 10.0 * h * h * x0sq;
        if (lhs > rhs) ++count;
    }
    return count;
}

}  // namespace lure
