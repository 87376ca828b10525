#include "lure/moving.hpp"

#include "lure/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lure {

MovingSet MovingSet::general(SetOfTimeState eval, double lk1, double lk2) {
    if (!(lk1 >= 0.0) || !(lk2 >= 0.0)) {
        throw Error(ErrorKind::ValidationError, "Lipschitz constants must be nonnegative");
    }
    return MovingSet(GeneralCarrier{std::move(eval), lk1, lk2});
}

MovingSet MovingSet::decomposed(SetOfTime k1, Matrix H, VectorOfTime g, double lh1, double lh2,
                                std::optional<double> lh) {
    const double h_norm = spectral_norm(H);
    const double state_lip = lh.value_or(h_norm);
    if (state_lip < h_norm * (1.0 - 1e-12)) {
        throw Error(ErrorKind::ValidationError,
                    "declared Lh = " + std::to_string(state_lip) + " is below ||H|| = " +
                        std::to_string(h_norm));
    }
    if (!(lh1 >= 0.0) || !(lh2 >= 0.0)) {
        throw Error(ErrorKind::ValidationError, "Lipschitz constants must be nonnegative");
    }
    return MovingSet(DecomposedCarrier{std::move(k1), std::move(H), std::move(g), state_lip, lh1, lh2});
}

MovingSet MovingSet::time_only(SetOfTime k, int state_dim, double lipschitz_in_time) {
    const int m = k(0.0).dim();
    return decomposed(std::move(k), Matrix::Zero(m, state_dim),
                      [m](double) { return Vector::Zero(m); }, lipschitz_in_time, 0.0);
}

MovingSet MovingSet::constant(ConvexSet set, int state_dim) {
    return time_only([set](double) { return set; }, state_dim, 0.0);
}

ConvexSet MovingSet::evaluate(double t, const Vector& x) const {
    if (const auto* gen = std::get_if<GeneralCarrier>(&repr_)) return gen->eval(t, x);
    const auto& dec = std::get<DecomposedCarrier>(repr_);
    if (x.size() != dec.H.cols()) {
        throw Error(ErrorKind::DimensionMismatch, "state dimension does not match H");
    }
    ConvexSet base = dec.k1(t);
    const Vector offset = dec.H * x + dec.g(t);
    if (offset.isZero(0.0)) return base;
    return ConvexSet::translated(std::move(base), offset);
}

double MovingSet::lk1() const {
    if (const auto* gen = std::get_if<GeneralCarrier>(&repr_)) return gen->lk1;
    const auto& dec = std::get<DecomposedCarrier>(repr_);
    return dec.lh1 + dec.lh2;
}

double MovingSet::lk2() const {
    if (const auto* gen = std::get_if<GeneralCarrier>(&repr_)) return gen->lk2;
    return std::get<DecomposedCarrier>(repr_).lh;
}

MovingSet MovingSet::as_general() const {
    if (std::holds_alternative<GeneralCarrier>(repr_)) return *this;
    MovingSet self = *this;
    return general([self](double t, const Vector& x) { return self.evaluate(t, x); }, lk1(), lk2());
}

MovingSet MovingSet::with_state_map(const Matrix& S) const {
    const double scale = spectral_norm(S);
    if (const auto* dec = std::get_if<DecomposedCarrier>(&repr_)) {
        DecomposedCarrier out = *dec;
        out.H = dec->H * S;
        out.lh = std::max(dec->lh * scale, spectral_norm(out.H));
        return MovingSet(std::move(out));
    }
    const auto& gen = std::get<GeneralCarrier>(repr_);
    auto eval = gen.eval;
    return general([eval, S](double t, const Vector& x) { return eval(t, S * x); }, gen.lk1,
                   gen.lk2 * scale);
}

LipschitzReport verify_lipschitz(const MovingSet& ms, const Matrix& C, double c2,
                                 const std::vector<LipschitzSample>& samples) {
    LipschitzReport report;
    report.samples = samples.size();
    const double c_norm = spectral_norm(C);
    report.lk2_limit = c_norm > 0.0 ? c2 / c_norm : std::numeric_limits<double>::infinity();
    report.bound_breached = ms.lk2() > report.lk2_limit;

    for (const auto& sample : samples) {
        const auto a = as_box(ms.evaluate(sample.t, sample.x));
        const auto b = as_box(ms.evaluate(sample.s, sample.y));
        if (!a || !b) {
            throw Error(ErrorKind::HypothesisFailed, "verify_lipschitz needs box-valued carriers");
        }
        const double lhs = hausdorff_box(*a, *b);
        const double rhs = ms.lk1() * std::abs(sample.t - sample.s) + ms.lk2() * (sample.x - sample.y).norm();
        double ratio = 0.0;
        if (rhs > 0.0) {
            ratio = lhs / rhs;
        } else if (lhs > 0.0) {
            ratio = std::numeric_limits<double>::infinity();
        }
        report.max_observed_ratio = std::max(report.max_observed_ratio, ratio);
        if (ratio > 1.0 + kLipschitzRatioSlack) report.violations.push_back({sample, lhs, rhs});
    }
    return report;
}

double hypomonotonicity_margin(const Vector& a1, const Vector& b1, double t1, const Vector& x1,
                               const Vector& a2, const Vector& b2, double t2, const Vector& x2,
                               double lk1, double lk2) {
    const double lhs = (a1 - a2).dot(b1 - b2);
    const double rhs = -(a1.norm() + a2.norm()) * (lk1 * std::abs(t2 - t1) + lk2 * (x1 - x2).norm());
    return lhs - rhs;
}

}  // namespace lure
