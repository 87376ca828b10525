#pragma once

#include "lure/sets.hpp"

#include <functional>
#include <optional>
#include <variant>
#include <vector>

namespace lure {

using SetOfTime = std::function<ConvexSet(double)>;
using SetOfTimeState = std::function<ConvexSet(double, const Vector&)>;
using VectorOfTime = std::function<Vector(double)>;

/// K(t, x) given by an evaluator together with declared constants
/// d_H(K(t,x), K(s,y)) <= lk1 |t - s| + lk2 ||x - y||.
struct GeneralCarrier {
    SetOfTimeState eval;
    double lk1 = 0.0;
    double lk2 = 0.0;
};

/// K(t, x) = K1(t) + H x + g(t).
///   lh1: time Lipschitz constant of K1 (Hausdorff)
///   lh2: time Lipschitz constant of g
///   lh : state Lipschitz constant of x -> Hx, at least ||H||
struct DecomposedCarrier {
    SetOfTime k1;
    Matrix H;
    VectorOfTime g;
    double lh = 0.0;
    double lh1 = 0.0;
    double lh2 = 0.0;
};

/// The moving carrier of the normal-cone feedback. Evaluators must be pure;
/// values are shareable read-only.
class MovingSet {
public:
    static MovingSet general(SetOfTimeState eval, double lk1, double lk2);
    /// lh defaults to ||H||; a declared lh below ||H|| is rejected.
    static MovingSet decomposed(SetOfTime k1, Matrix H, VectorOfTime g, double lh1, double lh2,
                                std::optional<double> lh = std::nullopt);
    /// Time-only carrier K(t) (decomposed with H = 0, g = 0).
    static MovingSet time_only(SetOfTime k, int state_dim, double lipschitz_in_time);
    static MovingSet constant(ConvexSet set, int state_dim);

    ConvexSet evaluate(double t, const Vector& x) const;

    /// Constants of the general contract. For the decomposed form these are
    /// lk1 = lh1 + lh2 and lk2 = lh.
    double lk1() const;
    double lk2() const;

    bool is_decomposed() const { return std::holds_alternative<DecomposedCarrier>(repr_); }
    const DecomposedCarrier* decomposition() const { return std::get_if<DecomposedCarrier>(&repr_); }

    /// The same carrier viewed through the general contract.
    MovingSet as_general() const;

    /// x~ -> K(t, S x~) for an invertible state map S (used by the storage
    /// change of variables). Lipschitz constants are rescaled by ||S||.
    MovingSet with_state_map(const Matrix& S) const;

private:
    using Variant = std::variant<GeneralCarrier, DecomposedCarrier>;
    explicit MovingSet(Variant v) : repr_(std::move(v)) {}
    Variant repr_;
};

struct LipschitzSample {
    double t = 0.0;
    double s = 0.0;
    Vector x;
    Vector y;
};

struct LipschitzViolation {
    LipschitzSample sample;
    double lhs = 0.0;
    double rhs = 0.0;
};

struct LipschitzReport {
    double max_observed_ratio = 0.0;
    std::size_t samples = 0;
    std::vector<LipschitzViolation> violations;
    /// lk2 > c2 / ||C||: the state-Lipschitz bound needed for existence fails.
    bool bound_breached = false;
    double lk2_limit = 0.0;
};

/// Ratios above this count as violations (floating-point slack on the
/// Hausdorff evaluation).
inline constexpr double kLipschitzRatioSlack = 1e-9;

/// Spot-checks the declared constants on box-valued samples with the exact box
/// Hausdorff distance and checks lk2 <= c2 / ||C||.
LipschitzReport verify_lipschitz(const MovingSet& ms, const Matrix& C, double c2,
                                 const std::vector<LipschitzSample>& samples);

/// lhs - rhs of the hypomonotonicity inequality for a_i in N_{K(t_i,x_i)}(b_i):
///   <a1 - a2, b1 - b2> >= -(||a1|| + ||a2||)(lk1 |t2 - t1| + lk2 ||x1 - x2||).
/// Nonnegative (up to rounding) whenever the constants are valid.
double hypomonotonicity_margin(const Vector& a1, const Vector& b1, double t1, const Vector& x1,
                               const Vector& a2, const Vector& b2, double t2, const Vector& x2,
                               double lk1, double lk2);

}  // namespace lure
