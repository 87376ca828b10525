#pragma once

#include "lure/linalg.hpp"

#include <variant>
#include <vector>

namespace lure {

/// Piecewise-linear function of time through (t_k, v_k); constant beyond the
/// first and last knot. Knot times must be strictly increasing.
struct TimeTable {
    std::vector<double> t;
    std::vector<double> v;

    double operator()(double time) const;
    /// Largest absolute slope between consecutive knots.
    double lipschitz() const;

    friend bool operator==(const TimeTable&, const TimeTable&) = default;
};

/// A scalar that is either a constant (possibly +-inf) or a time table.
struct ScalarSpec {
    std::variant<double, TimeTable> value;

    double operator()(double time) const;
    double lipschitz() const;
    bool is_constant() const { return std::holds_alternative<double>(value); }

    friend bool operator==(const ScalarSpec& a, const ScalarSpec& b);
};

using VectorSpec = std::vector<ScalarSpec>;

Vector evaluate(const VectorSpec& spec, double time);

/// Euclidean norm of the per-component Lipschitz constants; a valid Lipschitz
/// constant for the vector-valued map.
double lipschitz(const VectorSpec& spec);

/// All knot times appearing in any component, sorted and deduplicated.
std::vector<double> knot_times(const VectorSpec& spec);

}  // namespace lure
