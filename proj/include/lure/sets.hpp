#pragma once

#include "lure/linalg.hpp"

#include <memory>
#include <optional>
#include <variant>
#include <vector>

namespace lure {

class ConvexSet;

/// Axis-aligned box; bounds may be +-infinity.
struct Box {
    Vector lower;
    Vector upper;
};

/// {y : A y <= b}.
struct Polyhedron {
    Matrix A;
    Vector b;
};

/// {z + offset : z in base}.
struct Translate {
    std::shared_ptr<const ConvexSet> base;
    Vector offset;
};

/// Closed convex set in R^m with an exact Euclidean projection. Immutable.
class ConvexSet {
public:
    using Variant = std::variant<Box, Polyhedron, Translate>;

    ConvexSet(Box box);
    ConvexSet(Polyhedron poly);
    ConvexSet(Translate tr);

    static ConvexSet whole_space(int dim);
    static ConvexSet translated(ConvexSet base, Vector offset);

    int dim() const { return dim_; }
    const Variant& repr() const { return repr_; }

private:
    Variant repr_;
    int dim_ = 0;
};

/// Flattens Box and Translate-of-Box into a plain Box; nullopt for anything
/// containing a polyhedron.
std::optional<Box> as_box(const ConvexSet& set);

bool is_bounded(const ConvexSet& set);

Vector project(const ConvexSet& set, const Vector& p);
double distance(const ConvexSet& set, const Vector& p);
bool contains(const ConvexSet& set, const Vector& p, double tol);

/// ||y - project(S, y + mu)||; zero iff mu lies in the normal cone of S at y.
double normal_cone_residual(const ConvexSet& set, const Vector& y, const Vector& mu);

/// An element of the B-subdifferential of project(S, .) at p (a symmetric
/// projector onto the tangent subspace of the active face).
Matrix projection_jacobian(const ConvexSet& set, const Vector& p);

/// Exact Euclidean Hausdorff distance between boxes. Throws InfiniteDistance
/// when one box is unbounded in a direction where the other is not.
double hausdorff_box(const Box& a, const Box& b);

/// Lower bound on the Hausdorff distance between two bounded sets from a nested
/// sequence of `directions` support directions; nondecreasing in `directions`.
double hausdorff_sampled(const ConvexSet& a, const ConvexSet& b, int directions);

/// Result of projecting p onto {y : A y <= b}: the point, the KKT multipliers
/// (one per row) and the indices of the active rows.
struct PolyhedronProjection {
    Vector point;
    Vector multipliers;
    std::vector<int> active;
};

/// Dual active-set (Goldfarb-Idnani) projection with smallest-index pivoting.
/// Throws EmptySet when the constraints are infeasible.
PolyhedronProjection project_polyhedron(const Polyhedron& poly, const Vector& p);

/// Test oracle: enumerates every linearly independent active set of size <= m
/// and returns the KKT point. Intended for up to ~20 constraints.
PolyhedronProjection project_polyhedron_exhaustive(const Polyhedron& poly, const Vector& p);

}  // namespace lure
