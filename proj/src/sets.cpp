#include "lure/sets.hpp"

#include "lure/errors.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

namespace lure {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_dim(const ConvexSet& set, const Vector& p) {
    if (p.size() != set.dim()) {
        throw Error(ErrorKind::DimensionMismatch, "point has dimension " + std::to_string(p.size()) +
                                                      ", set has dimension " +
                                                      std::to_string(set.dim()));
    }
}

int dim_of(const ConvexSet::Variant& v) {
    return std::visit(
        [](const auto& s) -> int {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Box>) {
                return static_cast<int>(s.lower.size());
            } else if constexpr (std::is_same_v<T, Polyhedron>) {
                return static_cast<int>(s.A.cols());
            } else {
                return s.base->dim();
            }
        },
        v);
}

}  // namespace

ConvexSet::ConvexSet(Box box) : repr_(std::move(box)) {
    const auto& b = std::get<Box>(repr_);
    if (b.lower.size() != b.upper.size()) {
        throw Error(ErrorKind::DimensionMismatch, "box bounds differ in length");
    }
    for (Eigen::Index i = 0; i < b.lower.size(); ++i) {
        if (std::isnan(b.lower(i)) || std::isnan(b.upper(i)) || b.lower(i) > b.upper(i) ||
            b.lower(i) == kInf || b.upper(i) == -kInf) {
            throw Error(ErrorKind::EmptySet, "box bound " + std::to_string(i) + " is empty");
        }
    }
    dim_ = dim_of(repr_);
}

ConvexSet::ConvexSet(Polyhedron poly) : repr_(std::move(poly)) {
    const auto& p = std::get<Polyhedron>(repr_);
    if (p.A.rows() != p.b.size()) {
        throw Error(ErrorKind::DimensionMismatch, "polyhedron A and b row counts differ");
    }
    if (!p.A.allFinite() || p.b.hasNaN()) {
        throw Error(ErrorKind::DimensionMismatch, "polyhedron data must be finite");
    }
    dim_ = dim_of(repr_);
}

ConvexSet::ConvexSet(Translate tr) : repr_(std::move(tr)) {
    const auto& t = std::get<Translate>(repr_);
    if (!t.base) throw Error(ErrorKind::DimensionMismatch, "translate without base set");
    if (t.offset.size() != t.base->dim()) {
        throw Error(ErrorKind::DimensionMismatch, "translate offset has wrong dimension");
    }
    if (!t.offset.allFinite()) {
        throw Error(ErrorKind::DimensionMismatch, "translate offset must be finite");
    }
    dim_ = dim_of(repr_);
}

ConvexSet ConvexSet::whole_space(int dim) {
    return ConvexSet(Box{Vector::Constant(dim, -kInf), Vector::Constant(dim, kInf)});
}

ConvexSet ConvexSet::translated(ConvexSet base, Vector offset) {
    return ConvexSet(Translate{std::make_shared<const ConvexSet>(std::move(base)), std::move(offset)});
}

std::optional<Box> as_box(const ConvexSet& set) {
    return std::visit(
        [](const auto& s) -> std::optional<Box> {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Box>) {
                return s;
            } else if constexpr (std::is_same_v<T, Polyhedron>) {
                return std::nullopt;
            } else {
                auto inner = as_box(*s.base);
                if (!inner) return std::nullopt;
                inner->lower += s.offset;
                inner->upper += s.offset;
                return inner;
            }
        },
        set.repr());
}

// ---------------------------------------------------------------------------
// Polyhedron projection
// ---------------------------------------------------------------------------

PolyhedronProjection project_polyhedron(const Polyhedron& poly, const Vector& p) {
    const auto k = poly.A.rows();
    const auto m = poly.A.cols();
    if (p.size() != m) throw Error(ErrorKind::DimensionMismatch, "projection point dimension");

    Vector x = p;
    Vector u = Vector::Zero(k);
    std::vector<int> active;

    Vector row_norm(k);
    for (Eigen::Index i = 0; i < k; ++i) {
        row_norm(i) = poly.A.row(i).norm();
        if (row_norm(i) == 0.0 && poly.b(i) < 0.0) {
            throw Error(ErrorKind::EmptySet, "constraint 0 <= " + std::to_string(poly.b(i)));
        }
    }

    auto violation = [&](Eigen::Index i) { return poly.A.row(i).dot(x) - poly.b(i); };
    auto tolerance = [&](Eigen::Index i) {
        return 1e-12 * (1.0 + std::abs(poly.b(i)) + row_norm(i) * x.norm());
    };

    const int max_iter = 50 * static_cast<int>(k + m) + 100;
    int iter = 0;
    while (true) {
        // Smallest-index violated constraint (Bland-style choice).
        int q = -1;
        for (Eigen::Index i = 0; i < k; ++i) {
            if (row_norm(i) == 0.0) continue;
            if (std::find(active.begin(), active.end(), static_cast<int>(i)) != active.end()) continue;
            if (violation(i) > tolerance(i)) {
                q = static_cast<int>(i);
                break;
            }
        }
        if (q < 0) break;

        // Raise u_q until constraint q becomes active, dropping constraints
        // whose multipliers reach zero on the way.
        while (true) {
            if (++iter > max_iter) {
                throw Error(ErrorKind::SolverDiverged, "polyhedron projection did not terminate");
            }
            const Vector aq = poly.A.row(q).transpose();
            Matrix N(m, static_cast<Eigen::Index>(active.size()));
            for (std::size_t j = 0; j < active.size(); ++j) N.col(j) = poly.A.row(active[j]).transpose();

            Vector r = Vector::Zero(static_cast<Eigen::Index>(active.size()));
            if (!active.empty()) r = N.householderQr().solve(aq);
            const Vector z = aq - N * r;
            const bool z_zero = z.norm() <= 1e-12 * row_norm(q);

            double t1 = kInf;
            int drop = -1;
            for (std::size_t j = 0; j < active.size(); ++j) {
                if (r(j) > 1e-14) {
                    const double ratio = u(active[j]) / r(j);
                    if (ratio < t1) {
                        t1 = ratio;
                        drop = static_cast<int>(j);
                    }
                }
            }

            if (z_zero) {
                if (drop < 0) {
                    throw Error(ErrorKind::EmptySet, "polyhedron constraints are infeasible");
                }
                for (std::size_t j = 0; j < active.size(); ++j) u(active[j]) -= t1 * r(j);
                u(q) += t1;
                u(active[drop]) = 0.0;
                active.erase(active.begin() + drop);
                continue;
            }

            const double t2 = violation(q) / z.squaredNorm();
            const double t = std::min(t1, t2);
            x -= t * z;
            for (std::size_t j = 0; j < active.size(); ++j) u(active[j]) -= t * r(j);
            u(q) += t;
            if (t2 <= t1) {
                active.push_back(q);
                break;
            }
            u(active[drop]) = 0.0;
            active.erase(active.begin() + drop);
        }
    }
    for (Eigen::Index i = 0; i < k; ++i) u(i) = std::max(u(i), 0.0);
    std::sort(active.begin(), active.end());
    return {x, u, active};
}

PolyhedronProjection project_polyhedron_exhaustive(const Polyhedron& poly, const Vector& p) {
    const auto k = static_cast<int>(poly.A.rows());
    const auto m = static_cast<int>(poly.A.cols());
    if (k > 24) throw Error(ErrorKind::DimensionMismatch, "exhaustive oracle limited to 24 rows");
    if (p.size() != m) throw Error(ErrorKind::DimensionMismatch, "projection point dimension");

    const std::uint32_t subsets = 1u << k;
    for (std::uint32_t mask = 0; mask < subsets; ++mask) {
        const int size = std::popcount(mask);
        if (size > m) continue;
        std::vector<int> idx;
        for (int i = 0; i < k; ++i) {
            if (mask & (1u << i)) idx.push_back(i);
        }
        Matrix N(m, size);
        Vector bs(size);
        for (int j = 0; j < size; ++j) {
            N.col(j) = poly.A.row(idx[j]).transpose();
            bs(j) = poly.b(idx[j]);
        }
        Vector us = Vector::Zero(size);
        if (size > 0) {
            if (numerical_rank(N) < size) continue;
            const Matrix gram = N.transpose() * N;
            us = gram.ldlt().solve(N.transpose() * p - bs);
            if ((us.array() < -1e-10).any()) continue;
        }
        const Vector x = p - N * us;
        const Vector slack = poly.A * x - poly.b;
        bool feasible = true;
        for (int i = 0; i < k; ++i) {
            if (slack(i) > 1e-9 * (1.0 + std::abs(poly.b(i)))) {
                feasible = false;
                break;
            }
        }
        if (!feasible) continue;
        Vector u = Vector::Zero(k);
        for (int j = 0; j < size; ++j) u(idx[j]) = std::max(us(j), 0.0);
        return {x, u, idx};
    }
    throw Error(ErrorKind::EmptySet, "no KKT point found; constraints infeasible");
}

// ---------------------------------------------------------------------------
// Projection and derived quantities
// ---------------------------------------------------------------------------

Vector project(const ConvexSet& set, const Vector& p) {
    require_dim(set, p);
    return std::visit(
        [&p](const auto& s) -> Vector {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Box>) {
                return p.cwiseMax(s.lower).cwiseMin(s.upper);
            } else if constexpr (std::is_same_v<T, Polyhedron>) {
                return project_polyhedron(s, p).point;
            } else {
                return project(*s.base, p - s.offset) + s.offset;
            }
        },
        set.repr());
}

double distance(const ConvexSet& set, const Vector& p) { return (p - project(set, p)).norm(); }

bool contains(const ConvexSet& set, const Vector& p, double tol) { return distance(set, p) <= tol; }

double normal_cone_residual(const ConvexSet& set, const Vector& y, const Vector& mu) {
    if (mu.size() != y.size()) throw Error(ErrorKind::DimensionMismatch, "multiplier dimension");
    return (y - project(set, y + mu)).norm();
}

Matrix projection_jacobian(const ConvexSet& set, const Vector& p) {
    require_dim(set, p);
    return std::visit(
        [&p](const auto& s) -> Matrix {
            using T = std::decay_t<decltype(s)>;
            const auto m = p.size();
            if constexpr (std::is_same_v<T, Box>) {
                Vector diag(m);
                for (Eigen::Index i = 0; i < m; ++i) {
                    diag(i) = (p(i) > s.lower(i) && p(i) < s.upper(i)) ? 1.0 : 0.0;
                }
                return diag.asDiagonal();
            } else if constexpr (std::is_same_v<T, Polyhedron>) {
                const auto proj = project_polyhedron(s, p);
                const double scale = 1e-12 * (1.0 + (p - proj.point).norm());
                std::vector<int> strong;
                for (int i : proj.active) {
                    if (proj.multipliers(i) > scale) strong.push_back(i);
                }
                Matrix J = Matrix::Identity(m, m);
                if (strong.empty()) return J;
                Matrix N(m, static_cast<Eigen::Index>(strong.size()));
                for (std::size_t j = 0; j < strong.size(); ++j) N.col(j) = s.A.row(strong[j]).transpose();
                const Matrix U = range_basis(N);
                return J - U * U.transpose();
            } else {
                return projection_jacobian(*s.base, p - s.offset);
            }
        },
        set.repr());
}

bool is_bounded(const ConvexSet& set) {
    return std::visit(
        [&set](const auto& s) -> bool {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Box>) {
                return s.lower.allFinite() && s.upper.allFinite();
            } else if constexpr (std::is_same_v<T, Polyhedron>) {
                // A nonzero recession cone has positive inner product with some
                // +-e_i, so projections of far points along that axis grow linearly.
                const auto m = set.dim();
                const Vector anchor = project(set, Vector::Zero(m));
                const double scale = 1.0 + anchor.norm() + s.b.cwiseAbs().maxCoeff();
                const double r1 = 1e8 * scale;
                for (Eigen::Index i = 0; i < m; ++i) {
                    for (double sign : {1.0, -1.0}) {
                        Vector e = Vector::Zero(m);
                        e(i) = sign;
                        const Vector p1 = project(set, r1 * e);
                        const Vector p2 = project(set, 2.0 * r1 * e);
                        if ((p2 - p1).norm() > 1e-3 * r1) return false;
                    }
                }
                return true;
            } else {
                return is_bounded(*s.base);
            }
        },
        set.repr());
}

double hausdorff_box(const Box& a, const Box& b) {
    if (a.lower.size() != b.lower.size()) {
        throw Error(ErrorKind::DimensionMismatch, "boxes have different dimensions");
    }
    // Sup over an interval of the distance to another interval is attained at
    // a finite endpoint; both one-sided deviations separate over coordinates.
    auto dist_to = [](double v, double lo, double hi) {
        if (v < lo) return lo - v;
        if (v > hi) return v - hi;
        return 0.0;
    };
    double a_to_b = 0.0;
    double b_to_a = 0.0;
    for (Eigen::Index i = 0; i < a.lower.size(); ++i) {
        const bool a_lo_inf = std::isinf(a.lower(i));
        const bool b_lo_inf = std::isinf(b.lower(i));
        const bool a_hi_inf = std::isinf(a.upper(i));
        const bool b_hi_inf = std::isinf(b.upper(i));
        if (a_lo_inf != b_lo_inf || a_hi_inf != b_hi_inf) {
            throw Error(ErrorKind::InfiniteDistance,
                        "boxes differ in boundedness along coordinate " + std::to_string(i));
        }
        double da = 0.0;
        double db = 0.0;
        if (!a_lo_inf) da = std::max(da, dist_to(a.lower(i), b.lower(i), b.upper(i)));
        if (!a_hi_inf) da = std::max(da, dist_to(a.upper(i), b.lower(i), b.upper(i)));
        if (!b_lo_inf) db = std::max(db, dist_to(b.lower(i), a.lower(i), a.upper(i)));
        if (!b_hi_inf) db = std::max(db, dist_to(b.upper(i), a.lower(i), a.upper(i)));
        a_to_b += da * da;
        b_to_a += db * db;
    }
    return std::sqrt(std::max(a_to_b, b_to_a));
}

namespace {

// Nested direction sequence: the first k directions are a prefix of the first
// k + 1, so the sampled estimate is monotone in k.
std::vector<Vector> support_directions(int dim, int count) {
    std::vector<Vector> dirs;
    dirs.reserve(static_cast<std::size_t>(count));
    if (dim == 1) {
        for (int j = 0; j < count; ++j) dirs.push_back(Vector::Constant(1, j % 2 == 0 ? 1.0 : -1.0));
        return dirs;
    }
    if (dim == 2) {
        const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
        for (int j = 0; j < count; ++j) {
            Vector d(2);
            d << std::cos(j * golden), std::sin(j * golden);
            dirs.push_back(d);
        }
        return dirs;
    }
    std::mt19937_64 rng(0x5eed);
    std::normal_distribution<double> normal;
    for (int j = 0; j < count; ++j) {
        Vector d(dim);
        for (int i = 0; i < dim; ++i) d(i) = normal(rng);
        dirs.push_back(d.normalized());
    }
    return dirs;
}

}  // namespace

double hausdorff_sampled(const ConvexSet& a, const ConvexSet& b, int directions) {
    if (a.dim() != b.dim()) throw Error(ErrorKind::DimensionMismatch, "sets differ in dimension");
    if (!is_bounded(a) || !is_bounded(b)) {
        throw Error(ErrorKind::Unbounded, "sampled Hausdorff distance needs bounded sets");
    }
    const int m = a.dim();
    const Vector ca = project(a, Vector::Zero(m));
    const Vector cb = project(b, Vector::Zero(m));
    const double radius = 1e6 * (1.0 + ca.norm() + cb.norm());
    double best = 0.0;
    for (const Vector& d : support_directions(m, directions)) {
        const Vector pa = project(a, ca + radius * d);
        const Vector pb = project(b, cb + radius * d);
        best = std::max({best, distance(b, pa), distance(a, pb)});
    }
    return best;
}

}  // namespace lure
