#include "lure/scenario.hpp"

#include "json_format.hpp"
#include "lure/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace lure {

using Json = nlohmann::ordered_json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr const char* kKernelWaiver = "kernel_inclusion";

[[noreturn]] void parse_fail(const std::string& path, const std::string& what) {
    throw Error(ErrorKind::ParseError, path + ": " + what);
}

const Json& member(const Json& obj, const char* key, const std::string& path) {
    const auto it = obj.find(key);
    if (it == obj.end()) parse_fail(path, std::string("missing field '") + key + "'");
    return *it;
}

const Json* optional_member(const Json& obj, const char* key) {
    const auto it = obj.find(key);
    return it == obj.end() || it->is_null() ? nullptr : &*it;
}

double read_number(const Json& j, const std::string& path) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf" || s == "+inf") return kInf;
        if (s == "-inf") return -kInf;
    }
    parse_fail(path, "expected a number, \"inf\" or \"-inf\"");
}

int read_int(const Json& j, const std::string& path) {
    if (!j.is_number_integer()) parse_fail(path, "expected an integer");
    return j.get<int>();
}

std::vector<double> read_numbers(const Json& j, const std::string& path) {
    if (!j.is_array()) parse_fail(path, "expected an array");
    std::vector<double> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(read_number(j[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

Vector read_vector(const Json& j, const std::string& path) {
    const auto v = read_numbers(j, path);
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Matrix read_matrix(const Json& j, const std::string& path) {
    if (!j.is_array() || j.empty()) parse_fail(path, "expected a non-empty array of rows");
    const auto rows = static_cast<Eigen::Index>(j.size());
    Eigen::Index cols = -1;
    Matrix M;
    for (Eigen::Index r = 0; r < rows; ++r) {
        const auto row_path = path + "[" + std::to_string(r) + "]";
        const auto row = read_numbers(j[static_cast<std::size_t>(r)], row_path);
        if (cols < 0) {
            cols = static_cast<Eigen::Index>(row.size());
            if (cols == 0) parse_fail(row_path, "empty row");
            M.resize(rows, cols);
        } else if (static_cast<Eigen::Index>(row.size()) != cols) {
            parse_fail(row_path, "ragged matrix");
        }
        for (Eigen::Index c = 0; c < cols; ++c) M(r, c) = row[static_cast<std::size_t>(c)];
    }
    if (!M.allFinite()) parse_fail(path, "matrix entries must be finite");
    return M;
}

ScalarSpec read_scalar(const Json& j, const std::string& path) {
    if (j.is_object()) {
        TimeTable table{read_numbers(member(j, "t", path), path + ".t"), read_numbers(member(j, "v", path), path + ".v")};
        return ScalarSpec{std::move(table)};
    }
    return ScalarSpec{read_number(j, path)};
}

VectorSpec read_spec(const Json& j, const std::string& path) {
    if (!j.is_array()) parse_fail(path, "expected an array");
    VectorSpec out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(read_scalar(j[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

std::optional<double> read_optional_number(const Json& obj, const char* key, const std::string& path) {
    if (const auto* j = optional_member(obj, key)) return read_number(*j, path + "." + key);
    return std::nullopt;
}

Json number_json(double v) {
    if (v == kInf) return "inf";
    if (v == -kInf) return "-inf";
    return v;
}

Json vector_json(const Vector& v) {
    Json out = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(number_json(v(i)));
    return out;
}

Json matrix_json(const Matrix& M) {
    Json out = Json::array();
    for (Eigen::Index r = 0; r < M.rows(); ++r) out.push_back(vector_json(M.row(r).transpose()));
    return out;
}

Json spec_json(const VectorSpec& spec) {
    Json out = Json::array();
    for (const auto& s : spec) {
        if (s.is_constant()) {
            out.push_back(number_json(std::get<double>(s.value)));
        } else {
            const auto& table = std::get<TimeTable>(s.value);
            Json t = Json::array(), v = Json::array();
            for (double x : table.t) t.push_back(x);
            for (double x : table.v) v.push_back(number_json(x));
            out.push_back(Json{{"t", t}, {"v", v}});
        }
    }
    return out;
}

bool same_matrix(const Matrix& a, const Matrix& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && (a.size() == 0 || a == b);
}

bool same_matrix(const std::optional<Matrix>& a, const std::optional<Matrix>& b) {
    if (a.has_value() != b.has_value()) return false;
    return !a || same_matrix(*a, *b);
}

std::pair<int, int> line_column(std::string_view text, std::size_t byte) {
    int line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

Matrix H_or_zero(const Scenario& sc) { return sc.set.H.value_or(Matrix::Zero(sc.m, sc.n)); }

VectorOfTime g_or_zero(const Scenario& sc) {
    if (sc.set.g) return [g = *sc.set.g](double t) { return evaluate(g, t); };
    return [m = sc.m](double) { return Vector::Zero(m); };
}

/// Union of the knot times of all time-varying data, plus t = 0.
std::vector<double> all_knots(const Scenario& sc) {
    std::vector<double> t{0.0};
    auto add = [&](const VectorSpec& s) {
        const auto k = knot_times(s);
        t.insert(t.end(), k.begin(), k.end());
    };
    add(sc.set.lower);
    add(sc.set.upper);
    if (sc.set.g) add(*sc.set.g);
    std::sort(t.begin(), t.end());
    t.erase(std::unique(t.begin(), t.end()), t.end());
    return t;
}

bool is_coordinate_subspace(const Matrix& proj, std::vector<bool>& in_range) {
    in_range.assign(static_cast<std::size_t>(proj.rows()), false);
    for (Eigen::Index i = 0; i < proj.rows(); ++i) {
        for (Eigen::Index j = 0; j < proj.cols(); ++j) {
            const double expected = (i == j && std::abs(proj(i, i) - 1.0) < 1e-9) ? 1.0 : 0.0;
            if (std::abs(proj(i, j) - expected) > 1e-9) return false;
        }
        in_range[static_cast<std::size_t>(i)] = std::abs(proj(i, i) - 1.0) < 1e-9;
    }
    return true;
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

}  // namespace

bool Scenario::waived(std::string_view what) const {
    return std::find(waive.begin(), waive.end(), what) != waive.end();
}

bool operator==(const ScenarioSet& a, const ScenarioSet& b) {
    return a.mode == b.mode && a.lower == b.lower && a.upper == b.upper && same_matrix(a.H, b.H) && a.g == b.g;
}

bool operator==(const Scenario& a, const Scenario& b) {
    return a.name == b.name && a.n == b.n && a.m == b.m && same_matrix(a.A, b.A) && a.e == b.e &&
           same_matrix(a.B, b.B) && same_matrix(a.C, b.C) && same_matrix(a.D, b.D) && same_matrix(a.P, b.P) &&
           a.set == b.set && a.x0.size() == b.x0.size() && a.x0 == b.x0 && a.T == b.T && a.n_steps == b.n_steps &&
           a.sigma == b.sigma && a.constants == b.constants && a.waive == b.waive && a.declared == b.declared;
}

Scenario parse_scenario(std::string_view text) {
    Json j;
    try {
        j = Json::parse(text.begin(), text.end());
    } catch (const nlohmann::json::parse_error& e) {
        const auto [line, col] = line_column(text, e.byte);
        throw Error(ErrorKind::ParseError, "line " + std::to_string(line) + ", column " + std::to_string(col) + ": " +
                                               e.what());
    }
    if (!j.is_object()) parse_fail("$", "expected an object");

    static const std::set<std::string> known{"name", "n", "m", "drift", "B", "C", "D", "P", "set", "x0", "T",
                                             "n_steps", "sigma", "constants", "waive", "declared", "$schema",
                                             "description"};
    for (const auto& [key, _] : j.items()) {
        if (!known.count(key)) parse_fail("$", "unknown field '" + key + "'");
    }

    Scenario sc;
    const auto& name = member(j, "name", "$");
    if (!name.is_string()) parse_fail("name", "expected a string");
    sc.name = name.get<std::string>();
    sc.n = read_int(member(j, "n", "$"), "n");
    sc.m = read_int(member(j, "m", "$"), "m");

    const auto& drift = member(j, "drift", "$");
    if (!drift.is_object()) parse_fail("drift", "expected an object");
    sc.A = read_matrix(member(drift, "A", "drift"), "drift.A");
    if (const auto* e = optional_member(drift, "e")) sc.e = read_spec(*e, "drift.e");

    sc.B = read_matrix(member(j, "B", "$"), "B");
    sc.C = read_matrix(member(j, "C", "$"), "C");
    sc.D = read_matrix(member(j, "D", "$"), "D");
    if (const auto* P = optional_member(j, "P")) sc.P = read_matrix(*P, "P");

    const auto& set = member(j, "set", "$");
    if (!set.is_object()) parse_fail("set", "expected an object");
    if (const auto* mode = optional_member(set, "mode")) {
        if (!mode->is_string()) parse_fail("set.mode", "expected a string");
        sc.set.mode = mode->get<std::string>();
        if (sc.set.mode != "decomposed" && sc.set.mode != "general") {
            parse_fail("set.mode", "expected \"decomposed\" or \"general\"");
        }
    }
    sc.set.lower = read_spec(member(set, "lower", "set"), "set.lower");
    sc.set.upper = read_spec(member(set, "upper", "set"), "set.upper");
    if (const auto* H = optional_member(set, "H")) sc.set.H = read_matrix(*H, "set.H");
    if (const auto* g = optional_member(set, "g")) sc.set.g = read_spec(*g, "set.g");

    sc.x0 = read_vector(member(j, "x0", "$"), "x0");
    sc.T = read_number(member(j, "T", "$"), "T");
    sc.n_steps = read_int(member(j, "n_steps", "$"), "n_steps");
    sc.sigma = read_optional_number(j, "sigma", "$");

    if (const auto* c = optional_member(j, "constants")) {
        if (!c->is_object()) parse_fail("constants", "expected an object");
        sc.constants.Lf = read_optional_number(*c, "Lf", "constants");
        sc.constants.LK1 = read_optional_number(*c, "LK1", "constants");
        sc.constants.LK2 = read_optional_number(*c, "LK2", "constants");
        sc.constants.Lh = read_optional_number(*c, "Lh", "constants");
    }
    if (const auto* w = optional_member(j, "waive")) {
        if (!w->is_array()) parse_fail("waive", "expected an array of strings");
        for (const auto& item : *w) {
            if (!item.is_string() || item.get<std::string>() != kKernelWaiver) {
                parse_fail("waive", "only \"kernel_inclusion\" can be waived");
            }
            sc.waive.push_back(item.get<std::string>());
        }
    }
    if (const auto* d = optional_member(j, "declared")) {
        if (!d->is_object()) parse_fail("declared", "expected an object");
        for (const char* key : {"assumption3", "assumption4"}) {
            if (const auto* v = optional_member(*d, key)) {
                if (!v->is_boolean()) parse_fail(std::string("declared.") + key, "expected a boolean");
                (std::string(key) == "assumption3" ? sc.declared.assumption3 : sc.declared.assumption4) = v->get<bool>();
            }
        }
    }
    return sc;
}

std::string emit_scenario(const Scenario& sc) {
    Json j;
    j["name"] = sc.name;
    j["n"] = sc.n;
    j["m"] = sc.m;
    j["drift"]["A"] = matrix_json(sc.A);
    if (sc.e) j["drift"]["e"] = spec_json(*sc.e);
    j["B"] = matrix_json(sc.B);
    j["C"] = matrix_json(sc.C);
    j["D"] = matrix_json(sc.D);
    if (sc.P) j["P"] = matrix_json(*sc.P);
    j["set"]["mode"] = sc.set.mode;
    j["set"]["lower"] = spec_json(sc.set.lower);
    j["set"]["upper"] = spec_json(sc.set.upper);
    if (sc.set.H) j["set"]["H"] = matrix_json(*sc.set.H);
    if (sc.set.g) j["set"]["g"] = spec_json(*sc.set.g);
    j["x0"] = vector_json(sc.x0);
    j["T"] = sc.T;
    j["n_steps"] = sc.n_steps;
    if (sc.sigma) j["sigma"] = *sc.sigma;
    Json c = Json::object();
    if (sc.constants.Lf) c["Lf"] = number_json(*sc.constants.Lf);
    if (sc.constants.LK1) c["LK1"] = number_json(*sc.constants.LK1);
    if (sc.constants.LK2) c["LK2"] = number_json(*sc.constants.LK2);
    if (sc.constants.Lh) c["Lh"] = number_json(*sc.constants.Lh);
    if (!c.empty()) j["constants"] = c;
    if (!sc.waive.empty()) j["waive"] = sc.waive;
    Json d = Json::object();
    if (sc.declared.assumption3) d["assumption3"] = *sc.declared.assumption3;
    if (sc.declared.assumption4) d["assumption4"] = *sc.declared.assumption4;
    if (!d.empty()) j["declared"] = d;
    return detail::dump_readable(j, 2) + "\n";
}

EffectiveConstants effective_constants(const Scenario& sc) {
    EffectiveConstants k;
    k.Lf = sc.constants.Lf.value_or(spectral_norm(sc.A));
    double sum = 0.0;
    for (std::size_t i = 0; i < sc.set.lower.size() && i < sc.set.upper.size(); ++i) {
        const double l = std::max(sc.set.lower[i].lipschitz(), sc.set.upper[i].lipschitz());
        sum += l * l;
    }
    k.lh1 = std::sqrt(sum);
    k.lh2 = sc.set.g ? lipschitz(*sc.set.g) : 0.0;
    const double h_norm = sc.set.H ? spectral_norm(*sc.set.H) : 0.0;
    k.Lh = sc.constants.Lh.value_or(h_norm);
    k.LK1 = sc.constants.LK1.value_or(k.lh1 + k.lh2);
    k.LK2 = sc.constants.LK2.value_or(k.Lh);
    return k;
}

std::vector<ValidationCheck> validate(const Scenario& sc) {
    std::vector<ValidationCheck> checks;
    auto add = [&](std::string name, bool ok, std::string detail, bool waivable = false) {
        checks.push_back({std::move(name), ok, !ok && waivable, std::move(detail)});
    };

    // Dimensions first; nothing else is meaningful without them.
    {
        std::string why;
        const auto n = sc.n, m = sc.m;
        auto shape = [&](const char* what, const Matrix& M, int r, int c) {
            if (why.empty() && (M.rows() != r || M.cols() != c)) {
                why = std::string(what) + " is " + std::to_string(M.rows()) + "x" + std::to_string(M.cols()) +
                      ", expected " + std::to_string(r) + "x" + std::to_string(c);
            }
        };
        if (n < 1 || m < 1) why = "n and m must be positive";
        if (why.empty()) {
            shape("A", sc.A, n, n);
            shape("B", sc.B, n, m);
            shape("C", sc.C, m, n);
            shape("D", sc.D, m, m);
            if (sc.P) shape("P", *sc.P, n, n);
            if (sc.set.H) shape("set.H", *sc.set.H, m, n);
        }
        auto length = [&](const char* what, std::size_t size, int expected) {
            if (why.empty() && static_cast<int>(size) != expected) {
                why = std::string(what) + " has " + std::to_string(size) + " entries, expected " + std::to_string(expected);
            }
        };
        length("set.lower", sc.set.lower.size(), m);
        length("set.upper", sc.set.upper.size(), m);
        if (sc.set.g) length("set.g", sc.set.g->size(), m);
        if (sc.e) length("drift.e", sc.e->size(), n);
        length("x0", static_cast<std::size_t>(sc.x0.size()), n);
        if (why.empty() && !(sc.T > 0.0 && std::isfinite(sc.T))) why = "T must be positive and finite";
        if (why.empty() && sc.n_steps < 1) why = "n_steps must be at least 1";
        if (why.empty() && !sc.x0.allFinite()) why = "x0 must be finite";
        add("dimensions", why.empty(), why);
        if (!why.empty()) return checks;
    }

    {
        std::string why;
        auto tables = [&](const char* what, const VectorSpec& spec, bool allow_infinite_constants) {
            for (std::size_t i = 0; i < spec.size() && why.empty(); ++i) {
                if (spec[i].is_constant()) {
                    const double v = std::get<double>(spec[i].value);
                    if (!allow_infinite_constants && !std::isfinite(v)) {
                        why = std::string(what) + "[" + std::to_string(i) + "] must be finite";
                    }
                    continue;
                }
                const auto& tb = std::get<TimeTable>(spec[i].value);
                if (tb.t.empty() || tb.t.size() != tb.v.size()) {
                    why = std::string(what) + "[" + std::to_string(i) + "]: t and v must be non-empty and equally long";
                } else if (!std::all_of(tb.v.begin(), tb.v.end(), [](double v) { return std::isfinite(v); })) {
                    why = std::string(what) + "[" + std::to_string(i) + "]: table values must be finite";
                } else {
                    for (std::size_t k = 1; k < tb.t.size(); ++k) {
                        if (!(tb.t[k] > tb.t[k - 1])) {
                            why = std::string(what) + "[" + std::to_string(i) + "]: times must be strictly increasing";
                            break;
                        }
                    }
                }
            }
        };
        tables("set.lower", sc.set.lower, true);
        tables("set.upper", sc.set.upper, true);
        if (sc.set.g) tables("set.g", *sc.set.g, false);
        if (sc.e) tables("drift.e", *sc.e, false);
        add("time tables", why.empty(), why);
        if (!why.empty()) return checks;
    }

    {
        std::string why;
        for (double t : all_knots(sc)) {
            const Vector lo = evaluate(sc.set.lower, t), up = evaluate(sc.set.upper, t);
            for (int i = 0; i < sc.m && why.empty(); ++i) {
                if (lo(i) > up(i)) why = "lower > upper in component " + std::to_string(i + 1) + " at t = " + fmt(t);
                if (lo(i) == kInf || up(i) == -kInf) why = "infinite bound on the wrong side";
            }
        }
        add("box bounds", why.empty(), why);
    }

    const bool d_psd = is_positive_semidefinite(sc.D);
    add("Assumption 2: D positive semidefinite", d_psd, d_psd ? "" : "the symmetric part of D has a negative eigenvalue");

    bool p_ok = true;
    if (sc.P) {
        const Matrix& P = *sc.P;
        const double scale = std::max(1.0, P.cwiseAbs().maxCoeff());
        p_ok = (P - P.transpose()).cwiseAbs().maxCoeff() <= kRankTol * scale &&
               Eigen::SelfAdjointEigenSolver<Matrix>(symmetric_part(P)).eigenvalues().minCoeff() > kRankTol * scale;
        add("storage matrix P", p_ok, p_ok ? "" : "P must be symmetric positive definite");
    }
    const Matrix P = sc.P.value_or(Matrix::Identity(sc.n, sc.n));

    if (d_psd && p_ok) {
        const bool ki = kernel_inclusion(sc.D, P, sc.B, sc.C);
        add("Assumption 2: kernel inclusion", ki, ki ? "" : "ker(D + D^T) is not contained in ker(PB - C^T)",
            sc.waived(kKernelWaiver));
    }

    // Output matrix: full row rank, or a coordinate range with K meeting it.
    const int rank = numerical_rank(sc.C);
    {
        bool ok = rank == sc.m;
        std::string why;
        if (!ok) {
            std::vector<bool> in_range;
            if (rank == 0 || !is_coordinate_subspace(range_projector(sc.C), in_range)) {
                why = "C must have full row rank or a coordinate-subspace range";
            } else {
                const ConvexSet K = build_carrier(sc).evaluate(0.0, sc.x0);
                const auto box = as_box(K);
                ok = true;
                for (int i = 0; i < sc.m; ++i) {
                    if (in_range[static_cast<std::size_t>(i)]) continue;
                    if (box->lower(i) > 1e-12 || box->upper(i) < -1e-12) {
                        ok = false;
                        why = "K(0, x0) does not meet rge(C) (component " + std::to_string(i + 1) + ")";
                    }
                }
            }
        }
        add("output matrix rank", ok, why);
    }

    const EffectiveConstants k = effective_constants(sc);
    {
        std::string why;
        const double c_norm = spectral_norm(sc.C);
        double limit = 0.0;
        if (rank > 0) limit = smallest_positive_eigenvalue(sc.C * sc.C.transpose()) / c_norm;
        const bool ok = rank > 0 && k.LK2 <= limit * (1.0 + 1e-12);
        if (!ok) why = "LK2 = " + fmt(k.LK2) + " exceeds c2 / ||C|| = " + fmt(limit);
        add("Assumption 1 bound", ok, why);
    }

    if (sc.set.mode == "decomposed") {
        const Matrix S = sc.D + sc.D.transpose();
        std::string why;
        const bool h_zero = !sc.set.H || sc.set.H->isZero(0.0);
        if (!h_zero && (numerical_rank(S) == 0 || !range_included(*sc.set.H, S))) {
            why = "rge(H) is not contained in rge(D + D^T)";
        }
        if (why.empty() && sc.set.g) {
            const Matrix proj = numerical_rank(S) == 0 ? Matrix::Zero(sc.m, sc.m) : range_projector(S);
            for (double t : all_knots(sc)) {
                const Vector g = evaluate(*sc.set.g, t);
                if ((g - proj * g).norm() > 1e-9 * (1.0 + g.norm())) {
                    why = "g(" + fmt(t) + ") is not in rge(D + D^T)";
                    break;
                }
            }
        }
        add("Assumption 1': range of H", why.empty(), why);
    }

    {
        std::string why;
        const double a_norm = spectral_norm(sc.A);
        const double h_norm = sc.set.H ? spectral_norm(*sc.set.H) : 0.0;
        auto below = [&](const char* what, double declared, double derived) {
            if (why.empty() && declared < derived * (1.0 - 1e-12)) {
                why = std::string("declared ") + what + " = " + fmt(declared) + " is below the derived value " + fmt(derived);
            }
        };
        below("Lf", k.Lf, a_norm);
        below("LK1", k.LK1, k.lh1 + k.lh2);
        below("Lh", k.Lh, h_norm);
        below("LK2", k.LK2, h_norm);
        add("declared constants", why.empty(), why);
    }

    if (sc.sigma) {
        std::string why;
        const double max_eig = Eigen::SelfAdjointEigenSolver<Matrix>(symmetric_part(sc.A)).eigenvalues().maxCoeff();
        bool offset_zero = true;
        if (sc.e) {
            for (const auto& s : *sc.e) {
                if (s.is_constant()) {
                    offset_zero = offset_zero && std::get<double>(s.value) == 0.0;
                } else {
                    const auto& v = std::get<TimeTable>(s.value).v;
                    offset_zero = offset_zero && std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; });
                }
            }
        }
        if (*sc.sigma < 0.0) why = "sigma must be nonnegative";
        else if (!offset_zero) why = "a nonzero drift offset violates <f(t,x), x> <= -sigma |x|^2";
        else if (*sc.sigma > -max_eig + 1e-12) why = "sigma = " + fmt(*sc.sigma) + " exceeds -lambda_max(sym A) = " + fmt(-max_eig);
        add("decay hypothesis", why.empty(), why);
    }
    return checks;
}

void require_valid(const Scenario& sc) {
    for (const auto& c : validate(sc)) {
        if (!c.ok && !c.waived) throw Error(ErrorKind::ValidationError, c.name + ": " + c.detail);
    }
}

Scenario load_scenario_text(std::string_view text) {
    Scenario sc = parse_scenario(text);
    require_valid(sc);
    return sc;
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::ParseError, "cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return load_scenario_text(buf.str());
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::ParseError) throw;
        throw Error(ErrorKind::ParseError, path + ": " + std::string(e.what()).substr(std::string("ParseError: ").size()));
    }
}

MovingSet build_carrier(const Scenario& sc) {
    const EffectiveConstants k = effective_constants(sc);
    SetOfTime k1 = [lower = sc.set.lower, upper = sc.set.upper](double t) {
        return ConvexSet(Box{evaluate(lower, t), evaluate(upper, t)});
    };
    const Matrix H = H_or_zero(sc);
    // Any declared slack in LK1 is attributed to the box part.
    const double lh1 = std::max(k.lh1, k.LK1 - k.lh2);
    const double lh = std::max(k.LK2, spectral_norm(H));
    MovingSet dec = MovingSet::decomposed(std::move(k1), H, g_or_zero(sc), lh1, k.lh2, lh);
    if (sc.set.mode == "general") return dec.as_general();
    return dec;
}

LureSystem build_system(const Scenario& sc) {
    VectorOfTime offset;
    if (sc.e) offset = [e = *sc.e](double t) { return evaluate(e, t); };
    Drift drift = Drift::affine(sc.A, offset, sc.constants.Lf);
    return LureSystem::make(sc.B, sc.C, sc.D, std::move(drift), build_carrier(sc), sc.P,
                            !sc.waived(kKernelWaiver), sc.sigma);
}

PerturbedScenario perturb_scenario(const Scenario& reference, const Matrix& C_bar, const std::optional<Matrix>& A_bar) {
    if (C_bar.rows() != reference.C.rows() || C_bar.cols() != reference.C.cols()) {
        throw Error(ErrorKind::DimensionMismatch, "C_bar must have the shape of C");
    }
    if (reference.set.H && !reference.set.H->isZero(0.0)) {
        throw Error(ErrorKind::ValidationError, "the reference scenario must have a time-only carrier");
    }
    PerturbedScenario out{reference, std::nullopt};
    Scenario& sc = out.scenario;
    sc.name = reference.name + "_perturbed";
    const Matrix H = (-(C_bar - reference.C)).array() + 0.0;  // no negative zeros in the emitted file
    sc.set.H = H;
    sc.set.mode = "decomposed";
    if (!H.isZero(0.0) && !range_included(C_bar - reference.C, reference.D + reference.D.transpose())) {
        sc.set.mode = "general";
        out.warning = "rge(C_bar - C) is not contained in rge(D + D^T): uniqueness is not guaranteed and the "
                      "carrier is emitted in general mode";
    }
    sc.constants.Lh = spectral_norm(H);
    sc.constants.LK2.reset();
    if (A_bar) {
        if (A_bar->rows() != reference.n || A_bar->cols() != reference.n) {
            throw Error(ErrorKind::DimensionMismatch, "A_bar must be n x n");
        }
        sc.A = *A_bar;
        sc.constants.Lf.reset();
        const double s = -Eigen::SelfAdjointEigenSolver<Matrix>(symmetric_part(*A_bar)).eigenvalues().maxCoeff();
        sc.sigma = reference.sigma ? std::optional<double>(std::min(*reference.sigma, std::max(s, 0.0))) : std::nullopt;
        if (sc.sigma && *sc.sigma <= 0.0) sc.sigma.reset();
    }
    return out;
}

Matrix parse_matrix_file(std::string_view text) {
    Json j;
    try {
        j = Json::parse(text.begin(), text.end());
    } catch (const nlohmann::json::parse_error& e) {
        const auto [line, col] = line_column(text, e.byte);
        throw Error(ErrorKind::ParseError, "line " + std::to_string(line) + ", column " + std::to_string(col) + ": " +
                                               e.what());
    }
    if (j.is_object()) {
        if (j.size() != 1) parse_fail("$", "expected a single matrix-valued member");
        return read_matrix(j.begin().value(), j.begin().key());
    }
    return read_matrix(j, "$");
}

}  // namespace lure
