#include "lure/table.hpp"

#include "lure/errors.hpp"

#include <algorithm>
#include <cmath>

namespace lure {

double TimeTable::operator()(double time) const {
    if (t.empty()) throw Error(ErrorKind::ParseError, "empty time table");
    if (time <= t.front()) return v.front();
    if (time >= t.back()) return v.back();
    const auto it = std::upper_bound(t.begin(), t.end(), time);
    const auto k = static_cast<std::size_t>(it - t.begin());
    const double w = (time - t[k - 1]) / (t[k] - t[k - 1]);
    return v[k - 1] + w * (v[k] - v[k - 1]);
}

double TimeTable::lipschitz() const {
    double slope = 0.0;
    for (std::size_t k = 1; k < t.size(); ++k) {
        slope = std::max(slope, std::abs(v[k] - v[k - 1]) / (t[k] - t[k - 1]));
    }
    return slope;
}

double ScalarSpec::operator()(double time) const {
    if (const auto* c = std::get_if<double>(&value)) return *c;
    return std::get<TimeTable>(value)(time);
}

double ScalarSpec::lipschitz() const {
    if (is_constant()) return 0.0;
    return std::get<TimeTable>(value).lipschitz();
}

bool operator==(const ScalarSpec& a, const ScalarSpec& b) {
    if (a.value.index() != b.value.index()) return false;
    if (a.is_constant()) return std::get<double>(a.value) == std::get<double>(b.value);
    return std::get<TimeTable>(a.value) == std::get<TimeTable>(b.value);
}

Vector evaluate(const VectorSpec& spec, double time) {
    Vector out(static_cast<Eigen::Index>(spec.size()));
    for (std::size_t i = 0; i < spec.size(); ++i) out(static_cast<Eigen::Index>(i)) = spec[i](time);
    return out;
}

double lipschitz(const VectorSpec& spec) {
    double sum = 0.0;
    for (const auto& s : spec) sum += s.lipschitz() * s.lipschitz();
    return std::sqrt(sum);
}

std::vector<double> knot_times(const VectorSpec& spec) {
    std::vector<double> times;
    for (const auto& s : spec) {
        if (const auto* table = std::get_if<TimeTable>(&s.value)) {
            times.insert(times.end(), table->t.begin(), table->t.end());
        }
    }
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end()), times.end());
    return times;
}

}  // namespace lure
