#include "phishtriage/jsonfmt.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>

#include "phishtriage/errors.hpp"

namespace phishtriage {

double canonical_real(double v) {
    if (!std::isfinite(v)) return v;
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return std::strtod(buf, nullptr);
}

nlohmann::json real_to_json(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) throw SchemaError("NaN cannot be serialized");
    return canonical_real(v);
}

double real_from_json(const nlohmann::json& j) {
    if (j.is_string()) {
        const std::string& s = j.get_ref<const std::string&>();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
        throw SchemaError("expected number, got string \"" + s + "\"");
    }
    if (!j.is_number()) throw SchemaError("expected number");
    return j.get<double>();
}

std::string canonical_dump(const nlohmann::json& j) { return j.dump(); }

}  // namespace phishtriage
