#pragma once

#include <string>

#include <nlohmann/json.hpp>

namespace phishtriage {

// Canonical real formatting: 6 significant digits, platform-independent.
// Rounds v to the double nearest its %.6g decimal form so nlohmann's
// shortest-round-trip printer emits exactly that form.
double canonical_real(double v);

// Canonical JSON value for a real; infinities become the strings
// "inf"/"-inf" (JSON has no Infinity literal).
nlohmann::json real_to_json(double v);

double real_from_json(const nlohmann::json& j);

// Compact dump with sorted keys (nlohmann's default object is a sorted
// map, so this is a plain dump; the helper exists to pin the contract).
std::string canonical_dump(const nlohmann::json& j);

}  // namespace phishtriage
