#pragma once

#include <json.hpp>

#include "brauer.hpp"

namespace dp2bm {

inline constexpr int kSchemaVersion = 1;

inline nlohmann::ordered_json to_json(const InvariantClassification& c) {
    nlohmann::ordered_json j;
    j["place"] = c.place.to_string();
    j["verdict"] = to_string(c.verdict);
    if (c.verdict == Verdict::Constant)
        j["value"] = c.value.to_string();
    else
        j["value"] = nullptr;
    j["provenance"] = c.provenance.to_string();
    return j;
}

inline nlohmann::ordered_json to_json(const ObstructionDecision& d) {
    nlohmann::ordered_json j;
    j["schema_version"] = kSchemaVersion;
    j["a"] = {d.a.a[0], d.a.a[1], d.a.a[2]};
    j["theta"] = d.a.theta;
    j["theta_class"] = to_string(d.a.theta_class);
    j["status"] = to_string(d.status);
    j["reason"] = d.reason;
    if (d.point)
        j["point"] = d.point->y;
    else
        j["point"] = nullptr;
    j["places"] = nlohmann::ordered_json::array();
    for (auto& c : d.per_place) j["places"].push_back(to_json(c));
    if (d.total)
        j["total"] = d.total->to_string();
    else
        j["total"] = nullptr;
    return j;
}

}  // namespace dp2bm
