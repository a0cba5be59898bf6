#include "doicd/doi.hpp"

#include <stdexcept>

namespace doicd {

std::string_view to_string(FusionDecision d) {
    return d == FusionDecision::AdoptOvs ? "AdoptOvs" : "AdoptBase";
}

FusionDecision parse_decision(std::string_view s) {
    if (s == "AdoptOvs")
        return FusionDecision::AdoptOvs;
    if (s == "AdoptBase")
        return FusionDecision::AdoptBase;
    throw std::invalid_argument("unknown fusion decision: " + std::string(s));
}

DoiRecord compute_doi(const BinaryMask& o_l, const BinaryMask& o_r, const BinaryMask& m_o, DoiThresholds thresholds) {
    require_same_extent(o_l.extent(), o_r.extent(), "compute_doi (O_l vs O_r)");
    require_same_extent(o_l.extent(), m_o.extent(), "compute_doi (O_l vs M_o)");
    if (!(thresholds.lower <= thresholds.upper))
        throw std::invalid_argument("DoI thresholds must satisfy lower <= upper");

    DoiRecord r;
    r.thresholds = thresholds;
    r.f_b = disjoint(o_l, o_r);
    r.iou_ol_mo = iou(o_l, m_o);
    r.doi = r.f_b * (1.0 - r.iou_ol_mo);
    // Strict on both ends: doi == upper falls back to the base mask.
    r.decision = (thresholds.lower < r.doi && r.doi < thresholds.upper) ? FusionDecision::AdoptOvs
                                                                         : FusionDecision::AdoptBase;
    return r;
}

const BinaryMask& fuse(const DoiRecord& record, const BinaryMask& o_l, const BinaryMask& m_o) {
    require_same_extent(o_l.extent(), m_o.extent(), "fuse");
    return record.decision == FusionDecision::AdoptOvs ? o_l : m_o;
}

nlohmann::ordered_json to_json(const DoiRecord& record) {
    nlohmann::ordered_json j;
    j["f_b"] = record.f_b;
    j["iou_ol_mo"] = record.iou_ol_mo;
    j["doi"] = record.doi;
    j["decision"] = std::string(to_string(record.decision));
    j["thresholds"] = {{"lower", record.thresholds.lower}, {"upper", record.thresholds.upper}};
    return j;
}

DoiRecord doi_record_from_json(const nlohmann::json& j) {
    DoiRecord r;
    r.f_b = j.at("f_b").get<int>();
    r.iou_ol_mo = j.at("iou_ol_mo").get<double>();
    r.doi = j.at("doi").get<double>();
    r.decision = parse_decision(j.at("decision").get<std::string>());
    r.thresholds.lower = j.at("thresholds").at("lower").get<double>();
    r.thresholds.upper = j.at("thresholds").at("upper").get<double>();
    return r;
}

}  // namespace doicd
