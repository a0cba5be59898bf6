#pragma once

#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "doicd/mask.hpp"

namespace doicd {

enum class FusionDecision { AdoptOvs, AdoptBase };

std::string_view to_string(FusionDecision d);
FusionDecision parse_decision(std::string_view s);

/// Open interval (lower, upper) on the DoI inside which the segmentation mask
/// is trusted over the base change mask.
struct DoiThresholds {
    double lower = 0.0;
    double upper = 0.9;

    bool operator==(const DoiThresholds&) const = default;
};

/// Intermediate values of one DoI evaluation and the resulting decision.
///
///   doi = disjoint(O_l, O_r) * (1 - IoU(O_l, M_o))
///
/// where O_l / O_r are the live / reference object masks and M_o the base
/// change mask. A high value means the object evidence disagrees with the base
/// detector; a value strictly inside the thresholds adopts O_l.
struct DoiRecord {
    int f_b = 0;
    double iou_ol_mo = 0.0;
    double doi = 0.0;
    FusionDecision decision = FusionDecision::AdoptBase;
    DoiThresholds thresholds;

    bool operator==(const DoiRecord&) const = default;
};

DoiRecord compute_doi(const BinaryMask& o_l, const BinaryMask& o_r, const BinaryMask& m_o,
                      DoiThresholds thresholds = {});

/// Returns `o_l` or `m_o` unchanged, as chosen by the record.
const BinaryMask& fuse(const DoiRecord& record, const BinaryMask& o_l, const BinaryMask& m_o);

nlohmann::ordered_json to_json(const DoiRecord& record);
DoiRecord doi_record_from_json(const nlohmann::json& j);

}  // namespace doicd
