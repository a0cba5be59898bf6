#include "doicd/http_backend.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "doicd/base64.hpp"

namespace doicd {

namespace {

using nlohmann::json;

class SlotGuard {
  public:
    explicit SlotGuard(std::counting_semaphore<>& s) : s_(s) { s_.acquire(); }
    ~SlotGuard() { s_.release(); }
    SlotGuard(const SlotGuard&) = delete;
    SlotGuard& operator=(const SlotGuard&) = delete;

  private:
    std::counting_semaphore<>& s_;
};

json parse_body(std::string_view endpoint, const std::string& pair_id, const std::string& body) {
    try {
        return json::parse(body);
    } catch (const json::exception& e) {
        throw BackendError(std::string(endpoint), pair_id, std::string("malformed response: ") + e.what());
    }
}

std::vector<std::uint8_t> decode_field(std::string_view endpoint, const std::string& pair_id, const json& obj,
                                       const char* field) {
    try {
        return base64_decode(obj.at(field).get<std::string>());
    } catch (const std::exception& e) {
        throw BackendError(std::string(endpoint), pair_id,
                           std::string("malformed response field '") + field + "': " + e.what());
    }
}

}  // namespace

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
    if (config_.base_url.empty())
        throw std::invalid_argument("backend URL is empty");
    if (config_.max_connections < 1)
        throw std::invalid_argument("max_connections must be at least 1");
    if (config_.retries < 0)
        throw std::invalid_argument("retries must be non-negative");

    auto url = config_.base_url;
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        throw std::invalid_argument("backend URL needs a scheme (http://...): " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    host_ = url.substr(0, path_start);
    if (path_start != std::string::npos) {
        path_base_ = url.substr(path_start);
        while (!path_base_.empty() && path_base_.back() == '/')
            path_base_.pop_back();
    }
    slots_ = std::make_unique<std::counting_semaphore<>>(config_.max_connections);
}

HttpBackend::~HttpBackend() = default;

std::string HttpBackend::post(std::string_view endpoint, const std::string& pair_id, const std::string& body) {
    SlotGuard slot(*slots_);
    const auto path = path_base_ + "/v1/" + std::string(endpoint);
    const auto secs = static_cast<time_t>(config_.timeout_seconds);
    const auto usecs = static_cast<time_t>((config_.timeout_seconds - static_cast<double>(secs)) * 1e6);

    std::string last_error;
    for (int attempt = 0; attempt <= config_.retries; ++attempt) {
        httplib::Client client(host_);
        client.set_connection_timeout(secs, usecs);
        client.set_read_timeout(secs, usecs);
        client.set_write_timeout(secs, usecs);
        auto res = client.Post(path, body, "application/json");
        if (!res) {
            last_error = "transport failure (" + httplib::to_string(res.error()) + ") contacting " + host_ + path;
            continue;
        }
        if (res->status != 200) {
            std::string detail = "HTTP " + std::to_string(res->status);
            try {
                const auto err = json::parse(res->body);
                if (err.contains("error"))
                    detail += ": " + err.at("error").get<std::string>();
            } catch (const json::exception&) {
            }
            throw BackendError(std::string(endpoint), pair_id, detail);
        }
        return res->body;
    }
    throw BackendError(std::string(endpoint), pair_id, last_error);
}

ProbabilityMask HttpBackend::detect_change(const ChangeRequest& req) {
    require_same_extent(req.ref.extent(), req.live.extent(), "change request (ref vs live)");
    json body;
    body["pair_id"] = req.pair_id;
    body["ref_png"] = base64_encode(encode_image_png(req.ref));
    body["image_png"] = base64_encode(encode_image_png(req.live));

    const auto res = parse_body(kEndpointChange, req.pair_id, post(kEndpointChange, req.pair_id, body.dump()));
    ProbabilityMask prob;
    try {
        prob = decode_probability_png(decode_field(kEndpointChange, req.pair_id, res, "prob_png"), "prob_png");
    } catch (const ImageIoError& e) {
        throw BackendError(std::string(kEndpointChange), req.pair_id, e.what());
    }
    if (prob.extent() != req.live.extent())
        throw BackendError(std::string(kEndpointChange), req.pair_id,
                           "dimension mismatch: " + to_string(prob.extent()) + " vs " + to_string(req.live.extent()));
    return prob;
}

std::string HttpBackend::describe(const DescribeRequest& req) {
    require_same_extent(req.image.extent(), req.region.extent(), "describe request (image vs region)");
    json body;
    body["pair_id"] = req.pair_id;
    body["image_png"] = base64_encode(encode_image_png(req.image));
    body["region_png"] = base64_encode(encode_mask_png(req.region));
    body["region_index"] = req.region_index;
    body["prompt"] = req.prompt;

    const auto res = parse_body(kEndpointDescribe, req.pair_id, post(kEndpointDescribe, req.pair_id, body.dump()));
    if (!res.contains("text") || !res.at("text").is_string())
        throw BackendError(std::string(kEndpointDescribe), req.pair_id, "malformed response: missing 'text'");
    return res.at("text").get<std::string>();
}

std::vector<ObjectProposal> HttpBackend::segment(const SegmentRequest& req) {
    const std::string endpoint(kEndpointSegment);
    if (req.label.empty())
        throw BackendError(endpoint, req.pair_id, "empty segmentation label");
    json body;
    body["pair_id"] = req.pair_id;
    body["image_png"] = base64_encode(encode_image_png(req.image));
    body["image_role"] = std::string(to_string(req.role));
    body["label"] = req.label;

    const auto res = parse_body(endpoint, req.pair_id, post(endpoint, req.pair_id, body.dump()));
    if (!res.contains("proposals") || !res.at("proposals").is_array())
        throw BackendError(endpoint, req.pair_id, "malformed response: missing 'proposals'");

    std::vector<ObjectProposal> out;
    for (const auto& item : res.at("proposals")) {
        ObjectProposal p;
        try {
            p.label = item.value("label", req.label);
            if (item.contains("confidence") && !item.at("confidence").is_null())
                p.confidence = item.at("confidence").get<double>();
            p.mask = decode_mask_png(decode_field(endpoint, req.pair_id, item, "mask_png"), "mask_png");
        } catch (const ImageIoError& e) {
            throw BackendError(endpoint, req.pair_id, e.what());
        } catch (const json::exception& e) {
            throw BackendError(endpoint, req.pair_id, std::string("malformed proposal: ") + e.what());
        }
        if (p.mask.extent() != req.image.extent())
            throw BackendError(endpoint, req.pair_id,
                               "dimension mismatch: " + to_string(p.mask.extent()) + " vs " +
                                   to_string(req.image.extent()));
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace doicd
