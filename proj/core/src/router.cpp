#include "detdsci/router.hpp"

#include <spdlog/spdlog.h>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "detdsci/encoding.hpp"
#include "detdsci/image_codec.hpp"

namespace detdsci::router {

using nlohmann::json;

ClassifierBackendRef ClassifierBackendRef::remote(std::string endpoint)
{
    return {ClassifierKind::RemoteService, std::move(endpoint), std::nullopt};
}

ClassifierBackendRef ClassifierBackendRef::stub(geo::ScaleInterval answer)
{
    return {ClassifierKind::FixedStub, {}, answer};
}

void ClassifierBackendRef::validate() const
{
    if ((kind == ClassifierKind::RemoteService) != !endpoint.empty()) {
        throw ConfigError("classifier endpoint must be set exactly when kind is REMOTE_SERVICE");
    }
    if ((kind == ClassifierKind::FixedStub) != stub_answer.has_value()) {
        throw ConfigError("classifier stub_answer must be set exactly when kind is FIXED_STUB");
    }
}

std::string_view to_string(ClassifierKind kind) noexcept
{
    switch (kind) {
    case ClassifierKind::RemoteService:
        return "REMOTE_SERVICE";
    case ClassifierKind::FixedStub:
        return "FIXED_STUB";
    case ClassifierKind::MetadataOracle:
        break;
    }
    return "METADATA_ORACLE";
}

ClassifierKind parse_classifier_kind(std::string_view text)
{
    if (text == "METADATA_ORACLE") {
        return ClassifierKind::MetadataOracle;
    }
    if (text == "REMOTE_SERVICE") {
        return ClassifierKind::RemoteService;
    }
    if (text == "FIXED_STUB") {
        return ClassifierKind::FixedStub;
    }
    throw ConfigError(fmt::format("unknown classifier kind '{}'", text));
}

std::string detector_id_for(geo::ScaleInterval interval)
{
    return interval == geo::ScaleInterval::Large ? kLargeDetectorId : kSmallDetectorId;
}

namespace {

RoutingDecision remote_classify(const ingest::Crop& crop, const std::string& endpoint,
                                HttpTransport& transport)
{
    if (!crop.pixels) {
        throw RoutingError(fmt::format("crop {}: no pixels to send to the classifier", crop.id));
    }
    const auto png = encode_png(*crop.pixels);
    const std::string body = json{{"image", base64_encode(png)}}.dump();
    const std::string url = endpoint + kClassifyPath;

    HttpResponse response;
    try {
        response = transport.post_json(url, body);
    } catch (const TransportError& e) {
        throw RoutingError(fmt::format("crop {}: classifier unreachable: {}", crop.id, e.what()));
    }
    if (response.status != 200) {
        throw RoutingError(fmt::format("crop {}: classifier answered HTTP {}", crop.id, response.status));
    }
    try {
        const auto doc = json::parse(response.body);
        RoutingDecision decision{geo::parse_scale_interval(doc.at("interval").get<std::string>()),
                                 doc.at("confidence").get<double>(), {}};
        if (!(decision.confidence >= 0.0 && decision.confidence <= 1.0)) {
            throw std::out_of_range("confidence outside [0, 1]");
        }
        decision.detector_id = detector_id_for(decision.interval);
        return decision;
    } catch (const std::exception& e) {
        throw RoutingError(fmt::format("crop {}: malformed classifier answer: {}", crop.id, e.what()));
    }
}

}  // namespace

RoutingDecision classify_scale(const ingest::Crop& crop, const ClassifierBackendRef& backend,
                               HttpTransport* transport)
{
    if (crop.pixels &&
        (crop.pixels->width() != ingest::kCropSize || crop.pixels->height() != ingest::kCropSize)) {
        throw RoutingError(fmt::format("crop {} is {}x{}, expected {}x{}", crop.id,
                                       crop.pixels->width(), crop.pixels->height(),
                                       ingest::kCropSize, ingest::kCropSize));
    }
    switch (backend.kind) {
    case ClassifierKind::MetadataOracle:
        try {
            const auto interval = geo::interval_for_zoom(crop.zoom);
            return {interval, 1.0, detector_id_for(interval)};
        } catch (const std::domain_error& e) {
            throw RoutingError(fmt::format("crop {}: {}", crop.id, e.what()));
        }
    case ClassifierKind::FixedStub:
        if (!backend.stub_answer) {
            throw RoutingError("FIXED_STUB classifier without a stub answer");
        }
        return {*backend.stub_answer, 1.0, detector_id_for(*backend.stub_answer)};
    case ClassifierKind::RemoteService:
        break;
    }
    if (transport == nullptr) {
        throw RoutingError("REMOTE_SERVICE classifier needs an HTTP transport");
    }
    auto decision = remote_classify(crop, backend.endpoint, *transport);
    spdlog::debug("crop {} routed to {} ({:.3f})", crop.id, decision.detector_id, decision.confidence);
    return decision;
}

void ConfusionMatrix::validate() const
{
    if (counts.size() != labels.size()) {
        throw std::invalid_argument("confusion matrix needs one row per label");
    }
    for (const auto& row : counts) {
        if (row.size() != labels.size()) {
            throw std::invalid_argument("confusion matrix needs one column per label");
        }
    }
}

std::size_t ConfusionMatrix::total() const
{
    std::size_t sum = 0;
    for (const auto& row : counts) {
        for (const auto c : row) {
            sum += c;
        }
    }
    return sum;
}

std::size_t ConfusionMatrix::trace() const
{
    std::size_t sum = 0;
    for (std::size_t i = 0; i < counts.size() && i < counts[i].size(); ++i) {
        sum += counts[i][i];
    }
    return sum;
}

double accuracy(const ConfusionMatrix& cm)
{
    cm.validate();
    const auto total = cm.total();
    if (total == 0) {
        throw std::domain_error("accuracy of an all-zero confusion matrix is undefined");
    }
    return static_cast<double>(cm.trace()) / static_cast<double>(total);
}

}  // namespace detdsci::router
