#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "detdsci/errors.hpp"
#include "detdsci/geo.hpp"
#include "detdsci/http.hpp"
#include "detdsci/ingest.hpp"

namespace detdsci::router {

inline constexpr const char* kLargeDetectorId = "CI-LS_Det_stable";
inline constexpr const char* kSmallDetectorId = "CI-SS_Det_stable";

enum class ClassifierKind { MetadataOracle, RemoteService, FixedStub };

struct ClassifierBackendRef {
    ClassifierKind kind = ClassifierKind::MetadataOracle;
    /// Base URL of the service (REMOTE_SERVICE only).
    std::string endpoint;
    /// Constant answer (FIXED_STUB only).
    std::optional<geo::ScaleInterval> stub_answer;

    [[nodiscard]] static ClassifierBackendRef oracle() { return {}; }
    [[nodiscard]] static ClassifierBackendRef remote(std::string endpoint);
    [[nodiscard]] static ClassifierBackendRef stub(geo::ScaleInterval answer);

    /// Throws ConfigError when the fields do not match the kind.
    void validate() const;
};

[[nodiscard]] std::string_view to_string(ClassifierKind kind) noexcept;
/// Parses METADATA_ORACLE / REMOTE_SERVICE / FIXED_STUB. Throws ConfigError.
[[nodiscard]] ClassifierKind parse_classifier_kind(std::string_view text);

struct RoutingDecision {
    geo::ScaleInterval interval;
    double confidence = 1.0;
    std::string detector_id;
};

[[nodiscard]] std::string detector_id_for(geo::ScaleInterval interval);

/// Remote classifier unreachable or answering outside the protocol. The
/// crop is to be skipped, never routed by guess.
class RoutingError : public Error {
public:
    using Error::Error;
};

inline constexpr const char* kClassifyPath = "/v1/classify-zoom";

/// Stage 1: picks the zoom interval of a crop. `transport` is required for
/// REMOTE_SERVICE. Throws RoutingError.
[[nodiscard]] RoutingDecision classify_scale(const ingest::Crop& crop,
                                             const ClassifierBackendRef& backend,
                                             HttpTransport* transport = nullptr);

/// Rows are true labels, columns predicted labels.
struct ConfusionMatrix {
    std::vector<std::string> labels;
    std::vector<std::vector<std::size_t>> counts;

    /// Throws std::invalid_argument when the grid is not labels x labels.
    void validate() const;
    [[nodiscard]] std::size_t total() const;
    [[nodiscard]] std::size_t trace() const;
};

/// trace / total. Throws std::domain_error on an all-zero matrix.
[[nodiscard]] double accuracy(const ConfusionMatrix& cm);

}  // namespace detdsci::router
