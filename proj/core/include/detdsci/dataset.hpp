#pragma once

#include <compare>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "detdsci/box.hpp"
#include "detdsci/errors.hpp"
#include "detdsci/geo.hpp"

namespace detdsci::dataset {

enum class Source { GoogleMaps, Dota, Dior };

[[nodiscard]] std::string_view to_string(Source source) noexcept;
[[nodiscard]] Source parse_source(std::string_view text);

struct Instance {
    std::string label;
    BBox bbox;

    friend bool operator==(const Instance&, const Instance&) = default;
};

struct AnnotatedImage {
    std::string image_ref;
    /// Set for GOOGLE_MAPS imagery, unknown for external datasets.
    std::optional<geo::ZoomLevel> zoom;
    std::vector<Instance> instances;
    Source source = Source::GoogleMaps;

    friend bool operator==(const AnnotatedImage&, const AnnotatedImage&) = default;
};

/// Throws ParseError when boxes are degenerate or the zoom does not fit the
/// source (GOOGLE_MAPS needs a zoom in [14, 23]).
void validate(const AnnotatedImage& image);

/// Labels with an unknown or unmapped class.
class UnknownClassError : public Error {
public:
    UnknownClassError(const std::string& what, std::vector<std::string> labels);
    [[nodiscard]] const std::vector<std::string>& labels() const noexcept { return labels_; }

private:
    std::vector<std::string> labels_;
};

/// Classes one detector reports plus the auxiliary classes it is trained on
/// to absorb false positives.
struct ClassCatalog {
    geo::ScaleInterval scale;
    std::vector<std::string> detection_classes;
    std::vector<std::string> training_only_classes;

    [[nodiscard]] bool contains(std::string_view label) const;
    [[nodiscard]] bool is_detection_class(std::string_view label) const;
    /// Detection classes first, then training-only classes.
    [[nodiscard]] std::vector<std::string> labels() const;
};

/// Dataset construction stage, named alpha/beta/stable in manifest names.
enum class Stage { Alpha, Beta, Stable };

[[nodiscard]] std::string_view to_string(Stage stage) noexcept;

/// Class catalog of a scale at a construction stage. The detection classes
/// are fixed per scale; the small-scale auxiliary set shrinks from beta to
/// stable once small vehicle, large vehicle and ship are ablated.
[[nodiscard]] ClassCatalog catalog(geo::ScaleInterval scale, Stage stage = Stage::Stable);

enum class Split { Train, Test };

struct ManifestName {
    geo::ScaleInterval scale;
    Split split;
    Stage stage;
};

/// Parses `CI-(SS|LS)_(train|test)_(alpha|beta|stable)`. Throws ParseError.
[[nodiscard]] ManifestName parse_manifest_name(std::string_view name);

/// Construction steps (1..3) a manifest name may belong to.
[[nodiscard]] std::set<int> steps_for(const ManifestName& name);

struct SplitManifest {
    std::string name;
    int step = 1;
    std::vector<AnnotatedImage> entries;

    friend bool operator==(const SplitManifest&, const SplitManifest&) = default;
};

/// Throws ParseError when the name does not follow the grammar or does not
/// belong to `step`.
void validate_manifest_name(std::string_view name, int step);

[[nodiscard]] SplitManifest make_manifest(std::string name, int step,
                                          std::vector<AnnotatedImage> entries = {});

/// Column of a count table: a zoom level for GOOGLE_MAPS imagery, or an
/// external source.
struct CountColumn {
    Source source = Source::GoogleMaps;
    std::optional<int> zoom;

    [[nodiscard]] std::string header() const;
    friend auto operator<=>(const CountColumn&, const CountColumn&) = default;
};

/// Instance counts per class label and column.
class CountTable {
public:
    void add(const std::string& label, const CountColumn& column, std::size_t count = 1);

    [[nodiscard]] std::size_t at(const std::string& label, const CountColumn& column) const;
    [[nodiscard]] std::size_t row_total(const std::string& label) const;
    [[nodiscard]] std::size_t column_total(const CountColumn& column) const;
    [[nodiscard]] std::size_t total() const;

    [[nodiscard]] std::vector<std::string> labels() const;
    [[nodiscard]] std::vector<CountColumn> columns() const;
    [[nodiscard]] bool empty() const noexcept { return cells_.empty(); }

    /// Plain-text table, one row per class plus a Total row and column.
    /// `label_order` places known labels first in that order.
    [[nodiscard]] std::string render(std::span<const std::string> label_order = {}) const;

    friend bool operator==(const CountTable&, const CountTable&) = default;

private:
    std::map<std::string, std::map<CountColumn, std::size_t>> cells_;
    std::set<CountColumn> columns_;
};

[[nodiscard]] CountTable summarize_counts(const SplitManifest& manifest);

/// Keeps entries whose zoom is in `zooms` (external entries carry no zoom
/// and are dropped). Throws std::domain_error for zooms outside [14, 23].
[[nodiscard]] SplitManifest filter_zoom_combination(const SplitManifest& manifest,
                                                    const std::set<int>& zooms);

/// Zoom combinations evaluated in the first construction step.
[[nodiscard]] std::vector<std::set<int>> step1_zoom_combinations(geo::ScaleInterval scale);

/// External label -> canonical label, or std::nullopt to drop the instance.
using ClassMap = std::map<std::string, std::optional<std::string>>;

/// Remaps external instances, drops DROP-mapped ones, and appends entries
/// that still carry at least one instance. Throws UnknownClassError listing
/// every external label missing from the map.
[[nodiscard]] SplitManifest merge_external(const SplitManifest& manifest,
                                           std::span<const AnnotatedImage> external,
                                           const ClassMap& class_map);

/// Removes every instance of `label`; images left empty stay as negatives.
/// Throws UnknownClassError when no instance carries the label.
[[nodiscard]] SplitManifest ablate_class(const SplitManifest& manifest, const std::string& label);

/// DOTA v1.0 label names mapped to the canonical CI labels.
[[nodiscard]] ClassMap dota_class_map();

/// DIOR labels kept for the large-scale subset (airport, train station,
/// bridge, harbour); every other DIOR class is dropped.
[[nodiscard]] ClassMap dior_class_map();

/// Reads {"label": "target" | null | "DROP"} JSON.
[[nodiscard]] ClassMap load_class_map(const std::filesystem::path& path);

/// Manifest index document: {name, step, entries[]}.
void save_manifest(const std::filesystem::path& path, const SplitManifest& manifest);
[[nodiscard]] SplitManifest load_manifest(const std::filesystem::path& path);

}  // namespace detdsci::dataset
