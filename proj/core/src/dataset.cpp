#include "detdsci/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <regex>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include "fmt_path.hpp"
#include <nlohmann/json.hpp>

#include "detdsci/dataset_json.hpp"

namespace detdsci::dataset {

using nlohmann::json;

std::string_view to_string(Source source) noexcept
{
    switch (source) {
    case Source::Dota:
        return "DOTA";
    case Source::Dior:
        return "DIOR";
    case Source::GoogleMaps:
        break;
    }
    return "GOOGLE_MAPS";
}

Source parse_source(std::string_view text)
{
    if (text == "GOOGLE_MAPS") {
        return Source::GoogleMaps;
    }
    if (text == "DOTA") {
        return Source::Dota;
    }
    if (text == "DIOR") {
        return Source::Dior;
    }
    throw ParseError(fmt::format("unknown image source '{}'", text));
}

void validate(const AnnotatedImage& image)
{
    if (image.source == Source::GoogleMaps) {
        if (!image.zoom || image.zoom->value() < geo::kFirstRoutedZoom ||
            image.zoom->value() > geo::kLastRoutedZoom) {
            throw ParseError(fmt::format("image '{}': GOOGLE_MAPS imagery needs a zoom in [14, 23]",
                                         image.image_ref));
        }
    }
    for (const auto& instance : image.instances) {
        if (!instance.bbox.valid()) {
            throw ParseError(fmt::format("image '{}': degenerate box for '{}'", image.image_ref,
                                         instance.label));
        }
    }
}

UnknownClassError::UnknownClassError(const std::string& what, std::vector<std::string> labels)
    : Error(fmt::format("{}: {}", what, fmt::join(labels, ", "))), labels_(std::move(labels))
{
}

bool ClassCatalog::contains(std::string_view label) const
{
    return is_detection_class(label) ||
           std::find(training_only_classes.begin(), training_only_classes.end(), label) !=
               training_only_classes.end();
}

bool ClassCatalog::is_detection_class(std::string_view label) const
{
    return std::find(detection_classes.begin(), detection_classes.end(), label) !=
           detection_classes.end();
}

std::vector<std::string> ClassCatalog::labels() const
{
    auto out = detection_classes;
    out.insert(out.end(), training_only_classes.begin(), training_only_classes.end());
    return out;
}

std::string_view to_string(Stage stage) noexcept
{
    switch (stage) {
    case Stage::Alpha:
        return "alpha";
    case Stage::Beta:
        return "beta";
    case Stage::Stable:
        break;
    }
    return "stable";
}

ClassCatalog catalog(geo::ScaleInterval scale, Stage stage)
{
    if (scale == geo::ScaleInterval::Large) {
        return {scale,
                {"airport", "bridge", "harbour", "industrial area", "motorway", "train station"},
                {}};
    }
    ClassCatalog small{scale,
                       {"electrical substation", "bridge", "plane", "harbour", "storage tank",
                        "helicopter"},
                       {}};
    if (stage == Stage::Alpha) {
        return small;
    }
    small.training_only_classes = {"tennis court",      "baseball diamond", "ground track field",
                                   "basketball court",  "soccer ball field", "roundabout",
                                   "swimming pool"};
    if (stage == Stage::Beta) {
        for (const char* label : {"small vehicle", "large vehicle", "ship"}) {
            small.training_only_classes.emplace_back(label);
        }
    }
    return small;
}

ManifestName parse_manifest_name(std::string_view name)
{
    static const std::regex kGrammar(R"(CI-(SS|LS)_(train|test)_(alpha|beta|stable))");
    std::match_results<std::string_view::const_iterator> m;
    if (!std::regex_match(name.begin(), name.end(), m, kGrammar)) {
        throw ParseError(fmt::format(
            "manifest name '{}' does not match CI-(SS|LS)_(train|test)_(alpha|beta|stable)", name));
    }
    ManifestName out{m[1] == "SS" ? geo::ScaleInterval::Small : geo::ScaleInterval::Large,
                     m[2] == "train" ? Split::Train : Split::Test, Stage::Alpha};
    if (m[3] == "beta") {
        out.stage = Stage::Beta;
    } else if (m[3] == "stable") {
        out.stage = Stage::Stable;
    }
    return out;
}

std::set<int> steps_for(const ManifestName& name)
{
    // Training sets advance one stage per step; the stable test set is
    // shared by steps 2 and 3 and there is no beta test set.
    if (name.split == Split::Train) {
        return {static_cast<int>(name.stage) + 1};
    }
    switch (name.stage) {
    case Stage::Alpha:
        return {1};
    case Stage::Stable:
        return {2, 3};
    case Stage::Beta:
        break;
    }
    return {};
}

void validate_manifest_name(std::string_view name, int step)
{
    const auto steps = steps_for(parse_manifest_name(name));
    if (!steps.contains(step)) {
        throw ParseError(fmt::format("manifest '{}' does not belong to construction step {}", name, step));
    }
}

SplitManifest make_manifest(std::string name, int step, std::vector<AnnotatedImage> entries)
{
    validate_manifest_name(name, step);
    return {std::move(name), step, std::move(entries)};
}

std::string CountColumn::header() const
{
    if (source == Source::GoogleMaps) {
        return zoom ? std::to_string(*zoom) : "?";
    }
    return std::string(to_string(source));
}

void CountTable::add(const std::string& label, const CountColumn& column, std::size_t count)
{
    cells_[label][column] += count;
    columns_.insert(column);
}

std::size_t CountTable::at(const std::string& label, const CountColumn& column) const
{
    const auto row = cells_.find(label);
    if (row == cells_.end()) {
        return 0;
    }
    const auto cell = row->second.find(column);
    return cell == row->second.end() ? 0 : cell->second;
}

std::size_t CountTable::row_total(const std::string& label) const
{
    const auto row = cells_.find(label);
    if (row == cells_.end()) {
        return 0;
    }
    std::size_t sum = 0;
    for (const auto& [column, count] : row->second) {
        sum += count;
    }
    return sum;
}

std::size_t CountTable::column_total(const CountColumn& column) const
{
    std::size_t sum = 0;
    for (const auto& [label, row] : cells_) {
        if (const auto it = row.find(column); it != row.end()) {
            sum += it->second;
        }
    }
    return sum;
}

std::size_t CountTable::total() const
{
    std::size_t sum = 0;
    for (const auto& [label, row] : cells_) {
        sum += row_total(label);
    }
    return sum;
}

std::vector<std::string> CountTable::labels() const
{
    std::vector<std::string> out;
    out.reserve(cells_.size());
    for (const auto& [label, row] : cells_) {
        out.push_back(label);
    }
    return out;
}

std::vector<CountColumn> CountTable::columns() const
{
    return {columns_.begin(), columns_.end()};
}

std::string CountTable::render(std::span<const std::string> label_order) const
{
    std::vector<std::string> rows;
    for (const auto& label : label_order) {
        if (cells_.contains(label)) {
            rows.push_back(label);
        }
    }
    for (const auto& label : labels()) {
        if (std::find(rows.begin(), rows.end(), label) == rows.end()) {
            rows.push_back(label);
        }
    }

    std::size_t label_width = 5;
    for (const auto& r : rows) {
        label_width = std::max(label_width, r.size());
    }
    std::string out = fmt::format("{:<{}}", "Class", label_width);
    for (const auto& column : columns_) {
        out += fmt::format(" {:>8}", column.header());
    }
    out += fmt::format(" {:>8}\n", "Total");
    for (const auto& label : rows) {
        out += fmt::format("{:<{}}", label, label_width);
        for (const auto& column : columns_) {
            out += fmt::format(" {:>8}", at(label, column));
        }
        out += fmt::format(" {:>8}\n", row_total(label));
    }
    out += fmt::format("{:<{}}", "Total", label_width);
    for (const auto& column : columns_) {
        out += fmt::format(" {:>8}", column_total(column));
    }
    out += fmt::format(" {:>8}\n", total());
    return out;
}

CountTable summarize_counts(const SplitManifest& manifest)
{
    CountTable table;
    for (const auto& entry : manifest.entries) {
        CountColumn column{entry.source, std::nullopt};
        if (entry.source == Source::GoogleMaps && entry.zoom) {
            column.zoom = entry.zoom->value();
        }
        for (const auto& instance : entry.instances) {
            table.add(instance.label, column);
        }
    }
    return table;
}

SplitManifest filter_zoom_combination(const SplitManifest& manifest, const std::set<int>& zooms)
{
    for (const int z : zooms) {
        if (z < geo::kFirstRoutedZoom || z > geo::kLastRoutedZoom) {
            throw std::domain_error(fmt::format("zoom {} outside [14, 23]", z));
        }
    }
    SplitManifest out{manifest.name, manifest.step, {}};
    for (const auto& entry : manifest.entries) {
        if (entry.zoom && zooms.contains(entry.zoom->value())) {
            out.entries.push_back(entry);
        }
    }
    return out;
}

std::vector<std::set<int>> step1_zoom_combinations(geo::ScaleInterval scale)
{
    if (scale == geo::ScaleInterval::Large) {
        return {{14, 15, 16, 17}, {14, 15, 16}, {15, 16, 17}, {15, 16}};
    }
    return {{18, 19, 20, 21, 22, 23}, {19, 20, 21, 22, 23}, {18, 19, 20, 21, 22},
            {20, 21, 22, 23},         {19, 20, 21, 22},     {21, 22, 23},
            {20, 21, 22},             {21, 22}};
}

SplitManifest merge_external(const SplitManifest& manifest, std::span<const AnnotatedImage> external,
                             const ClassMap& class_map)
{
    std::set<std::string> unmapped;
    for (const auto& image : external) {
        for (const auto& instance : image.instances) {
            if (!class_map.contains(instance.label)) {
                unmapped.insert(instance.label);
            }
        }
    }
    if (!unmapped.empty()) {
        throw UnknownClassError("external labels missing from the class map",
                                {unmapped.begin(), unmapped.end()});
    }

    SplitManifest out = manifest;
    for (const auto& image : external) {
        AnnotatedImage remapped{image.image_ref, image.zoom, {}, image.source};
        for (const auto& instance : image.instances) {
            if (const auto& target = class_map.at(instance.label)) {
                remapped.instances.push_back({*target, instance.bbox});
            }
        }
        if (!remapped.instances.empty()) {
            out.entries.push_back(std::move(remapped));
        }
    }
    return out;
}

SplitManifest ablate_class(const SplitManifest& manifest, const std::string& label)
{
    SplitManifest out = manifest;
    std::size_t removed = 0;
    for (auto& entry : out.entries) {
        removed += static_cast<std::size_t>(std::erase_if(
            entry.instances, [&label](const Instance& i) { return i.label == label; }));
    }
    if (removed == 0) {
        throw UnknownClassError("cannot ablate a class absent from the manifest", {label});
    }
    return out;
}

ClassMap dota_class_map()
{
    return {
        {"plane", "plane"},
        {"ship", "ship"},
        {"storage-tank", "storage tank"},
        {"baseball-diamond", "baseball diamond"},
        {"tennis-court", "tennis court"},
        {"basketball-court", "basketball court"},
        {"ground-track-field", "ground track field"},
        {"harbor", "harbour"},
        {"bridge", "bridge"},
        {"large-vehicle", "large vehicle"},
        {"small-vehicle", "small vehicle"},
        {"helicopter", "helicopter"},
        {"roundabout", "roundabout"},
        {"soccer-ball-field", "soccer ball field"},
        {"swimming-pool", "swimming pool"},
        {"container-crane", std::nullopt},
    };
}

ClassMap dior_class_map()
{
    ClassMap map;
    for (const char* dropped :
         {"airplane", "baseballfield", "basketballcourt", "chimney", "dam", "Expressway-Service-area",
          "Expressway-toll-station", "golffield", "groundtrackfield", "overpass", "ship", "stadium",
          "storagetank", "tenniscourt", "vehicle", "windmill"}) {
        map.emplace(dropped, std::nullopt);
    }
    map.emplace("airport", "airport");
    map.emplace("trainstation", "train station");
    map.emplace("bridge", "bridge");
    map.emplace("harbor", "harbour");
    return map;
}

ClassMap load_class_map(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ParseError(fmt::format("cannot open class map {}", path));
    }
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(fmt::format("{}: {}", path, e.what()));
    }
    if (!doc.is_object()) {
        throw ParseError(fmt::format("{}: class map must be a JSON object", path));
    }
    ClassMap map;
    for (const auto& [from, to] : doc.items()) {
        if (to.is_null() || (to.is_string() && to.get<std::string>() == "DROP")) {
            map.emplace(from, std::nullopt);
        } else if (to.is_string()) {
            map.emplace(from, to.get<std::string>());
        } else {
            throw ParseError(fmt::format("{}: class map value for '{}' must be a string or null", path, from));
        }
    }
    return map;
}

void save_manifest(const std::filesystem::path& path, const SplitManifest& manifest)
{
    validate_manifest_name(manifest.name, manifest.step);
    std::ofstream out(path);
    out << manifest_to_json(manifest).dump(2) << '\n';
    if (!out) {
        throw Error(fmt::format("cannot write manifest {}", path));
    }
}

SplitManifest load_manifest(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ParseError(fmt::format("cannot open manifest {}", path));
    }
    try {
        return manifest_from_json(json::parse(in));
    } catch (const json::exception& e) {
        throw ParseError(fmt::format("{}: {}", path, e.what()));
    } catch (const ParseError& e) {
        throw ParseError(fmt::format("{}: {}", path, e.what()));
    }
}

}  // namespace detdsci::dataset
