#include "detdsci/annotations.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <fmt/format.h>
#include "fmt_path.hpp"

#include "detdsci/dataset_json.hpp"

namespace detdsci::dataset {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;
using nlohmann::json;

namespace {

constexpr std::string_view kOrientedHint =
    "oriented boxes are not supported; pass --convert-oriented to use the axis-aligned hull";

BBox hull(std::span<const double> xs, std::span<const double> ys)
{
    const auto [x0, x1] = std::minmax_element(xs.begin(), xs.end());
    const auto [y0, y1] = std::minmax_element(ys.begin(), ys.end());
    return {*x0, *y0, *x1, *y1};
}

/// Hull of a box of size w x h centred on (cx, cy) and rotated by `angle` radians.
BBox rotated_hull(double cx, double cy, double w, double h, double angle)
{
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    std::array<double, 4> xs{};
    std::array<double, 4> ys{};
    const std::array<std::pair<double, double>, 4> corners{
        {{-w / 2, -h / 2}, {w / 2, -h / 2}, {w / 2, h / 2}, {-w / 2, h / 2}}};
    for (std::size_t i = 0; i < corners.size(); ++i) {
        const auto [dx, dy] = corners[i];
        xs[i] = cx + dx * c - dy * s;
        ys[i] = cy + dx * s + dy * c;
    }
    return hull(xs, ys);
}

void check_labels(const std::vector<AnnotatedImage>& images, const LoadOptions& options)
{
    if (options.catalog == nullptr || options.allow_unknown) {
        return;
    }
    std::set<std::string> unknown;
    for (const auto& image : images) {
        for (const auto& instance : image.instances) {
            if (!options.catalog->contains(instance.label)) {
                unknown.insert(instance.label);
            }
        }
    }
    if (!unknown.empty()) {
        throw UnknownClassError(
            fmt::format("labels outside the {} catalog (pass --allow-unknown to keep them)",
                        geo::to_string(options.catalog->scale)),
            {unknown.begin(), unknown.end()});
    }
}

void finish_image(AnnotatedImage& image, const std::string& context)
{
    try {
        validate(image);
    } catch (const ParseError& e) {
        throw ParseError(fmt::format("{}: {}", context, e.what()));
    }
}

// ---- VOC XML ----

double voc_number(const pt::ptree& node, const std::string& key, const std::string& context)
{
    const auto child = node.get_optional<std::string>(key);
    if (!child) {
        throw ParseError(fmt::format("{}: missing <{}>", context, key));
    }
    try {
        std::size_t used = 0;
        const double value = std::stod(*child, &used);
        if (used != child->size() && child->find_first_not_of(" \t\r\n", used) != std::string::npos) {
            throw std::invalid_argument("trailing characters");
        }
        return value;
    } catch (const std::exception&) {
        throw ParseError(fmt::format("{}: <{}> is not a number: '{}'", context, key, *child));
    }
}

BBox voc_oriented_box(const pt::ptree& object, const std::string& context)
{
    if (const auto rbox = object.get_child_optional("robndbox")) {
        return rotated_hull(voc_number(*rbox, "cx", context), voc_number(*rbox, "cy", context),
                            voc_number(*rbox, "w", context), voc_number(*rbox, "h", context),
                            voc_number(*rbox, "angle", context));
    }
    const pt::ptree& poly = object.get_child_optional("polygon")
                                ? object.get_child("polygon")
                                : object.get_child("bndbox");
    std::array<double, 4> xs{};
    std::array<double, 4> ys{};
    for (std::size_t i = 0; i < 4; ++i) {
        xs[i] = voc_number(poly, fmt::format("x{}", i + 1), context);
        ys[i] = voc_number(poly, fmt::format("y{}", i + 1), context);
    }
    return hull(xs, ys);
}

AnnotatedImage load_voc_file(const fs::path& file, const LoadOptions& options)
{
    pt::ptree tree;
    try {
        pt::read_xml(file.string(), tree);
    } catch (const pt::xml_parser_error& e) {
        throw ParseError(fmt::format("{}:{}: {}", file, e.line(), e.message()));
    }
    const auto root = tree.get_child_optional("annotation");
    if (!root) {
        throw ParseError(fmt::format("{}: missing <annotation> root", file));
    }
    const std::string file_context = fmt::format("{}", file);

    AnnotatedImage image;
    image.image_ref = root->get<std::string>("filename", file.stem().string());
    try {
        image.source = parse_source(root->get<std::string>("source.database", "GOOGLE_MAPS"));
    } catch (const ParseError& e) {
        throw ParseError(fmt::format("{}: <source><database>: {}", file, e.what()));
    }
    if (root->get_child_optional("zoom")) {
        const double z = voc_number(*root, "zoom", file_context);
        if (z != std::floor(z) || z < geo::ZoomLevel::kMin || z > geo::ZoomLevel::kMax) {
            throw ParseError(fmt::format("{}: <zoom> must be an integer in [0, 23]", file));
        }
        image.zoom = geo::ZoomLevel(static_cast<int>(z));
    }

    std::size_t index = 0;
    for (const auto& [tag, object] : *root) {
        if (tag != "object") {
            continue;
        }
        const std::string context = fmt::format("{}: object #{}", file, index++);
        const auto name = object.get_optional<std::string>("name");
        if (!name || name->empty()) {
            throw ParseError(fmt::format("{}: missing <name>", context));
        }
        const auto bndbox = object.get_child_optional("bndbox");
        const bool oriented = object.get_child_optional("robndbox") ||
                              object.get_child_optional("polygon") ||
                              (bndbox && bndbox->get_child_optional("x1"));
        BBox box;
        if (oriented) {
            if (!options.convert_oriented) {
                throw ParseError(fmt::format("{} ('{}'): {}", context, *name, kOrientedHint));
            }
            box = voc_oriented_box(object, context);
        } else {
            if (!bndbox) {
                throw ParseError(fmt::format("{}: missing <bndbox>", context));
            }
            box = {voc_number(*bndbox, "xmin", context), voc_number(*bndbox, "ymin", context),
                   voc_number(*bndbox, "xmax", context), voc_number(*bndbox, "ymax", context)};
        }
        image.instances.push_back({*name, box});
    }
    finish_image(image, file_context);
    return image;
}

std::vector<AnnotatedImage> load_voc(const fs::path& path, const LoadOptions& options)
{
    std::vector<fs::path> files;
    if (fs::is_directory(path)) {
        for (const auto& entry : fs::directory_iterator(path)) {
            if (entry.is_regular_file() && entry.path().extension() == ".xml") {
                files.push_back(entry.path());
            }
        }
        std::sort(files.begin(), files.end());
    } else if (fs::exists(path)) {
        files.push_back(path);
    } else {
        throw ParseError(fmt::format("{}: no such file or directory", path));
    }
    std::vector<AnnotatedImage> images;
    images.reserve(files.size());
    for (const auto& file : files) {
        images.push_back(load_voc_file(file, options));
    }
    return images;
}

void save_voc(const fs::path& dir, std::span<const AnnotatedImage> images)
{
    fs::create_directories(dir);
    for (std::size_t i = 0; i < images.size(); ++i) {
        const auto& image = images[i];
        pt::ptree root;
        root.put("filename", image.image_ref);
        root.put("source.database", std::string(to_string(image.source)));
        if (image.zoom) {
            root.put("zoom", image.zoom->value());
        }
        for (const auto& instance : image.instances) {
            pt::ptree object;
            object.put("name", instance.label);
            object.put("bndbox.xmin", fmt::format("{}", instance.bbox.x_min));
            object.put("bndbox.ymin", fmt::format("{}", instance.bbox.y_min));
            object.put("bndbox.xmax", fmt::format("{}", instance.bbox.x_max));
            object.put("bndbox.ymax", fmt::format("{}", instance.bbox.y_max));
            root.add_child("object", object);
        }
        pt::ptree tree;
        tree.add_child("annotation", root);
        const fs::path file = dir / fmt::format("{:06d}.xml", i);
        pt::write_xml(file.string(), tree, std::locale(),
                      pt::xml_writer_make_settings<std::string>(' ', 2));
    }
}

// ---- COCO JSON ----

const json& field(const json& node, const char* key, const std::string& context)
{
    const auto it = node.find(key);
    if (it == node.end()) {
        throw ParseError(fmt::format("{}: missing field '{}'", context, key));
    }
    return *it;
}

std::vector<double> numbers(const json& node, const std::string& context)
{
    if (!node.is_array()) {
        throw ParseError(fmt::format("{}: expected an array of numbers", context));
    }
    std::vector<double> out;
    for (const auto& v : node) {
        if (!v.is_number()) {
            throw ParseError(fmt::format("{}: expected an array of numbers", context));
        }
        out.push_back(v.get<double>());
    }
    return out;
}

std::vector<AnnotatedImage> load_coco(const fs::path& path, const LoadOptions& options)
{
    std::ifstream in(path);
    if (!in) {
        throw ParseError(fmt::format("{}: cannot open", path));
    }
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(fmt::format("{}: {}", path, e.what()));
    }
    const std::string file = fmt::format("{}", path);
    if (!doc.is_object()) {
        throw ParseError(file + ": top level must be an object");
    }

    std::map<std::int64_t, std::string> categories;
    if (const auto it = doc.find("categories"); it != doc.end()) {
        for (std::size_t i = 0; i < it->size(); ++i) {
            const std::string context = fmt::format("{}: categories[{}]", file, i);
            const auto& cat = (*it)[i];
            const auto& id = field(cat, "id", context);
            const auto& name = field(cat, "name", context);
            if (!id.is_number_integer() || !name.is_string()) {
                throw ParseError(context + ": 'id' must be an integer and 'name' a string");
            }
            categories[id.get<std::int64_t>()] = name.get<std::string>();
        }
    }

    std::vector<AnnotatedImage> images;
    std::map<std::int64_t, std::size_t> by_id;
    if (const auto it = doc.find("images"); it != doc.end()) {
        for (std::size_t i = 0; i < it->size(); ++i) {
            const std::string context = fmt::format("{}: images[{}]", file, i);
            const auto& node = (*it)[i];
            const auto& id = field(node, "id", context);
            const auto& name = field(node, "file_name", context);
            if (!id.is_number_integer() || !name.is_string()) {
                throw ParseError(context + ": 'id' must be an integer and 'file_name' a string");
            }
            AnnotatedImage image;
            image.image_ref = name.get<std::string>();
            if (const auto s = node.find("source"); s != node.end() && !s->is_null()) {
                try {
                    image.source = parse_source(s->get<std::string>());
                } catch (const std::exception& e) {
                    throw ParseError(fmt::format("{}: 'source': {}", context, e.what()));
                }
            }
            if (const auto z = node.find("zoom"); z != node.end() && !z->is_null()) {
                if (!z->is_number_integer()) {
                    throw ParseError(context + ": 'zoom' must be an integer");
                }
                try {
                    image.zoom = geo::ZoomLevel(z->get<int>());
                } catch (const std::domain_error& e) {
                    throw ParseError(fmt::format("{}: {}", context, e.what()));
                }
            }
            if (!by_id.emplace(id.get<std::int64_t>(), images.size()).second) {
                throw ParseError(context + ": duplicate image id");
            }
            images.push_back(std::move(image));
        }
    }

    if (const auto it = doc.find("annotations"); it != doc.end()) {
        for (std::size_t i = 0; i < it->size(); ++i) {
            const std::string context = fmt::format("{}: annotations[{}]", file, i);
            const auto& node = (*it)[i];
            const auto image_id = field(node, "image_id", context).get<std::int64_t>();
            const auto category_id = field(node, "category_id", context).get<std::int64_t>();
            const auto image = by_id.find(image_id);
            if (image == by_id.end()) {
                throw ParseError(fmt::format("{}: unknown image_id {}", context, image_id));
            }
            const auto category = categories.find(category_id);
            if (category == categories.end()) {
                throw ParseError(fmt::format("{}: unknown category_id {}", context, category_id));
            }
            const auto bbox = numbers(field(node, "bbox", context), context + ".bbox");
            const bool oriented = bbox.size() == 5 || node.contains("poly");
            BBox box;
            if (oriented) {
                if (!options.convert_oriented) {
                    throw ParseError(
                        fmt::format("{} ('{}'): {}", context, category->second, kOrientedHint));
                }
                if (const auto poly = node.find("poly"); poly != node.end()) {
                    const auto p = numbers(*poly, context + ".poly");
                    if (p.size() < 6 || p.size() % 2 != 0) {
                        throw ParseError(context + ".poly: expected x,y pairs");
                    }
                    std::vector<double> xs;
                    std::vector<double> ys;
                    for (std::size_t k = 0; k < p.size(); k += 2) {
                        xs.push_back(p[k]);
                        ys.push_back(p[k + 1]);
                    }
                    box = hull(xs, ys);
                } else {
                    box = rotated_hull(bbox[0], bbox[1], bbox[2], bbox[3], bbox[4]);
                }
            } else {
                if (bbox.size() != 4) {
                    throw ParseError(context + ".bbox: expected [x, y, w, h]");
                }
                box = {bbox[0], bbox[1], bbox[0] + bbox[2], bbox[1] + bbox[3]};
            }
            images[image->second].instances.push_back({category->second, box});
        }
    }

    for (std::size_t i = 0; i < images.size(); ++i) {
        finish_image(images[i], fmt::format("{}: images[{}]", file, i));
    }
    return images;
}

void save_coco(const fs::path& path, std::span<const AnnotatedImage> images,
               const ClassCatalog* catalog)
{
    std::vector<std::string> order;
    if (catalog != nullptr) {
        order = catalog->labels();
    }
    std::set<std::string> rest;
    for (const auto& image : images) {
        for (const auto& instance : image.instances) {
            if (std::find(order.begin(), order.end(), instance.label) == order.end()) {
                rest.insert(instance.label);
            }
        }
    }
    order.insert(order.end(), rest.begin(), rest.end());
    std::map<std::string, int> ids;
    json categories = json::array();
    for (std::size_t i = 0; i < order.size(); ++i) {
        ids[order[i]] = static_cast<int>(i) + 1;
        categories.push_back({{"id", i + 1}, {"name", order[i]}});
    }

    json jimages = json::array();
    json annotations = json::array();
    std::size_t ann_id = 1;
    for (std::size_t i = 0; i < images.size(); ++i) {
        const auto& image = images[i];
        json node{{"id", i + 1},
                  {"file_name", image.image_ref},
                  {"source", to_string(image.source)},
                  {"zoom", image.zoom ? json(image.zoom->value()) : json(nullptr)}};
        jimages.push_back(std::move(node));
        for (const auto& instance : image.instances) {
            const auto& b = instance.bbox;
            annotations.push_back({{"id", ann_id++},
                                   {"image_id", i + 1},
                                   {"category_id", ids.at(instance.label)},
                                   {"bbox", {b.x_min, b.y_min, b.width(), b.height()}},
                                   {"area", b.area()},
                                   {"iscrowd", 0}});
        }
    }
    const json doc{{"images", jimages}, {"annotations", annotations}, {"categories", categories}};
    std::ofstream out(path);
    out << doc.dump(2) << '\n';
    if (!out) {
        throw Error(fmt::format("cannot write {}", path));
    }
}

}  // namespace

std::vector<AnnotatedImage> load_annotations(const fs::path& path, AnnotationFormat format,
                                             const LoadOptions& options)
{
    std::vector<AnnotatedImage> images;
    try {
        images = format == AnnotationFormat::VocXml ? load_voc(path, options)
                                                    : load_coco(path, options);
    } catch (const json::exception& e) {
        throw ParseError(fmt::format("{}: {}", path, e.what()));
    }
    check_labels(images, options);
    return images;
}

void save_annotations(const fs::path& path, AnnotationFormat format,
                      std::span<const AnnotatedImage> images, const ClassCatalog* catalog)
{
    if (format == AnnotationFormat::VocXml) {
        save_voc(path, images);
    } else {
        save_coco(path, images, catalog);
    }
}

AnnotationFormat parse_annotation_format(std::string_view text)
{
    if (text == "voc" || text == "VOC_XML") {
        return AnnotationFormat::VocXml;
    }
    if (text == "coco" || text == "COCO_JSON") {
        return AnnotationFormat::CocoJson;
    }
    throw ParseError(fmt::format("unknown annotation format '{}' (expected voc or coco)", text));
}

// ---- manifest JSON ----

json image_to_json(const AnnotatedImage& image)
{
    json instances = json::array();
    for (const auto& instance : image.instances) {
        const auto& b = instance.bbox;
        instances.push_back({{"label", instance.label}, {"bbox", {b.x_min, b.y_min, b.x_max, b.y_max}}});
    }
    return {{"image_ref", image.image_ref},
            {"zoom", image.zoom ? json(image.zoom->value()) : json(nullptr)},
            {"source", to_string(image.source)},
            {"instances", std::move(instances)}};
}

AnnotatedImage image_from_json(const json& doc)
{
    const std::string context = "manifest entry";
    AnnotatedImage image;
    image.image_ref = field(doc, "image_ref", context).get<std::string>();
    const std::string ref_context = fmt::format("entry '{}'", image.image_ref);
    if (const auto& z = field(doc, "zoom", ref_context); !z.is_null()) {
        try {
            image.zoom = geo::ZoomLevel(z.get<int>());
        } catch (const std::domain_error& e) {
            throw ParseError(fmt::format("{}: {}", ref_context, e.what()));
        }
    }
    image.source = parse_source(field(doc, "source", ref_context).get<std::string>());
    for (const auto& node : field(doc, "instances", ref_context)) {
        const auto b = numbers(field(node, "bbox", ref_context), ref_context + ".bbox");
        if (b.size() != 4) {
            throw ParseError(ref_context + ": bbox must be [x_min, y_min, x_max, y_max]");
        }
        image.instances.push_back(
            {field(node, "label", ref_context).get<std::string>(), {b[0], b[1], b[2], b[3]}});
    }
    validate(image);
    return image;
}

json manifest_to_json(const SplitManifest& manifest)
{
    json entries = json::array();
    for (const auto& entry : manifest.entries) {
        entries.push_back(image_to_json(entry));
    }
    return {{"name", manifest.name}, {"step", manifest.step}, {"entries", std::move(entries)}};
}

SplitManifest manifest_from_json(const json& doc)
{
    SplitManifest manifest;
    manifest.name = field(doc, "name", "manifest").get<std::string>();
    manifest.step = field(doc, "step", "manifest").get<int>();
    validate_manifest_name(manifest.name, manifest.step);
    for (const auto& entry : field(doc, "entries", "manifest")) {
        manifest.entries.push_back(image_from_json(entry));
    }
    return manifest;
}

}  // namespace detdsci::dataset
