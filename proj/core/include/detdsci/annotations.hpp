#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "detdsci/dataset.hpp"

namespace detdsci::dataset {

enum class AnnotationFormat { VocXml, CocoJson };

struct LoadOptions {
    /// Labels are checked against this catalog when set.
    const ClassCatalog* catalog = nullptr;
    bool allow_unknown = false;
    /// Replace oriented boxes by their axis-aligned hull instead of rejecting them.
    bool convert_oriented = false;
};

/// VOC_XML: `path` is a directory of per-image .xml files (read in name
/// order) or a single .xml file. COCO_JSON: `path` is one JSON document.
/// Throws ParseError with file/line or field context, UnknownClassError
/// listing every offending label.
[[nodiscard]] std::vector<AnnotatedImage> load_annotations(const std::filesystem::path& path,
                                                           AnnotationFormat format,
                                                           const LoadOptions& options = {});

/// VOC_XML writes `<index>.xml` files into directory `path`; COCO_JSON writes
/// one document. Category ids are assigned from `catalog` order first, then
/// the remaining labels sorted, starting at 1.
void save_annotations(const std::filesystem::path& path, AnnotationFormat format,
                      std::span<const AnnotatedImage> images, const ClassCatalog* catalog = nullptr);

/// Parses "voc" / "coco". Throws ParseError.
[[nodiscard]] AnnotationFormat parse_annotation_format(std::string_view text);

}  // namespace detdsci::dataset
