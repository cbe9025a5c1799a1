#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "artdet/geometry.hpp"
#include "artdet/selective_search.hpp"

namespace artdet {

// One image of a manifest. The path doubles as the image id and is resolved
// relative to the manifest's directory.
struct ImageEntry {
  std::string path;
  int width = 0;
  int height = 0;
  std::string style;                // optional image-level style
  std::vector<Annotation> boxes;    // image_id == path

  friend bool operator==(const ImageEntry&, const ImageEntry&) = default;
};

// JSON lines. An optional first line {"split": ..., "styles": [...]} names
// the split and the style vocabulary; every other line is one image:
//   {"path", "width", "height", ["style"], "boxes": [{x1,y1,x2,y2,difficult,style}]}
struct DatasetManifest {
  std::string split = "train";
  std::vector<std::string> styles;
  std::vector<ImageEntry> entries;

  // Throws DataError naming the image on any broken invariant.
  void validate() const;
  [[nodiscard]] std::vector<Annotation> annotations() const;
  [[nodiscard]] std::map<std::string, std::string> image_styles() const;
  [[nodiscard]] const ImageEntry* find(const std::string& path) const;

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

bool is_valid_split(const std::string& split);

// Errors carry `source` and the 1-based line number.
DatasetManifest parse_manifest(std::istream& in, const std::string& source);
DatasetManifest load_manifest(const std::filesystem::path& path);
std::string serialize_manifest(const DatasetManifest& m);
void save_manifest(const DatasetManifest& m, const std::filesystem::path& path);

std::filesystem::path resolve_image(const std::filesystem::path& manifest_path,
                                    const ImageEntry& entry);

// Reads a VOC-style tree (Annotations/*.xml) keeping "person" objects. Image
// paths point at JPEGImages/<filename>; a <style> element is honoured.
DatasetManifest import_voc(const std::filesystem::path& root,
                           const std::string& split);

// Proposal CSV: header x1,y1,x2,y2,priority.
void write_proposals_csv(const ProposalSet& set, const std::filesystem::path& path);
std::vector<BBox> read_proposals_csv(const std::filesystem::path& path);

// File name (without directory) used for an image's proposal CSV.
std::string proposal_file_name(const std::string& image_path);

}  // namespace artdet
