#include "artdet/dataset.hpp"

#include <algorithm>
#include <climits>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <type_traits>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <nlohmann/json.hpp>

#include "artdet/errors.hpp"

namespace artdet {
namespace {

using ojson = nlohmann::ordered_json;

std::string where(const std::string& source, int line) {
  return source + ":" + std::to_string(line) + ": ";
}

template <typename T>
T field(const nlohmann::json& j, const char* key, const std::string& ctx) {
  if (!j.contains(key)) throw DataError(ctx + "missing field '" + key + "'");
  if constexpr (std::is_same_v<T, int>) {
    const auto& v = j.at(key);
    if (!v.is_number_integer() ||
        (v.is_number_unsigned() ? v.get<std::uint64_t>() > INT_MAX
                                : v.get<std::int64_t>() < INT_MIN ||
                                      v.get<std::int64_t>() > INT_MAX)) {
      throw DataError(ctx + "field '" + key + "' must be a 32-bit integer");
    }
  }
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw DataError(ctx + "field '" + key + "' has the wrong type");
  }
}

std::string csv_number(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

bool is_valid_split(const std::string& split) {
  return split == "train" || split == "val" || split == "trainval" ||
         split == "test";
}

void DatasetManifest::validate() const {
  if (!is_valid_split(split)) {
    throw DataError("manifest split '" + split +
                    "' is not one of train, val, trainval, test");
  }
  const std::set<std::string> vocab(styles.begin(), styles.end());
  std::set<std::string> seen;
  for (const ImageEntry& e : entries) {
    if (e.path.empty()) throw DataError("manifest entry with empty path");
    if (!seen.insert(e.path).second) {
      throw DataError("image '" + e.path + "' listed twice");
    }
    if (e.width <= 0 || e.height <= 0) {
      throw DataError("image '" + e.path + "' has non-positive size");
    }
    if (!e.style.empty() && !vocab.contains(e.style)) {
      throw DataError("image '" + e.path + "' has style '" + e.style +
                      "' outside the vocabulary");
    }
    for (const Annotation& a : e.boxes) {
      if (a.image_id != e.path) {
        throw DataError("image '" + e.path + "' holds a box for another image");
      }
      if (!a.box.valid()) {
        throw DataError("image '" + e.path + "' has a box with x2<=x1 or y2<=y1");
      }
      if (a.box.x1 < 0 || a.box.y1 < 0 || a.box.x2 > e.width ||
          a.box.y2 > e.height) {
        throw DataError("image '" + e.path + "' has a box outside the image");
      }
      if (!a.style.empty() && !vocab.contains(a.style)) {
        throw DataError("image '" + e.path + "' has a box with style '" +
                        a.style + "' outside the vocabulary");
      }
    }
  }
}

std::vector<Annotation> DatasetManifest::annotations() const {
  std::vector<Annotation> out;
  for (const auto& e : entries) out.insert(out.end(), e.boxes.begin(), e.boxes.end());
  return out;
}

std::map<std::string, std::string> DatasetManifest::image_styles() const {
  std::map<std::string, std::string> out;
  for (const auto& e : entries) {
    if (!e.style.empty()) out[e.path] = e.style;
  }
  return out;
}

const ImageEntry* DatasetManifest::find(const std::string& path) const {
  for (const auto& e : entries) {
    if (e.path == path) return &e;
  }
  return nullptr;
}

DatasetManifest parse_manifest(std::istream& in, const std::string& source) {
  DatasetManifest m;
  bool have_header = false;
  bool vocab_from_header = false;
  std::string text;
  int line_no = 0;
  while (std::getline(in, text)) {
    ++line_no;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string ctx = where(source, line_no);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(ctx + "malformed JSON (" + e.what() + ")");
    }
    if (!j.is_object()) throw DataError(ctx + "expected a JSON object");

    if (!j.contains("path")) {
      if (have_header || !m.entries.empty()) {
        throw DataError(ctx + "header line must come first and only once");
      }
      have_header = true;
      if (j.contains("split")) m.split = field<std::string>(j, "split", ctx);
      if (j.contains("styles")) {
        m.styles = field<std::vector<std::string>>(j, "styles", ctx);
        vocab_from_header = true;
      }
      continue;
    }

    ImageEntry e;
    e.path = field<std::string>(j, "path", ctx);
    e.width = field<int>(j, "width", ctx);
    e.height = field<int>(j, "height", ctx);
    if (j.contains("style")) e.style = field<std::string>(j, "style", ctx);
    if (j.contains("boxes")) {
      const auto& boxes = j.at("boxes");
      if (!boxes.is_array()) throw DataError(ctx + "'boxes' must be an array");
      for (const auto& b : boxes) {
        if (!b.is_object()) throw DataError(ctx + "box must be an object");
        Annotation a;
        a.image_id = e.path;
        a.box = {field<double>(b, "x1", ctx), field<double>(b, "y1", ctx),
                 field<double>(b, "x2", ctx), field<double>(b, "y2", ctx)};
        if (b.contains("difficult")) a.difficult = field<bool>(b, "difficult", ctx);
        if (b.contains("style")) a.style = field<std::string>(b, "style", ctx);
        e.boxes.push_back(std::move(a));
      }
    }
    m.entries.push_back(std::move(e));
  }
  if (!vocab_from_header) {
    std::set<std::string> vocab;
    for (const auto& e : m.entries) {
      if (!e.style.empty()) vocab.insert(e.style);
      for (const auto& a : e.boxes) {
        if (!a.style.empty()) vocab.insert(a.style);
      }
    }
    m.styles.assign(vocab.begin(), vocab.end());
  }
  try {
    m.validate();
  } catch (const DataError& err) {
    throw DataError(source + ": " + err.what());
  }
  return m;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  return parse_manifest(in, path.string());
}

std::string serialize_manifest(const DatasetManifest& m) {
  std::string out;
  ojson header;
  header["split"] = m.split;
  header["styles"] = m.styles;
  out += header.dump() + "\n";
  for (const auto& e : m.entries) {
    ojson j;
    j["path"] = e.path;
    j["width"] = e.width;
    j["height"] = e.height;
    if (!e.style.empty()) j["style"] = e.style;
    j["boxes"] = ojson::array();
    for (const auto& a : e.boxes) {
      ojson b;
      b["x1"] = a.box.x1;
      b["y1"] = a.box.y1;
      b["x2"] = a.box.x2;
      b["y2"] = a.box.y2;
      b["difficult"] = a.difficult;
      b["style"] = a.style;
      j["boxes"].push_back(std::move(b));
    }
    out += j.dump() + "\n";
  }
  return out;
}

void save_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
  m.validate();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write manifest " + path.string());
  out << serialize_manifest(m);
}

std::filesystem::path resolve_image(const std::filesystem::path& manifest_path,
                                    const ImageEntry& entry) {
  const std::filesystem::path p(entry.path);
  if (p.is_absolute()) return p;
  return manifest_path.parent_path() / p;
}

DatasetManifest import_voc(const std::filesystem::path& root,
                           const std::string& split) {
  namespace pt = boost::property_tree;
  const auto ann_dir = root / "Annotations";
  if (!std::filesystem::is_directory(ann_dir)) {
    throw DataError("no Annotations directory under " + root.string());
  }
  std::vector<std::filesystem::path> files;
  for (const auto& f : std::filesystem::directory_iterator(ann_dir)) {
    if (f.path().extension() == ".xml") files.push_back(f.path());
  }
  std::sort(files.begin(), files.end());

  DatasetManifest m;
  m.split = split;
  std::set<std::string> vocab;
  for (const auto& file : files) {
    pt::ptree tree;
    try {
      pt::read_xml(file.string(), tree);
    } catch (const pt::xml_parser_error& e) {
      throw DataError("cannot parse " + file.string() + ": " + e.what());
    }
    ImageEntry e;
    try {
      const pt::ptree& ann = tree.get_child("annotation");
      e.path = "JPEGImages/" + ann.get<std::string>("filename");
      e.width = ann.get<int>("size.width", 0);
      e.height = ann.get<int>("size.height", 0);
      e.style = ann.get<std::string>("style", "");
      if (!e.style.empty()) vocab.insert(e.style);
      for (const auto& [tag, obj] : ann) {
        if (tag != "object" || obj.get<std::string>("name", "") != "person") continue;
        Annotation a;
        a.image_id = e.path;
        // VOC pixel indices are 1-based and inclusive.
        a.box = {obj.get<double>("bndbox.xmin") - 1, obj.get<double>("bndbox.ymin") - 1,
                 obj.get<double>("bndbox.xmax"), obj.get<double>("bndbox.ymax")};
        a.difficult = obj.get<int>("difficult", 0) != 0;
        a.style = obj.get<std::string>("style", e.style);
        if (!a.style.empty()) vocab.insert(a.style);
        e.boxes.push_back(std::move(a));
      }
    } catch (const pt::ptree_error& err) {
      throw DataError(file.string() + ": " + err.what());
    }
    m.entries.push_back(std::move(e));
  }
  m.styles.assign(vocab.begin(), vocab.end());
  m.validate();
  return m;
}

void write_proposals_csv(const ProposalSet& set, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "x1,y1,x2,y2,priority\n";
  for (const auto& p : set.proposals) {
    out << csv_number(p.box.x1) << ',' << csv_number(p.box.y1) << ','
        << csv_number(p.box.x2) << ',' << csv_number(p.box.y2) << ','
        << p.priority << '\n';
  }
}

std::vector<BBox> read_proposals_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open proposals " + path.string());
  std::string line;
  std::getline(in, line);
  std::vector<BBox> out;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    BBox b;
    char c1, c2, c3;
    if (!(ss >> b.x1 >> c1 >> b.y1 >> c2 >> b.x2 >> c3 >> b.y2) || c1 != ',' ||
        c2 != ',' || c3 != ',') {
      throw DataError(where(path.string(), line_no) + "malformed proposal row");
    }
    out.push_back(b);
  }
  return out;
}

std::string proposal_file_name(const std::string& image_path) {
  std::string name = image_path;
  std::replace(name.begin(), name.end(), '/', '_');
  const auto dot = name.rfind('.');
  if (dot != std::string::npos) name.resize(dot);
  return name + ".csv";
}

}  // namespace artdet
