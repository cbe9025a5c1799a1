#include "artdet/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "artdet/errors.hpp"

namespace artdet {
namespace {

std::string fmt_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, res.ptr);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
  return out;
}

long long to_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw ConfigError(key + ": expected an integer, got '" + v + "'");
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

struct Entry {
  std::string section;
  std::string key;
  bool is_string;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string& name, const std::string&)> set;
};

#define STR_FIELD(sec, name, member)                                          \
  Entry{sec, name, true, [](const ExperimentConfig& c) { return c.member; },  \
        [](ExperimentConfig& c, const std::string&, const std::string& v) {   \
          c.member = v;                                                       \
        }}
#define DBL_FIELD(sec, name, member)                                          \
  Entry{sec, name, false,                                                     \
        [](const ExperimentConfig& c) { return fmt_double(c.member); },       \
        [](ExperimentConfig& c, const std::string& k, const std::string& v) { \
          c.member = to_double(k, v);                                         \
        }}
#define INT_FIELD(sec, name, member)                                          \
  Entry{sec, name, false,                                                     \
        [](const ExperimentConfig& c) { return std::to_string(c.member); },   \
        [](ExperimentConfig& c, const std::string& k, const std::string& v) { \
          c.member = static_cast<decltype(c.member)>(to_int(k, v));           \
        }}
#define BOOL_FIELD(sec, name, member)                                         \
  Entry{sec, name, false,                                                     \
        [](const ExperimentConfig& c) {                                       \
          return std::string(c.member ? "true" : "false");                    \
        },                                                                    \
        [](ExperimentConfig& c, const std::string& k, const std::string& v) { \
          c.member = to_bool(k, v);                                           \
        }}

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table{
      STR_FIELD("", "output_dir", output_dir),
      Entry{"", "seed", false,
            [](const ExperimentConfig& c) { return std::to_string(c.seed); },
            [](ExperimentConfig& c, const std::string& k, const std::string& v) {
              const long long s = to_int(k, v);
              if (s < 0) throw ConfigError(k + ": seed must be non-negative");
              c.seed = static_cast<std::uint64_t>(s);
            }},
      STR_FIELD("data", "train_manifest", train_manifest),
      STR_FIELD("data", "val_manifest", val_manifest),
      STR_FIELD("data", "trainval_manifest", trainval_manifest),
      STR_FIELD("data", "test_manifest", test_manifest),
      STR_FIELD("data", "proposals_dir", proposals_dir),
      STR_FIELD("network", "profile", profile),
      BOOL_FIELD("network", "single_cell", single_cell),
      STR_FIELD("sampling", "preset", sampling),
      INT_FIELD("sampling", "rois_per_image", rois_per_image),
      DBL_FIELD("sampling", "positive_fraction", positive_fraction),
      DBL_FIELD("train", "bbox_weight", bbox_weight),
      BOOL_FIELD("train", "add_gt_proposals", add_gt_proposals),
      BOOL_FIELD("train", "hflip", hflip),
      DBL_FIELD("sgd", "learning_rate", learning_rate),
      DBL_FIELD("sgd", "momentum", momentum),
      INT_FIELD("sgd", "iterations", iterations),
      INT_FIELD("sgd", "fixed_layers", fixed_layers),
      INT_FIELD("sgd", "lr_step", lr_step),
      DBL_FIELD("sgd", "lr_gamma", lr_gamma),
      DBL_FIELD("proposals", "k", proposals.segmentation.k),
      INT_FIELD("proposals", "min_size", proposals.segmentation.min_size),
      DBL_FIELD("proposals", "sigma", proposals.segmentation.sigma),
      Entry{"proposals", "color_space", true,
            [](const ExperimentConfig& c) { return to_string(c.proposals.color_space); },
            [](ExperimentConfig& c, const std::string&, const std::string& v) {
              c.proposals.color_space = color_space_from_string(v);
            }},
      BOOL_FIELD("proposals", "diversify", proposals.diversify),
      INT_FIELD("proposals", "min_box_size", proposals.min_box_size),
      INT_FIELD("proposals", "max_proposals", proposals.max_proposals),
      INT_FIELD("detector", "resize_shorter", detector.resize_shorter),
      DBL_FIELD("detector", "score_threshold", detector.score_threshold),
      DBL_FIELD("detector", "nms_iou", detector.nms_iou),
      INT_FIELD("detector", "max_detections", detector.max_detections),
      BOOL_FIELD("detector", "bbox_regression", detector.bbox_regression),
      Entry{"eval", "ap_mode", true,
            [](const ExperimentConfig& c) { return to_string(c.ap_mode); },
            [](ExperimentConfig& c, const std::string&, const std::string& v) {
              c.ap_mode = ap_mode_from_string(v);
            }},
  };
  return table;
}

#undef STR_FIELD
#undef DBL_FIELD
#undef INT_FIELD
#undef BOOL_FIELD

std::string dotted(const Entry& e) {
  return e.section.empty() ? e.key : e.section + "." + e.key;
}

const Entry* lookup(const std::string& name) {
  for (const auto& e : entries()) {
    if (dotted(e) == name) return &e;
  }
  return nullptr;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Returns the unquoted value and whether it was quoted; drops trailing
// comments.
std::pair<std::string, bool> parse_value(const std::string& raw,
                                         const std::string& ctx) {
  if (!raw.empty() && raw[0] == '"') {
    std::string out;
    std::size_t i = 1;
    for (; i < raw.size(); ++i) {
      if (raw[i] == '\\' && i + 1 < raw.size()) {
        out += raw[++i];
      } else if (raw[i] == '"') {
        break;
      } else {
        out += raw[i];
      }
    }
    if (i >= raw.size()) throw ConfigError(ctx + "unterminated string");
    const std::string rest = trim(raw.substr(i + 1));
    if (!rest.empty() && rest[0] != '#') {
      throw ConfigError(ctx + "unexpected text after string");
    }
    return {out, true};
  }
  const auto hash = raw.find('#');
  return {trim(raw.substr(0, hash)), false};
}

}  // namespace

void ExperimentConfig::validate() const {
  const NetworkSpec spec = network_spec();
  trainer_config().validate(spec.num_conv_layers());
  proposals.validate();
  detector.validate();
  if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
}

NetworkSpec ExperimentConfig::network_spec() const {
  NetworkSpec spec = NetworkSpec::from_profile(profile);
  if (single_cell) spec.pool = RoiPoolConfig::single_cell(spec.pool.spatial_scale);
  spec.validate();
  return spec;
}

TrainerConfig ExperimentConfig::trainer_config() const {
  TrainerConfig t;
  t.sgd.learning_rate = learning_rate;
  t.sgd.momentum = momentum;
  t.sgd.iterations = iterations;
  t.sgd.fixed_layers = fixed_layers;
  t.sgd.seed = seed;
  t.sgd.lr_step = lr_step;
  t.sgd.lr_gamma = lr_gamma;
  t.sampling = RoiSamplingConfig::preset(sampling);
  t.rois_per_image = rois_per_image;
  t.positive_fraction = positive_fraction;
  t.bbox_weight = bbox_weight;
  t.add_gt_proposals = add_gt_proposals;
  t.hflip = hflip;
  return t;
}

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string ctx = source + ":" + std::to_string(line_no) + ": ";
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t[0] == '[') {
      const auto close = t.find(']');
      if (close == std::string::npos) throw ConfigError(ctx + "unclosed section header");
      section = trim(t.substr(1, close - 1));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError(ctx + "expected key = value");
    const std::string key = trim(t.substr(0, eq));
    const std::string name = section.empty() ? key : section + "." + key;
    const Entry* e = lookup(name);
    if (e == nullptr) throw ConfigError(ctx + "unknown key '" + name + "'");
    const auto [value, quoted] = parse_value(trim(t.substr(eq + 1)), ctx);
    if (quoted != e->is_string) {
      throw ConfigError(ctx + name + (e->is_string ? ": expected a quoted string"
                                                   : ": expected an unquoted value"));
    }
    try {
      e->set(cfg, name, value);
    } catch (const ConfigError& err) {
      throw ConfigError(ctx + err.what());
    }
  }
  try {
    cfg.validate();
  } catch (const ConfigError& err) {
    throw ConfigError(source + ": " + err.what());
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::string out;
  std::string section;
  for (const auto& e : entries()) {
    if (e.section != section) {
      section = e.section;
      out += "\n[" + section + "]\n";
    }
    const std::string v = e.get(cfg);
    out += e.key + " = " + (e.is_string ? quote(v) : v) + "\n";
  }
  return out;
}

void apply_override(ExperimentConfig& cfg, const std::string& dotted_key,
                    const std::string& value) {
  const Entry* e = lookup(dotted_key);
  if (e == nullptr) throw ConfigError("unknown config key '" + dotted_key + "'");
  e->set(cfg, dotted_key, value);
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& e : entries()) out.push_back(dotted(e));
  return out;
}

}  // namespace artdet
