#include "artdet/report.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "artdet/errors.hpp"

namespace artdet {
namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_number(const std::string& s, const std::string& ctx) {
  double v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw DataError(ctx + "bad number '" + s + "'");
  }
  return v;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

void write_detections_csv(std::span<const Detection> dets,
                          const std::filesystem::path& path) {
  std::string s = "image_id,x1,y1,x2,y2,score\n";
  for (const auto& d : dets) {
    if (d.image_id.find(',') != std::string::npos) {
      throw DataError("image id '" + d.image_id + "' contains a comma");
    }
    s += d.image_id + ',' + format_number(d.box.x1) + ',' + format_number(d.box.y1) +
         ',' + format_number(d.box.x2) + ',' + format_number(d.box.y2) + ',' +
         format_number(d.score) + '\n';
  }
  write_text(path, s);
}

std::vector<Detection> read_detections_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open detections " + path.string());
  std::string line;
  if (!std::getline(in, line)) return {};
  if (split_csv(line) != std::vector<std::string>{"image_id", "x1", "y1", "x2", "y2", "score"}) {
    throw DataError(path.string() + ":1: expected header image_id,x1,y1,x2,y2,score");
  }
  std::vector<Detection> out;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::string ctx = path.string() + ":" + std::to_string(line_no) + ": ";
    const auto f = split_csv(line);
    if (f.size() != 6) throw DataError(ctx + "expected 6 columns");
    Detection d;
    d.image_id = f[0];
    d.box = {parse_number(f[1], ctx), parse_number(f[2], ctx),
             parse_number(f[3], ctx), parse_number(f[4], ctx)};
    d.score = parse_number(f[5], ctx);
    if (!d.box.valid()) throw DataError(ctx + "degenerate box");
    out.push_back(std::move(d));
  }
  return out;
}

std::string report_to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["ap"] = r.ap;
  j["ap_mode"] = to_string(r.mode);
  j["num_gt"] = r.num_gt;
  j["num_detections"] = r.num_detections;
  j["num_ignored"] = r.num_ignored;
  j["counts"] = {{"D", r.counts_at}, {"Cor", r.cor}, {"Loc", r.loc}, {"BG", r.bg}};
  auto& curve = j["pr_curve"] = nlohmann::ordered_json::array();
  for (const auto& p : r.curve) curve.push_back({p.recall, p.precision});
  auto& trend = j["trend"] = nlohmann::ordered_json::array();
  for (const auto& t : r.trend) {
    trend.push_back({{"D", t.requested}, {"used", t.used}, {"truncated", t.truncated},
                     {"Cor", t.cor}, {"Loc", t.loc}, {"BG", t.bg}});
  }
  auto& styles = j["per_style"] = nlohmann::ordered_json::array();
  for (const auto& s : r.per_style.styles) {
    styles.push_back({{"style", s.style}, {"num_gt", s.num_gt},
                      {"num_detections", s.num_detections}, {"ap", s.ap}});
  }
  j["notices"] = r.per_style.notices;
  if (r.proposal_recall) {
    j["proposal_recall"] = *r.proposal_recall;
  } else {
    j["proposal_recall"] = nullptr;
  }
  return j.dump(2) + "\n";
}

std::string pr_curve_csv(const EvalReport& r) {
  std::string s = "recall,precision,score\n";
  for (const auto& p : r.curve) {
    s += format_number(p.recall) + ',' + format_number(p.precision) + ',' +
         format_number(p.score) + '\n';
  }
  return s;
}

std::string trend_svg(const EvalReport& r) {
  const double W = 480, H = 300, ml = 50, mr = 90, mt = 20, mb = 40;
  const double pw = W - ml - mr;
  const double ph = H - mt - mb;
  std::vector<TrendPoint> pts = r.trend;
  std::sort(pts.begin(), pts.end(),
            [](const TrendPoint& a, const TrendPoint& b) { return a.requested < b.requested; });
  double dmax = 1;
  for (const auto& p : pts) dmax = std::max(dmax, static_cast<double>(p.requested));
  auto X = [&](double d) { return ml + pw * d / dmax; };
  auto Y = [&](double f) { return mt + ph * (1.0 - f); };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
    << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  o << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << pw << "\" height=\""
    << ph << "\" fill=\"none\" stroke=\"#444\"/>\n";
  // Layers from the bottom: Cor, then Loc, then BG.
  const char* colors[3] = {"#4daf4a", "#ff7f00", "#e41a1c"};
  const char* names[3] = {"Cor", "Loc", "BG"};
  if (!pts.empty()) {
    for (int layer = 0; layer < 3; ++layer) {
      auto lo = [&](const TrendPoint& p) {
        return layer == 0 ? 0.0 : layer == 1 ? p.cor : p.cor + p.loc;
      };
      auto hi = [&](const TrendPoint& p) {
        return layer == 0 ? p.cor : layer == 1 ? p.cor + p.loc : p.cor + p.loc + p.bg;
      };
      o << "<polygon fill=\"" << colors[layer] << "\" fill-opacity=\"0.8\" points=\"";
      for (const auto& p : pts) o << fixed(X(p.requested), 2) << ',' << fixed(Y(hi(p)), 2) << ' ';
      for (auto it = pts.rbegin(); it != pts.rend(); ++it) {
        o << fixed(X(it->requested), 2) << ',' << fixed(Y(lo(*it)), 2) << ' ';
      }
      o << "\"/>\n";
    }
  }
  if (r.counts_at > 0) {
    const double x = X(r.counts_at);
    o << "<line x1=\"" << fixed(x, 2) << "\" y1=\"" << mt << "\" x2=\"" << fixed(x, 2)
      << "\" y2=\"" << mt + ph << "\" stroke=\"#888\" stroke-dasharray=\"5,4\"/>\n";
    o << "<text x=\"" << fixed(x + 3, 2) << "\" y=\"" << mt + 12 << "\" fill=\"#666\">D="
      << r.counts_at << "</text>\n";
  }
  for (int i = 0; i < 3; ++i) {
    const double y = mt + 10 + 18 * i;
    o << "<rect x=\"" << W - mr + 12 << "\" y=\"" << y << "\" width=\"12\" height=\"12\" fill=\""
      << colors[2 - i] << "\"/>\n";
    o << "<text x=\"" << W - mr + 30 << "\" y=\"" << y + 10 << "\">" << names[2 - i]
      << "</text>\n";
  }
  o << "<text x=\"" << ml + pw / 2 << "\" y=\"" << H - 8
    << "\" text-anchor=\"middle\">top D detections</text>\n";
  o << "<text x=\"14\" y=\"" << mt + ph / 2 << "\" transform=\"rotate(-90 14 " << mt + ph / 2
    << ")\" text-anchor=\"middle\">proportion</text>\n";
  o << "<text x=\"" << ml - 4 << "\" y=\"" << mt + 4 << "\" text-anchor=\"end\">1</text>\n";
  o << "<text x=\"" << ml - 4 << "\" y=\"" << mt + ph << "\" text-anchor=\"end\">0</text>\n";
  o << "<text x=\"" << ml + pw << "\" y=\"" << mt + ph + 14 << "\" text-anchor=\"end\">"
    << static_cast<long>(dmax) << "</text>\n";
  o << "</svg>\n";
  return o.str();
}

std::string per_style_markdown(const EvalReport& r) {
  std::string s = "| style | gts | detections | AP |\n|---|---:|---:|---:|\n";
  for (const auto& st : r.per_style.styles) {
    s += "| " + st.style + " | " + std::to_string(st.num_gt) + " | " +
         std::to_string(st.num_detections) + " | " + fixed(100 * st.ap, 1) + " |\n";
  }
  for (const auto& n : r.per_style.notices) s += "\n" + n + "\n";
  return s;
}

void write_report(const EvalReport& r, const std::filesystem::path& dir) {
  write_text(dir / "report.json", report_to_json(r));
  write_text(dir / "pr_curve.csv", pr_curve_csv(r));
  write_text(dir / "trend.svg", trend_svg(r));
  write_text(dir / "per_style.md", per_style_markdown(r));
}

}  // namespace artdet
