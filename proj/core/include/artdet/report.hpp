#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "artdet/detector.hpp"
#include "artdet/evaluation.hpp"

namespace artdet {

// Detections CSV, header image_id,x1,y1,x2,y2,score. Column order is fixed.
void write_detections_csv(std::span<const Detection> dets,
                          const std::filesystem::path& path);
std::vector<Detection> read_detections_csv(const std::filesystem::path& path);

std::string report_to_json(const EvalReport& r);
// recall,precision,score
std::string pr_curve_csv(const EvalReport& r);
// Stacked areas of Cor/Loc/BG proportions against D, with a dashed marker
// at D = number of ground truths.
std::string trend_svg(const EvalReport& r);
std::string per_style_markdown(const EvalReport& r);

// Writes report.json, pr_curve.csv, trend.svg and per_style.md into dir.
void write_report(const EvalReport& r, const std::filesystem::path& dir);

// Round-trip text form for numbers in reports and tables.
std::string format_number(double v);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace artdet
