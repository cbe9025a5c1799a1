#include "artdet/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <thread>

#include "artdet/checkpoint.hpp"
#include "artdet/errors.hpp"
#include "artdet/report.hpp"

namespace artdet {
namespace {

// Runs fn(i) for i in [0, n) on up to `workers` threads; rethrows the first
// exception after all workers stop.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn fn) {
  const std::size_t w = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(n, 1));
  if (w == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::mutex mu;
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < w; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(mu);
            if (!err) err = std::current_exception();
          }
        }
      });
    }
  }
  if (err) std::rethrow_exception(err);
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

std::string proposal_fingerprint(const SelectiveSearchParams& p) {
  std::string s = "k" + format_number(p.segmentation.k) + "_m" +
                  std::to_string(p.segmentation.min_size) + "_s" +
                  format_number(p.segmentation.sigma) + "_" + to_string(p.color_space);
  if (p.diversify) s += "_div";
  s += "_b" + std::to_string(p.min_box_size) + "_n" + std::to_string(p.max_proposals);
  return s;
}

LoadedSplit load_split(const std::filesystem::path& manifest_path,
                       const SelectiveSearchParams& params,
                       const std::filesystem::path& cache_dir, int threads) {
  LoadedSplit out;
  out.manifest_path = manifest_path;
  out.manifest = load_manifest(manifest_path);
  const std::size_t n = out.manifest.entries.size();
  out.images.resize(n);
  out.proposals.resize(n);
  const std::filesystem::path dir =
      cache_dir.empty() ? std::filesystem::path{} : cache_dir / proposal_fingerprint(params);
  parallel_for(n, threads, [&](std::size_t i) {
    const ImageEntry& e = out.manifest.entries[i];
    Image img = read_png(resolve_image(manifest_path, e));
    if (img.width() != e.width || img.height() != e.height) {
      throw DataError("image '" + e.path + "' is " + std::to_string(img.width()) + "x" +
                      std::to_string(img.height()) + " but the manifest says " +
                      std::to_string(e.width) + "x" + std::to_string(e.height));
    }
    const std::filesystem::path cached =
        dir.empty() ? std::filesystem::path{} : dir / proposal_file_name(e.path);
    if (!cached.empty() && std::filesystem::exists(cached)) {
      out.proposals[i] = read_proposals_csv(cached);
    } else {
      const ProposalSet set = selective_search(img, params, e.path);
      if (!cached.empty()) write_proposals_csv(set, cached);
      out.proposals[i] = set.boxes();
    }
    out.images[i] = std::move(img);
  });
  return out;
}

LoadedSplit merge_splits(const LoadedSplit& a, const LoadedSplit& b) {
  LoadedSplit out = a;
  out.manifest.split = "trainval";
  for (std::size_t i = 0; i < b.manifest.entries.size(); ++i) {
    ImageEntry e = b.manifest.entries[i];
    if (out.manifest.find(e.path) != nullptr) {
      throw DataError("image '" + e.path + "' appears in both splits");
    }
    out.manifest.entries.push_back(std::move(e));
    out.images.push_back(b.images[i]);
    out.proposals.push_back(b.proposals[i]);
  }
  for (const auto& s : b.manifest.styles) {
    if (std::find(out.manifest.styles.begin(), out.manifest.styles.end(), s) ==
        out.manifest.styles.end()) {
      out.manifest.styles.push_back(s);
    }
  }
  std::sort(out.manifest.styles.begin(), out.manifest.styles.end());
  return out;
}

std::vector<TrainingSample> make_training_samples(const LoadedSplit& split,
                                                  int resize_shorter) {
  std::vector<TrainingSample> out;
  out.reserve(split.images.size());
  for (std::size_t i = 0; i < split.images.size(); ++i) {
    const ImageEntry& e = split.manifest.entries[i];
    out.push_back(prepare_sample(e.path, split.images[i], e.boxes, split.proposals[i],
                                 resize_shorter));
  }
  return out;
}

std::string training_log_csv(const TrainingResult& result) {
  std::string s =
      "iteration,image_id,loss,cls_loss,bbox_loss,positives,negatives,learning_rate,"
      "seconds\n";
  for (const auto& e : result.log) {
    s += std::to_string(e.iteration) + ',' + e.image_id + ',' + format_number(e.loss) +
         ',' + format_number(e.cls_loss) + ',' + format_number(e.bbox_loss) + ',' +
         std::to_string(e.positives) + ',' + std::to_string(e.negatives) + ',' +
         format_number(e.learning_rate) + ',' + fixed(e.seconds, 3) + '\n';
  }
  return s;
}

TrainOutcome run_training(const ExperimentConfig& cfg, const LoadedSplit& train,
                          const std::filesystem::path& out_dir) {
  cfg.validate();
  TrainOutcome out{Network<float>(cfg.network_spec(), cfg.seed), {}};
  const std::vector<TrainingSample> samples =
      make_training_samples(train, cfg.detector.resize_shorter);
  out.result = train_network(out.net, samples, cfg.trainer_config());
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    save_checkpoint(out.net, out_dir / "checkpoint.bin");
    write_text(out_dir / "train_log.csv", training_log_csv(out.result));
  }
  return out;
}

std::vector<Detection> detect_split(const Network<float>& net, const LoadedSplit& split,
                                    const DetectorConfig& cfg, int threads) {
  std::vector<std::vector<Detection>> per(split.images.size());
  parallel_for(per.size(), threads, [&](std::size_t i) {
    per[i] = detect(net, split.images[i], split.proposals[i], cfg,
                    split.manifest.entries[i].path);
  });
  std::vector<Detection> out;
  for (auto& d : per) out.insert(out.end(), d.begin(), d.end());
  std::stable_sort(out.begin(), out.end(), detection_order);
  return out;
}

EvalReport evaluate_split(std::span<const Detection> dets, const LoadedSplit& split,
                          ApMode mode) {
  EvalOptions opts;
  opts.mode = mode;
  opts.image_styles = split.manifest.image_styles();
  const std::vector<Annotation> gts = split.manifest.annotations();
  EvalReport r = evaluate(dets, gts, opts);
  int hit = 0;
  int total = 0;
  for (std::size_t i = 0; i < split.images.size(); ++i) {
    const auto& boxes = split.manifest.entries[i].boxes;
    int n = 0;
    for (const auto& b : boxes) n += b.difficult ? 0 : 1;
    if (n == 0) continue;
    total += n;
    hit += static_cast<int>(std::lround(proposal_recall(split.proposals[i], boxes, 0.5) * n));
  }
  r.proposal_recall = total > 0 ? static_cast<double>(hit) / total : 1.0;
  return r;
}

EvalReport run_eval(const ExperimentConfig& cfg, const std::filesystem::path& checkpoint,
                    const LoadedSplit& split, const std::filesystem::path& out_dir,
                    int threads) {
  if (!std::filesystem::exists(checkpoint)) {
    throw DataError("checkpoint " + checkpoint.string() + " does not exist");
  }
  const Network<float> net = load_checkpoint(checkpoint);
  const std::vector<Detection> dets = detect_split(net, split, cfg.detector, threads);
  const EvalReport r = evaluate_split(dets, split, cfg.ap_mode);
  write_detections_csv(dets, out_dir / "detections.csv");
  write_report(r, out_dir);
  return r;
}

void MatrixAxes::validate(int num_conv) const {
  if (size() == 0) throw ConfigError("matrix axes must be non-empty");
  for (const auto& s : sampling) RoiSamplingConfig::preset(s);
  for (int f : fixed_layers) {
    if (f < 0 || f > num_conv) {
      throw ConfigError("matrix F=" + std::to_string(f) + " outside [0, " +
                        std::to_string(num_conv) + "]");
    }
  }
}

const MatrixRow* MatrixResult::best(bool single_cell) const {
  for (const auto& r : rows) {
    if (r.best && r.single_cell == single_cell) return &r;
  }
  return nullptr;
}

ExperimentConfig apply_row(const ExperimentConfig& base, const MatrixRow& row) {
  ExperimentConfig c = base;
  c.sampling = row.sampling;
  c.fixed_layers = row.fixed_layers;
  c.single_cell = row.single_cell;
  return c;
}

MatrixResult run_matrix(const ExperimentConfig& base, const MatrixAxes& axes,
                        const LoadedSplit& train, const LoadedSplit& val, int workers) {
  axes.validate(base.network_spec().num_conv_layers());
  MatrixResult m;
  for (const auto& s : axes.sampling) {
    const RoiSamplingConfig sc = RoiSamplingConfig::preset(s);
    for (int f : axes.fixed_layers) {
      for (bool single : axes.single_cell) {
        MatrixRow row;
        row.sampling = s;
        row.negative_interval = sc.negative_interval();
        row.positive_interval = sc.positive_interval();
        row.fixed_layers = f;
        row.single_cell = single;
        m.rows.push_back(row);
      }
    }
  }
  // Every cell trains with the same seed so that rows differ only by the
  // axis values.
  parallel_for(m.rows.size(), workers, [&](std::size_t i) {
    MatrixRow& row = m.rows[i];
    try {
      const ExperimentConfig cfg = apply_row(base, row);
      const TrainOutcome t = run_training(cfg, train);
      const std::vector<Detection> dets = detect_split(t.net, val, cfg.detector);
      row.ap = evaluate_split(dets, val, cfg.ap_mode).ap;
      row.ok = true;
    } catch (const std::exception& e) {
      row.ok = false;
      row.error = e.what();
    }
  });
  for (bool single : {false, true}) {
    MatrixRow* best = nullptr;
    for (auto& r : m.rows) {
      if (r.ok && r.single_cell == single && (best == nullptr || r.ap > best->ap)) best = &r;
    }
    if (best != nullptr) best->best = true;
  }
  return m;
}

std::string matrix_csv(const MatrixResult& m) {
  std::string s = "configuration,negative,positive,F,pooling,AP,best,error\n";
  for (const auto& r : m.rows) {
    std::string err = r.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    s += r.sampling + ',' + r.negative_interval + ',' + r.positive_interval + ',' +
         std::to_string(r.fixed_layers) + ',' + (r.single_cell ? "single-cell" : "default") +
         ',' + (r.ok ? format_number(r.ap) : "") + ',' + (r.best ? "1" : "0") + ',' + err +
         '\n';
  }
  return s;
}

std::string matrix_markdown(const MatrixResult& m) {
  std::string s =
      "| configuration | negative ROI | positive ROI | fixed layers (F) | pooling | AP (%) |\n"
      "|---|---|---|---:|---|---:|\n";
  for (const auto& r : m.rows) {
    const std::string ap = r.ok ? fixed(100 * r.ap, 1) : "failed";
    auto cell = [&](const std::string& v) { return r.best ? "**" + v + "**" : v; };
    s += "| " + cell(r.sampling) + " | " + cell(r.negative_interval) + " | " +
         cell(r.positive_interval) + " | " + cell(std::to_string(r.fixed_layers)) + " | " +
         cell(r.single_cell ? "single-cell" : "default") + " | " + cell(ap) + " |\n";
  }
  for (const auto& r : m.rows) {
    if (!r.ok) {
      s += "\n" + r.sampling + " F=" + std::to_string(r.fixed_layers) + " " +
           (r.single_cell ? "single-cell" : "default") + ": " + r.error + "\n";
    }
  }
  return s;
}

std::string pooling_markdown(const MatrixResult& m) {
  std::string s = "| configuration | F | default | single cell |\n|---|---:|---:|---:|\n";
  for (const auto& a : m.rows) {
    if (a.single_cell) continue;
    for (const auto& b : m.rows) {
      if (!b.single_cell || b.sampling != a.sampling || b.fixed_layers != a.fixed_layers) {
        continue;
      }
      auto ap = [](const MatrixRow& r) { return r.ok ? fixed(100 * r.ap, 1) : "failed"; };
      s += "| " + a.sampling + " | " + std::to_string(a.fixed_layers) + " | " + ap(a) +
           " | " + ap(b) + " |\n";
    }
  }
  return s;
}

}  // namespace artdet
