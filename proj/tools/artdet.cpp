// artdet: synthetic data, proposals, training, the sampling matrix, detection
// and evaluation from the command line.
//
// Exit codes: 0 ok, 2 configuration error, 3 data error, 4 numeric failure.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <thread>

#include "artdet/checkpoint.hpp"
#include "artdet/config.hpp"
#include "artdet/dataset.hpp"
#include "artdet/errors.hpp"
#include "artdet/experiment.hpp"
#include "artdet/report.hpp"
#include "artdet/synth.hpp"

namespace fs = std::filesystem;
using namespace artdet;

namespace {

struct Common {
  std::string config;
  std::vector<std::string> overrides;
  std::int64_t seed = -1;
  std::string out;
  int threads = 1;
};

void add_common(CLI::App* app, Common& c, bool with_config = true) {
  if (with_config) {
    app->add_option("-c,--config", c.config, "experiment config file");
    app->add_option("--set", c.overrides, "override, e.g. sgd.iterations=500")
        ->take_all();
  }
  app->add_option("--seed", c.seed, "random seed (overrides the config)");
  app->add_option("--threads", c.threads, "worker threads")->capture_default_str();
}

ExperimentConfig resolve_config(const Common& c) {
  ExperimentConfig cfg = c.config.empty() ? ExperimentConfig{} : load_config(c.config);
  for (const auto& kv : c.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    std::string value = kv.substr(eq + 1);
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    apply_override(cfg, kv.substr(0, eq), value);
  }
  if (c.seed >= 0) cfg.seed = static_cast<std::uint64_t>(c.seed);
  if (!c.out.empty()) cfg.output_dir = c.out;
  cfg.validate();
  return cfg;
}

fs::path cache_dir(const ExperimentConfig& cfg) {
  return cfg.proposals_dir.empty() ? fs::path(cfg.output_dir) / "proposals"
                                   : fs::path(cfg.proposals_dir);
}

LoadedSplit need_split(const ExperimentConfig& cfg, const std::string& path,
                       const std::string& what, int threads) {
  if (path.empty()) throw ConfigError("no " + what + " manifest configured");
  if (!fs::exists(path)) throw ConfigError(what + " manifest " + path + " does not exist");
  return load_split(path, cfg.proposals, cache_dir(cfg), threads);
}

int cmd_synth(const SynthConfig& sc, const std::vector<std::string>& splits,
              const std::vector<int>& counts, const std::string& out, int threads) {
  if (!counts.empty() && counts.size() != splits.size()) {
    throw ConfigError("--counts must list one count per split");
  }
  for (std::size_t i = 0; i < splits.size(); ++i) {
    SynthConfig c = sc;
    if (!counts.empty()) c.count = counts[i];
    const DatasetManifest m = generate_synthetic(c, splits[i], out, threads);
    int people = 0;
    for (const auto& e : m.entries) people += static_cast<int>(e.boxes.size());
    std::printf("%s: %zu images, %d people -> %s\n", splits[i].c_str(), m.entries.size(),
                people, (fs::path(out) / (splits[i] + ".jsonl")).c_str());
  }
  return 0;
}

int cmd_proposals(const SelectiveSearchParams& params, const std::string& images,
                  const std::string& manifest, const std::string& out) {
  params.validate();
  std::vector<std::pair<std::string, fs::path>> inputs;
  if (!manifest.empty()) {
    const DatasetManifest m = load_manifest(manifest);
    for (const auto& e : m.entries) inputs.emplace_back(e.path, resolve_image(manifest, e));
  } else {
    if (!fs::is_directory(images)) throw DataError("no image directory " + images);
    for (const auto& f : fs::directory_iterator(images)) {
      if (f.path().extension() == ".png") {
        inputs.emplace_back(f.path().filename().string(), f.path());
      }
    }
    std::sort(inputs.begin(), inputs.end());
  }
  std::size_t total = 0;
  for (const auto& [id, path] : inputs) {
    const ProposalSet set = selective_search(read_png(path), params, id);
    write_proposals_csv(set, fs::path(out) / proposal_file_name(id));
    total += set.size();
  }
  std::printf("%zu images, %zu proposals -> %s\n", inputs.size(), total, out.c_str());
  return 0;
}

int cmd_train(const Common& c) {
  const ExperimentConfig cfg = resolve_config(c);
  const LoadedSplit train = need_split(cfg, cfg.train_manifest, "train", c.threads);
  const fs::path out = cfg.output_dir;
  const TrainOutcome t = run_training(cfg, train, out);
  write_text(out / "config.toml", serialize_config(cfg));
  if (!t.result.log.empty()) {
    const auto smooth = smoothed_losses(t.result.log, 50);
    std::printf("iterations %zu, smoothed loss %.4f -> %.4f, %.1f s\n", t.result.log.size(),
                smooth.front(), smooth.back(), t.result.log.back().seconds);
  }
  std::printf("checkpoint -> %s\n", (out / "checkpoint.bin").c_str());
  return 0;
}

int cmd_matrix(const Common& c, std::vector<std::string> sampling, std::vector<int> fixed,
               std::vector<std::string> pooling, bool select_then_retrain) {
  const ExperimentConfig cfg = resolve_config(c);
  MatrixAxes axes;
  if (!sampling.empty()) axes.sampling = sampling;
  if (!fixed.empty()) axes.fixed_layers = fixed;
  if (!pooling.empty()) {
    axes.single_cell.clear();
    for (const auto& p : pooling) {
      if (p == "default") axes.single_cell.push_back(false);
      else if (p == "single-cell") axes.single_cell.push_back(true);
      else throw ConfigError("pooling must be default or single-cell, got '" + p + "'");
    }
  }
  axes.validate(cfg.network_spec().num_conv_layers());
  const LoadedSplit train = need_split(cfg, cfg.train_manifest, "train", c.threads);
  const LoadedSplit val = need_split(cfg, cfg.val_manifest, "val", c.threads);
  const MatrixResult m = run_matrix(cfg, axes, train, val, c.threads);
  const fs::path out = cfg.output_dir;
  write_text(out / "matrix.csv", matrix_csv(m));
  write_text(out / "matrix.md", matrix_markdown(m));
  write_text(out / "pooling.md", pooling_markdown(m));
  std::cout << matrix_markdown(m);
  if (std::find(axes.single_cell.begin(), axes.single_cell.end(), true) !=
          axes.single_cell.end() &&
      std::find(axes.single_cell.begin(), axes.single_cell.end(), false) !=
          axes.single_cell.end()) {
    std::cout << "\n" << pooling_markdown(m);
  }

  if (select_then_retrain) {
    const MatrixRow* best = m.best(false);
    if (best == nullptr) best = m.best(true);
    if (best == nullptr) throw DataError("every matrix cell failed; nothing to retrain");
    const ExperimentConfig final_cfg = apply_row(cfg, *best);
    const LoadedSplit trainval =
        final_cfg.trainval_manifest.empty()
            ? merge_splits(train, val)
            : need_split(final_cfg, final_cfg.trainval_manifest, "trainval", c.threads);
    const fs::path final_dir = out / "final";
    run_training(final_cfg, trainval, final_dir);
    write_text(final_dir / "config.toml", serialize_config(final_cfg));
    std::printf("\nselected %s F=%d %s; retrained on %zu images -> %s\n",
                best->sampling.c_str(), best->fixed_layers,
                best->single_cell ? "single-cell" : "default",
                trainval.manifest.entries.size(), final_dir.c_str());
    if (!final_cfg.test_manifest.empty()) {
      const LoadedSplit test = need_split(final_cfg, final_cfg.test_manifest, "test", c.threads);
      const EvalReport r =
          run_eval(final_cfg, final_dir / "checkpoint.bin", test, final_dir / "test", c.threads);
      std::printf("test AP %.4f (%s)\n", r.ap, to_string(r.mode).c_str());
    }
  }
  return 0;
}

int cmd_detect(const Common& c, const std::string& checkpoint, std::string manifest,
               const std::string& out_csv) {
  const ExperimentConfig cfg = resolve_config(c);
  if (manifest.empty()) manifest = cfg.test_manifest;
  if (!fs::exists(checkpoint)) throw DataError("checkpoint " + checkpoint + " does not exist");
  const Network<float> net = load_checkpoint(checkpoint);
  const LoadedSplit split = need_split(cfg, manifest, "detection", c.threads);
  const std::vector<Detection> dets = detect_split(net, split, cfg.detector, c.threads);
  const fs::path path = out_csv.empty() ? fs::path(cfg.output_dir) / "detections.csv"
                                        : fs::path(out_csv);
  write_detections_csv(dets, path);
  std::printf("%zu detections on %zu images -> %s\n", dets.size(),
              split.manifest.entries.size(), path.c_str());
  return 0;
}

int cmd_eval(const Common& c, const std::string& detections, const std::string& checkpoint,
             std::string manifest, std::vector<int> d_values) {
  const ExperimentConfig cfg = resolve_config(c);
  if (manifest.empty()) manifest = cfg.test_manifest;
  const fs::path out = cfg.output_dir;
  EvalReport r;
  if (!checkpoint.empty()) {
    const LoadedSplit split = need_split(cfg, manifest, "evaluation", c.threads);
    r = run_eval(cfg, checkpoint, split, out, c.threads);
  } else {
    if (detections.empty()) throw ConfigError("eval needs --detections or --checkpoint");
    if (manifest.empty()) throw ConfigError("eval needs --manifest");
    const DatasetManifest m = load_manifest(manifest);
    const std::vector<Detection> dets = read_detections_csv(detections);
    EvalOptions opts;
    opts.mode = cfg.ap_mode;
    opts.d_values = d_values;
    opts.image_styles = m.image_styles();
    r = evaluate(dets, m.annotations(), opts);
    write_report(r, out);
  }
  std::printf("AP %.4f (%s), %d gts, %d detections; at D=%d: Cor %d Loc %d BG %d\n", r.ap,
              to_string(r.mode).c_str(), r.num_gt, r.num_detections, r.counts_at, r.cor,
              r.loc, r.bg);
  if (r.proposal_recall) std::printf("proposal recall@0.5 %.4f\n", *r.proposal_recall);
  std::printf("reports -> %s\n", out.c_str());
  return 0;
}

int cmd_diagnose(const std::string& detections, const std::string& manifest,
                 std::vector<int> d_values, const std::string& out) {
  const DatasetManifest m = load_manifest(manifest);
  const std::vector<Detection> dets = read_detections_csv(detections);
  const MatchResult match = match_detections(dets, m.annotations());
  if (d_values.empty()) {
    for (double f : {0.25, 0.5, 1.0, 2.0, 4.0}) {
      d_values.push_back(std::max(1, static_cast<int>(f * match.num_gt)));
    }
  }
  std::printf("%8s %8s %6s %6s %6s\n", "D", "used", "Cor", "Loc", "BG");
  for (const auto& t : detection_trend(match, d_values)) {
    std::printf("%8d %8d %6.3f %6.3f %6.3f%s\n", t.requested, t.used, t.cor, t.loc, t.bg,
                t.truncated ? "  (fewer detections than D)" : "");
  }
  if (!out.empty()) {
    EvalReport r;
    r.num_gt = match.num_gt;
    r.counts_at = match.num_gt;
    r.trend = detection_trend(match, d_values);
    write_text(fs::path(out) / "trend.svg", trend_svg(r));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"artdet: desk-scale two-stage person detector and evaluation harness"};
  app.require_subcommand(1);

  // synth
  SynthConfig sc;
  std::vector<std::string> synth_splits{"train"};
  std::vector<int> synth_counts;
  std::string synth_out = "data";
  std::int64_t synth_seed = static_cast<std::int64_t>(sc.seed);
  int synth_threads = 1;
  auto* synth = app.add_subcommand("synth", "render a synthetic multi-style person dataset");
  synth->add_option("--out", synth_out, "output directory")->capture_default_str();
  synth->add_option("--splits", synth_splits, "splits to render")
      ->delimiter(',')
      ->capture_default_str();
  synth->add_option("--counts", synth_counts, "images per split (default --count)")
      ->delimiter(',');
  synth->add_option("--count", sc.count, "images per split")->capture_default_str();
  synth->add_option("--width", sc.width)->capture_default_str();
  synth->add_option("--height", sc.height)->capture_default_str();
  synth->add_option("--min-people", sc.min_people)->capture_default_str();
  synth->add_option("--max-people", sc.max_people)->capture_default_str();
  synth->add_option("--min-person-height", sc.min_person_height)->capture_default_str();
  synth->add_option("--max-person-height", sc.max_person_height)->capture_default_str();
  synth->add_option("--max-distractors", sc.max_distractors)->capture_default_str();
  synth->add_option("--styles", sc.styles, "subset of filled,outline,textured,inverted,noisy")
      ->delimiter(',')
      ->capture_default_str();
  synth->add_option("--occlusion-prob", sc.occlusion_prob)->capture_default_str();
  synth->add_option("--difficult-prob", sc.difficult_prob)->capture_default_str();
  synth->add_option("--seed", synth_seed)->capture_default_str();
  synth->add_option("--threads", synth_threads)->capture_default_str();

  // proposals
  SelectiveSearchParams sp;
  std::string prop_images, prop_manifest, prop_out = "proposals", prop_cs = "rgb";
  std::int64_t prop_seed = 0;
  auto* proposals = app.add_subcommand("proposals", "selective search, one CSV per image");
  auto* pi = proposals->add_option("--images", prop_images, "directory of PNG images");
  auto* pm = proposals->add_option("--manifest", prop_manifest, "manifest instead of a directory");
  pi->excludes(pm);
  proposals->add_option("--out", prop_out)->capture_default_str();
  proposals->add_option("--k", sp.segmentation.k)->capture_default_str();
  proposals->add_option("--min-size", sp.segmentation.min_size)->capture_default_str();
  proposals->add_option("--sigma", sp.segmentation.sigma)->capture_default_str();
  proposals->add_option("--color-space", prop_cs, "rgb, hsv or lab")->capture_default_str();
  proposals->add_flag("--diversify", sp.diversify, "HSV and Lab with k in {50,100,150,300}");
  proposals->add_option("--min-box-size", sp.min_box_size)->capture_default_str();
  proposals->add_option("--max-proposals", sp.max_proposals)->capture_default_str();
  proposals->add_option("--seed", prop_seed, "accepted for uniformity; the method is deterministic");

  // train
  Common train_c;
  auto* train = app.add_subcommand("train", "train a detector from a config");
  add_common(train, train_c);
  train->add_option("--out", train_c.out, "output directory (overrides output_dir)");

  // matrix
  Common matrix_c;
  std::vector<std::string> m_sampling, m_pooling;
  std::vector<int> m_fixed;
  bool m_select = false;
  auto* matrix = app.add_subcommand("matrix", "sampling x F x pooling grid on train/val");
  add_common(matrix, matrix_c);
  matrix->add_option("--out", matrix_c.out);
  matrix->add_option("--sampling", m_sampling, "presets: default,gap,all-neg,gap+all-neg")
      ->delimiter(',');
  matrix->add_option("--fixed-layers", m_fixed, "values of F")->delimiter(',');
  matrix->add_option("--pooling", m_pooling, "default,single-cell")->delimiter(',');
  matrix->add_flag("--select-then-retrain", m_select,
                   "retrain the best cell on train+val and evaluate on test");

  // detect
  Common detect_c;
  std::string d_ckpt, d_manifest, d_out;
  auto* detect_cmd = app.add_subcommand("detect", "run a checkpoint over a manifest");
  add_common(detect_cmd, detect_c);
  detect_cmd->add_option("--checkpoint", d_ckpt)->required();
  detect_cmd->add_option("--manifest", d_manifest, "defaults to data.test_manifest");
  detect_cmd->add_option("--out", d_out, "detections CSV path");

  // eval
  Common eval_c;
  std::string e_dets, e_ckpt, e_manifest;
  std::vector<int> e_d;
  auto* eval = app.add_subcommand("eval", "AP, PR curve, Cor/Loc/BG trend and per-style AP");
  add_common(eval, eval_c);
  eval->add_option("--detections", e_dets, "detections CSV");
  eval->add_option("--checkpoint", e_ckpt, "detect first with this checkpoint");
  eval->add_option("--manifest", e_manifest, "ground truth; defaults to data.test_manifest");
  eval->add_option("--d-values", e_d, "D values for the trend")->delimiter(',');
  eval->add_option("--out", eval_c.out, "report directory");

  // diagnose
  std::string g_dets, g_manifest, g_out;
  std::vector<int> g_d;
  std::int64_t g_seed = 0;
  auto* diagnose = app.add_subcommand("diagnose", "Cor/Loc/BG proportions of the top D");
  diagnose->add_option("--detections", g_dets)->required();
  diagnose->add_option("--manifest", g_manifest)->required();
  diagnose->add_option("--d-values", g_d)->delimiter(',');
  diagnose->add_option("--out", g_out, "directory for trend.svg");
  diagnose->add_option("--seed", g_seed, "accepted for uniformity; diagnosis is deterministic");

  // import-voc
  std::string v_root, v_split = "test", v_out = "voc.jsonl";
  std::int64_t v_seed = 0;
  auto* voc = app.add_subcommand("import-voc", "convert a VOC-style tree to a manifest");
  voc->add_option("--root", v_root)->required();
  voc->add_option("--split", v_split)->capture_default_str();
  voc->add_option("--out", v_out)->capture_default_str();
  voc->add_option("--seed", v_seed, "accepted for uniformity");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*synth) {
      if (synth_seed < 0) throw ConfigError("--seed must be non-negative");
      sc.seed = static_cast<std::uint64_t>(synth_seed);
      return cmd_synth(sc, synth_splits, synth_counts, synth_out, synth_threads);
    }
    if (*proposals) {
      sp.color_space = color_space_from_string(prop_cs);
      if (prop_images.empty() && prop_manifest.empty()) {
        throw ConfigError("proposals needs --images or --manifest");
      }
      return cmd_proposals(sp, prop_images, prop_manifest, prop_out);
    }
    if (*train) return cmd_train(train_c);
    if (*matrix) return cmd_matrix(matrix_c, m_sampling, m_fixed, m_pooling, m_select);
    if (*detect_cmd) return cmd_detect(detect_c, d_ckpt, d_manifest, d_out);
    if (*eval) return cmd_eval(eval_c, e_dets, e_ckpt, e_manifest, e_d);
    if (*diagnose) return cmd_diagnose(g_dets, g_manifest, g_d, g_out);
    if (*voc) {
      if (!is_valid_split(v_split)) throw ConfigError("unknown split '" + v_split + "'");
      const DatasetManifest m = import_voc(v_root, v_split);
      save_manifest(m, v_out);
      std::printf("%zu images -> %s\n", m.entries.size(), v_out.c_str());
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 4;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
