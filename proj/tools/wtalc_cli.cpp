// wtalc: synthetic data, training, inference and evaluation from the command line.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "wtalc/config.hpp"
#include "wtalc/data.hpp"
#include "wtalc/errors.hpp"
#include "wtalc/eval.hpp"
#include "wtalc/infer.hpp"
#include "wtalc/kernels.hpp"
#include "wtalc/model.hpp"
#include "wtalc/optim.hpp"
#include "wtalc/synth.hpp"

namespace fs = std::filesystem;
using namespace wtalc;

namespace {

std::optional<Split> parse_split(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "test") return Split::kTest;
  if (s == "all") return std::nullopt;
  throw DomainError("--split must be train, test or all");
}

DatasetIndex select_split(const DatasetIndex& index, const std::string& split) {
  auto which = parse_split(split);
  return which ? index.filter(*which) : index;
}

// Flags for every TrainConfig key; values are strings so "given on the
// command line" can be told apart from defaults and applied after --config.
struct TrainFlags {
  std::vector<std::pair<std::string, std::string>> values;

  void add(CLI::App* cmd, const std::string& key, const std::string& help) {
    auto slot = std::make_shared<std::string>();
    auto* opt = cmd->add_option("--" + key, *slot, help);
    bindings.push_back({key, slot, opt});
  }
  void collect() {
    for (auto& b : bindings) {
      if (b.option->count() > 0) values.emplace_back(b.key, *b.slot);
    }
  }
  bool given(const std::string& key) const {
    for (const auto& [k, v] : values) {
      if (k == key) return true;
    }
    return false;
  }

  struct Binding {
    std::string key;
    std::shared_ptr<std::string> slot;
    CLI::Option* option;
  };
  std::vector<Binding> bindings;
};

int run_synth(const SynthConfig& cfg, const fs::path& out) {
  const SynthOutput s = synth_generate(cfg, out);
  std::cout << "wrote " << s.videos.size() << " videos\n"
            << "manifest:      " << s.manifest.string() << '\n'
            << "features:      " << s.features_dir.string() << '\n'
            << "ground truth:  " << s.ground_truth.string() << " (test split)\n";
  return 0;
}

int run_train(const fs::path& manifest, const fs::path& features_dir, const std::string& config_path,
              TrainFlags& flags, const std::string& split, const fs::path& out, const std::string& log_path,
              bool quiet) {
  TrainConfig config;
  bool feature_dim_set = flags.given("F");
  if (!config_path.empty()) {
    const auto kv = read_key_values(config_path);
    apply_key_values(config, kv);
    feature_dim_set = feature_dim_set || kv.count("F") > 0;
  }
  for (const auto& [key, value] : flags.values) apply_config_value(config, key, value);

  Dataset dataset = load_dataset(select_split(load_manifest(manifest, features_dir), split));
  if (!feature_dim_set) config.feature_dim = dataset.input_dim() / 2;
  config.validate();

  std::ofstream log;
  if (!log_path.empty()) {
    log.open(log_path, std::ios::trunc);
    if (!log) throw FormatError("cannot write training log '" + log_path + "'");
  }
  TrainResult result = train(dataset, config, [&](const LogRecord& r) {
    if (!quiet && (r.step == 1 || r.step % 50 == 0 || r.step == config.iterations)) {
      std::fprintf(stderr, "step %6zu  total %.6f  mill %.6f  casl %.6f  reg %.6f\n", r.step, r.loss.total,
                   r.loss.mill, r.loss.casl, r.loss.reg);
    }
  });
  if (!log_path.empty()) {
    log.close();
    write_training_log(log_path, result.log);
  }
  save_params(out, result.params, dataset.index.vocabulary);
  std::cout << "saved parameters to " << out.string() << '\n';
  return 0;
}

struct InferenceInputs {
  LoadedModel model;
  DatasetIndex index;
};

InferenceInputs load_for_inference(const fs::path& params, const fs::path& manifest, const fs::path& features_dir,
                                   const std::string& split) {
  InferenceInputs in{load_params(params), select_split(load_manifest(manifest, features_dir), split)};
  for (const auto& r : in.index.records) {
    if (r.feature_dim != in.model.params.dims.feature_dim) {
      throw ShapeError("video '" + r.id + "' has " + std::to_string(r.feature_dim) +
                       "-dimensional features, model expects " + std::to_string(in.model.params.dims.feature_dim));
    }
  }
  return in;
}

// Label indices of the manifest vocabulary mapped onto the model's vocabulary.
LabelSet remap_labels(const LabelSet& labels, const LabelVocabulary& from, const LabelVocabulary& to) {
  LabelSet out;
  for (std::size_t c : labels) {
    if (auto idx = to.find(from.name(c))) out.push_back(*idx);
  }
  std::sort(out.begin(), out.end());
  return out;
}

int run_classify(const fs::path& params, const fs::path& manifest, const fs::path& features_dir,
                 const std::string& split, std::size_t k_divisor, const std::string& out_path) {
  const InferenceInputs in = load_for_inference(params, manifest, features_dir, split);
  const auto& vocab = in.model.vocabulary;
  std::ostringstream table;
  table << "video_id";
  for (const auto& name : vocab.names()) table << ' ' << name;
  table << '\n';
  std::vector<Vector> pmfs;
  std::vector<LabelSet> labels;
  bool all_labelled = true;
  for (const auto& r : in.index.records) {
    const Vector pmf = classify(in.model.params, concat_streams(load_features(r)), k_divisor);
    table << r.id;
    char buf[32];
    for (double p : pmf) {
      std::snprintf(buf, sizeof(buf), " %.6f", p);
      table << buf;
    }
    table << '\n';
    pmfs.push_back(pmf);
    labels.push_back(remap_labels(r.labels, in.index.vocabulary, vocab));
    all_labelled = all_labelled && !r.labels.empty();
  }
  if (out_path.empty()) {
    std::cout << table.str();
  } else {
    std::ofstream out(out_path, std::ios::trunc);
    if (!out) throw FormatError("cannot write '" + out_path + "'");
    out << table.str();
  }
  if (all_labelled && !pmfs.empty()) {
    std::printf("classification mAP: %.6f\n", classification_map(pmfs, labels));
  }
  return 0;
}

int run_localize(const fs::path& params, const fs::path& manifest, const fs::path& features_dir,
                 const std::string& split, std::size_t k_divisor, const LocalizeOptions& options,
                 const fs::path& out) {
  const InferenceInputs in = load_for_inference(params, manifest, features_dir, split);
  std::vector<VideoDetection> all;
  for (const auto& r : in.index.records) {
    for (const auto& d : localize(in.model.params, concat_streams(load_features(r)), k_divisor,
                                  r.feature_stride_seconds, r.duration_seconds, options)) {
      all.push_back({r.id, d});
    }
  }
  write_detections(out, all, in.model.vocabulary);
  std::cout << "wrote " << all.size() << " detections to " << out.string() << '\n';
  return 0;
}

std::vector<double> parse_thresholds(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw DomainError("--iou: cannot parse '" + item + "'");
    }
  }
  if (out.empty()) throw DomainError("--iou: no thresholds given");
  return out;
}

int run_eval(const fs::path& detections_path, const fs::path& gt_path, const std::string& iou,
             bool activitynet, const std::string& kv_path) {
  const auto dets = read_segment_file(detections_path, true);
  const auto gts = read_segment_file(gt_path, false);
  std::set<std::string> names;
  for (const auto& g : gts) names.insert(g.class_name);
  for (const auto& d : dets) names.insert(d.class_name);
  const LabelVocabulary vocab(std::vector<std::string>(names.begin(), names.end()));
  const std::vector<double> thresholds = activitynet ? activitynet_thresholds() : parse_thresholds(iou);
  const DetectionMap result =
      detection_map(to_detections(dets, vocab), to_ground_truth(gts, vocab), thresholds, vocab.size());
  std::cout << format_results_table(result, vocab);
  if (!kv_path.empty()) {
    std::ofstream out(kv_path, std::ios::trunc);
    if (!out) throw FormatError("cannot write '" + kv_path + "'");
    out << format_results_kv(result, vocab);
  }
  return 0;
}

int run_gradcheck(const GradCheckOptions& options) {
  const GradCheckReport report = grad_check(options);
  std::printf("trials: %zu\n", report.trials.size());
  for (std::size_t b = 0; b < report.max_rel_error.size(); ++b) {
    std::printf("max relative error %-10s %.3e\n", kParamBlockNames[b], report.max_rel_error[b]);
  }
  std::printf("%s (tolerance %.1e)\n", report.passed ? "PASS" : "FAIL", options.tolerance);
  return report.passed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weakly-supervised temporal activity localization and classification"};
  app.require_subcommand(1);
  std::string kernels_name = "auto";
  app.add_option("--kernels", kernels_name, "Kernel backend: auto, scalar, avx2, neon")->capture_default_str();

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  SynthConfig synth_cfg;
  std::string synth_out;
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--classes", synth_cfg.num_classes)->capture_default_str();
  synth->add_option("--train", synth_cfg.num_train)->capture_default_str();
  synth->add_option("--test", synth_cfg.num_test)->capture_default_str();
  synth->add_option("--F", synth_cfg.feature_dim, "Feature dimension per stream")->capture_default_str();
  synth->add_option("--mean-length", synth_cfg.mean_length)->capture_default_str();
  synth->add_option("--segments", synth_cfg.segments_per_video)->capture_default_str();
  synth->add_option("--separation", synth_cfg.separation)->capture_default_str();
  synth->add_option("--noise", synth_cfg.noise_sigma)->capture_default_str();
  synth->add_option("--scale", synth_cfg.activity_scale)->capture_default_str();
  synth->add_option("--stride", synth_cfg.stride_seconds)->capture_default_str();
  synth->add_option("--seed", synth_cfg.seed)->capture_default_str();

  // train
  auto* train_cmd = app.add_subcommand("train", "Train the weakly-supervised module");
  std::string manifest, features_dir, config_path, out_path, log_path, split = "train";
  bool quiet = false;
  train_cmd->add_option("--manifest", manifest)->required();
  train_cmd->add_option("--features-dir", features_dir)->required();
  train_cmd->add_option("--config", config_path, "Flat key = value file; flags override it");
  train_cmd->add_option("--out", out_path, "Parameter file to write")->required();
  train_cmd->add_option("--log", log_path, "JSON-lines training log");
  train_cmd->add_option("--split", split, "train, test or all")->capture_default_str();
  train_cmd->add_flag("--quiet", quiet);
  TrainFlags flags;
  flags.add(train_cmd, "lambda", "MIL loss weight (default 0.5)");
  flags.add(train_cmd, "alpha", "L2 weight (default 5e-4)");
  flags.add(train_cmd, "delta", "Hinge margin (default 0.5)");
  flags.add(train_cmd, "s", "k-max divisor (default 8)");
  flags.add(train_cmd, "keep_prob", "Dropout keep probability (default 0.7)");
  flags.add(train_cmd, "T_seconds", "Clip length cap in seconds (default 320)");
  flags.add(train_cmd, "lr", "Adam learning rate (default 1e-4)");
  flags.add(train_cmd, "batch_size", "Videos per batch (default 10)");
  flags.add(train_cmd, "min_pairs", "Same-class pairs per batch (default 3)");
  flags.add(train_cmd, "iterations", "Training steps (default 500)");
  flags.add(train_cmd, "seed", "Random seed (default 0)");
  flags.add(train_cmd, "F", "Feature dimension per stream (default: from data)");
  flags.add(train_cmd, "D", "Hidden dimension (default 2048)");
  flags.add(train_cmd, "beta1", "Adam beta1 (default 0.9)");
  flags.add(train_cmd, "beta2", "Adam beta2 (default 0.999)");
  flags.add(train_cmd, "adam_epsilon", "Adam epsilon (default 1e-8)");
  flags.add(train_cmd, "checkpoint_every", "Checkpoint cadence in steps, 0 = off");
  flags.add(train_cmd, "checkpoint_dir", "Checkpoint directory");

  // classify / localize
  std::string params_path, infer_split = "all";
  std::size_t k_divisor = 8;
  auto* classify_cmd = app.add_subcommand("classify", "Print per-video class pmfs");
  std::string pmf_out;
  classify_cmd->add_option("--params", params_path)->required();
  classify_cmd->add_option("--manifest", manifest)->required();
  classify_cmd->add_option("--features-dir", features_dir)->required();
  classify_cmd->add_option("--split", infer_split, "train, test or all")->capture_default_str();
  classify_cmd->add_option("--s", k_divisor, "k-max divisor")->capture_default_str();
  classify_cmd->add_option("--out", pmf_out, "Write pmfs here instead of stdout");

  auto* localize_cmd = app.add_subcommand("localize", "Write temporal detections");
  LocalizeOptions loc;
  localize_cmd->add_option("--params", params_path)->required();
  localize_cmd->add_option("--manifest", manifest)->required();
  localize_cmd->add_option("--features-dir", features_dir)->required();
  localize_cmd->add_option("--split", infer_split, "train, test or all")->capture_default_str();
  localize_cmd->add_option("--s", k_divisor, "k-max divisor")->capture_default_str();
  localize_cmd->add_option("--score-threshold", loc.score_threshold)->capture_default_str();
  localize_cmd->add_option("--act-threshold", loc.act_threshold)->capture_default_str();
  localize_cmd->add_option("--out", out_path, "Detection file")->required();

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Detection mAP at IoU thresholds");
  std::string det_path, gt_path, iou = "0.1,0.2,0.3,0.4,0.5", kv_path;
  bool activitynet = false;
  eval_cmd->add_option("--detections", det_path)->required();
  eval_cmd->add_option("--ground-truth", gt_path)->required();
  eval_cmd->add_option("--iou", iou, "Comma-separated IoU thresholds")->capture_default_str();
  eval_cmd->add_flag("--activitynet", activitynet, "Use 0.5:0.05:0.95 and report the average");
  eval_cmd->add_option("--kv", kv_path, "Also write key=value results here");

  // gradcheck
  auto* gc_cmd = app.add_subcommand("gradcheck", "Compare analytic and finite-difference gradients");
  GradCheckOptions gc;
  gc_cmd->add_option("--trials", gc.trials, "Trials per lambda")->capture_default_str();
  gc_cmd->add_option("--eps", gc.step)->capture_default_str();
  gc_cmd->add_option("--tol", gc.tolerance)->capture_default_str();
  gc_cmd->add_option("--seed", gc.seed)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    kernels::set_backend(kernels::parse_backend(kernels_name));
    if (*synth) return run_synth(synth_cfg, synth_out);
    if (*train_cmd) {
      flags.collect();
      return run_train(manifest, features_dir, config_path, flags, split, out_path, log_path, quiet);
    }
    if (*classify_cmd) return run_classify(params_path, manifest, features_dir, infer_split, k_divisor, pmf_out);
    if (*localize_cmd) return run_localize(params_path, manifest, features_dir, infer_split, k_divisor, loc, out_path);
    if (*eval_cmd) return run_eval(det_path, gt_path, iou, activitynet, kv_path);
    if (*gc_cmd) return run_gradcheck(gc);
  } catch (const wtalc::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
