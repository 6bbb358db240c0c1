// Command-line front end: scene synthesis, feature extraction, training,
// pruning sweeps, uncertainty reports and split statistics. Every command
// writes its artifacts plus a manifest.json recording the resolved
// configuration, input hashes, seeds and output inventory, so a run can be
// audited and repeated exactly.

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "bhsrs/checkpoint.hpp"
#include "bhsrs/common.hpp"
#include "bhsrs/cube.hpp"
#include "bhsrs/emap.hpp"
#include "bhsrs/envi.hpp"
#include "bhsrs/metrics.hpp"
#include "bhsrs/patches.hpp"
#include "bhsrs/predict.hpp"
#include "bhsrs/prune.hpp"
#include "bhsrs/split.hpp"
#include "bhsrs/synth.hpp"
#include "bhsrs/train.hpp"
#include "nlohmann/json.hpp"

namespace {

using nlohmann::json;

constexpr const char* kVersion = "1.0.0";

// Distinct stream for evaluation draws so they never replay the training
// noise streams derived from the same user seed.
constexpr uint64_t kEvalSalt = 0x9e3779b97f4a7c15ULL;

std::string hash_file_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw bhsrs::IoError(bhsrs::cat("cannot open '", path, "' for hashing"));
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string bytes = buf.str();
  std::ostringstream hex;
  hex << std::hex << std::setw(16) << std::setfill('0')
      << bhsrs::fnv1a64(bytes.data(), bytes.size());
  return hex.str();
}

// Collects everything a run produces; written last so a manifest on disk
// means the run finished.
class Manifest {
 public:
  Manifest(std::string command, json config)
      : command_(command), start_(std::chrono::steady_clock::now()) {
    j_["command"] = std::move(command);
    j_["version"] = kVersion;
    j_["config"] = std::move(config);
    j_["inputs"] = json::object();
    j_["outputs"] = json::array();
  }

  void input(const std::string& key, const std::string& path) {
    j_["inputs"][key] = {{"path", path}, {"fnv1a64", hash_file_hex(path)}};
  }
  void output(const std::string& path) { j_["outputs"].push_back(path); }
  json& extra() { return j_; }

  // Command-scoped name so commands sharing a directory never clobber
  // each other's record.
  std::string write(const std::string& dir) {
    const std::string path =
        (std::filesystem::path(dir) / (command_ + "_manifest.json")).string();
    j_["outputs"].push_back(path);
    const auto seconds = std::chrono::duration<double>(
        std::chrono::steady_clock::now() - start_);
    j_["duration_seconds"] = seconds.count();
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw bhsrs::IoError(bhsrs::cat("cannot open '", path, "' for writing"));
    out << j_.dump(2) << "\n";
    if (!out) throw bhsrs::IoError(bhsrs::cat("short write to '", path, "'"));
    return path;
  }

 private:
  json j_;
  std::string command_;
  std::chrono::steady_clock::time_point start_;
};

std::string out_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw bhsrs::IoError(bhsrs::cat("cannot create directory '", dir, "': ", ec.message()));
}

std::ofstream open_csv(const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw bhsrs::IoError(bhsrs::cat("cannot open '", path, "' for writing"));
  out << std::setprecision(17);
  return out;
}

int64_t env_threads() {
  const char* raw = std::getenv("BHSRS_THREADS");
  if (raw != nullptr) {
    try {
      const int64_t n = std::stoll(raw);
      if (n >= 1) return n;
    } catch (const std::exception&) {
    }
    throw bhsrs::InputError(bhsrs::cat("BHSRS_THREADS='", raw, "' is not a positive integer"));
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int64_t>(hw);
}

// Runs jobs 0..n_jobs-1 on up to `threads` workers; the first exception
// wins and is rethrown after all workers stop.
void run_jobs(int64_t n_jobs, int64_t threads, const std::function<void(int64_t)>& fn) {
  const int64_t n_workers = std::max<int64_t>(1, std::min(threads, n_jobs));
  if (n_workers == 1) {
    for (int64_t i = 0; i < n_jobs; ++i) fn(i);
    return;
  }
  std::atomic<int64_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (int64_t t = 0; t < n_workers; ++t) {
    pool.emplace_back([&]() {
      for (;;) {
        const int64_t i = next.fetch_add(1);
        if (i >= n_jobs) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    });
  }
  for (std::thread& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

bhsrs::Mode parse_mode(const std::string& name) {
  if (name == "bayesian" || name == "bnn") return bhsrs::Mode::BNN;
  if (name == "cnn") return bhsrs::Mode::CNN;
  throw bhsrs::InputError(bhsrs::cat("unknown mode '", name, "'"));
}

// Features as written by `convert`, labels as an 8/16-bit PGM class map.
struct Dataset {
  bhsrs::FeatureCube features;
  bhsrs::LabelMap labels;
};

Dataset load_dataset(const std::string& features_path, const std::string& labels_path) {
  Dataset d;
  d.features = bhsrs::load_features(features_path);
  d.labels = bhsrs::pgm_read(labels_path);
  d.labels.validate();
  if (d.labels.h != d.features.h || d.labels.w != d.features.w) {
    throw bhsrs::InputError(bhsrs::cat("labels are ", d.labels.h, "x", d.labels.w,
                                       " but features are ", d.features.h, "x", d.features.w));
  }
  if (d.labels.max_class() < 1) throw bhsrs::InputError("label map has no labeled pixels");
  return d;
}

// Split selection shared by prune/uncertainty/split-stats: an explicit file
// wins, otherwise the policy flags rebuild it.
struct SplitFlags {
  std::string file;
  std::string policy = "cc";
  int64_t pixels_per_class = 20;
  double val_fraction = 0.1;
  int64_t seed = -1;  // -1: fall back to the checkpoint's training seed
};

void add_split_flags(CLI::App* cmd, SplitFlags& f) {
  cmd->add_option("--split", f.file, "split JSON saved by a previous run (overrides policy flags)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--split-policy", f.policy, "train pixel selection: cc or random")
      ->check(CLI::IsMember({"cc", "random"}))
      ->capture_default_str();
  cmd->add_option("--pixels-per-class", f.pixels_per_class, "training pixels drawn per class")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--val-fraction", f.val_fraction,
                  "fraction of non-training labeled pixels used for validation")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  cmd->add_option("--split-seed", f.seed,
                  "split RNG seed; -1 reuses the checkpoint's training seed");
}

bhsrs::Split make_split(const bhsrs::LabelMap& labels, const std::string& policy,
                        int64_t pixels_per_class, double val_fraction, uint64_t seed) {
  return policy == "cc"
             ? bhsrs::cc_train_split(labels, pixels_per_class, val_fraction, seed)
             : bhsrs::random_train_split(labels, pixels_per_class, val_fraction, seed);
}

bhsrs::Split resolve_split(const SplitFlags& f, const bhsrs::LabelMap& labels,
                           uint64_t fallback_seed, json* config) {
  (*config)["split"] = {{"file", f.file},
                        {"policy", f.policy},
                        {"pixels_per_class", f.pixels_per_class},
                        {"val_fraction", f.val_fraction}};
  if (!f.file.empty()) {
    bhsrs::Split s = bhsrs::split_load(f.file);
    if (s.h != labels.h || s.w != labels.w) {
      throw bhsrs::InputError(bhsrs::cat("split is ", s.h, "x", s.w, " but labels are ",
                                         labels.h, "x", labels.w));
    }
    (*config)["split"]["policy"] = s.policy;
    (*config)["split"]["seed"] = s.seed;
    return s;
  }
  const uint64_t seed = f.seed < 0 ? fallback_seed : static_cast<uint64_t>(f.seed);
  (*config)["split"]["seed"] = seed;
  return make_split(labels, f.policy, f.pixels_per_class, f.val_fraction, seed);
}

struct EvalMetrics {
  double kappa = 0.0;
  double oa = 0.0;
  double aa = 0.0;
};

EvalMetrics eval_metrics(const std::vector<int32_t>& reference,
                         const std::vector<int32_t>& predicted, int64_t n_classes) {
  const bhsrs::Confusion c = bhsrs::confusion_matrix(reference, predicted, n_classes);
  return {bhsrs::kappa(c), bhsrs::overall_accuracy(c), bhsrs::average_accuracy(c)};
}

json metrics_json(const EvalMetrics& m) {
  return {{"kappa", m.kappa}, {"oa", m.oa}, {"aa", m.aa}};
}

std::vector<int32_t> sample_labels(const std::vector<bhsrs::Sample>& samples) {
  std::vector<int32_t> out;
  out.reserve(samples.size());
  for (const bhsrs::Sample& s : samples) out.push_back(s.label);
  return out;
}

// ---------------------------------------------------------------- synth --

struct SynthArgs {
  bhsrs::SynthConfig cfg;
  std::string prefix = "scene";
  std::string dir = ".";
};

void cmd_synth(const SynthArgs& a) {
  ensure_dir(a.dir);
  json config = {{"height", a.cfg.h},      {"width", a.cfg.w},
                 {"bands", a.cfg.bands},   {"classes", a.cfg.n_classes},
                 {"sites", a.cfg.sites_per_class}, {"noise", a.cfg.noise},
                 {"illumination", a.cfg.illumination}, {"seed", a.cfg.seed},
                 {"prefix", a.prefix}};
  Manifest manifest("synth", config);
  manifest.extra()["seeds"] = {a.cfg.seed};

  const bhsrs::SynthScene scene = bhsrs::synth_scene(a.cfg);
  const std::string raw = out_path(a.dir, a.prefix + ".raw");
  bhsrs::envi_write(raw, scene.cube);
  const std::string labels = out_path(a.dir, a.prefix + "_labels.pgm");
  bhsrs::pgm_write(labels, scene.labels);
  manifest.output(raw);
  manifest.output(raw + ".hdr");
  manifest.output(labels);
  manifest.write(a.dir);
  std::cout << "wrote " << a.cfg.h << "x" << a.cfg.w << "x" << a.cfg.bands << " scene with "
            << a.cfg.n_classes << " classes to " << raw << "\n";
}

// -------------------------------------------------------------- convert --

struct ConvertArgs {
  std::string input;
  std::string labels;  // optional: normalization statistics from labeled pixels
  std::string output = "features.hsrs";
  bhsrs::EmapConfig emap;
};

void cmd_convert(const ConvertArgs& a) {
  const std::string dir = std::filesystem::path(a.output).parent_path().string();
  if (!dir.empty()) ensure_dir(dir);
  json config = {{"input", a.input},
                 {"labels", a.labels},
                 {"output", a.output},
                 {"lambdas", a.emap.lambdas},
                 {"variance_target", a.emap.variance_target}};
  Manifest manifest("convert", config);
  manifest.input("image", a.input);

  bhsrs::HyperCube cube;
  if (a.input.size() > 4 && a.input.substr(a.input.size() - 4) == ".pgm") {
    const bhsrs::LabelMap gray = bhsrs::pgm_read(a.input);
    cube.h = gray.h;
    cube.w = gray.w;
    cube.bands = 1;
    cube.data.assign(gray.data.begin(), gray.data.end());
  } else {
    cube = bhsrs::envi_read(a.input);
  }

  bhsrs::LabelMap labels;
  const bhsrs::LabelMap* labels_ptr = nullptr;
  if (!a.labels.empty()) {
    manifest.input("labels", a.labels);
    labels = bhsrs::pgm_read(a.labels);
    labels_ptr = &labels;
  }

  const bhsrs::EmapResult result = bhsrs::emap_features(cube, labels_ptr, a.emap);
  json provenance = {{"source", a.input},
                     {"source_fnv1a64", hash_file_hex(a.input)},
                     {"lambdas", a.emap.lambdas},
                     {"variance_target", a.emap.variance_target},
                     {"base_images", result.base_images},
                     {"profile_bands", result.profile_bands},
                     {"normalization", labels_ptr != nullptr ? "labeled-pixels" : "all-pixels"}};
  bhsrs::save_features(a.output, result.features, provenance);
  manifest.output(a.output);
  manifest.extra()["features"] = {{"bands", result.features.bands},
                                  {"base_images", result.base_images},
                                  {"profile_bands", result.profile_bands},
                                  {"constant_features", result.constant_features},
                                  {"fnv1a64", hash_file_hex(a.output)}};
  manifest.write(dir.empty() ? "." : dir);
  std::cout << "converted " << cube.bands << " bands to " << result.features.bands
            << " features (" << result.base_images << " base images, profile of "
            << result.profile_bands << ") -> " << a.output << "\n";
}

// ---------------------------------------------------------------- train --

struct TrainArgs {
  std::string features;
  std::string labels;
  std::string mode = "bayesian";
  std::string dir = "run";
  uint64_t seed = 0;
  int64_t repeats = 1;
  int64_t draws = 50;
  int64_t eval_batch = 64;
  bool no_augment = false;
  SplitFlags split;  // file unused here; every repeat derives its own
  bhsrs::TrainConfig train;
  std::vector<int64_t> widths = {128, 256, 512};
  int64_t patch = 9;
  double prior_sigma = 0.1;
  double init_rho = -5.0;
  double lr = 0.001;
};

struct RepeatOutcome {
  uint64_t seed = 0;
  int64_t best_epoch = 0;
  double val_kappa = 0.0;
  bool diverged = false;
  std::vector<int32_t> flagged;
  EvalMetrics ensemble;
  EvalMetrics single;
};

void cmd_train(const TrainArgs& a) {
  ensure_dir(a.dir);
  const bhsrs::Mode mode = parse_mode(a.mode);
  json config = {{"features", a.features},
                 {"labels", a.labels},
                 {"mode", bhsrs::mode_name(mode)},
                 {"seed", a.seed},
                 {"repeats", a.repeats},
                 {"epochs", a.train.epochs},
                 {"batch", a.train.batch},
                 {"lr", a.lr},
                 {"augment", !a.no_augment},
                 {"draws", a.draws},
                 {"eval_batch", a.eval_batch},
                 {"widths", a.widths},
                 {"patch", a.patch},
                 {"prior_sigma", a.prior_sigma},
                 {"init_rho", a.init_rho},
                 {"split", {{"policy", a.split.policy},
                            {"pixels_per_class", a.split.pixels_per_class},
                            {"val_fraction", a.split.val_fraction}}},
                 {"out", a.dir}};
  Manifest manifest("train", config);
  manifest.input("features", a.features);
  manifest.input("labels", a.labels);

  const Dataset data = load_dataset(a.features, a.labels);
  const int64_t n_classes = data.labels.max_class();

  bhsrs::NetworkConfig net_config;
  net_config.mode = mode;
  net_config.in_channels = data.features.bands;
  net_config.n_classes = n_classes;
  net_config.patch = a.patch;
  net_config.widths = a.widths;
  net_config.prior_sigma = a.prior_sigma;
  net_config.init_rho = a.init_rho;

  std::vector<RepeatOutcome> outcomes(static_cast<size_t>(a.repeats));
  std::vector<uint64_t> seeds;
  for (int64_t r = 0; r < a.repeats; ++r) seeds.push_back(a.seed + static_cast<uint64_t>(r));
  manifest.extra()["seeds"] = seeds;

  run_jobs(a.repeats, env_threads(), [&](int64_t r) {
    const uint64_t seed_r = seeds[static_cast<size_t>(r)];
    const bhsrs::Split split = make_split(data.labels, a.split.policy, a.split.pixels_per_class,
                                          a.split.val_fraction, seed_r);
    bhsrs::split_save(split, out_path(a.dir, bhsrs::cat("split_r", r, ".json")));

    bhsrs::TrainConfig tc = a.train;
    tc.lr = a.lr;
    tc.augment = !a.no_augment;
    tc.seed = seed_r;
    bhsrs::TrainResult result = bhsrs::train_network(net_config, data.features, data.labels,
                                                     split, tc);
    bhsrs::write_history_csv(result.history, out_path(a.dir, bhsrs::cat("trace_r", r, ".csv")));

    bhsrs::TrainMeta meta;
    meta.epoch = result.best_epoch;
    meta.seed = seed_r;
    meta.val_kappa = result.best_val_kappa;
    bhsrs::save_model(out_path(a.dir, bhsrs::cat("model_r", r, ".bhsrs")), *result.net, meta);

    const std::vector<bhsrs::Sample> test =
        bhsrs::samples_for_role(data.labels, split, bhsrs::Role::Test);
    if (test.empty()) throw bhsrs::InputError("split left no test pixels");
    const std::vector<int32_t> reference = sample_labels(test);
    const uint64_t eval_seed = seed_r ^ kEvalSalt;

    RepeatOutcome& out = outcomes[static_cast<size_t>(r)];
    out.seed = seed_r;
    out.best_epoch = result.best_epoch;
    out.val_kappa = result.best_val_kappa;
    out.diverged = result.diverged;
    out.flagged = split.flagged_classes;

    const bhsrs::EnsembleResult ens =
        bhsrs::predict_ensemble(*result.net, data.features, test, a.draws, eval_seed, a.eval_batch);
    out.ensemble = eval_metrics(reference, ens.predicted, n_classes);
    const bhsrs::EnsembleResult one =
        bhsrs::predict_ensemble(*result.net, data.features, test, 1, eval_seed, a.eval_batch);
    out.single = eval_metrics(reference, one.predicted, n_classes);
  });

  // Per-repeat rows, then mean/std rows per evaluation flavor.
  const std::string metrics_path = out_path(a.dir, "metrics.csv");
  std::ofstream csv = open_csv(metrics_path);
  csv << "repeat,seed,eval,kappa,oa,aa\n";
  json repeats_json = json::array();
  for (int64_t r = 0; r < a.repeats; ++r) {
    const RepeatOutcome& o = outcomes[static_cast<size_t>(r)];
    csv << r << "," << o.seed << ",ensemble," << o.ensemble.kappa << "," << o.ensemble.oa << ","
        << o.ensemble.aa << "\n";
    csv << r << "," << o.seed << ",single," << o.single.kappa << "," << o.single.oa << ","
        << o.single.aa << "\n";
    repeats_json.push_back({{"repeat", r},
                            {"seed", o.seed},
                            {"best_epoch", o.best_epoch},
                            {"val_kappa", o.val_kappa},
                            {"diverged", o.diverged},
                            {"flagged_classes", o.flagged},
                            {"ensemble", metrics_json(o.ensemble)},
                            {"single", metrics_json(o.single)}});
    manifest.output(out_path(a.dir, bhsrs::cat("split_r", r, ".json")));
    manifest.output(out_path(a.dir, bhsrs::cat("trace_r", r, ".csv")));
    manifest.output(out_path(a.dir, bhsrs::cat("model_r", r, ".bhsrs")));
  }

  json aggregate = json::object();
  for (const char* flavor : {"ensemble", "single"}) {
    const bool ens = std::string(flavor) == "ensemble";
    auto stat = [&](auto pick) {
      double mean = 0.0;
      for (const RepeatOutcome& o : outcomes) mean += pick(ens ? o.ensemble : o.single);
      mean /= static_cast<double>(a.repeats);
      double var = 0.0;
      for (const RepeatOutcome& o : outcomes) {
        const double d = pick(ens ? o.ensemble : o.single) - mean;
        var += d * d;
      }
      const double std_dev =
          a.repeats > 1 ? std::sqrt(var / static_cast<double>(a.repeats - 1)) : 0.0;
      return std::pair<double, double>(mean, std_dev);
    };
    const auto [kappa_m, kappa_s] = stat([](const EvalMetrics& m) { return m.kappa; });
    const auto [oa_m, oa_s] = stat([](const EvalMetrics& m) { return m.oa; });
    const auto [aa_m, aa_s] = stat([](const EvalMetrics& m) { return m.aa; });
    csv << "mean,," << flavor << "," << kappa_m << "," << oa_m << "," << aa_m << "\n";
    csv << "std,," << flavor << "," << kappa_s << "," << oa_s << "," << aa_s << "\n";
    aggregate[flavor] = {{"kappa_mean", kappa_m}, {"kappa_std", kappa_s},
                         {"oa_mean", oa_m},       {"oa_std", oa_s},
                         {"aa_mean", aa_m},       {"aa_std", aa_s}};
    std::cout << flavor << ": kappa " << kappa_m << " +/- " << kappa_s << ", oa " << oa_m
              << " +/- " << oa_s << ", aa " << aa_m << " +/- " << aa_s << "\n";
  }
  csv.close();
  manifest.output(metrics_path);
  manifest.extra()["repeats_detail"] = repeats_json;
  manifest.extra()["metrics"] = aggregate;
  manifest.write(a.dir);
}

// ---------------------------------------------------------------- prune --

struct PruneArgs {
  std::string checkpoint;
  std::string features;
  std::string labels;
  std::string dir = "prune";
  SplitFlags split;
  double step = 0.1;
  int64_t draws = 0;  // 0: deterministic mean-mode evaluation
  int64_t eval_batch = 64;
  uint64_t seed = 0;
};

void cmd_prune(const PruneArgs& a) {
  ensure_dir(a.dir);
  if (!(a.step > 0.0 && a.step < 1.0)) {
    throw bhsrs::InputError(bhsrs::cat("step ", a.step, " outside (0, 1)"));
  }
  json config = {{"checkpoint", a.checkpoint}, {"features", a.features}, {"labels", a.labels},
                 {"step", a.step},             {"draws", a.draws},       {"seed", a.seed},
                 {"eval_batch", a.eval_batch}, {"out", a.dir}};
  Manifest manifest("prune", config);
  manifest.input("checkpoint", a.checkpoint);
  manifest.input("features", a.features);
  manifest.input("labels", a.labels);

  const Dataset data = load_dataset(a.features, a.labels);
  bhsrs::LoadedModel model = bhsrs::load_model(a.checkpoint);
  const int64_t n_classes = model.net->config().n_classes;
  if (n_classes != data.labels.max_class()) {
    throw bhsrs::InputError(bhsrs::cat("checkpoint has ", n_classes, " classes, labels have ",
                                       data.labels.max_class()));
  }

  const bhsrs::Split split = resolve_split(a.split, data.labels, model.meta.seed,
                                           &manifest.extra()["config"]);
  const std::vector<bhsrs::Sample> test =
      bhsrs::samples_for_role(data.labels, split, bhsrs::Role::Test);
  if (test.empty()) throw bhsrs::InputError("split left no test pixels");
  const std::vector<int32_t> reference = sample_labels(test);

  auto test_kappa = [&](const bhsrs::Network& net) {
    std::vector<int32_t> pred;
    if (a.draws > 0) {
      pred = bhsrs::predict_ensemble(net, data.features, test, a.draws, a.seed ^ kEvalSalt,
                                     a.eval_batch)
                 .predicted;
    } else {
      const std::vector<double> probs =
          bhsrs::predict_mean(net, data.features, test, a.eval_batch);
      pred = bhsrs::argmax_rows(probs, static_cast<int64_t>(test.size()), n_classes);
    }
    return eval_metrics(reference, pred, n_classes).kappa;
  };

  const std::string csv_path = out_path(a.dir, "prune.csv");
  std::ofstream csv = open_csv(csv_path);
  csv << "fraction,kappa,retention_ratio\n";

  const double kappa0 = test_kappa(*model.net);
  csv << 0.0 << "," << kappa0 << "," << 1.0 << "\n";
  std::cout << "fraction 0: kappa " << kappa0 << "\n";

  json curve = json::array();
  curve.push_back({{"fraction", 0.0}, {"kappa", kappa0}, {"retention_ratio", 1.0}});
  double threshold_fraction = -1.0;
  for (int64_t k = 1; k * a.step < 1.0 - 1e-9; ++k) {
    const double fraction = static_cast<double>(k) * a.step;
    bhsrs::prune_network(*model.net, fraction);
    const double kappa_f = test_kappa(*model.net);
    const double retention = kappa0 != 0.0 ? kappa_f / kappa0 : 0.0;
    csv << fraction << "," << kappa_f << "," << retention << "\n";
    curve.push_back({{"fraction", fraction}, {"kappa", kappa_f}, {"retention_ratio", retention}});
    if (threshold_fraction < 0.0 && kappa_f < 0.7 * kappa0) threshold_fraction = fraction;
    std::cout << "fraction " << fraction << ": kappa " << kappa_f << " (retention " << retention
              << ")\n";
  }
  csv.close();
  manifest.output(csv_path);

  // Final-state checkpoint with explicit keep masks so the sweep's end
  // point can be reloaded without replaying it.
  const std::string pruned_path = out_path(a.dir, "pruned_final.bhsrs");
  {
    bhsrs::TrainMeta meta = model.meta;
    bhsrs::save_model(pruned_path, *model.net, meta);
    bhsrs::Archive archive = bhsrs::archive_load(pruned_path);
    for (const bhsrs::Network::Prunable& p : model.net->prunable()) {
      bhsrs::NamedBlob mask;
      mask.name = "mask/" + p.name;
      mask.shape = p.w_or_mu.shape();
      const std::vector<double>& w = p.w_or_mu.vec();
      mask.data.assign(w.size(), 1.0);
      for (size_t i = 0; i < w.size(); ++i) {
        const bool dead = p.rho.defined() ? (w[i] == 0.0 && p.rho.vec()[i] == -1000.0)
                                          : (w[i] == 0.0);
        if (dead) mask.data[i] = 0.0;
      }
      archive.blobs.push_back(std::move(mask));
    }
    bhsrs::archive_save(archive, pruned_path);
  }
  manifest.output(pruned_path);

  manifest.extra()["metrics"] = {
      {"kappa_unpruned", kappa0},
      {"curve", curve},
      {"kappa_below_70pct_at",
       threshold_fraction < 0.0 ? json() : json(threshold_fraction)}};
  manifest.write(a.dir);
  if (threshold_fraction >= 0.0) {
    std::cout << "kappa first fell below 70% of baseline at fraction " << threshold_fraction
              << "\n";
  } else {
    std::cout << "kappa stayed at or above 70% of baseline through the sweep\n";
  }
}

// ---------------------------------------------------------- uncertainty --

struct UncertaintyArgs {
  std::string checkpoint;
  std::string features;
  std::string labels;
  std::string dir = "uncertainty";
  SplitFlags split;
  int64_t draws = 50;
  int64_t eval_batch = 64;
  uint64_t seed = 0;
  std::string reduction = "trace";
  std::vector<double> fractions;  // empty: 0, 0.05, ..., 0.5
};

void cmd_uncertainty(const UncertaintyArgs& a) {
  ensure_dir(a.dir);
  const bhsrs::UncertaintyReduction reduction = bhsrs::reduction_from_name(a.reduction);
  const std::vector<double> fractions =
      a.fractions.empty() ? bhsrs::default_filter_fractions() : a.fractions;
  json config = {{"checkpoint", a.checkpoint},
                 {"features", a.features},
                 {"labels", a.labels},
                 {"draws", a.draws},
                 {"eval_batch", a.eval_batch},
                 {"seed", a.seed},
                 {"reduction", a.reduction},
                 {"fractions", fractions},
                 {"out", a.dir}};
  Manifest manifest("uncertainty", config);
  manifest.input("checkpoint", a.checkpoint);
  manifest.input("features", a.features);
  manifest.input("labels", a.labels);

  const Dataset data = load_dataset(a.features, a.labels);
  bhsrs::LoadedModel model = bhsrs::load_model(a.checkpoint);
  const int64_t n_classes = model.net->config().n_classes;

  const bhsrs::Split split = resolve_split(a.split, data.labels, model.meta.seed,
                                           &manifest.extra()["config"]);
  const std::vector<bhsrs::Sample> test =
      bhsrs::samples_for_role(data.labels, split, bhsrs::Role::Test);
  if (test.empty()) throw bhsrs::InputError("split left no test pixels");
  const std::vector<int32_t> reference = sample_labels(test);

  const bhsrs::EnsembleResult ens = bhsrs::predict_ensemble(
      *model.net, data.features, test, a.draws, a.seed ^ kEvalSalt, a.eval_batch);
  const std::vector<double> uncertainty = bhsrs::scalar_uncertainty(ens, reduction);

  const std::string csv_path = out_path(a.dir, "filter.csv");
  std::ofstream csv = open_csv(csv_path);
  csv << "fraction,policy,kappa\n";
  json curves = json::object();
  for (const bhsrs::FilterPolicy policy :
       {bhsrs::FilterPolicy::MostUncertain, bhsrs::FilterPolicy::Random}) {
    const std::vector<bhsrs::FilterPoint> curve = bhsrs::uncertainty_filter_curve(
        uncertainty, ens.predicted, reference, n_classes, fractions, policy, a.seed);
    json rows = json::array();
    for (const bhsrs::FilterPoint& pt : curve) {
      csv << pt.fraction << "," << bhsrs::filter_policy_name(policy) << "," << pt.kappa << "\n";
      rows.push_back({{"fraction", pt.fraction},
                      {"kept", pt.kept},
                      {"kappa", pt.kappa},
                      {"oa", pt.oa}});
    }
    curves[bhsrs::filter_policy_name(policy)] = rows;
  }
  csv.close();
  manifest.output(csv_path);

  // Correctness map: 0 outside the test set, 255 right, 128 wrong.
  // Uncertainty map: 0 outside, test pixels scaled into 1..255.
  bhsrs::LabelMap correct_map;
  correct_map.h = data.labels.h;
  correct_map.w = data.labels.w;
  correct_map.data.assign(static_cast<size_t>(data.labels.pixels()), 0);
  bhsrs::LabelMap unc_map = correct_map;
  double lo = 0.0, hi = 0.0;
  if (!uncertainty.empty()) {
    const auto [mn, mx] = std::minmax_element(uncertainty.begin(), uncertainty.end());
    lo = *mn;
    hi = *mx;
  }
  for (size_t i = 0; i < test.size(); ++i) {
    const int64_t p = test[i].y * data.labels.w + test[i].x;
    correct_map.data[static_cast<size_t>(p)] =
        ens.predicted[i] == reference[i] ? 255 : 128;
    const double t = hi > lo ? (uncertainty[i] - lo) / (hi - lo) : 0.0;
    unc_map.data[static_cast<size_t>(p)] = 1 + static_cast<int32_t>(std::lround(254.0 * t));
  }
  const std::string correct_path = out_path(a.dir, "correctness.pgm");
  const std::string unc_path = out_path(a.dir, "uncertainty.pgm");
  bhsrs::pgm_write(correct_path, correct_map);
  bhsrs::pgm_write(unc_path, unc_map);
  manifest.output(correct_path);
  manifest.output(unc_path);

  const EvalMetrics unfiltered = eval_metrics(reference, ens.predicted, n_classes);
  manifest.extra()["metrics"] = {{"unfiltered", metrics_json(unfiltered)},
                                 {"curves", curves},
                                 {"uncertainty_min", lo},
                                 {"uncertainty_max", hi}};
  manifest.write(a.dir);
  std::cout << "unfiltered kappa " << unfiltered.kappa << " over " << test.size()
            << " test pixels; curves in " << csv_path << "\n";
}

// ----------------------------------------------------------- split-stats --

struct SplitStatsArgs {
  std::string labels;
  std::string dir = "split-stats";
  SplitFlags split;
  uint64_t seed = 0;
};

void cmd_split_stats(const SplitStatsArgs& a) {
  ensure_dir(a.dir);
  json config = {{"labels", a.labels}, {"seed", a.seed}, {"out", a.dir}};
  Manifest manifest("split-stats", config);
  manifest.input("labels", a.labels);

  bhsrs::LabelMap labels = bhsrs::pgm_read(a.labels);
  labels.validate();
  SplitFlags flags = a.split;
  if (flags.seed < 0) flags.seed = static_cast<int64_t>(a.seed);
  const bhsrs::Split split = resolve_split(flags, labels, a.seed, &manifest.extra()["config"]);
  const bhsrs::OverlapHistogram hist = bhsrs::overlap_histogram(labels, split);

  const std::string csv_path = out_path(a.dir, "overlap.csv");
  std::ofstream csv = open_csv(csv_path);
  csv << "distance,count,cumulative_fraction\n";
  for (size_t d = 0; d < hist.counts.size(); ++d) {
    csv << d << "," << hist.counts[d] << ","
        << hist.fraction_below(static_cast<int64_t>(d) + 1) << "\n";
  }
  csv.close();
  manifest.output(csv_path);

  const double below9 = hist.fraction_below(9);
  manifest.extra()["metrics"] = {{"evaluation_pixels", hist.total},
                                 {"unreachable", hist.unreachable},
                                 {"fraction_below_9", below9},
                                 {"train_pixels", split.count(bhsrs::Role::Train)},
                                 {"flagged_classes", split.flagged_classes}};
  manifest.write(a.dir);
  std::cout << "policy " << split.policy << ": " << hist.total << " evaluation pixels, "
            << 100.0 * below9 << "% strictly within distance 9 of a same-class training pixel ("
            << hist.unreachable << " unreachable)\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian patch classifier for hyperspectral scenes"};
  app.require_subcommand(1);
  app.set_config("--config", "", "read option defaults from a TOML-style file");
  app.set_version_flag("--version", kVersion);

  SynthArgs synth;
  CLI::App* c_synth = app.add_subcommand("synth", "generate a labeled synthetic scene");
  c_synth->add_option("--height", synth.cfg.h)->capture_default_str();
  c_synth->add_option("--width", synth.cfg.w)->capture_default_str();
  c_synth->add_option("--bands", synth.cfg.bands)->capture_default_str();
  c_synth->add_option("--classes", synth.cfg.n_classes)->capture_default_str();
  c_synth->add_option("--sites", synth.cfg.sites_per_class, "Voronoi sites per class")
      ->capture_default_str();
  c_synth->add_option("--noise", synth.cfg.noise)->capture_default_str();
  c_synth->add_option("--illumination", synth.cfg.illumination)->capture_default_str();
  c_synth->add_option("--seed", synth.cfg.seed)->capture_default_str();
  c_synth->add_option("--prefix", synth.prefix, "output file stem")->capture_default_str();
  c_synth->add_option("--out", synth.dir, "output directory")->capture_default_str();

  ConvertArgs convert;
  CLI::App* c_convert =
      app.add_subcommand("convert", "extract normalized morphological-profile features");
  c_convert->add_option("--input", convert.input, "ENVI header/data path or a PGM image")
      ->required()
      ->check(CLI::ExistingFile);
  c_convert->add_option("--labels", convert.labels,
                        "PGM class map; normalization statistics then use labeled pixels only")
      ->check(CLI::ExistingFile);
  c_convert->add_option("--out", convert.output, "feature cache to write")->capture_default_str();
  c_convert->add_option("--lambdas", convert.emap.lambdas, "area thresholds")
      ->delimiter(',')
      ->capture_default_str();
  c_convert->add_option("--variance", convert.emap.variance_target,
                        "explained-variance target of both projections")
      ->check(CLI::Range(1e-6, 1.0))
      ->capture_default_str();

  TrainArgs train;
  CLI::App* c_train = app.add_subcommand("train", "train, select on validation, score the test set");
  c_train->add_option("--features", train.features)->required()->check(CLI::ExistingFile);
  c_train->add_option("--labels", train.labels)->required()->check(CLI::ExistingFile);
  c_train->add_option("--mode", train.mode, "bayesian (bnn) or cnn")
      ->check(CLI::IsMember({"bayesian", "bnn", "cnn"}))
      ->capture_default_str();
  c_train->add_option("--seed", train.seed, "base seed; repeat r runs with seed+r")
      ->capture_default_str();
  c_train->add_option("--repeats", train.repeats)->check(CLI::PositiveNumber)
      ->capture_default_str();
  c_train->add_option("--epochs", train.train.epochs)->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  c_train->add_option("--batch", train.train.batch)->check(CLI::PositiveNumber)
      ->capture_default_str();
  c_train->add_option("--lr", train.lr)->capture_default_str();
  c_train->add_option("--draws", train.draws, "ensemble size for test scoring")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  c_train->add_option("--eval-batch", train.eval_batch)->check(CLI::PositiveNumber)
      ->capture_default_str();
  c_train->add_flag("--no-augment", train.no_augment, "disable flip/rotation augmentation");
  c_train->add_option("--widths", train.widths, "channels of the three conv blocks")
      ->delimiter(',')
      ->capture_default_str();
  c_train->add_option("--patch", train.patch)->check(CLI::PositiveNumber)->capture_default_str();
  c_train->add_option("--prior-sigma", train.prior_sigma)->capture_default_str();
  c_train->add_option("--init-rho", train.init_rho)->capture_default_str();
  c_train->add_option("--split-policy", train.split.policy)
      ->check(CLI::IsMember({"cc", "random"}))
      ->capture_default_str();
  c_train->add_option("--pixels-per-class", train.split.pixels_per_class)
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  c_train->add_option("--val-fraction", train.split.val_fraction)
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  c_train->add_option("--out", train.dir, "output directory")->capture_default_str();

  PruneArgs prune;
  CLI::App* c_prune = app.add_subcommand("prune", "sweep global weight pruning on a checkpoint");
  c_prune->add_option("--checkpoint", prune.checkpoint)->required()->check(CLI::ExistingFile);
  c_prune->add_option("--features", prune.features)->required()->check(CLI::ExistingFile);
  c_prune->add_option("--labels", prune.labels)->required()->check(CLI::ExistingFile);
  c_prune->add_option("--step", prune.step, "pruned-fraction increment")->capture_default_str();
  c_prune->add_option("--draws", prune.draws, "ensemble size; 0 scores the posterior means")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  c_prune->add_option("--eval-batch", prune.eval_batch)->capture_default_str();
  c_prune->add_option("--seed", prune.seed, "seed for ensemble draws")->capture_default_str();
  c_prune->add_option("--out", prune.dir, "output directory")->capture_default_str();
  add_split_flags(c_prune, prune.split);

  UncertaintyArgs unc;
  CLI::App* c_unc =
      app.add_subcommand("uncertainty", "ensemble uncertainty report, filter curves and maps");
  c_unc->add_option("--checkpoint", unc.checkpoint)->required()->check(CLI::ExistingFile);
  c_unc->add_option("--features", unc.features)->required()->check(CLI::ExistingFile);
  c_unc->add_option("--labels", unc.labels)->required()->check(CLI::ExistingFile);
  c_unc->add_option("--draws", unc.draws)->check(CLI::PositiveNumber)->capture_default_str();
  c_unc->add_option("--eval-batch", unc.eval_batch)->capture_default_str();
  c_unc->add_option("--seed", unc.seed, "seed for draws and the random filter policy")
      ->capture_default_str();
  c_unc->add_option("--reduction", unc.reduction, "trace or predicted-class")
      ->check(CLI::IsMember({"trace", "predicted-class"}))
      ->capture_default_str();
  c_unc->add_option("--fractions", unc.fractions, "filter fractions (default 0,0.05,...,0.5)")
      ->delimiter(',');
  c_unc->add_option("--out", unc.dir, "output directory")->capture_default_str();
  add_split_flags(c_unc, unc.split);

  SplitStatsArgs stats;
  CLI::App* c_stats =
      app.add_subcommand("split-stats", "train/evaluation overlap distance histogram");
  c_stats->add_option("--labels", stats.labels)->required()->check(CLI::ExistingFile);
  c_stats->add_option("--seed", stats.seed)->capture_default_str();
  c_stats->add_option("--out", stats.dir, "output directory")->capture_default_str();
  add_split_flags(c_stats, stats.split);

  CLI11_PARSE(app, argc, argv);

  try {
    if (c_synth->parsed()) cmd_synth(synth);
    if (c_convert->parsed()) cmd_convert(convert);
    if (c_train->parsed()) cmd_train(train);
    if (c_prune->parsed()) cmd_prune(prune);
    if (c_unc->parsed()) cmd_uncertainty(unc);
    if (c_stats->parsed()) cmd_split_stats(stats);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
