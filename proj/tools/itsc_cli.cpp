// Command-line front end.
//
//   itsc synth            generate CBF / TwoPatterns benchmark files
//   itsc mask             synthesize an MCAR mask cache for a dataset file
//   itsc train            train a model; writes checkpoint, loss CSV, report
//   itsc eval             evaluate a checkpoint on a dataset
//   itsc export-features  dump per-sample pre-logit feature vectors to CSV
//
// Exit codes: 0 success, 2 usage/validation error, 3 runtime/numeric failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include <itsc/itsc.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw itsc::io_error("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw itsc::io_error("cannot write file: " + path);
  out << content;
}

std::string dataset_stem(const std::string& path) { return fs::path(path).stem().string(); }

// Loads a dataset, applies the MCAR protocol through the cache file (creating
// it when absent), and z-normalizes. ratio == 0 keeps natural masks.
itsc::DatasetBundle load_prepared(const std::string& path, double ratio, std::uint64_t mask_seed,
                                  std::string* mask_path_out = nullptr) {
  itsc::DatasetBundle bundle = itsc::load_ucr(path);
  if (ratio > 0.0) {
    const std::string mask_path = itsc::default_mask_path(path, ratio, mask_seed);
    if (fs::exists(mask_path)) {
      bundle = itsc::apply_mask_cache(std::move(bundle), mask_path);
    } else {
      bundle = itsc::apply_mcar(std::move(bundle), ratio, mask_seed);
      itsc::save_mask_cache(bundle, mask_path, dataset_stem(path), ratio, mask_seed);
    }
    if (mask_path_out) *mask_path_out = mask_path;
  }
  return itsc::znormalize(std::move(bundle));
}

void set_threads(int threads) {
#ifdef _OPENMP
  if (threads > 0) omp_set_num_threads(threads);
#else
  (void)threads;
#endif
}

std::string output_root() {
  if (const char* env = std::getenv("ITSC_OUTPUT_ROOT"); env && *env) return env;
  return "runs";
}

void print_metrics_table(const itsc::MetricsReport& m, std::ostream& os) {
  os << std::left << std::setw(18) << "metric" << "value\n";
  auto row = [&](const char* k, double v) {
    os << std::left << std::setw(18) << k << std::fixed << std::setprecision(4) << v << "\n";
  };
  row("accuracy", m.accuracy);
  row("macro_precision", m.macro_precision);
  row("macro_recall", m.macro_recall);
  row("macro_f1", m.macro_f1);
  os << std::left << std::setw(18) << "samples" << m.num_samples << "\n";
  os << "confusion (rows = true class, cols = predicted):\n";
  for (int t = 0; t < m.num_classes; ++t) {
    os << "  ";
    for (int p = 0; p < m.num_classes; ++p) os << std::setw(7) << m.confusion_at(t, p);
    os << "\n";
  }
  os.unsetf(std::ios::fixed);
}

json metrics_to_json(const itsc::MetricsReport& m) {
  return {{"accuracy", m.accuracy},
          {"macro_precision", m.macro_precision},
          {"macro_recall", m.macro_recall},
          {"macro_f1", m.macro_f1},
          {"num_classes", m.num_classes},
          {"num_samples", m.num_samples},
          {"confusion", m.confusion}};
}

itsc::Variant config_variant(const itsc::RunConfig& cfg) {
  if (cfg.zero_fill) return itsc::Variant::zero_fill;
  if (cfg.linear_head) return itsc::Variant::linear_head;
  return itsc::Variant::full;
}

int cmd_synth(const std::string& name, const std::string& out_dir, int train_per_class,
              int test_per_class, int length, std::uint64_t seed) {
  fs::create_directories(out_dir);
  std::string train_file, test_file;
  if (name == "cbf") {
    train_file = (fs::path(out_dir) / "CBF_TRAIN.tsv").string();
    test_file = (fs::path(out_dir) / "CBF_TEST.tsv").string();
    itsc::write_cbf_ucr(train_file, train_per_class, length, seed);
    itsc::write_cbf_ucr(test_file, test_per_class, length, seed + 1);
  } else if (name == "two-patterns") {
    train_file = (fs::path(out_dir) / "TwoPatterns_TRAIN.tsv").string();
    test_file = (fs::path(out_dir) / "TwoPatterns_TEST.tsv").string();
    itsc::write_two_patterns_ucr(train_file, train_per_class, length, seed);
    itsc::write_two_patterns_ucr(test_file, test_per_class, length, seed + 1);
  } else {
    throw CLI::ValidationError("--dataset must be cbf or two-patterns");
  }
  std::cout << "wrote " << train_file << "\nwrote " << test_file << "\n";
  return 0;
}

int cmd_mask(const std::string& data_path, double ratio, std::uint64_t seed,
             std::string out_path) {
  itsc::DatasetBundle bundle = itsc::load_ucr(data_path);
  bundle = itsc::apply_mcar(std::move(bundle), ratio, seed);
  const std::string rendered =
      itsc::render_mask_cache(bundle, dataset_stem(data_path), ratio, seed);
  if (out_path.empty()) out_path = itsc::default_mask_path(data_path, ratio, seed);
  if (fs::exists(out_path)) {
    if (read_file(out_path) == rendered) {
      std::cout << "mask cache verified (unchanged): " << out_path << "\n";
      return 0;
    }
    throw itsc::numeric_error("existing mask cache disagrees with (dataset, ratio, seed): " +
                              out_path);
  }
  write_file(out_path, rendered);
  long long zeros = 0, total = 0;
  for (const auto& s : bundle.samples)
    for (double v : s.mask.data) {
      zeros += v == 0.0 ? 1 : 0;
      ++total;
    }
  std::cout << "wrote " << out_path << "  (" << zeros << "/" << total
            << " positions masked out, " << std::fixed << std::setprecision(4)
            << static_cast<double>(zeros) / total << ")\n";
  return 0;
}

int cmd_train(itsc::RunConfig cfg) {
  cfg.validate();
  if (cfg.test_path.empty()) throw CLI::ValidationError("--test is required for train");
  set_threads(cfg.threads);

  std::string train_mask_path, test_mask_path;
  itsc::DatasetBundle train_bundle =
      load_prepared(cfg.train_path, cfg.missing_ratio, cfg.resolved_mask_seed(), &train_mask_path);
  itsc::DatasetBundle test_bundle = load_prepared(cfg.test_path, cfg.missing_ratio,
                                                  cfg.resolved_mask_seed() + 1, &test_mask_path);
  if (test_bundle.dims != train_bundle.dims)
    throw itsc::shape_error("train/test dimensionality mismatch");
  if (test_bundle.num_classes != train_bundle.num_classes)
    throw itsc::shape_error("train/test class count mismatch");

  if (cfg.out_dir.empty()) {
    std::string name = dataset_stem(cfg.train_path) + "_r";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", cfg.missing_ratio);
    name += buf;
    name += "_s" + std::to_string(cfg.seed);
    if (cfg.zero_fill) name += "_zerofill";
    if (cfg.linear_head) name += "_linearhead";
    cfg.out_dir = (fs::path(output_root()) / name).string();
  }
  fs::create_directories(cfg.out_dir);
  const std::string hash = cfg.hash();

  itsc::MsflSpec spec;
  spec.num_layers = cfg.num_layers;
  spec.scales_per_layer = cfg.scales;
  spec.dilation = cfg.dilation;
  spec.branch_channels = cfg.branch_channels;
  auto model = itsc::Model<float>::make(config_variant(cfg), train_bundle.dims,
                                        train_bundle.num_classes, cfg.hidden_size, spec,
                                        cfg.seed);

  const auto train_data = itsc::to_series<float>(train_bundle);
  const auto test_data = itsc::to_series<float>(test_bundle);

  itsc::TrainSettings settings;
  settings.epochs = cfg.epochs;
  settings.batch_size = cfg.resolved_batch_size(static_cast<int>(train_data.size()));
  settings.learning_rate = cfg.learning_rate;
  settings.weights = {cfg.alpha, cfg.beta};
  settings.seed = cfg.seed;

  const std::string losses_path = (fs::path(cfg.out_dir) / "losses.csv").string();
  std::ofstream losses(losses_path, std::ios::binary);
  if (!losses) throw itsc::io_error("cannot write " + losses_path);
  losses << "epoch,l_imp,l_cls,l_total,train_acc\n";
  losses << std::setprecision(10);

  itsc::save_config_file(cfg, (fs::path(cfg.out_dir) / "config.txt").string());

  std::cout << "training " << itsc::variant_name(model.variant) << " model on "
            << cfg.train_path << "  (" << train_data.size() << " samples, T="
            << train_bundle.length << ", C=" << train_bundle.num_classes << ", batch "
            << settings.batch_size << ", " << settings.epochs << " epochs)\n";

  const auto t0 = std::chrono::steady_clock::now();
  std::vector<itsc::EpochStats> history;
  auto stream_epoch = [&](const itsc::EpochStats& es) {
    losses << es.epoch << ',' << es.l_imp << ',' << es.l_cls << ',' << es.l_total << ','
           << es.train_acc << '\n';
    losses.flush();
    if (es.epoch % 10 == 9 || es.epoch == 0)
      std::cout << "  epoch " << es.epoch << "  l_total " << es.l_total << "  train_acc "
                << es.train_acc << "\n";
  };
  try {
    history = itsc::train(model, train_data, settings, nullptr, stream_epoch);
  } catch (const itsc::numeric_error& e) {
    json failed = {{"status", "failed"}, {"error", e.what()}, {"config_hash", hash},
                   {"config", cfg.to_json()}, {"loss_history", losses_path}};
    write_file((fs::path(cfg.out_dir) / "report.json").string(), failed.dump(2) + "\n");
    throw;
  }
  const double total_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const auto metrics = itsc::evaluate(model, test_data);

  const std::string ckpt_path = (fs::path(cfg.out_dir) / "model.ckpt").string();
  itsc::CheckpointMeta meta;
  meta.seed = cfg.seed;
  meta.config_hash = hash;
  meta.series_length = train_bundle.length;
  meta.config = cfg.to_json();
  itsc::save_checkpoint(model, meta, ckpt_path);

  json report;
  report["status"] = "ok";
  report["config_hash"] = hash;
  report["config"] = cfg.to_json();
  report["dataset"] = {{"train_path", cfg.train_path},
                       {"test_path", cfg.test_path},
                       {"train_checksum", train_bundle.checksum},
                       {"test_checksum", test_bundle.checksum},
                       {"num_classes", train_bundle.num_classes},
                       {"series_length", train_bundle.length},
                       {"dims", train_bundle.dims},
                       {"train_samples", train_data.size()},
                       {"test_samples", test_data.size()}};
  if (cfg.missing_ratio > 0)
    report["masks"] = {{"train_mask", train_mask_path},
                       {"test_mask", test_mask_path},
                       {"train_mask_seed", cfg.resolved_mask_seed()},
                       {"test_mask_seed", cfg.resolved_mask_seed() + 1}};
  report["metrics"] = metrics_to_json(metrics);
  report["loss_history"] = losses_path;
  report["checkpoint"] = ckpt_path;
  report["final_train_acc"] = history.empty() ? 0.0 : history.back().train_acc;
  double mean_epoch = 0;
  for (const auto& h : history) mean_epoch += h.seconds;
  if (!history.empty()) mean_epoch /= static_cast<double>(history.size());
  report["wall_clock"] = {{"total_seconds", total_seconds},
                          {"mean_epoch_seconds", mean_epoch}};
  write_file((fs::path(cfg.out_dir) / "report.json").string(), report.dump(2) + "\n");

  std::cout << "\n";
  print_metrics_table(metrics, std::cout);
  std::cout << "\ncheckpoint: " << ckpt_path << "\nreport:     "
            << (fs::path(cfg.out_dir) / "report.json").string() << "\n";
  return 0;
}

// Shared by eval and export-features: load checkpoint + dataset, verify
// compatibility, apply the recorded (or overridden) masking protocol.
struct EvalContext {
  itsc::LoadedCheckpoint<float> ckpt;
  itsc::DatasetBundle bundle;
  std::vector<itsc::LabeledSeries<float>> data;
};

EvalContext prepare_eval(const std::string& ckpt_path, const std::string& data_path,
                         const std::string& mask_path, double ratio, std::uint64_t mask_seed,
                         const std::string& expect_config) {
  EvalContext ctx;
  ctx.ckpt = itsc::load_checkpoint<float>(ckpt_path);
  if (!expect_config.empty()) {
    const itsc::RunConfig expect = itsc::load_config_file(expect_config);
    if (expect.hash() != ctx.ckpt.meta.config_hash)
      throw itsc::shape_error("config hash mismatch: checkpoint " + ctx.ckpt.meta.config_hash +
                              ", " + expect_config + " " + expect.hash());
  }
  itsc::DatasetBundle bundle = itsc::load_ucr(data_path);
  if (!mask_path.empty()) {
    bundle = itsc::apply_mask_cache(std::move(bundle), mask_path);
  } else {
    double use_ratio = ratio;
    std::uint64_t use_seed = mask_seed;
    const json& cfg = ctx.ckpt.meta.config;
    if (use_ratio < 0 && !cfg.is_null()) {
      // default to the recorded protocol: test-split mask seed is mask_seed+1
      use_ratio = cfg.value("missing_ratio", 0.0);
      use_seed = cfg.value("mask_seed", std::uint64_t{0}) + 1;
    }
    if (use_ratio > 0) {
      const std::string cache = itsc::default_mask_path(data_path, use_ratio, use_seed);
      if (fs::exists(cache)) {
        bundle = itsc::apply_mask_cache(std::move(bundle), cache);
      } else {
        bundle = itsc::apply_mcar(std::move(bundle), use_ratio, use_seed);
        itsc::save_mask_cache(bundle, cache, dataset_stem(data_path), use_ratio, use_seed);
      }
    }
  }
  ctx.bundle = itsc::znormalize(std::move(bundle));
  if (ctx.bundle.dims != ctx.ckpt.model.input_dims)
    throw itsc::shape_error("checkpoint expects " + std::to_string(ctx.ckpt.model.input_dims) +
                            "-dim series, dataset has " + std::to_string(ctx.bundle.dims));
  if (ctx.bundle.num_classes > ctx.ckpt.model.num_classes)
    throw itsc::shape_error("dataset has " + std::to_string(ctx.bundle.num_classes) +
                            " classes, checkpoint was trained with " +
                            std::to_string(ctx.ckpt.model.num_classes));
  ctx.data = itsc::to_series<float>(ctx.bundle);
  return ctx;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data_path,
             const std::string& mask_path, double ratio, std::uint64_t mask_seed,
             const std::string& expect_config, const std::string& out_path) {
  EvalContext ctx = prepare_eval(ckpt_path, data_path, mask_path, ratio, mask_seed, expect_config);
  const auto metrics = itsc::evaluate(ctx.ckpt.model, ctx.data);
  json j = {{"checkpoint", ckpt_path},
            {"dataset", data_path},
            {"config_hash", ctx.ckpt.meta.config_hash},
            {"metrics", metrics_to_json(metrics)}};
  print_metrics_table(metrics, std::cout);
  if (!out_path.empty()) {
    write_file(out_path, j.dump(2) + "\n");
    std::cout << "\nwrote " << out_path << "\n";
  } else {
    std::cout << "\n" << j.dump(2) << "\n";
  }
  return 0;
}

int cmd_export_features(const std::string& ckpt_path, const std::string& data_path,
                        const std::string& mask_path, double ratio, std::uint64_t mask_seed,
                        const std::string& out_path) {
  EvalContext ctx = prepare_eval(ckpt_path, data_path, mask_path, ratio, mask_seed, {});
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw itsc::io_error("cannot write " + out_path);
  const int feat_dim = ctx.ckpt.model.feature_dim();
  out << "id,label";
  for (int i = 0; i < feat_dim; ++i) out << ",f" << i;
  out << "\n" << std::setprecision(9);
  itsc::BatchWork<float> work;
  std::vector<int> idx;
  const int chunk = 64;
  for (std::size_t start = 0; start < ctx.data.size(); start += chunk) {
    idx.clear();
    for (std::size_t i = start; i < std::min(ctx.data.size(), start + chunk); ++i)
      idx.push_back(static_cast<int>(i));
    itsc::Matrix<float> features;
    itsc::predict(ctx.ckpt.model, ctx.data, idx, work, &features);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const auto& s = ctx.data[idx[k]];
      out << s.id << ',' << s.label;
      for (int i = 0; i < feat_dim; ++i) out << ',' << features[static_cast<int>(k)][i];
      out << '\n';
    }
  }
  std::cout << "wrote " << out_path << "  (" << ctx.data.size() << " rows, " << feat_dim
            << " features)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"incomplete time series classification: GRU imputation + multi-scale conv"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate synthetic benchmark datasets");
  std::string synth_dataset, synth_out = "data";
  int synth_train_pc = 0, synth_test_pc = 0, synth_len = 128;
  std::uint64_t synth_seed = 0;
  synth->add_option("--dataset", synth_dataset, "cbf | two-patterns")->required();
  synth->add_option("--out-dir", synth_out, "output directory (default data/)");
  synth->add_option("--train-per-class", synth_train_pc, "train samples per class");
  synth->add_option("--test-per-class", synth_test_pc, "test samples per class");
  synth->add_option("--length", synth_len, "series length (default 128)");
  synth->add_option("--seed", synth_seed, "generator seed");

  // mask
  auto* mask = app.add_subcommand("mask", "synthesize an MCAR mask cache");
  std::string mask_data, mask_out;
  double mask_ratio = 0;
  std::uint64_t mask_seed = 0;
  mask->add_option("--data", mask_data, "dataset file")->required();
  mask->add_option("--ratio", mask_ratio, "missing ratio in (0,1)")->required();
  mask->add_option("--seed", mask_seed, "mask seed")->required();
  mask->add_option("--out", mask_out, "cache path (default <data>.r<ratio>.s<seed>.mask)");

  // train
  auto* tr = app.add_subcommand("train", "train a model");
  itsc::RunConfig cfg;
  std::string config_file;
  tr->add_option("--config", config_file, "key=value config file (flags override)");
  tr->add_option("--train", cfg.train_path, "train split file");
  tr->add_option("--test", cfg.test_path, "test split file");
  tr->add_option("--ratio", cfg.missing_ratio, "MCAR missing ratio in (0,1); 0 = natural masks");
  tr->add_option("--seed", cfg.seed, "run seed (init, shuffling)");
  tr->add_option("--mask-seed", cfg.mask_seed, "mask seed (default: run seed; test uses +1)");
  tr->add_option("--hidden", cfg.hidden_size, "GRU hidden size (default 128)");
  tr->add_option("--layers", cfg.num_layers, "MSFL layers N (default 2)");
  tr->add_option("--scales", cfg.scales, "kernel scales K per layer (default 6)");
  tr->add_option("--branch-channels", cfg.branch_channels, "conv filters per branch (default 32)");
  tr->add_option("--dilation", cfg.dilation, "dilation on large-kernel layers (default 2)");
  tr->add_option("--alpha", cfg.alpha, "classification loss weight (default 1)");
  tr->add_option("--beta", cfg.beta, "imputation loss weight (default 1)");
  tr->add_option("--lr", cfg.learning_rate, "Adam learning rate (default 3e-4)");
  tr->add_option("--batch", cfg.batch_size, "batch size (default: 64, or 16 if train < 100)");
  tr->add_option("--epochs", cfg.epochs, "training epochs (default 100)");
  tr->add_option("--out", cfg.out_dir, "output directory (default $ITSC_OUTPUT_ROOT/<auto>)");
  tr->add_option("--threads", cfg.threads, "worker threads (default: hardware)");
  tr->add_flag("--zero-fill", cfg.zero_fill, "ablation: no imputation model, zeros at missing");
  tr->add_flag("--linear-head", cfg.linear_head, "ablation: no MSFL, linear classifier on h_T");

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string ev_ckpt, ev_data, ev_mask, ev_expect_config, ev_out;
  double ev_ratio = -1;
  std::uint64_t ev_mask_seed = 0;
  ev->add_option("--checkpoint", ev_ckpt, "checkpoint file")->required();
  ev->add_option("--data", ev_data, "dataset file")->required();
  ev->add_option("--mask", ev_mask, "explicit mask cache file");
  ev->add_option("--ratio", ev_ratio, "MCAR ratio (default: recorded test protocol)");
  ev->add_option("--mask-seed", ev_mask_seed, "mask seed when --ratio is given");
  ev->add_option("--expect-config", ev_expect_config,
                 "config file that must hash-match the checkpoint");
  ev->add_option("--out", ev_out, "metrics JSON output path");

  // export-features
  auto* ex = app.add_subcommand("export-features", "dump pre-logit feature vectors");
  std::string ex_ckpt, ex_data, ex_mask, ex_out = "features.csv";
  double ex_ratio = -1;
  std::uint64_t ex_mask_seed = 0;
  ex->add_option("--checkpoint", ex_ckpt, "checkpoint file")->required();
  ex->add_option("--data", ex_data, "dataset file")->required();
  ex->add_option("--mask", ex_mask, "explicit mask cache file");
  ex->add_option("--ratio", ex_ratio, "MCAR ratio (default: recorded test protocol)");
  ex->add_option("--mask-seed", ex_mask_seed, "mask seed when --ratio is given");
  ex->add_option("--out", ex_out, "output CSV path (default features.csv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitUsage;
  }

  try {
    if (synth->parsed()) {
      if (synth_train_pc <= 0) synth_train_pc = synth_dataset == "cbf" ? 10 : 250;
      if (synth_test_pc <= 0) synth_test_pc = synth_dataset == "cbf" ? 300 : 1000;
      return cmd_synth(synth_dataset, synth_out, synth_train_pc, synth_test_pc, synth_len,
                       synth_seed);
    }
    if (mask->parsed()) return cmd_mask(mask_data, mask_ratio, mask_seed, mask_out);
    if (tr->parsed()) {
      if (!config_file.empty()) {
        // config file first, explicitly-passed flags override
        itsc::RunConfig merged = itsc::load_config_file(config_file);
        if (tr->count("--train")) merged.train_path = cfg.train_path;
        if (tr->count("--test")) merged.test_path = cfg.test_path;
        if (tr->count("--ratio")) merged.missing_ratio = cfg.missing_ratio;
        if (tr->count("--seed")) merged.seed = cfg.seed;
        if (tr->count("--mask-seed")) merged.mask_seed = cfg.mask_seed;
        if (tr->count("--hidden")) merged.hidden_size = cfg.hidden_size;
        if (tr->count("--layers")) merged.num_layers = cfg.num_layers;
        if (tr->count("--scales")) merged.scales = cfg.scales;
        if (tr->count("--branch-channels")) merged.branch_channels = cfg.branch_channels;
        if (tr->count("--dilation")) merged.dilation = cfg.dilation;
        if (tr->count("--alpha")) merged.alpha = cfg.alpha;
        if (tr->count("--beta")) merged.beta = cfg.beta;
        if (tr->count("--lr")) merged.learning_rate = cfg.learning_rate;
        if (tr->count("--batch")) merged.batch_size = cfg.batch_size;
        if (tr->count("--epochs")) merged.epochs = cfg.epochs;
        if (tr->count("--out")) merged.out_dir = cfg.out_dir;
        if (tr->count("--threads")) merged.threads = cfg.threads;
        if (tr->count("--zero-fill")) merged.zero_fill = cfg.zero_fill;
        if (tr->count("--linear-head")) merged.linear_head = cfg.linear_head;
        return cmd_train(merged);
      }
      return cmd_train(cfg);
    }
    if (ev->parsed())
      return cmd_eval(ev_ckpt, ev_data, ev_mask, ev_ratio, ev_mask_seed, ev_expect_config, ev_out);
    if (ex->parsed())
      return cmd_export_features(ex_ckpt, ex_data, ex_mask, ex_ratio, ex_mask_seed, ex_out);
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const itsc::io_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const itsc::shape_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const itsc::numeric_error& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
