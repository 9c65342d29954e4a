#include "calseq/commands.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "calseq/backbone.hpp"
#include "calseq/calibration.hpp"
#include "calseq/checkpoint.hpp"
#include "calseq/config.hpp"
#include "calseq/corpus.hpp"
#include "calseq/error.hpp"
#include "calseq/evaluate.hpp"
#include "calseq/io.hpp"
#include "calseq/rerank.hpp"

namespace fs = std::filesystem;

namespace calseq {

namespace {

struct Options {
  std::string config_path;
  std::map<std::string, std::string> flags;  // config key -> raw flag value
  bool force = false;
  std::string out;
  std::string data;
  std::string checkpoint;
  std::string interactions;
  std::string catalog;
  std::string per_user;
};

std::string flag_name(const std::string& key) {
  std::string name = key;
  std::replace(name.begin(), name.end(), '_', '-');
  return "--" + name;
}

void add_config_flags(CLI::App* cmd, Options& opts) {
  cmd->add_option("--config", opts.config_path, "JSON config file (flat keys)");
  for (const auto& key : RunConfig::keys()) {
    cmd->add_option(flag_name(key), opts.flags[key], "config key " + key);
  }
}

RunConfig resolve_config(const CLI::App* cmd, const Options& opts) {
  std::unique_ptr<nlohmann::json> file;
  if (!opts.config_path.empty()) {
    try {
      file = std::make_unique<nlohmann::json>(nlohmann::json::parse(read_file(opts.config_path)));
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError("config file " + opts.config_path + " is not valid JSON: " + e.what());
    }
  }
  std::vector<std::pair<std::string, std::string>> overrides;
  for (const auto& key : RunConfig::keys()) {
    if (cmd->count(flag_name(key)) > 0) overrides.emplace_back(key, opts.flags.at(key));
  }
  auto cfg = RunConfig::resolve(file.get(), overrides);
#ifdef _OPENMP
  if (cfg.threads > 0) omp_set_num_threads(static_cast<int>(cfg.threads));
#endif
  return cfg;
}

void guard_output(const fs::path& path, bool force) {
  if (!force && fs::exists(path))
    throw InputError("output " + path.string() + " already exists (use --force to overwrite)");
}

// Writes to --out atomically, or to stdout when --out is absent.
void emit(const Options& opts, const std::string& content, std::ostream& out) {
  if (opts.out.empty()) {
    out << content;
    return;
  }
  write_file_atomic(opts.out, content);
}

struct Prepared {
  Dataset dataset;
  SplitDataset split;
};

Prepared load_prepared(const std::string& dir) {
  if (dir.empty()) throw InputError("--data is required");
  fs::path root(dir);
  auto catalog = load_catalog(root / "catalog.tsv");
  auto dataset = load_interactions(root / "interactions.tsv", catalog);
  auto split = leave_one_out_split(dataset);
  return {std::move(dataset), std::move(split)};
}

Checkpoint require_checkpoint(const std::string& path) {
  if (path.empty()) throw InputError("--checkpoint is required");
  return load_checkpoint(path);
}

std::string targets_tsv(const std::map<UserId, ItemId>& targets, const Dataset& names) {
  std::ostringstream ss;
  for (const auto& [user, item] : targets)
    ss << names.user_names[user] << '\t' << names.catalog.item_name(item) << '\n';
  return ss.str();
}

int cmd_synth(const RunConfig& cfg, const Options& opts) {
  if (opts.out.empty()) throw InputError("--out directory is required");
  fs::path root(opts.out);
  guard_output(root / "interactions.tsv", opts.force);
  guard_output(root / "catalog.tsv", opts.force);
  auto dataset = generate_synthetic(cfg.synthetic);
  fs::create_directories(root);
  std::ostringstream cat, inter;
  write_catalog(cat, dataset.catalog);
  write_interactions(inter, dataset);
  write_file_atomic(root / "catalog.tsv", cat.str());
  write_file_atomic(root / "interactions.tsv", inter.str());
  return kExitOk;
}

int cmd_prepare(const Options& opts) {
  if (opts.interactions.empty() || opts.catalog.empty())
    throw InputError("--interactions and --catalog are required");
  if (opts.out.empty()) throw InputError("--out directory is required");
  fs::path root(opts.out);
  const std::vector<std::string> outputs{"interactions.tsv", "catalog.tsv", "train.tsv",
                                         "validation.tsv", "test.tsv", "remap.json"};
  for (const auto& name : outputs) guard_output(root / name, opts.force);

  auto catalog = load_catalog(opts.catalog);
  auto dataset = load_interactions(opts.interactions, catalog);
  validate(dataset);
  auto split = leave_one_out_split(dataset);

  fs::create_directories(root);
  std::ostringstream cat, inter, train;
  write_catalog(cat, dataset.catalog);
  write_interactions(inter, dataset);
  write_interactions(train, split.train);
  write_file_atomic(root / "catalog.tsv", cat.str());
  write_file_atomic(root / "interactions.tsv", inter.str());
  write_file_atomic(root / "train.tsv", train.str());
  write_file_atomic(root / "validation.tsv", targets_tsv(split.validation_target, dataset));
  write_file_atomic(root / "test.tsv", targets_tsv(split.test_target, dataset));
  write_file_atomic(root / "remap.json", remap_tables(dataset).dump(2) + "\n");
  return kExitOk;
}

int cmd_train(const RunConfig& cfg, const Options& opts, std::ostream& out) {
  if (opts.checkpoint.empty()) throw InputError("--checkpoint output path is required");
  guard_output(opts.checkpoint, opts.force);
  auto prepared = load_prepared(opts.data);
  out << "epoch,loss,bpr,cdbpr\n";
  auto params = train(prepared.split, cfg.training, cfg.calibration, [&](const EpochStats& s) {
    out << s.epoch << ',' << format_shortest(s.mean_total) << ',' << format_shortest(s.mean_bpr) << ','
        << format_shortest(s.mean_cdbpr) << '\n';
    out.flush();
  });
  CheckpointMeta meta{cfg.training.gamma, cfg.calibration.alpha, cfg.calibration.beta,
                      cfg.training.seed};
  save_checkpoint(params, meta, opts.checkpoint);
  return kExitOk;
}

void check_model_fits(const ModelParams& params, const Catalog& catalog) {
  if (params.num_items != catalog.num_items())
    throw InputError("checkpoint has " + std::to_string(params.num_items) + " items, dataset has " +
                     std::to_string(catalog.num_items()));
}

int cmd_rerank(const RunConfig& cfg, const Options& opts, std::ostream& out) {
  auto ckpt = require_checkpoint(opts.checkpoint);
  if (!opts.out.empty()) guard_output(opts.out, opts.force);
  auto prepared = load_prepared(opts.data);
  check_model_fits(ckpt.params, prepared.dataset.catalog);
  auto lists = rerank_all(ckpt.params, prepared.split, cfg.rerank, cfg.calibration);
  std::ostringstream ss;
  write_recommendations(ss, lists, prepared.dataset);
  emit(opts, ss.str(), out);
  return kExitOk;
}

int cmd_evaluate(const RunConfig& cfg, const Options& opts, std::ostream& out) {
  auto ckpt = require_checkpoint(opts.checkpoint);
  if (!opts.out.empty()) guard_output(opts.out, opts.force);
  if (!opts.per_user.empty()) guard_output(opts.per_user, opts.force);
  auto prepared = load_prepared(opts.data);
  check_model_fits(ckpt.params, prepared.dataset.catalog);
  auto lists = rerank_all(ckpt.params, prepared.split, cfg.rerank, cfg.calibration);
  std::vector<EvalReport> reports{evaluate_lists(lists, prepared.split, cfg.rerank, cfg.calibration)};
  std::ostringstream ss;
  write_sweep_csv(ss, reports);
  emit(opts, ss.str(), out);
  if (!opts.per_user.empty()) {
    auto values = per_user_miscalibration(lists, evaluation_histories(prepared.split),
                                          prepared.dataset.catalog, cfg.calibration);
    std::ostringstream pu;
    pu << "user_id\tskl\n";
    for (const auto& [user, v] : values)
      pu << prepared.dataset.user_names[user] << '\t' << format_shortest(v) << '\n';
    write_file_atomic(opts.per_user, pu.str());
  }
  return kExitOk;
}

int cmd_sweep(const RunConfig& cfg, const Options& opts, std::ostream& out) {
  auto ckpt = require_checkpoint(opts.checkpoint);
  if (!opts.out.empty()) guard_output(opts.out, opts.force);
  auto prepared = load_prepared(opts.data);
  check_model_fits(ckpt.params, prepared.dataset.catalog);
  auto reports = lambda_sweep(ckpt.params, prepared.split, cfg.lambdas, cfg.schedules, cfg.rerank,
                              cfg.calibration);
  std::ostringstream ss;
  write_sweep_csv(ss, reports);
  emit(opts, ss.str(), out);
  return kExitOk;
}

int cmd_drift(const RunConfig& cfg, const Options& opts, std::ostream& out) {
  if (!opts.out.empty()) guard_output(opts.out, opts.force);
  auto prepared = load_prepared(opts.data);
  auto profile = drift_profile(prepared.dataset, cfg.window, cfg.intervals, cfg.calibration);
  std::ostringstream ss;
  ss << "interval,mean_kl,count\n";
  for (const auto& point : profile)
    ss << point.interval << ',' << format_shortest(point.mean_kl) << ',' << point.count << '\n';
  emit(opts, ss.str(), out);
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"calibrated sequential recommendation: training, reranking, evaluation", "calseq"};
  app.require_subcommand(1);
  Options opts;

  auto* synth = app.add_subcommand("synth", "write a seeded synthetic preference-drift dataset");
  add_config_flags(synth, opts);
  synth->add_option("--out", opts.out, "output directory")->required();
  synth->add_flag("--force", opts.force, "overwrite existing outputs");

  auto* prepare = app.add_subcommand("prepare", "validate, remap and split raw TSV inputs");
  prepare->add_option("--interactions", opts.interactions, "user<TAB>item<TAB>timestamp TSV")->required();
  prepare->add_option("--catalog", opts.catalog, "item<TAB>cat1,cat2 TSV")->required();
  prepare->add_option("--out", opts.out, "output directory")->required();
  prepare->add_flag("--force", opts.force, "overwrite existing outputs");

  auto* train_cmd = app.add_subcommand("train", "train the scorer and write a checkpoint");
  add_config_flags(train_cmd, opts);
  train_cmd->add_option("--data", opts.data, "prepared dataset directory")->required();
  train_cmd->add_option("--checkpoint", opts.checkpoint, "checkpoint output path")->required();
  train_cmd->add_flag("--force", opts.force, "overwrite existing outputs");

  auto add_scoring = [&](CLI::App* cmd) {
    add_config_flags(cmd, opts);
    cmd->add_option("--data", opts.data, "prepared dataset directory")->required();
    cmd->add_option("--checkpoint", opts.checkpoint, "trained checkpoint");
    cmd->add_option("--out", opts.out, "output file (stdout if omitted)");
    cmd->add_flag("--force", opts.force, "overwrite existing outputs");
  };
  auto* rerank_cmd = app.add_subcommand("rerank", "write reranked recommendation lists");
  add_scoring(rerank_cmd);
  auto* evaluate_cmd = app.add_subcommand("evaluate", "HR@K, nDCG@K and S_KL@K of one configuration");
  add_scoring(evaluate_cmd);
  evaluate_cmd->add_option("--per-user", opts.per_user, "dump per-user S_KL values to this TSV");
  auto* sweep_cmd = app.add_subcommand("sweep", "evaluate a lambda x schedule grid");
  add_scoring(sweep_cmd);

  auto* drift_cmd = app.add_subcommand("drift", "windowed category-drift profile");
  add_config_flags(drift_cmd, opts);
  drift_cmd->add_option("--data", opts.data, "prepared dataset directory")->required();
  drift_cmd->add_option("--out", opts.out, "output CSV (stdout if omitted)");
  drift_cmd->add_flag("--force", opts.force, "overwrite existing outputs");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  }

  try {
    if (synth->parsed()) return cmd_synth(resolve_config(synth, opts), opts);
    if (prepare->parsed()) return cmd_prepare(opts);
    if (train_cmd->parsed()) return cmd_train(resolve_config(train_cmd, opts), opts, out);
    if (rerank_cmd->parsed()) return cmd_rerank(resolve_config(rerank_cmd, opts), opts, out);
    if (evaluate_cmd->parsed()) return cmd_evaluate(resolve_config(evaluate_cmd, opts), opts, out);
    if (sweep_cmd->parsed()) return cmd_sweep(resolve_config(sweep_cmd, opts), opts, out);
    if (drift_cmd->parsed()) return cmd_drift(resolve_config(drift_cmd, opts), opts, out);
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitInput;
}

}  // namespace calseq
