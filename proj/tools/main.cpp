#include <cstdio>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "loggraph/harness.hpp"

using loggraph::Config;
using loggraph::StagePaths;

namespace {

struct CommonOpts {
  std::string config_path;
  std::string out_dir = "out";
  std::string input;
  std::int64_t seed = -1;
  std::int64_t head_limit = -2;
  std::string hops;
  double threshold = -1.0;
};

Config make_config(const CommonOpts& opts) {
  Config cfg;
  if (!opts.config_path.empty()) cfg = Config::from_file(opts.config_path);
  if (!opts.input.empty()) cfg.set("data.input", opts.input);
  if (opts.seed >= 0) cfg.set("run.seed", std::to_string(opts.seed));
  if (opts.head_limit >= -1) cfg.set("data.head_limit", std::to_string(opts.head_limit));
  if (!opts.hops.empty()) cfg.set("build.hops", opts.hops);
  if (opts.threshold >= 0.0) cfg.set("train.threshold", std::to_string(opts.threshold));
  return cfg;
}

void add_common(CLI::App* sub, CommonOpts& opts) {
  sub->add_option("--config", opts.config_path, "INI config file");
  sub->add_option("--out-dir", opts.out_dir, "stage artifact directory");
  sub->add_option("--input", opts.input, "input log file (overrides config)");
  sub->add_option("--seed", opts.seed, "run seed (overrides config)");
  sub->add_option("--head-limit", opts.head_limit, "read at most N records");
  sub->add_option("--hops", opts.hops, "comma-separated hop set, e.g. 0,1");
  sub->add_option("--threshold", opts.threshold, "anomaly probability threshold");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"event-level log anomaly detection over temporal template graphs"};
  app.require_subcommand(1);

  CommonOpts opts;
  std::string synth_output = "synth.log";

  CLI::App* synth = app.add_subcommand("synth", "generate a labeled synthetic log");
  add_common(synth, opts);
  synth->add_option("--output", synth_output, "output log path");

  CLI::App* parse = app.add_subcommand("parse", "mine templates, emit structured events");
  CLI::App* embed = app.add_subcommand("embed", "resolve template vectors");
  CLI::App* build = app.add_subcommand("build", "build multi-scale edge event streams");
  CLI::App* train = app.add_subcommand("train", "train the temporal link model");
  CLI::App* detect = app.add_subcommand("detect", "score the held-out stream");
  CLI::App* eval = app.add_subcommand("eval", "compute precision/recall/F1");
  CLI::App* pipeline = app.add_subcommand("pipeline", "run every stage in order");
  for (CLI::App* sub : {parse, embed, build, train, detect, eval, pipeline})
    add_common(sub, opts);

  CLI11_PARSE(app, argc, argv);

  try {
    Config cfg = make_config(opts);
    StagePaths paths{opts.out_dir};
    if (synth->parsed()) {
      loggraph::run_synth(cfg, synth_output);
      std::cout << "wrote " << synth_output << '\n';
    } else if (parse->parsed()) {
      loggraph::run_parse(cfg, paths);
    } else if (embed->parsed()) {
      loggraph::run_embed(cfg, paths);
    } else if (build->parsed()) {
      loggraph::run_build(cfg, paths);
    } else if (train->parsed()) {
      loggraph::run_train(cfg, paths);
    } else if (detect->parsed()) {
      loggraph::run_detect(cfg, paths);
    } else if (eval->parsed() || pipeline->parsed()) {
      loggraph::MetricReport r = eval->parsed() ? loggraph::run_eval(cfg, paths)
                                                : loggraph::run_pipeline(cfg, paths);
      std::printf("precision=%.4f recall=%.4f f1=%.4f (tp=%llu fp=%llu fn=%llu tn=%llu)\n",
                  r.precision, r.recall, r.f1, static_cast<unsigned long long>(r.tp),
                  static_cast<unsigned long long>(r.fp),
                  static_cast<unsigned long long>(r.fn),
                  static_cast<unsigned long long>(r.tn));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
