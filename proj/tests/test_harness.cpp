#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "loggraph/harness.hpp"

using namespace loggraph;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Maps a generated line's content tokens back to the generating template:
// same length, at most one differing position (the numeric parameter).
int match_template(const std::vector<std::string>& content,
                   const std::vector<std::vector<std::string>>& templates) {
  for (std::size_t t = 0; t < templates.size(); ++t) {
    if (templates[t].size() != content.size()) continue;
    int mismatches = 0;
    for (std::size_t i = 0; i < content.size() && mismatches <= 1; ++i)
      if (templates[t][i] != content[i]) ++mismatches;
    if (mismatches <= 1) return static_cast<int>(t);
  }
  return -1;
}

}  // namespace

TEST_CASE("config parses sections, trims whitespace, skips comments") {
  std::string path = temp_path("lg_cfg.ini");
  write_file(path,
             "# comment\n"
             "[data]\n"
             "input = /tmp/x.log\n"
             "head_limit=250\n"
             "; another comment\n"
             "[build]\n"
             "hops = 0,1,3\n"
             "split=0.6\n"
             "use_ti = false\n");
  Config cfg = Config::from_file(path);
  CHECK(cfg.get("data.input", "") == "/tmp/x.log");
  CHECK(cfg.get_int("data.head_limit", -1) == 250);
  CHECK(cfg.get_double("build.split", 0.5) == 0.6);
  CHECK(cfg.get_int_list("build.hops", {0}) == std::vector<int>{0, 1, 3});
  CHECK_FALSE(cfg.get_bool("build.use_ti", true));
  CHECK(cfg.get_bool("build.use_ss", true));  // fallback
  CHECK(cfg.get("missing.key", "dflt") == "dflt");
  CHECK(cfg.has("data.input"));
  CHECK_FALSE(cfg.has("missing.key"));
  std::filesystem::remove(path);
}

TEST_CASE("environment variables override config values") {
  Config cfg;
  cfg.set("train.epochs", "5");
  CHECK(cfg.get_int("train.epochs", 0) == 5);
  setenv("LOGGRAPH_TRAIN_EPOCHS", "9", 1);
  CHECK(cfg.get_int("train.epochs", 0) == 9);
  unsetenv("LOGGRAPH_TRAIN_EPOCHS");
  CHECK(cfg.get_int("train.epochs", 0) == 5);
}

TEST_CASE("chronological split takes the floor prefix") {
  std::vector<int> seven{1, 2, 3, 4, 5, 6, 7};
  auto [train7, test7] = chronological_split(seven, 0.5);
  CHECK(train7.size() == 3);
  CHECK(test7.size() == 4);
  CHECK(train7 == std::vector<int>{1, 2, 3});
  CHECK(test7 == std::vector<int>{4, 5, 6, 7});

  std::vector<int> ten{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  auto [train10, test10] = chronological_split(ten, 0.5);
  CHECK(train10.size() == 5);

  std::vector<int> empty;
  auto [te, se] = chronological_split(empty, 0.5);
  CHECK(te.empty());
  CHECK(se.empty());

  CHECK_THROWS_AS(chronological_split(ten, 0.0), contract_error);
  CHECK_THROWS_AS(chronological_split(ten, 1.0), contract_error);
}

TEST_CASE("metric identities hold on random confusion counts") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 10; ++trial) {
    std::uint64_t tp = rng() % 100, fp = rng() % 100, fn = rng() % 100, tn = rng() % 100;
    MetricReport r = compute_metrics(tp, fp, fn, tn);
    if (tp + fp > 0)
      CHECK(r.precision ==
            doctest::Approx(static_cast<double>(tp) / static_cast<double>(tp + fp)));
    else
      CHECK(r.precision == 0.0);
    if (tp + fn > 0)
      CHECK(r.recall ==
            doctest::Approx(static_cast<double>(tp) / static_cast<double>(tp + fn)));
    else
      CHECK(r.recall == 0.0);
    if (r.precision + r.recall > 0.0)
      CHECK(r.f1 == doctest::Approx(2.0 * r.precision * r.recall /
                                    (r.precision + r.recall)));
    else
      CHECK(r.f1 == 0.0);
  }
  MetricReport fixed = compute_metrics(2, 1, 1, 0);
  CHECK(fixed.precision == doctest::Approx(2.0 / 3.0));
  CHECK(fixed.recall == doctest::Approx(2.0 / 3.0));
  CHECK(fixed.f1 == doctest::Approx(2.0 / 3.0));
  MetricReport perfect = compute_metrics(5, 0, 0, 5);
  CHECK(perfect.f1 == 1.0);
  MetricReport silent = compute_metrics(0, 0, 4, 6);  // zero predicted positives
  CHECK(silent.precision == 0.0);
  CHECK(silent.f1 == 0.0);
}

TEST_CASE("evaluate counts verdicts into the confusion matrix") {
  auto verdict = [](bool anomaly, bool truth) {
    Verdict v;
    v.anomaly = anomaly;
    v.truth = truth;
    return v;
  };
  std::vector<Verdict> vs{verdict(true, true),  verdict(true, true),
                          verdict(true, false), verdict(false, true),
                          verdict(false, false)};
  MetricReport r = evaluate(vs);
  CHECK(r.tp == 2);
  CHECK(r.fp == 1);
  CHECK(r.fn == 1);
  CHECK(r.tn == 1);
}

TEST_CASE("report files round-trip") {
  MetricReport r = compute_metrics(10, 2, 3, 85);
  std::string jpath = temp_path("lg_report.json");
  std::string tpath = temp_path("lg_report.txt");
  save_report(jpath, tpath, r);
  MetricReport back = load_report(jpath);
  CHECK(back.tp == r.tp);
  CHECK(back.fp == r.fp);
  CHECK(back.fn == r.fn);
  CHECK(back.tn == r.tn);
  CHECK(back.precision == r.precision);
  CHECK(back.f1 == r.f1);
  CHECK(read_file(tpath).find("f1:") != std::string::npos);
  std::filesystem::remove(jpath);
  std::filesystem::remove(tpath);
}

TEST_CASE("structured events round-trip") {
  std::vector<StructuredEvent> events{
      {0, 100.5, 3, false}, {1, 101.25, 0, true}, {2, 103.0, 3, false}};
  std::string path = temp_path("lg_structured.csv");
  save_structured(path, events);
  auto back = load_structured(path);
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back[i].index == events[i].index);
    CHECK(back[i].timestamp == events[i].timestamp);
    CHECK(back[i].template_id == events[i].template_id);
    CHECK(back[i].anomaly == events[i].anomaly);
  }
  std::filesystem::remove(path);
}

TEST_CASE("synthetic corpus: exact anomaly count, labels and determinism") {
  SynthSpec spec;
  spec.n_templates = 12;
  spec.n_events = 5000;
  spec.anomaly_rate = 0.01;
  std::string p1 = temp_path("lg_synth1.log");
  std::string p2 = temp_path("lg_synth2.log");
  std::string p3 = temp_path("lg_synth3.log");
  synth_generate(spec, 7, p1);
  synth_generate(spec, 7, p2);
  synth_generate(spec, 8, p3);
  CHECK(read_file(p1) == read_file(p2));
  CHECK(read_file(p1) != read_file(p3));

  std::ifstream in(p1);
  std::string line;
  FormatSpec fmt;
  std::int64_t total = 0, anomalies = 0;
  double prev_t = -1.0;
  std::map<std::string, int> label_counts;
  while (std::getline(in, line)) {
    auto rec = tokenize(line, fmt);
    REQUIRE(rec.has_value());
    ++total;
    if (rec->anomaly) ++anomalies;
    ++label_counts[rec->label];
    CHECK(rec->timestamp >= prev_t);
    prev_t = rec->timestamp;
  }
  CHECK(total == 5000);
  CHECK(anomalies == 50);  // round(0.01 * 5000), exact by construction
  CHECK(label_counts["TRANS"] > 0);
  CHECK(label_counts["GAP"] > 0);
  CHECK(label_counts["BURST"] > 0);
  CHECK(label_counts["-"] == 4950);
  std::filesystem::remove(p1);
  std::filesystem::remove(p2);
  std::filesystem::remove(p3);
}

TEST_CASE("synthetic anomalies carry their advertised signatures") {
  SynthSpec spec;
  spec.n_templates = 15;
  spec.n_events = 20000;
  spec.anomaly_rate = 0.02;
  std::string path = temp_path("lg_synth_sig.log");
  SynthChain chain = synth_generate(spec, 13, path);
  const int n_norm = spec.n_templates - chain.n_error_templates;

  std::vector<std::vector<std::string>> tmpl_tokens;
  for (const std::string& text : chain.template_texts)
    tmpl_tokens.push_back(split_ws(text));

  std::ifstream in(path);
  std::string line;
  FormatSpec fmt;
  struct Row {
    std::string label;
    double t;
    int tmpl;
  };
  std::vector<Row> rows;
  while (std::getline(in, line)) {
    auto rec = tokenize(line, fmt);
    REQUIRE(rec.has_value());
    int tmpl = match_template(rec->content, tmpl_tokens);
    REQUIRE(tmpl >= 0);
    rows.push_back({rec->label, rec->timestamp, tmpl});
  }

  double normal_dt_sum = 0.0, gap_dt_sum = 0.0;
  int normal_dt_n = 0, gap_dt_n = 0;
  for (std::size_t k = 1; k < rows.size(); ++k) {
    const double dt = rows[k].t - rows[k - 1].t;
    if (rows[k].label == "-") {
      normal_dt_sum += dt;
      ++normal_dt_n;
    } else if (rows[k].label == "GAP") {
      gap_dt_sum += dt;
      ++gap_dt_n;
    }
    if (rows[k].label == "BURST") {
      // error events, except the recovery event that closes each window
      if (rows[k].tmpl < n_norm) {
        CHECK(rows[k - 1].label == "BURST");
        CHECK(rows[k - 1].tmpl >= n_norm);
        if (k + 1 < rows.size()) CHECK(rows[k + 1].label != "BURST");
      }
    } else {
      CHECK(rows[k].tmpl < n_norm);
    }
    if (rows[k].label == "TRANS" && rows[k - 1].label == "-") {
      // forbidden transition: zero probability under the generating chain
      bool allowed = false;
      for (auto [succ, w] : chain.transitions[static_cast<std::size_t>(rows[k - 1].tmpl)])
        if (succ == rows[k].tmpl) allowed = true;
      CHECK_FALSE(allowed);
    }
  }
  REQUIRE(gap_dt_n > 0);
  CHECK(gap_dt_sum / gap_dt_n > 10.0 * (normal_dt_sum / normal_dt_n));
  std::filesystem::remove(path);
}

TEST_CASE("empirical transitions match the generating chain within TV 0.02") {
  SynthSpec spec;
  spec.n_templates = 15;
  spec.n_events = 200000;
  spec.anomaly_rate = 0.005;
  std::string path = temp_path("lg_synth_tv.log");
  SynthChain chain = synth_generate(spec, 29, path);

  std::vector<std::vector<std::string>> tmpl_tokens;
  for (const std::string& text : chain.template_texts)
    tmpl_tokens.push_back(split_ws(text));

  std::ifstream in(path);
  std::string line;
  FormatSpec fmt;
  int prev = -1;
  bool prev_normal = false;
  std::map<std::pair<int, int>, std::int64_t> counts;
  std::map<int, std::int64_t> row_totals;
  std::int64_t total = 0;
  while (std::getline(in, line)) {
    auto rec = tokenize(line, fmt);
    REQUIRE(rec.has_value());
    int tmpl = match_template(rec->content, tmpl_tokens);
    REQUIRE(tmpl >= 0);
    const bool normal = !rec->anomaly &&
                        tmpl < spec.n_templates - chain.n_error_templates;
    if (normal && prev_normal) {
      ++counts[{prev, tmpl}];
      ++row_totals[prev];
      ++total;
    }
    prev = tmpl;
    prev_normal = normal;
  }

  // row-weighted total variation against the generator's transition matrix
  double tv = 0.0;
  for (const auto& [i, row_total] : row_totals) {
    std::map<int, double> want;
    for (auto [j, w] : chain.transitions[static_cast<std::size_t>(i)]) want[j] = w;
    std::map<int, double> got;
    for (const auto& [pair, c] : counts)
      if (pair.first == i)
        got[pair.second] = static_cast<double>(c) / static_cast<double>(row_total);
    double row_tv = 0.0;
    std::set<int> keys;
    for (const auto& [j, w] : want) keys.insert(j);
    for (const auto& [j, w] : got) keys.insert(j);
    for (int j : keys) {
      const double a = want.count(j) ? want[j] : 0.0;
      const double b = got.count(j) ? got[j] : 0.0;
      row_tv += std::abs(a - b);
    }
    tv += 0.5 * row_tv * static_cast<double>(row_total) / static_cast<double>(total);
  }
  CHECK(tv <= 0.02);
  std::filesystem::remove(path);
}

TEST_CASE("synth rejects infeasible specs") {
  SynthSpec spec;
  std::string path = temp_path("lg_synth_bad.log");
  spec.n_templates = 3;
  CHECK_THROWS_AS(synth_generate(spec, 1, path), contract_error);
  spec.n_templates = 10;
  spec.anomaly_rate = 0.5;
  CHECK_THROWS_AS(synth_generate(spec, 1, path), contract_error);
  spec.anomaly_rate = 0.01;
  spec.n_events = 10;
  CHECK_THROWS_AS(synth_generate(spec, 1, path), contract_error);
}

TEST_CASE("ingest honors the head limit and counts skipped lines") {
  std::string path = temp_path("lg_ingest.log");
  std::ofstream out(path);
  for (int i = 0; i < 5000; ++i) out << "- " << 1000 + i << " event number " << i << "\n";
  out.close();
  FormatSpec fmt;
  IngestResult limited = ingest_dataset(path, fmt, 1000);
  CHECK(limited.records.size() == 1000);
  CHECK(limited.skipped == 0);
  IngestResult full = ingest_dataset(path, fmt, -1);
  CHECK(full.records.size() == 5000);

  std::ofstream out2(path);
  out2 << "- 100 fine line here\n"
       << "- notatime broken line\n"
       << "- 102 another fine line\n";
  out2.close();
  IngestResult mixed = ingest_dataset(path, fmt, -1);
  CHECK(mixed.records.size() == 2);
  CHECK(mixed.skipped == 1);
  CHECK_THROWS_AS(ingest_dataset(temp_path("lg_missing_nope.log"), fmt), format_error);
  std::filesystem::remove(path);
}

TEST_CASE("pipeline emits every artifact and the eval stage is idempotent") {
  std::string dir = temp_path("lg_stage_out");
  std::filesystem::remove_all(dir);
  std::string log = temp_path("lg_stage.log");

  Config cfg;
  cfg.set("data.input", log);
  cfg.set("synth.n_templates", "10");
  cfg.set("synth.n_events", "1500");
  cfg.set("synth.anomaly_rate", "0.02");
  cfg.set("train.epochs", "1");
  cfg.set("embed.dim", "16");
  cfg.set("train.time_dim", "4");
  cfg.set("train.hidden", "8");
  cfg.set("run.seed", "5");

  run_synth(cfg, log);
  StagePaths paths{dir};
  MetricReport r = run_pipeline(cfg, paths);
  for (const std::string& artifact :
       {paths.templates_csv(), paths.structured(), paths.embeddings(),
        paths.train_events(), paths.test_events(), paths.cooccurrence(),
        paths.checkpoint(), paths.memory_snapshot(), paths.verdicts(),
        paths.report_json(), paths.report_txt(), paths.train_log()})
    CHECK(std::filesystem::exists(artifact));

  // confusion counts cover exactly the scored events
  auto verdicts = load_verdicts(paths.verdicts());
  CHECK(r.tp + r.fp + r.fn + r.tn == verdicts.size());

  // rerunning eval alone reproduces the report from the saved verdicts
  MetricReport again = run_eval(cfg, paths);
  CHECK(again.tp == r.tp);
  CHECK(again.fp == r.fp);
  CHECK(again.f1 == r.f1);

  std::filesystem::remove_all(dir);
  std::filesystem::remove(log);
}
