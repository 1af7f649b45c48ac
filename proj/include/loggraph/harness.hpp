#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "loggraph/detector.hpp"
#include "loggraph/graph.hpp"
#include "loggraph/log_parser.hpp"

namespace loggraph {

// Flat key-value config with [section] headers. Environment variables named
// LOGGRAPH_<SECTION>_<KEY> override file values.
class Config {
 public:
  Config() = default;
  static Config from_file(const std::string& path);

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const;
  std::string get(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<int> get_int_list(const std::string& key,
                                const std::vector<int>& fallback) const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::string resolve(const std::string& key) const;  // env override
  std::map<std::string, std::string> values_;
};

// One parsed log occurrence, the exchange row between parse and build.
struct StructuredEvent {
  std::int64_t index = 0;
  double timestamp = 0.0;
  int template_id = -1;
  bool anomaly = false;
};

void save_structured(const std::string& path, const std::vector<StructuredEvent>& events);
std::vector<StructuredEvent> load_structured(const std::string& path);

struct MetricReport {
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

MetricReport compute_metrics(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn,
                             std::uint64_t tn);
MetricReport evaluate(const std::vector<Verdict>& verdicts);
void save_report(const std::string& json_path, const std::string& summary_path,
                 const MetricReport& report);
MetricReport load_report(const std::string& json_path);

template <typename T>
std::pair<std::vector<T>, std::vector<T>> chronological_split(const std::vector<T>& records,
                                                              double ratio) {
  if (ratio <= 0.0 || ratio >= 1.0)
    throw contract_error("chronological_split: ratio must be in (0,1)");
  std::size_t cut = static_cast<std::size_t>(ratio * static_cast<double>(records.size()));
  return {std::vector<T>(records.begin(), records.begin() + cut),
          std::vector<T>(records.begin() + cut, records.end())};
}

struct SynthSpec {
  int n_templates = 30;
  std::int64_t n_events = 50000;
  double anomaly_rate = 0.01;
  double weight_transition = 1.0;
  double weight_gap = 1.0;
  double weight_burst = 1.0;
  double mean_interarrival = 1.0;  // seconds
};

struct SynthChain {
  std::vector<std::string> template_texts;          // error templates at the tail
  int n_error_templates = 0;
  std::vector<std::vector<std::pair<int, double>>> transitions;  // per normal template
};

// Writes a labeled log file: normal events from a sparse first-order Markov
// chain with exponential inter-arrival times; anomalies injected as forbidden
// transitions ("TRANS"), 100x time gaps ("GAP") and error-template bursts
// ("BURST"); exact injected count = round(rate * n_events). Returns the
// generating chain so tests can check the empirical transition matrix.
SynthChain synth_generate(const SynthSpec& spec, std::uint64_t seed,
                          const std::string& path);

struct IngestResult {
  std::vector<LogRecord> records;
  std::uint64_t skipped = 0;
};

IngestResult ingest_dataset(const std::string& path, const FormatSpec& format,
                            std::int64_t head_limit = -1);

// Stage entry points. Each reads its inputs from and writes its outputs to
// out_dir, so any stage can be rerun from the previous stage's files.
struct StagePaths {
  std::string out_dir;
  std::string templates_csv() const { return out_dir + "/templates.csv"; }
  std::string structured() const { return out_dir + "/events.csv"; }
  std::string embeddings() const { return out_dir + "/embeddings.bin"; }
  std::string train_events() const { return out_dir + "/train_events.csv"; }
  std::string test_events() const { return out_dir + "/test_events.csv"; }
  std::string cooccurrence() const { return out_dir + "/cooccurrence.csv"; }
  std::string checkpoint() const { return out_dir + "/checkpoint.bin"; }
  std::string memory_snapshot() const { return out_dir + "/memory.bin"; }
  std::string verdicts() const { return out_dir + "/verdicts.csv"; }
  std::string report_json() const { return out_dir + "/report.json"; }
  std::string report_txt() const { return out_dir + "/report.txt"; }
  std::string train_log() const { return out_dir + "/train_log.txt"; }
};

void run_synth(const Config& config, const std::string& output_path);
void run_parse(const Config& config, const StagePaths& paths);
void run_embed(const Config& config, const StagePaths& paths);
void run_build(const Config& config, const StagePaths& paths);
void run_train(const Config& config, const StagePaths& paths);
void run_detect(const Config& config, const StagePaths& paths);
MetricReport run_eval(const Config& config, const StagePaths& paths);
MetricReport run_pipeline(const Config& config, const StagePaths& paths);

}  // namespace loggraph
