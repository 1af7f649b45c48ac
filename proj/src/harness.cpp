#include "loggraph/harness.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

namespace loggraph {

// ---------------------------------------------------------------------------
// Config

Config Config::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw format_error("cannot open config file: " + path);
  Config cfg;
  std::string line, section;
  while (std::getline(in, line)) {
    std::size_t start = line.find_first_not_of(" \t");
    if (start == std::string::npos) continue;
    std::size_t stop = line.find_last_not_of(" \t\r");
    std::string t = line.substr(start, stop - start + 1);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[' && t.back() == ']') {
      section = t.substr(1, t.size() - 2);
      continue;
    }
    std::size_t eq = t.find('=');
    if (eq == std::string::npos) throw format_error("bad config line: " + line);
    std::string key = t.substr(0, eq);
    std::string value = t.substr(eq + 1);
    auto trim = [](std::string& s) {
      std::size_t a = s.find_first_not_of(" \t");
      std::size_t b = s.find_last_not_of(" \t");
      s = a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    trim(key);
    trim(value);
    cfg.values_[section.empty() ? key : section + "." + key] = value;
  }
  return cfg;
}

std::string Config::resolve(const std::string& key) const {
  std::string env = "LOGGRAPH_" + key;
  for (char& c : env) {
    if (c == '.') c = '_';
    c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  }
  if (const char* v = std::getenv(env.c_str())) return v;
  auto it = values_.find(key);
  return it == values_.end() ? std::string() : it->second;
}

bool Config::has(const std::string& key) const { return !resolve(key).empty(); }

std::string Config::get(const std::string& key, const std::string& fallback) const {
  std::string v = resolve(key);
  return v.empty() ? fallback : v;
}

double Config::get_double(const std::string& key, double fallback) const {
  std::string v = resolve(key);
  return v.empty() ? fallback : std::stod(v);
}

std::int64_t Config::get_int(const std::string& key, std::int64_t fallback) const {
  std::string v = resolve(key);
  return v.empty() ? fallback : std::stoll(v);
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  std::string v = resolve(key);
  if (v.empty()) return fallback;
  return v == "1" || v == "true" || v == "yes" || v == "on";
}

std::vector<int> Config::get_int_list(const std::string& key,
                                      const std::vector<int>& fallback) const {
  std::string v = resolve(key);
  if (v.empty()) return fallback;
  std::vector<int> out;
  std::istringstream ss(v);
  std::string part;
  while (std::getline(ss, part, ',')) out.push_back(std::stoi(part));
  return out;
}

// ---------------------------------------------------------------------------
// Structured events

void save_structured(const std::string& path, const std::vector<StructuredEvent>& events) {
  std::ofstream out(path);
  if (!out) throw format_error("cannot write structured events: " + path);
  out << "index,timestamp,template_id,label\n";
  for (const StructuredEvent& e : events)
    out << e.index << ',' << format_double(e.timestamp) << ',' << e.template_id << ','
        << (e.anomaly ? 1 : 0) << '\n';
  if (!out) throw format_error("write failure on structured events: " + path);
}

std::vector<StructuredEvent> load_structured(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw format_error("cannot open structured events: " + path);
  std::string line;
  if (!std::getline(in, line)) throw format_error("empty structured events: " + path);
  std::vector<StructuredEvent> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    StructuredEvent e;
    char c;
    std::istringstream ss(line);
    if (!(ss >> e.index >> c >> e.timestamp >> c >> e.template_id >> c >> e.anomaly))
      throw format_error("bad structured event row: " + line);
    out.push_back(e);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Metrics

MetricReport compute_metrics(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn,
                             std::uint64_t tn) {
  MetricReport r;
  r.tp = tp;
  r.fp = fp;
  r.fn = fn;
  r.tn = tn;
  r.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  r.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  r.f1 = r.precision + r.recall > 0.0
             ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
             : 0.0;
  return r;
}

MetricReport evaluate(const std::vector<Verdict>& verdicts) {
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (const Verdict& v : verdicts) {
    if (v.anomaly && v.truth) ++tp;
    else if (v.anomaly && !v.truth) ++fp;
    else if (!v.anomaly && v.truth) ++fn;
    else ++tn;
  }
  return compute_metrics(tp, fp, fn, tn);
}

void save_report(const std::string& json_path, const std::string& summary_path,
                 const MetricReport& report) {
  nlohmann::json j{{"tp", report.tp},       {"fp", report.fp},
                   {"fn", report.fn},       {"tn", report.tn},
                   {"precision", report.precision}, {"recall", report.recall},
                   {"f1", report.f1}};
  std::ofstream out(json_path);
  if (!out) throw format_error("cannot write report: " + json_path);
  out << j.dump(2) << '\n';

  std::ofstream txt(summary_path);
  if (!txt) throw format_error("cannot write report summary: " + summary_path);
  txt << "events:     " << (report.tp + report.fp + report.fn + report.tn) << '\n'
      << "tp/fp/fn/tn: " << report.tp << '/' << report.fp << '/' << report.fn << '/'
      << report.tn << '\n'
      << "precision:  " << format_double(report.precision) << '\n'
      << "recall:     " << format_double(report.recall) << '\n'
      << "f1:         " << format_double(report.f1) << '\n';
}

MetricReport load_report(const std::string& json_path) {
  std::ifstream in(json_path);
  if (!in) throw format_error("cannot open report: " + json_path);
  nlohmann::json j;
  in >> j;
  MetricReport r;
  r.tp = j.at("tp");
  r.fp = j.at("fp");
  r.fn = j.at("fn");
  r.tn = j.at("tn");
  r.precision = j.at("precision");
  r.recall = j.at("recall");
  r.f1 = j.at("f1");
  return r;
}

// ---------------------------------------------------------------------------
// Synthetic corpus

namespace {

// no level keywords (error/fail/warn/debug/trace/critical/fatal/deprecated)
const char* kWords[] = {
    "cache",  "session", "worker",  "queue",   "shard",   "index",   "replica",
    "router", "token",   "bucket",  "stream",  "batch",   "commit",  "segment",
    "node",   "client",  "handler", "monitor", "cursor",  "packet",  "buffer",
    "region", "lease",   "quorum",  "journal", "socket",  "thread",  "mapper",
    "probe",  "ticket",  "vault",   "mirror",  "anchor",  "beacon",  "canary",
    "damper", "emitter", "filter",  "gauge",   "hopper",  "ingest",  "joiner",
    "kicker", "ledger",  "merger",  "notcher", "opener",  "parser",  "quoter",
    "ranker", "sealer",  "tuner",   "updater", "vector",  "walker",  "zipper"};
constexpr int kWordCount = static_cast<int>(sizeof(kWords) / sizeof(kWords[0]));

std::string make_template_text(Rng& rng, bool error_template, int* param_pos,
                               std::unordered_set<std::string>& used) {
  std::uniform_int_distribution<int> len_d(4, 7);
  std::uniform_int_distribution<int> word_d(0, kWordCount - 1);
  for (;;) {
    int len = len_d(rng);
    std::vector<std::string> toks(len);
    for (int i = 0; i < len; ++i) toks[i] = kWords[word_d(rng)];
    if (error_template) {
      toks[1] = (rng() & 1) ? "error" : "fatal";
    }
    *param_pos = len - 1;  // numeric parameter slot
    std::string key;
    for (int i = 0; i < len; ++i) key += toks[i] + (i + 1 < len ? " " : "");
    if (!used.insert(key).second) continue;
    return key;
  }
}

}  // namespace

SynthChain synth_generate(const SynthSpec& spec, std::uint64_t seed,
                          const std::string& path) {
  if (spec.n_templates < 5) throw contract_error("synth: n_templates must be >= 5");
  if (spec.anomaly_rate <= 0.0 || spec.anomaly_rate > 0.2)
    throw contract_error("synth: anomaly_rate must be in (0, 0.2]");
  if (spec.n_events < 100) throw contract_error("synth: n_events must be >= 100");
  double wsum = spec.weight_transition + spec.weight_gap + spec.weight_burst;
  if (wsum <= 0.0) throw contract_error("synth: anomaly mix weights sum to zero");

  Rng rng(seed);
  SynthChain chain;
  chain.n_error_templates = std::max(2, spec.n_templates / 10);
  const int n_norm = spec.n_templates - chain.n_error_templates;
  if (n_norm < 3) throw contract_error("synth: too few normal templates");

  std::unordered_set<std::string> used;
  std::vector<int> param_pos(spec.n_templates);
  for (int i = 0; i < spec.n_templates; ++i)
    chain.template_texts.push_back(
        make_template_text(rng, i >= n_norm, &param_pos[i], used));

  // sparse chain over normal templates: successor sets come from three random
  // permutations, so in-degree is balanced and every template recurs on a
  // similar timescale
  chain.transitions.resize(n_norm);
  std::uniform_real_distribution<double> unit(0.5, 1.5);
  {
    std::vector<std::unordered_set<int>> picked(n_norm);
    std::vector<int> perm(static_cast<std::size_t>(n_norm));
    for (int round = 0; round < 3; ++round) {
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      for (int i = 0; i < n_norm; ++i)  // rotate fixed points away
        if (perm[static_cast<std::size_t>(i)] == i)
          std::swap(perm[static_cast<std::size_t>(i)],
                    perm[static_cast<std::size_t>((i + 1) % n_norm)]);
      for (int i = 0; i < n_norm; ++i)
        if (perm[static_cast<std::size_t>(i)] != i)
          picked[static_cast<std::size_t>(i)].insert(perm[static_cast<std::size_t>(i)]);
    }
    // a handful of low-traffic templates: their inbound weight is cut so the
    // stream has both busy and quiet templates, as real logs do
    const int n_rare = n_norm / 6;
    for (int i = 0; i < n_norm; ++i) {
      double total = 0.0;
      for (int j : picked[static_cast<std::size_t>(i)]) {
        double w = unit(rng);
        if (j >= n_norm - n_rare) w *= 0.1;
        chain.transitions[i].push_back({j, w});
        total += w;
      }
      std::sort(chain.transitions[i].begin(), chain.transitions[i].end());
      for (auto& [j, w] : chain.transitions[i]) w /= total;
    }
  }

  // injection plan: exact anomaly count split by the mix weights
  const std::int64_t n_anom =
      std::llround(spec.anomaly_rate * static_cast<double>(spec.n_events));
  std::int64_t n_trans = std::llround(n_anom * spec.weight_transition / wsum);
  std::int64_t n_gap = std::llround(n_anom * spec.weight_gap / wsum);
  std::int64_t n_burst = n_anom - n_trans - n_gap;
  if (n_burst < 0) {  // rounding overshoot
    n_gap += n_burst;
    n_burst = 0;
  }

  enum class Unit { Trans, Gap, Burst };
  std::vector<std::pair<Unit, int>> units;
  for (std::int64_t i = 0; i < n_trans; ++i) units.push_back({Unit::Trans, 1});
  for (std::int64_t i = 0; i < n_gap; ++i) units.push_back({Unit::Gap, 1});
  std::int64_t left = n_burst;
  while (left > 0) {
    std::int64_t len = std::min<std::int64_t>(left, 3 + rng() % 4);
    if (left - len < 3) len = left;  // fold the tail in; no stub windows
    units.push_back({Unit::Burst, static_cast<int>(len)});
    left -= len;
  }
  std::shuffle(units.begin(), units.end(), rng);

  // unit start positions: evenly strided with jitter across the later part of
  // the stream, so a chronological split trains on clean history and meets the
  // injected anomalies afterwards
  std::vector<std::int64_t> starts(units.size());
  if (!units.empty()) {
    const std::int64_t first = spec.n_events * 11 / 20;
    const double stride =
        static_cast<double>(spec.n_events - first) / static_cast<double>(units.size());
    for (std::size_t u = 0; u < units.size(); ++u) {
      std::int64_t jitter =
          stride > 8.0 ? static_cast<std::int64_t>(rng() % static_cast<int>(stride / 4))
                       : 0;
      starts[u] = first + static_cast<std::int64_t>(stride * static_cast<double>(u)) +
                  jitter;
    }
  }

  std::ofstream out(path);
  if (!out) throw format_error("cannot write synthetic log: " + path);
  std::exponential_distribution<double> gap_d(1.0 / spec.mean_interarrival);
  std::uniform_int_distribution<int> num_d(1, 999999);
  std::uniform_int_distribution<int> err_d(n_norm, spec.n_templates - 1);

  double t = 1.0e9;  // epoch-ish origin
  int state = 0;
  std::size_t unit_idx = 0;
  char tbuf[32];

  auto emit = [&](const char* label, int tmpl) {
    std::snprintf(tbuf, sizeof(tbuf), "%.6f", t);
    std::vector<std::string> toks = split_ws(chain.template_texts[tmpl]);
    toks[param_pos[tmpl]] = std::to_string(num_d(rng));
    out << label << ' ' << tbuf;
    for (const std::string& tok : toks) out << ' ' << tok;
    out << '\n';
  };
  auto next_normal = [&](int from) {
    double r = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    double acc = 0.0;
    for (const auto& [j, w] : chain.transitions[from]) {
      acc += w;
      if (r <= acc) return j;
    }
    return chain.transitions[from].back().first;
  };

  std::int64_t k = 0;
  emit("-", state);
  ++k;
  while (k < spec.n_events) {
    if (unit_idx < units.size() && k >= starts[unit_idx]) {
      auto [unit, len] = units[unit_idx++];
      switch (unit) {
        case Unit::Trans: {
          // jump to a template the chain row gives zero probability
          std::unordered_set<int> succ;
          for (const auto& [j, w] : chain.transitions[state]) succ.insert(j);
          int tmpl;
          int guard = 0;
          do {
            tmpl = static_cast<int>(rng() % n_norm);
          } while ((succ.count(tmpl) || tmpl == state) && ++guard < 1000);
          t += gap_d(rng);
          emit("TRANS", tmpl);
          state = tmpl;
          ++k;
          break;
        }
        case Unit::Gap: {
          int tmpl = next_normal(state);
          // inter-arrival inflated a hundredfold; the small floor keeps a
          // near-zero draw from producing an undetectable "gap"
          t += (0.5 + gap_d(rng)) * 100.0;
          emit("GAP", tmpl);
          state = tmpl;
          ++k;
          break;
        }
        case Unit::Burst: {
          // len-1 rapid error events, then the recovery event that hands the
          // stream back to the chain; the recovery transition is part of the
          // anomalous window (its incoming link never occurs normally)
          const int n_err = len > 1 ? len - 1 : 1;
          for (int b = 0; b < n_err && k < spec.n_events; ++b, ++k) {
            int tmpl = err_d(rng);
            t += gap_d(rng) * 0.05;
            emit("BURST", tmpl);
          }
          if (len > 1 && k < spec.n_events) {
            state = next_normal(state);
            t += gap_d(rng);
            emit("BURST", state);
            ++k;
          }
          break;
        }
      }
    } else {
      state = next_normal(state);
      t += gap_d(rng);
      emit("-", state);
      ++k;
    }
  }
  if (!out) throw format_error("write failure on synthetic log: " + path);
  return chain;
}

// ---------------------------------------------------------------------------
// Ingestion and stages

IngestResult ingest_dataset(const std::string& path, const FormatSpec& format,
                            std::int64_t head_limit) {
  std::ifstream in(path);
  if (!in) throw format_error("cannot open dataset: " + path);
  IngestResult result;
  std::string line, diag;
  while (std::getline(in, line)) {
    if (head_limit >= 0 &&
        static_cast<std::int64_t>(result.records.size()) >= head_limit)
      break;
    if (line.empty()) continue;
    auto rec = tokenize(line, format, &diag);
    if (!rec) {
      ++result.skipped;
      continue;
    }
    result.records.push_back(std::move(*rec));
  }
  return result;
}

static FormatSpec format_from(const Config& cfg) {
  FormatSpec fmt;
  fmt.label_col = static_cast<int>(cfg.get_int("data.label_col", 0));
  fmt.time_col = static_cast<int>(cfg.get_int("data.time_col", 1));
  fmt.content_from = static_cast<int>(cfg.get_int("data.content_from", 2));
  return fmt;
}

static FeatureMask mask_from(const Config& cfg) {
  FeatureMask mask;
  mask.ss = cfg.get_bool("build.use_ss", true);
  mask.cf = cfg.get_bool("build.use_cf", true);
  mask.ti = cfg.get_bool("build.use_ti", true);
  mask.ll = cfg.get_bool("build.use_ll", true);
  return mask;
}

static TrainConfig train_config_from(const Config& cfg) {
  TrainConfig tc;
  tc.hop_set = cfg.get_int_list("build.hops", {0, 1});
  tc.batch_size = static_cast<int>(cfg.get_int("train.batch", 200));
  tc.epochs = static_cast<int>(cfg.get_int("train.epochs", 5));
  tc.negatives_per_positive = static_cast<int>(cfg.get_int("train.negatives", 1));
  tc.threshold = cfg.get_double("train.threshold", 0.5);
  tc.seed = static_cast<std::uint64_t>(cfg.get_int("run.seed", 7));
  tc.learning_rate = cfg.get_double("train.lr", 1e-3);
  tc.hidden_dim = static_cast<int>(cfg.get_int("train.hidden", 64));
  tc.feature_mask = mask_from(cfg);
  return tc;
}

static TgnConfig tgn_config_from(const Config& cfg, const std::vector<int>& hop_set) {
  TgnConfig tg;
  tg.dim = static_cast<int>(cfg.get_int("embed.dim", 64));
  tg.time_dim = static_cast<int>(cfg.get_int("train.time_dim", 16));
  tg.heads = static_cast<int>(cfg.get_int("train.heads", 2));
  tg.feat_dim = static_cast<int>(EdgeFeatures::flat_dim(hop_set));
  tg.ring_capacity = static_cast<int>(cfg.get_int("train.ring", 10));
  tg.embedding = embedding_mode_from(cfg.get("train.embedding", "tga"));
  tg.aggregator = aggregator_mode_from(cfg.get("train.aggregator", "most_recent"));
  return tg;
}

// vectors/levels per template id, from the stage artifacts
struct TemplateSide {
  std::vector<SemanticVector> vectors;
  std::vector<LogLevel> levels;
};

static TemplateSide load_template_side(const Config& cfg, const StagePaths& paths) {
  TemplateSide side;
  std::vector<Template> templates = TemplateMiner::import_csv(paths.templates_csv());
  std::size_t dim = static_cast<std::size_t>(cfg.get_int("embed.dim", 64));
  std::uint64_t seed = static_cast<std::uint64_t>(cfg.get_int("run.seed", 7));
  EmbeddingStore store(dim, seed);
  store.load(paths.embeddings());
  for (const Template& t : templates) {
    side.vectors.push_back(store.get(t.text()));
    side.levels.push_back(t.level);
  }
  return side;
}

void run_synth(const Config& cfg, const std::string& output_path) {
  SynthSpec spec;
  spec.n_templates = static_cast<int>(cfg.get_int("synth.n_templates", 30));
  spec.n_events = cfg.get_int("synth.n_events", 50000);
  spec.anomaly_rate = cfg.get_double("synth.anomaly_rate", 0.01);
  spec.weight_transition = cfg.get_double("synth.w_transition", 1.0);
  spec.weight_gap = cfg.get_double("synth.w_gap", 1.0);
  spec.weight_burst = cfg.get_double("synth.w_burst", 1.0);
  spec.mean_interarrival = cfg.get_double("synth.mean_interarrival", 1.0);
  synth_generate(spec, static_cast<std::uint64_t>(cfg.get_int("run.seed", 7)),
                 output_path);
}

void run_parse(const Config& cfg, const StagePaths& paths) {
  std::filesystem::create_directories(paths.out_dir);
  IngestResult ingest = ingest_dataset(cfg.get("data.input", ""), format_from(cfg),
                                       cfg.get_int("data.head_limit", -1));
  TemplateMiner::Params params;
  params.depth = static_cast<int>(cfg.get_int("parser.depth", 4));
  params.similarity_threshold = cfg.get_double("parser.similarity", 0.5);
  params.max_children = static_cast<int>(cfg.get_int("parser.max_children", 100));
  TemplateMiner miner(params);

  std::vector<StructuredEvent> events;
  events.reserve(ingest.records.size());
  for (std::size_t i = 0; i < ingest.records.size(); ++i) {
    const LogRecord& rec = ingest.records[i];
    auto [id, ignored_params] = miner.parse(rec.content);
    events.push_back({static_cast<std::int64_t>(i), rec.timestamp, id, rec.anomaly});
  }
  miner.export_csv(paths.templates_csv());
  save_structured(paths.structured(), events);
  if (ingest.skipped)
    std::cerr << "parse: skipped " << ingest.skipped << " malformed lines\n";
}

void run_embed(const Config& cfg, const StagePaths& paths) {
  std::vector<Template> templates = TemplateMiner::import_csv(paths.templates_csv());
  std::size_t dim = static_cast<std::size_t>(cfg.get_int("embed.dim", 64));
  std::uint64_t seed = static_cast<std::uint64_t>(cfg.get_int("run.seed", 7));
  EmbeddingStore store(dim, seed);
  if (cfg.get("embed.provider", "hashed") == "external")
    store.load(cfg.get("embed.external_path", ""));
  std::map<std::string, SemanticVector> resolved;
  for (const Template& t : templates) resolved[t.text()] = store.get(t.text());
  if (store.fallback_count() && cfg.get("embed.provider", "hashed") == "external")
    std::cerr << "embed: " << store.fallback_count()
              << " templates missing from external vectors, hashed fallback used\n";
  EmbeddingStore::save(paths.embeddings(), resolved);
}

void run_build(const Config& cfg, const StagePaths& paths) {
  std::vector<StructuredEvent> events = load_structured(paths.structured());
  std::stable_sort(events.begin(), events.end(),
                   [](const StructuredEvent& a, const StructuredEvent& b) {
                     return a.timestamp < b.timestamp;
                   });
  double ratio = cfg.get_double("build.split", 0.5);
  auto [train_part, test_part] = chronological_split(events, ratio);
  std::vector<int> hop_set = cfg.get_int_list("build.hops", {0, 1});
  FeatureMask mask = mask_from(cfg);

  auto to_sequence = [](const std::vector<StructuredEvent>& part) {
    std::vector<SequenceItem> seq;
    seq.reserve(part.size());
    for (const StructuredEvent& e : part)
      seq.push_back({e.template_id, e.timestamp, e.anomaly});
    return seq;
  };
  std::vector<SequenceItem> train_seq = to_sequence(train_part);
  std::vector<SequenceItem> test_seq = to_sequence(test_part);

  TemplateSide side = load_template_side(cfg, paths);
  CooccurrenceTable table = build_cooccurrence(train_seq, hop_set);

  std::vector<GraphEvent> train_events =
      build_events(train_seq, hop_set, side.vectors, side.levels, table);
  std::unordered_set<int> known;
  for (const SequenceItem& item : train_seq) known.insert(item.template_id);
  std::vector<GraphEvent> test_events =
      build_events(test_seq, hop_set, side.vectors, side.levels, table, &known);

  if (!mask.all()) {
    for (GraphEvent& e : train_events) mask.apply(e.features);
    for (GraphEvent& e : test_events) mask.apply(e.features);
  }
  // test seq_index continues after the training prefix
  for (GraphEvent& e : test_events)
    e.seq_index += static_cast<std::int64_t>(train_seq.size());

  save_events(paths.train_events(), train_events, hop_set);
  save_events(paths.test_events(), test_events, hop_set);
  table.save(paths.cooccurrence());
}

void run_train(const Config& cfg, const StagePaths& paths) {
  std::vector<int> hop_set;
  std::vector<GraphEvent> events = load_events(paths.train_events(), &hop_set);
  CooccurrenceTable table = CooccurrenceTable::load(paths.cooccurrence());
  TemplateSide side = load_template_side(cfg, paths);

  TrainConfig tc = train_config_from(cfg);
  tc.hop_set = hop_set;
  TgnConfig tg = tgn_config_from(cfg, hop_set);
  LinkModel model(tg, tc.hidden_dim, tc.seed);

  // memory starts out covering the whole parsed template table, one row per
  // template; the semantic ablation zeroes that initialization while the
  // vectors keep feeding feature-side similarity as usual
  std::vector<SemanticVector> init_vectors = side.vectors;
  if (!cfg.get_bool("train.semantic_init", true))
    for (SemanticVector& v : init_vectors) v.values.assign(v.dim(), 0.0);

  std::ofstream log(paths.train_log());
  Rng rng(tc.seed ^ 0x747261696eull);
  const double t0 = events.empty() ? 0.0 : events.front().timestamp;
  Memory memory(static_cast<std::size_t>(tg.dim),
                static_cast<std::size_t>(tg.ring_capacity));
  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    memory = Memory(static_cast<std::size_t>(tg.dim),
                    static_cast<std::size_t>(tg.ring_capacity));
    for (const SemanticVector& v : init_vectors) memory.add_node(v, t0);
    EpochMetrics m = train_epoch(events, model, memory, table, side.vectors,
                                 side.levels, tc, rng);
    log << "epoch " << epoch << " loss=" << format_double(m.mean_loss)
        << " pos_p=" << format_double(m.positive_mean_prob)
        << " neg_p=" << format_double(m.negative_mean_prob)
        << " pos_acc=" << format_double(m.positive_accuracy)
        << " neg_acc=" << format_double(m.negative_accuracy) << '\n';
  }
  model.save(paths.checkpoint());
  memory.save(paths.memory_snapshot());
}

void run_detect(const Config& cfg, const StagePaths& paths) {
  std::vector<int> hop_set;
  std::vector<GraphEvent> events = load_events(paths.test_events(), &hop_set);
  TemplateSide side = load_template_side(cfg, paths);

  TrainConfig tc = train_config_from(cfg);
  TgnConfig tg = tgn_config_from(cfg, hop_set);
  LinkModel model(tg, tc.hidden_dim, tc.seed);
  model.load(paths.checkpoint());
  Memory memory = Memory::load(paths.memory_snapshot());

  std::vector<SemanticVector> add_vectors = side.vectors;
  if (!cfg.get_bool("train.semantic_init", true))
    for (SemanticVector& v : add_vectors) v.values.assign(v.dim(), 0.0);

  std::vector<Verdict> verdicts =
      detect(events, model, memory, tc.threshold, hop_set, add_vectors);
  save_verdicts(paths.verdicts(), verdicts, hop_set);
}

MetricReport run_eval(const Config& cfg, const StagePaths& paths) {
  (void)cfg;
  std::vector<Verdict> verdicts = load_verdicts(paths.verdicts());
  MetricReport report = evaluate(verdicts);
  save_report(paths.report_json(), paths.report_txt(), report);
  return report;
}

MetricReport run_pipeline(const Config& cfg, const StagePaths& paths) {
  run_parse(cfg, paths);
  run_embed(cfg, paths);
  run_build(cfg, paths);
  run_train(cfg, paths);
  run_detect(cfg, paths);
  return run_eval(cfg, paths);
}

}  // namespace loggraph
