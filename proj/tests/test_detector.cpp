#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <set>
#include <vector>

#include "loggraph/detector.hpp"

using namespace loggraph;
using nn::Vec;

namespace {

std::vector<SemanticVector> unit_vectors(int n, int dim, std::uint64_t seed = 5) {
  std::vector<SemanticVector> out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  for (int i = 0; i < n; ++i) {
    SemanticVector v;
    v.values.resize(static_cast<std::size_t>(dim));
    for (double& x : v.values) x = gauss(rng);
    v.normalize();
    out.push_back(v);
  }
  return out;
}

TgnConfig small_config(int n_hops = 2) {
  TgnConfig cfg;
  cfg.dim = 8;
  cfg.time_dim = 4;
  cfg.heads = 2;
  std::vector<int> hops;
  for (int h = 0; h < n_hops; ++h) hops.push_back(h);
  cfg.feat_dim = static_cast<int>(EdgeFeatures::flat_dim(hops));
  cfg.ring_capacity = 4;
  return cfg;
}

GraphEvent positive_edge(int src, int dst, double t, int hop, std::int64_t seq) {
  GraphEvent e;
  e.kind = EventKind::Edge;
  e.src = src;
  e.dst = dst;
  e.timestamp = t;
  e.hop = hop;
  e.seq_index = seq;
  e.features.hop = hop;
  return e;
}

}  // namespace

TEST_CASE("train config validation") {
  TrainConfig ok;
  ok.validate();
  TrainConfig bad = ok;
  bad.hop_set.clear();
  CHECK_THROWS_AS(bad.validate(), contract_error);
  bad = ok;
  bad.batch_size = 0;
  CHECK_THROWS_AS(bad.validate(), contract_error);
  bad = ok;
  bad.threshold = 1.0;
  CHECK_THROWS_AS(bad.validate(), contract_error);
  bad = ok;
  bad.epochs = 0;
  CHECK_THROWS_AS(bad.validate(), contract_error);
}

TEST_CASE("a zeroed output layer scores every link at one half") {
  TgnConfig cfg = small_config();
  LinkModel model(cfg, 16, 7);
  model.store().at("link.l2.W").value.zero();
  model.store().at("link.l2.b").value.zero();
  std::mt19937_64 rng(3);
  std::normal_distribution<double> gauss;
  Vec z_i(8), z_j(8), feat(static_cast<std::size_t>(cfg.feat_dim));
  for (double& x : z_i) x = gauss(rng);
  for (double& x : z_j) x = gauss(rng);
  for (double& x : feat) x = gauss(rng);
  CHECK(model.predict_link(z_i, z_j, feat) == 0.5);
  CHECK(nn::bce_on_logit(model.predict_logit(z_i, z_j, feat), 1.0).loss ==
        doctest::Approx(std::log(2.0)));
}

TEST_CASE("link head gradients match finite differences") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    TgnConfig cfg = small_config();
    LinkModel model(cfg, 6, seed);
    std::mt19937_64 rng(seed + 100);
    std::normal_distribution<double> gauss;
    Vec z_i(8), z_j(8), feat(static_cast<std::size_t>(cfg.feat_dim));
    for (double& x : z_i) x = gauss(rng);
    for (double& x : z_j) x = gauss(rng);
    for (double& x : feat) x = gauss(rng);
    const double label = seed % 2 ? 1.0 : 0.0;

    auto loss = [&] {
      return nn::bce_on_logit(model.predict_logit(z_i, z_j, feat), label).loss;
    };
    model.store().zero_grad();
    LinkModel::PredCache cache;
    double logit = model.predict_logit(z_i, z_j, feat, &cache);
    auto [dz_i, dz_j] =
        model.predict_backward(cache, nn::bce_on_logit(logit, label).dlogit);

    const double h = 1e-5;
    auto fd_vs = [&](Vec& v, const Vec& got) {
      for (std::size_t i = 0; i < v.size(); ++i) {
        const double keep = v[i];
        v[i] = keep + h;
        const double up = loss();
        v[i] = keep - h;
        const double dn = loss();
        v[i] = keep;
        const double fd = (up - dn) / (2.0 * h);
        const double denom = std::max({1e-6, std::abs(fd), std::abs(got[i])});
        CHECK(std::abs(fd - got[i]) / denom < 1e-4);
      }
    };
    fd_vs(z_i, dz_i);
    fd_vs(z_j, dz_j);

    // head parameter gradients against finite differences
    for (const std::string& name : {"link.l1.W", "link.l1.b", "link.l2.W", "link.l2.b"}) {
      nn::Param& p = model.store().at(name);
      for (std::size_t i = 0; i < p.value.v.size(); ++i) {
        const double keep = p.value.v[i];
        p.value.v[i] = keep + h;
        const double up = loss();
        p.value.v[i] = keep - h;
        const double dn = loss();
        p.value.v[i] = keep;
        const double fd = (up - dn) / (2.0 * h);
        const double got = p.grad.v[i];
        const double denom = std::max({1e-6, std::abs(fd), std::abs(got)});
        CHECK(std::abs(fd - got) / denom < 1e-4);
      }
    }
  }
}

TEST_CASE("negative sampling: count, exclusion, features and determinism") {
  auto vectors = unit_vectors(6, 8);
  std::vector<LogLevel> levels{LogLevel::Info,  LogLevel::Error, LogLevel::Warn,
                               LogLevel::Debug, LogLevel::Fatal, LogLevel::Info};
  Memory memory = Memory::init(vectors, 4);
  for (int i = 0; i < 6; ++i) memory.node(i).last_update = 10.0 + i;

  CooccurrenceTable table;
  table.add(1, 2, 3);
  table.add(1, 2, 4);
  table.add(1, 0, 1);
  table.add(1, 0, 1);

  GraphEvent pos = positive_edge(2, 3, 100.0, 1, 50);
  Rng rng(9);
  auto negs = sample_negatives(pos, memory, table, vectors, levels, 40, rng);
  REQUIRE(negs.size() == 40);
  for (const NegativeEdge& neg : negs) {
    CHECK(neg.src == 2);
    CHECK(neg.dst != 3);  // the true destination is excluded
    CHECK(neg.dst >= 0);
    CHECK(neg.dst < 6);
    CHECK(neg.features.hop == 1);
    CHECK(neg.features.ss ==
          doctest::Approx(cosine_similarity(vectors[2], vectors[neg.dst])));
    CHECK(neg.features.cf == doctest::Approx(table.frequency(1, 2, neg.dst)));
    CHECK(neg.features.ti_norm ==
          doctest::Approx(std::log1p(100.0 - memory.node(neg.dst).last_update)));
    CHECK(neg.features.ll_dst == levels[static_cast<std::size_t>(neg.dst)]);
  }
  // all other destinations appear eventually
  std::set<int> seen;
  for (const NegativeEdge& neg : negs) seen.insert(neg.dst);
  CHECK(seen.size() == 5);

  Rng rng2(9);
  auto again = sample_negatives(pos, memory, table, vectors, levels, 40, rng2);
  for (std::size_t i = 0; i < negs.size(); ++i) CHECK(again[i].dst == negs[i].dst);

  FeatureMask no_ti;
  no_ti.ti = false;
  Rng rng3(9);
  auto masked = sample_negatives(pos, memory, table, vectors, levels, 5, rng3, no_ti);
  for (const NegativeEdge& neg : masked) CHECK(neg.features.ti_norm == 0.0);

  Memory tiny = Memory::init({vectors[0]}, 4);
  Rng rng4(9);
  CHECK(sample_negatives(pos, tiny, table, vectors, levels, 3, rng4).empty());
}

TEST_CASE("training pulls positives above corrupted negatives on a cycle") {
  const int n = 4;
  auto vectors = unit_vectors(n, 8);
  std::vector<LogLevel> levels(n, LogLevel::Info);

  // deterministic cycle 0 -> 1 -> 2 -> 3 -> 0 ... with unit spacing
  std::vector<SequenceItem> seq;
  for (int k = 0; k < 400; ++k)
    seq.push_back({k % n, static_cast<double>(k) + 1.0, false});
  std::vector<int> hops{0, 1};
  CooccurrenceTable table = build_cooccurrence(seq, hops);
  auto events = build_events(seq, hops, vectors, levels, table);

  TgnConfig cfg = small_config();
  LinkModel model(cfg, 16, 11);
  TrainConfig tc;
  tc.hop_set = hops;
  tc.batch_size = 50;
  tc.epochs = 5;
  tc.seed = 11;
  tc.learning_rate = 5e-3;
  tc.hidden_dim = 16;

  Rng rng(11);
  EpochMetrics last;
  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    Memory memory(8, static_cast<std::size_t>(cfg.ring_capacity));
    last = train_epoch(events, model, memory, table, vectors, levels, tc, rng);
  }
  CHECK(last.positives > 0);
  CHECK(last.negatives > 0);
  CHECK(last.positive_mean_prob > last.negative_mean_prob + 0.2);
  CHECK(last.mean_loss < std::log(2.0));
}

TEST_CASE("training is deterministic given the seed") {
  const int n = 3;
  auto vectors = unit_vectors(n, 8);
  std::vector<LogLevel> levels(n, LogLevel::Info);
  std::vector<SequenceItem> seq;
  std::mt19937_64 mix(2);
  for (int k = 0; k < 120; ++k)
    seq.push_back({static_cast<int>(mix() % n), static_cast<double>(k) + 1.0, false});
  std::vector<int> hops{0, 1};
  CooccurrenceTable table = build_cooccurrence(seq, hops);
  auto events = build_events(seq, hops, vectors, levels, table);

  auto run = [&] {
    TgnConfig cfg = small_config();
    LinkModel model(cfg, 8, 21);
    TrainConfig tc;
    tc.hop_set = hops;
    tc.batch_size = 40;
    tc.epochs = 2;
    tc.seed = 21;
    tc.hidden_dim = 8;
    Rng rng(21);
    Memory memory(8, 4);
    EpochMetrics m;
    for (int e = 0; e < tc.epochs; ++e) {
      memory = Memory(8, 4);
      m = train_epoch(events, model, memory, table, vectors, levels, tc, rng);
    }
    return std::make_pair(m.mean_loss, model.store().at("link.l1.W").value.v);
  };
  auto a = run(), b = run();
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
}

TEST_CASE("detection emits one verdict per log event and updates memory") {
  const int n = 3;
  auto vectors = unit_vectors(n + 2, 8);  // two templates unseen in training
  std::vector<LogLevel> levels(n + 2, LogLevel::Info);
  std::vector<int> hops{0, 1};

  std::vector<SequenceItem> test_seq{
      {0, 10.0, false}, {1, 11.0, false}, {3, 12.0, true}, {4, 13.0, false},
      {2, 14.0, false},
  };
  CooccurrenceTable table;
  std::unordered_set<int> known{0, 1, 2};
  auto events = build_events(test_seq, hops, vectors, levels, table, &known);

  TgnConfig cfg = small_config();
  LinkModel model(cfg, 16, 31);
  Memory memory = Memory::init({vectors[0], vectors[1], vectors[2]}, 4);

  auto verdicts = detect(events, model, memory, 0.5, hops, vectors);
  CHECK(memory.size() == 5);  // grew by the two unseen templates
  REQUIRE(verdicts.size() == test_seq.size());
  for (std::size_t i = 0; i < verdicts.size(); ++i) {
    CHECK(verdicts[i].seq_index == static_cast<std::int64_t>(i));
    CHECK(verdicts[i].template_id == test_seq[i].template_id);
    CHECK(verdicts[i].truth == test_seq[i].anomaly);
    CHECK(verdicts[i].hop_probs.size() == (i == 0 ? 1 : 2));  // no hop-1 edge first
    if (verdicts[i].anomaly) {
      REQUIRE(verdicts[i].trigger_hop.has_value());
      bool found = false;
      for (auto [h, p] : verdicts[i].hop_probs)
        if (h == *verdicts[i].trigger_hop) {
          CHECK(p < 0.5);
          found = true;
        }
      CHECK(found);
    } else {
      CHECK_FALSE(verdicts[i].trigger_hop.has_value());
      for (auto [h, p] : verdicts[i].hop_probs) CHECK(p >= 0.5);
    }
  }
}

TEST_CASE("raising the threshold can only flag more events") {
  const int n = 4;
  auto vectors = unit_vectors(n, 8);
  std::vector<LogLevel> levels(n, LogLevel::Info);
  std::vector<int> hops{0, 1};
  std::vector<SequenceItem> seq;
  std::mt19937_64 mix(8);
  for (int k = 0; k < 80; ++k)
    seq.push_back({static_cast<int>(mix() % n), static_cast<double>(k) + 1.0, false});
  CooccurrenceTable table = build_cooccurrence(seq, hops);
  auto events = build_events(seq, hops, vectors, levels, table);

  auto flagged = [&](double threshold) {
    TgnConfig cfg = small_config();
    LinkModel model(cfg, 16, 41);
    Memory memory = Memory::init(vectors, 4);
    std::set<std::int64_t> out;
    for (const Verdict& v : detect(events, model, memory, threshold, hops, vectors))
      if (v.anomaly) out.insert(v.seq_index);
    return out;
  };
  auto low = flagged(0.2), high = flagged(0.8);
  CHECK(std::includes(high.begin(), high.end(), low.begin(), low.end()));
  CHECK(high.size() >= low.size());
}

TEST_CASE("verdicts round-trip through CSV") {
  std::vector<Verdict> verdicts;
  Verdict a;
  a.seq_index = 12;
  a.timestamp = 34.5;
  a.template_id = 3;
  a.hop_probs = {{0, 0.75}, {1, 0.25}};
  a.anomaly = true;
  a.trigger_hop = 1;
  a.truth = true;
  Verdict b;
  b.seq_index = 13;
  b.timestamp = 35.5;
  b.template_id = 0;
  b.hop_probs = {{0, 0.9}};  // no hop-1 edge for this event
  verdicts.push_back(a);
  verdicts.push_back(b);

  std::string path = (std::filesystem::temp_directory_path() / "lg_verdicts.csv").string();
  save_verdicts(path, verdicts, {0, 1});
  auto back = load_verdicts(path);
  REQUIRE(back.size() == 2);
  CHECK(back[0].seq_index == 12);
  CHECK(back[0].hop_probs == a.hop_probs);
  CHECK(back[0].anomaly);
  CHECK(back[0].trigger_hop == 1);
  CHECK(back[0].truth);
  CHECK(back[1].hop_probs == b.hop_probs);
  CHECK_FALSE(back[1].anomaly);
  CHECK_FALSE(back[1].trigger_hop.has_value());
  CHECK_FALSE(back[1].truth);
  std::filesystem::remove(path);
}
