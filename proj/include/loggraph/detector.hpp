#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "loggraph/graph.hpp"
#include "loggraph/tgn.hpp"

namespace loggraph {

struct TrainConfig {
  std::vector<int> hop_set{0, 1};
  int batch_size = 200;
  int epochs = 5;
  int negatives_per_positive = 1;
  double threshold = 0.5;
  std::uint64_t seed = 0;
  double learning_rate = 1e-3;
  int hidden_dim = 64;
  FeatureMask feature_mask;  // applied to recomputed negative features

  void validate() const;
};

// The TGN plus the two-layer link head, all in one ParamStore: a single
// parameter set shared by every hop graph, checkpointed as one file.
class LinkModel {
 public:
  LinkModel(const TgnConfig& tgn_config, int hidden_dim, std::uint64_t seed);

  struct PredCache {
    nn::Vec input;
    nn::Vec hidden;  // post-tanh
  };

  // Logit of the link (i -> j) given endpoint embeddings and edge features.
  double predict_logit(const nn::Vec& z_i, const nn::Vec& z_j, const nn::Vec& features,
                       PredCache* cache = nullptr) const;
  double predict_link(const nn::Vec& z_i, const nn::Vec& z_j,
                      const nn::Vec& features) const;
  // Returns (dz_i, dz_j) and accumulates head parameter gradients.
  std::pair<nn::Vec, nn::Vec> predict_backward(const PredCache& cache,
                                               double dlogit) const;

  nn::ParamStore& store() { return store_; }
  const nn::ParamStore& store() const { return store_; }
  TgnModel& tgn() { return tgn_; }
  const TgnModel& tgn() const { return tgn_; }

  void save(const std::string& path) const { store_.save(path); }
  void load(const std::string& path) { store_.load(path); }

 private:
  nn::ParamStore store_;
  TgnModel tgn_;
  nn::Linear l1_, l2_;
};

struct NegativeEdge {
  int src = -1;
  int dst = -1;  // corrupted destination
  EdgeFeatures features;
};

// Uniform destination corruption. The corrupted features are recomputed: SS
// from the semantic vectors, CF from the frozen table, TI against the
// corrupted node's last update, LL from the corrupted node's level.
std::vector<NegativeEdge> sample_negatives(const GraphEvent& positive,
                                           const Memory& memory,
                                           const CooccurrenceTable& table,
                                           const std::vector<SemanticVector>& vectors,
                                           const std::vector<LogLevel>& levels,
                                           int k, Rng& rng,
                                           const FeatureMask& mask = {});

struct EpochMetrics {
  double mean_loss = 0.0;
  double positive_mean_prob = 0.0;
  double negative_mean_prob = 0.0;
  double positive_accuracy = 0.0;
  double negative_accuracy = 0.0;
  std::uint64_t positives = 0;
  std::uint64_t negatives = 0;
};

// One pass over the chronological stream. Each log event's edges are scored
// (with sampled negatives) against the memory exactly as detection would see
// it -- all earlier events applied, its own not yet -- then applied; an Adam
// step is taken for every batch_size scored edges.
EpochMetrics train_epoch(const std::vector<GraphEvent>& events, LinkModel& model,
                         Memory& memory, const CooccurrenceTable& table,
                         const std::vector<SemanticVector>& vectors,
                         const std::vector<LogLevel>& levels,
                         const TrainConfig& config, Rng& rng);

struct Verdict {
  std::int64_t seq_index = 0;
  double timestamp = 0.0;
  int template_id = -1;
  std::vector<std::pair<int, double>> hop_probs;  // (hop, probability)
  bool anomaly = false;
  std::optional<int> trigger_hop;
  bool truth = false;
};

// Event-level scoring: one verdict per log event with at least one in-edge;
// anomaly iff any hop probability falls below the threshold. Node additions
// grow memory first; observed events keep updating memory.
std::vector<Verdict> detect(const std::vector<GraphEvent>& events, LinkModel& model,
                            Memory& memory, double threshold,
                            const std::vector<int>& hop_set,
                            const std::vector<SemanticVector>& vectors);

void save_verdicts(const std::string& path, const std::vector<Verdict>& verdicts,
                   const std::vector<int>& hop_set);
std::vector<Verdict> load_verdicts(const std::string& path);

}  // namespace loggraph
