#pragma once

#include <cstdint>
#include <deque>
#include <string>
#include <vector>

#include "loggraph/embed.hpp"
#include "loggraph/graph.hpp"
#include "loggraph/nn.hpp"

namespace loggraph {

// One recorded in-edge: who sent it, with what features, when.
struct NeighborRecord {
  int neighbor = -1;
  std::vector<double> features;
  double timestamp = 0.0;
};

struct NodeMemory {
  nn::Vec state;
  double last_update = 0.0;
  std::deque<NeighborRecord> ring;
};

// Growable per-node memory. Node ids are contiguous; row i starts as the
// semantic vector of template i.
class Memory {
 public:
  Memory(std::size_t dim, std::size_t ring_capacity);

  static Memory init(const std::vector<SemanticVector>& embeddings,
                     std::size_t ring_capacity);

  int add_node(const SemanticVector& vector, double now);

  std::size_t size() const { return nodes_.size(); }
  std::size_t dim() const { return dim_; }
  std::size_t ring_capacity() const { return ring_capacity_; }
  bool has(int node) const { return node >= 0 && node < static_cast<int>(nodes_.size()); }
  NodeMemory& node(int id);
  const NodeMemory& node(int id) const;

  void push_neighbor(int node, NeighborRecord record);

  // Binary snapshot with full double precision; round-trips exactly.
  void save(const std::string& path) const;
  static Memory load(const std::string& path);

 private:
  std::size_t dim_;
  std::size_t ring_capacity_;
  std::vector<NodeMemory> nodes_;
};

struct Message {
  int node = -1;
  nn::Vec payload;  // [s_self(t-) || s_other(t-) || phi(dt) || edge features]
  double timestamp = 0.0;
  std::int64_t seq_index = 0;
};

enum class EmbeddingMode { Identity, TimeProjection, Tga };
enum class AggregatorMode { MostRecent, Mean };

EmbeddingMode embedding_mode_from(const std::string& name);
AggregatorMode aggregator_mode_from(const std::string& name);

struct TgnConfig {
  int dim = 64;
  int time_dim = 16;
  int heads = 2;
  int feat_dim = 0;  // flattened edge feature length
  int ring_capacity = 10;
  EmbeddingMode embedding = EmbeddingMode::Tga;
  AggregatorMode aggregator = AggregatorMode::MostRecent;
};

// The temporal graph network proper: identity message function, configurable
// aggregator, GRU memory updater and configurable embedding module. All
// learnable state lives in the caller's ParamStore so one checkpoint covers
// every hop scale.
class TgnModel {
 public:
  TgnModel(nn::ParamStore& store, const TgnConfig& config);

  const TgnConfig& config() const { return cfg_; }
  int message_dim() const { return 2 * cfg_.dim + cfg_.time_dim + cfg_.feat_dim; }

  // Identity-concatenation messages for both endpoints of an edge event.
  std::pair<Message, Message> compute_message(const GraphEvent& event,
                                              const Memory& memory,
                                              const std::vector<int>& hop_set) const;

  Message aggregate_messages(const std::vector<Message>& pending) const;

  // GRU-folds the aggregated message into the node's state and advances
  // last_update. Ring buffers are maintained separately by apply_events.
  void update_memory(const Message& aggregated, Memory& memory) const;

  // Full per-batch update: messages from the pre-batch states, per-node
  // aggregation, GRU updates, then ring-buffer appends in stream order.
  void apply_events(const std::vector<GraphEvent>& batch, Memory& memory,
                    const std::vector<int>& hop_set) const;

  struct EmbedCache {
    EmbeddingMode mode = EmbeddingMode::Identity;
    int node = -1;
    nn::Vec state;
    double dt = 0.0;
    nn::TemporalAttention::Cache tga;
  };

  nn::Vec embed_node(int node, double t, const Memory& memory,
                     EmbedCache* cache = nullptr) const;
  // Parameter gradients only; memory states are fixed inputs here.
  void embed_backward(const EmbedCache& cache, const nn::Vec& dz) const;

  nn::TimeEncoder& time_encoder() { return time_enc_; }

 private:
  TgnConfig cfg_;
  nn::ParamStore* store_;
  nn::TimeEncoder time_enc_;
  nn::GruCell gru_;
  nn::TemporalAttention tga_;
};

}  // namespace loggraph
