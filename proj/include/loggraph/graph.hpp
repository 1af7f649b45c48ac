#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <unordered_set>
#include <vector>

#include "loggraph/embed.hpp"

namespace loggraph {

// One occurrence in the chronological template sequence.
struct SequenceItem {
  int template_id = -1;
  double timestamp = 0.0;
  bool anomaly = false;
};

struct EdgeFeatures {
  double ss = 0.0;       // cosine similarity of endpoint semantic vectors
  double cf = 0.0;       // co-occurrence frequency at the edge's hop scale
  double ti_norm = 0.0;  // ln(1 + |dt|)
  LogLevel ll_dst = LogLevel::Info;
  bool ll_masked = false;  // ablation: emit an all-zero level block
  int hop = 0;

  // [ss, cf, ti, one-hot level (5), one-hot hop (|hop_set|)]
  std::vector<double> flatten(const std::vector<int>& hop_set) const;
  static std::size_t flat_dim(const std::vector<int>& hop_set) {
    return 3 + kNumLevels + hop_set.size();
  }
};

enum class EventKind { NodeAdd, Edge };

struct GraphEvent {
  EventKind kind = EventKind::Edge;
  int src = -1;
  int dst = -1;
  double timestamp = 0.0;  // the destination occurrence's timestamp
  int hop = 0;
  std::int64_t seq_index = 0;  // index of the destination occurrence
  EdgeFeatures features;       // edge events only
  bool anomaly = false;        // ground-truth label of the destination occurrence
};

// Edge-feature ablation switches (C1..C4 style). A disabled channel is zeroed
// wherever features are produced, including corrupted negatives.
struct FeatureMask {
  bool ss = true;
  bool cf = true;
  bool ti = true;
  bool ll = true;

  void apply(EdgeFeatures& features) const;
  bool all() const { return ss && cf && ti && ll; }
};

double time_interval(double t_i, double t_j);
double normalize_ti(double dt);

// Directed (src,dst) adjacency counts per hop scale, frozen after the
// training stream is consumed.
class CooccurrenceTable {
 public:
  void add(int hop, int src, int dst);
  double frequency(int hop, int src, int dst) const;
  std::uint64_t total(int hop) const;

  void save(const std::string& path) const;
  static CooccurrenceTable load(const std::string& path);

  const std::map<int, std::map<std::pair<int, int>, std::uint64_t>>& counts() const {
    return counts_;
  }

 private:
  std::map<int, std::map<std::pair<int, int>, std::uint64_t>> counts_;
  std::map<int, std::uint64_t> totals_;
};

// Counts hop-scale adjacencies of a sequence into a fresh table. H = 0 pairs
// are the self-loops (e_k, e_k).
CooccurrenceTable build_cooccurrence(const std::vector<SequenceItem>& sequence,
                                     const std::vector<int>& hop_set);

// Expands a chronological template sequence into the time-ordered event
// stream: a node-add at each template's first occurrence (skipping ids in
// known_nodes) and, per hop scale H, edges e_{k-H} -> e_k stamped with the
// destination's timestamp. H = 0 yields a self-loop per occurrence whose time
// interval is measured against the template's previous occurrence.
std::vector<GraphEvent> build_events(const std::vector<SequenceItem>& sequence,
                                     const std::vector<int>& hop_set,
                                     const std::vector<SemanticVector>& vectors,
                                     const std::vector<LogLevel>& levels,
                                     const CooccurrenceTable& table,
                                     const std::unordered_set<int>* known_nodes = nullptr);

void save_events(const std::string& path, const std::vector<GraphEvent>& events,
                 const std::vector<int>& hop_set);
std::vector<GraphEvent> load_events(const std::string& path, std::vector<int>* hop_set);

}  // namespace loggraph
