#include "loggraph/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace loggraph {

std::vector<double> EdgeFeatures::flatten(const std::vector<int>& hop_set) const {
  std::vector<double> out;
  out.reserve(flat_dim(hop_set));
  out.push_back(ss);
  out.push_back(cf);
  out.push_back(ti_norm);
  if (ll_masked) {
    out.insert(out.end(), kNumLevels, 0.0);
  } else {
    auto ll = one_hot_level(ll_dst);
    out.insert(out.end(), ll.begin(), ll.end());
  }
  for (int h : hop_set) out.push_back(h == hop ? 1.0 : 0.0);
  return out;
}

void FeatureMask::apply(EdgeFeatures& features) const {
  if (!ss) features.ss = 0.0;
  if (!cf) features.cf = 0.0;
  if (!ti) features.ti_norm = 0.0;
  if (!ll) features.ll_masked = true;
}

double time_interval(double t_i, double t_j) { return std::abs(t_i - t_j); }

double normalize_ti(double dt) { return std::log1p(std::abs(dt)); }

void CooccurrenceTable::add(int hop, int src, int dst) {
  counts_[hop][{src, dst}] += 1;
  totals_[hop] += 1;
}

double CooccurrenceTable::frequency(int hop, int src, int dst) const {
  auto th = totals_.find(hop);
  if (th == totals_.end() || th->second == 0) return 0.0;
  auto ch = counts_.find(hop);
  auto it = ch->second.find({src, dst});
  if (it == ch->second.end()) return 0.0;
  return static_cast<double>(it->second) / static_cast<double>(th->second);
}

std::uint64_t CooccurrenceTable::total(int hop) const {
  auto it = totals_.find(hop);
  return it == totals_.end() ? 0 : it->second;
}

void CooccurrenceTable::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw format_error("cannot write co-occurrence table: " + path);
  out << "hop,src,dst,count\n";
  for (const auto& [hop, pairs] : counts_)
    for (const auto& [pair, count] : pairs)
      out << hop << ',' << pair.first << ',' << pair.second << ',' << count << '\n';
}

CooccurrenceTable CooccurrenceTable::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw format_error("cannot open co-occurrence table: " + path);
  std::string line;
  if (!std::getline(in, line)) throw format_error("empty co-occurrence table: " + path);
  CooccurrenceTable table;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    int hop, src, dst;
    std::uint64_t count;
    char c;
    std::istringstream ss(line);
    if (!(ss >> hop >> c >> src >> c >> dst >> c >> count))
      throw format_error("bad co-occurrence row: " + line);
    table.counts_[hop][{src, dst}] += count;
    table.totals_[hop] += count;
  }
  return table;
}

CooccurrenceTable build_cooccurrence(const std::vector<SequenceItem>& sequence,
                                     const std::vector<int>& hop_set) {
  CooccurrenceTable table;
  const std::int64_t n = static_cast<std::int64_t>(sequence.size());
  for (int hop : hop_set)
    for (std::int64_t k = hop; k < n; ++k)
      table.add(hop, sequence[k - hop].template_id, sequence[k].template_id);
  return table;
}

std::vector<GraphEvent> build_events(const std::vector<SequenceItem>& sequence,
                                     const std::vector<int>& hop_set,
                                     const std::vector<SemanticVector>& vectors,
                                     const std::vector<LogLevel>& levels,
                                     const CooccurrenceTable& table,
                                     const std::unordered_set<int>* known_nodes) {
  if (hop_set.empty()) throw contract_error("build_events: empty hop set");
  std::vector<GraphEvent> events;
  const std::int64_t n = static_cast<std::int64_t>(sequence.size());
  std::unordered_set<int> seen;
  std::unordered_map<int, double> last_occurrence;

  for (std::int64_t k = 0; k < n; ++k) {
    const SequenceItem& item = sequence[k];
    if (!seen.count(item.template_id) &&
        (!known_nodes || !known_nodes->count(item.template_id))) {
      GraphEvent ev;
      ev.kind = EventKind::NodeAdd;
      ev.src = ev.dst = item.template_id;
      ev.timestamp = item.timestamp;
      ev.seq_index = k;
      ev.anomaly = item.anomaly;
      events.push_back(ev);
    }
    seen.insert(item.template_id);

    for (int hop : hop_set) {
      if (k < hop) continue;
      const SequenceItem& src = sequence[k - hop];
      GraphEvent ev;
      ev.kind = EventKind::Edge;
      ev.src = src.template_id;
      ev.dst = item.template_id;
      ev.timestamp = item.timestamp;
      ev.hop = hop;
      ev.seq_index = k;
      ev.anomaly = item.anomaly;
      ev.features.hop = hop;
      ev.features.ss = cosine_similarity(vectors.at(ev.src), vectors.at(ev.dst));
      ev.features.cf = table.frequency(hop, ev.src, ev.dst);
      double dt;
      if (hop == 0) {
        auto prev = last_occurrence.find(item.template_id);
        dt = prev == last_occurrence.end() ? 0.0
                                           : time_interval(item.timestamp, prev->second);
      } else {
        dt = time_interval(src.timestamp, item.timestamp);
      }
      ev.features.ti_norm = normalize_ti(dt);
      ev.features.ll_dst = levels.at(ev.dst);
      events.push_back(ev);
    }
    last_occurrence[item.template_id] = item.timestamp;
  }

  std::stable_sort(events.begin(), events.end(),
                   [](const GraphEvent& a, const GraphEvent& b) {
                     if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
                     if (a.seq_index != b.seq_index) return a.seq_index < b.seq_index;
                     if (a.kind != b.kind) return a.kind == EventKind::NodeAdd;
                     return a.hop < b.hop;
                   });
  return events;
}

void save_events(const std::string& path, const std::vector<GraphEvent>& events,
                 const std::vector<int>& hop_set) {
  std::ofstream out(path);
  if (!out) throw format_error("cannot write event stream: " + path);
  out << "#hops=";
  for (std::size_t i = 0; i < hop_set.size(); ++i)
    out << (i ? "," : "") << hop_set[i];
  out << '\n';
  out << "kind,src,dst,timestamp,hop,seq_index,ss,cf,ti,level,label\n";
  for (const GraphEvent& e : events) {
    out << (e.kind == EventKind::NodeAdd ? "node" : "edge") << ',' << e.src << ','
        << e.dst << ',' << format_double(e.timestamp) << ',' << e.hop << ','
        << e.seq_index << ',' << format_double(e.features.ss) << ','
        << format_double(e.features.cf) << ',' << format_double(e.features.ti_norm)
        << ',' << (e.features.ll_masked ? -1 : static_cast<int>(e.features.ll_dst))
        << ',' << (e.anomaly ? 1 : 0) << '\n';
  }
  if (!out) throw format_error("write failure on event stream: " + path);
}

std::vector<GraphEvent> load_events(const std::string& path, std::vector<int>* hop_set) {
  std::ifstream in(path);
  if (!in) throw format_error("cannot open event stream: " + path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("#hops=", 0) != 0)
    throw format_error("missing #hops header in " + path);
  if (hop_set) {
    hop_set->clear();
    std::istringstream hs(line.substr(6));
    std::string part;
    while (std::getline(hs, part, ',')) hop_set->push_back(std::stoi(part));
  }
  if (!std::getline(in, line)) throw format_error("missing column header in " + path);
  std::vector<GraphEvent> events;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string field;
    std::vector<std::string> f;
    while (std::getline(ss, field, ',')) f.push_back(field);
    if (f.size() != 11) throw format_error("bad event row: " + line);
    GraphEvent e;
    e.kind = f[0] == "node" ? EventKind::NodeAdd : EventKind::Edge;
    e.src = std::stoi(f[1]);
    e.dst = std::stoi(f[2]);
    e.timestamp = std::stod(f[3]);
    e.hop = std::stoi(f[4]);
    e.seq_index = std::stoll(f[5]);
    e.features.ss = std::stod(f[6]);
    e.features.cf = std::stod(f[7]);
    e.features.ti_norm = std::stod(f[8]);
    int level = std::stoi(f[9]);
    if (level < 0) {
      e.features.ll_masked = true;
    } else {
      e.features.ll_dst = static_cast<LogLevel>(level);
    }
    e.features.hop = e.hop;
    e.anomaly = f[10] == "1";
    events.push_back(e);
  }
  return events;
}

}  // namespace loggraph
