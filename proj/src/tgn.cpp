#include "loggraph/tgn.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <map>

namespace loggraph {

Memory::Memory(std::size_t dim, std::size_t ring_capacity)
    : dim_(dim), ring_capacity_(ring_capacity) {}

Memory Memory::init(const std::vector<SemanticVector>& embeddings,
                    std::size_t ring_capacity) {
  if (embeddings.empty()) return Memory(0, ring_capacity);
  Memory mem(embeddings[0].dim(), ring_capacity);
  for (const SemanticVector& v : embeddings) mem.add_node(v, 0.0);
  return mem;
}

int Memory::add_node(const SemanticVector& vector, double now) {
  if (dim_ == 0) dim_ = vector.dim();
  if (vector.dim() != dim_) throw contract_error("add_node: dimension mismatch");
  NodeMemory n;
  n.state = vector.values;
  n.last_update = now;
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

NodeMemory& Memory::node(int id) {
  if (!has(id)) throw contract_error("unknown node " + std::to_string(id));
  return nodes_[id];
}

const NodeMemory& Memory::node(int id) const {
  if (!has(id)) throw contract_error("unknown node " + std::to_string(id));
  return nodes_[id];
}

void Memory::push_neighbor(int node_id, NeighborRecord record) {
  NodeMemory& n = node(node_id);
  n.ring.push_back(std::move(record));
  while (n.ring.size() > ring_capacity_) n.ring.pop_front();
}

static constexpr char kMagic[4] = {'L', 'G', 'M', 'S'};

void Memory::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw format_error("cannot write memory snapshot: " + path);
  out.write(kMagic, 4);
  std::uint32_t count = static_cast<std::uint32_t>(nodes_.size());
  std::uint32_t dim = static_cast<std::uint32_t>(dim_);
  std::uint32_t cap = static_cast<std::uint32_t>(ring_capacity_);
  out.write(reinterpret_cast<const char*>(&count), 4);
  out.write(reinterpret_cast<const char*>(&dim), 4);
  out.write(reinterpret_cast<const char*>(&cap), 4);
  for (const NodeMemory& n : nodes_) {
    out.write(reinterpret_cast<const char*>(n.state.data()), 8 * dim_);
    out.write(reinterpret_cast<const char*>(&n.last_update), 8);
    std::uint32_t rsize = static_cast<std::uint32_t>(n.ring.size());
    out.write(reinterpret_cast<const char*>(&rsize), 4);
    for (const NeighborRecord& r : n.ring) {
      std::int32_t nbr = r.neighbor;
      std::uint32_t flen = static_cast<std::uint32_t>(r.features.size());
      out.write(reinterpret_cast<const char*>(&nbr), 4);
      out.write(reinterpret_cast<const char*>(&r.timestamp), 8);
      out.write(reinterpret_cast<const char*>(&flen), 4);
      out.write(reinterpret_cast<const char*>(r.features.data()), 8 * flen);
    }
  }
  if (!out) throw format_error("write failure on memory snapshot: " + path);
}

Memory Memory::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw format_error("cannot open memory snapshot: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw format_error("bad magic in memory snapshot: " + path);
  std::uint32_t count = 0, dim = 0, cap = 0;
  in.read(reinterpret_cast<char*>(&count), 4);
  in.read(reinterpret_cast<char*>(&dim), 4);
  in.read(reinterpret_cast<char*>(&cap), 4);
  Memory mem(dim, cap);
  for (std::uint32_t i = 0; i < count; ++i) {
    NodeMemory n;
    n.state.resize(dim);
    in.read(reinterpret_cast<char*>(n.state.data()), 8 * dim);
    in.read(reinterpret_cast<char*>(&n.last_update), 8);
    std::uint32_t rsize = 0;
    in.read(reinterpret_cast<char*>(&rsize), 4);
    if (!in) throw format_error("truncated memory snapshot: " + path);
    for (std::uint32_t j = 0; j < rsize; ++j) {
      NeighborRecord r;
      std::int32_t nbr;
      std::uint32_t flen = 0;
      in.read(reinterpret_cast<char*>(&nbr), 4);
      in.read(reinterpret_cast<char*>(&r.timestamp), 8);
      in.read(reinterpret_cast<char*>(&flen), 4);
      r.features.resize(flen);
      in.read(reinterpret_cast<char*>(r.features.data()), 8 * flen);
      r.neighbor = nbr;
      n.ring.push_back(std::move(r));
    }
    if (!in) throw format_error("truncated memory snapshot: " + path);
    mem.nodes_.push_back(std::move(n));
  }
  return mem;
}

EmbeddingMode embedding_mode_from(const std::string& name) {
  if (name == "identity") return EmbeddingMode::Identity;
  if (name == "time_projection") return EmbeddingMode::TimeProjection;
  if (name == "tga") return EmbeddingMode::Tga;
  throw contract_error("unknown embedding mode: " + name);
}

AggregatorMode aggregator_mode_from(const std::string& name) {
  if (name == "most_recent") return AggregatorMode::MostRecent;
  if (name == "mean") return AggregatorMode::Mean;
  throw contract_error("unknown aggregator mode: " + name);
}

TgnModel::TgnModel(nn::ParamStore& store, const TgnConfig& config)
    : cfg_(config),
      store_(&store),
      time_enc_(store, "time_enc", config.time_dim),
      gru_(store, "gru", 2 * config.dim + config.time_dim + config.feat_dim,
           config.dim),
      tga_(store, "tga", config.dim, config.feat_dim, time_enc_, config.heads) {
  // time-projection weight registered unconditionally so the checkpoint layout
  // does not depend on the embedding mode
  store.add("tproj.w", 1, config.dim, nn::Init::Zero);
}

std::pair<Message, Message> TgnModel::compute_message(
    const GraphEvent& event, const Memory& memory,
    const std::vector<int>& hop_set) const {
  const NodeMemory& src = memory.node(event.src);
  const NodeMemory& dst = memory.node(event.dst);
  std::vector<double> feat = event.features.flatten(hop_set);
  if (static_cast<int>(feat.size()) != cfg_.feat_dim)
    throw contract_error("compute_message: feature length mismatch");

  auto build = [&](const NodeMemory& self, const NodeMemory& other, int node_id) {
    Message m;
    m.node = node_id;
    m.timestamp = event.timestamp;
    m.seq_index = event.seq_index;
    m.payload.reserve(message_dim());
    m.payload.insert(m.payload.end(), self.state.begin(), self.state.end());
    m.payload.insert(m.payload.end(), other.state.begin(), other.state.end());
    nn::Vec te = time_enc_.forward(event.timestamp - self.last_update);
    m.payload.insert(m.payload.end(), te.begin(), te.end());
    m.payload.insert(m.payload.end(), feat.begin(), feat.end());
    return m;
  };
  return {build(dst, src, event.dst), build(src, dst, event.src)};
}

Message TgnModel::aggregate_messages(const std::vector<Message>& pending) const {
  if (pending.empty()) throw contract_error("aggregate_messages: empty list");
  if (cfg_.aggregator == AggregatorMode::MostRecent) {
    const Message* best = &pending[0];
    for (const Message& m : pending) {
      if (m.timestamp > best->timestamp ||
          (m.timestamp == best->timestamp && m.seq_index > best->seq_index))
        best = &m;
    }
    return *best;
  }
  Message mean = pending[0];
  for (std::size_t k = 1; k < pending.size(); ++k) {
    const Message& m = pending[k];
    for (std::size_t i = 0; i < mean.payload.size(); ++i)
      mean.payload[i] += m.payload[i];
    if (m.timestamp > mean.timestamp ||
        (m.timestamp == mean.timestamp && m.seq_index > mean.seq_index)) {
      mean.timestamp = m.timestamp;
      mean.seq_index = m.seq_index;
    }
  }
  double inv = 1.0 / static_cast<double>(pending.size());
  for (double& x : mean.payload) x *= inv;
  return mean;
}

void TgnModel::update_memory(const Message& aggregated, Memory& memory) const {
  NodeMemory& n = memory.node(aggregated.node);
  n.state = gru_.forward(aggregated.payload, n.state);
  n.last_update = aggregated.timestamp;
}

void TgnModel::apply_events(const std::vector<GraphEvent>& batch, Memory& memory,
                            const std::vector<int>& hop_set) const {
  std::map<int, std::vector<Message>> pending;
  for (const GraphEvent& ev : batch) {
    if (ev.kind != EventKind::Edge) continue;
    auto [for_dst, for_src] = compute_message(ev, memory, hop_set);
    pending[ev.dst].push_back(std::move(for_dst));
    if (ev.src != ev.dst) pending[ev.src].push_back(std::move(for_src));
  }
  for (auto& [node_id, messages] : pending)
    update_memory(aggregate_messages(messages), memory);
  for (const GraphEvent& ev : batch) {
    if (ev.kind != EventKind::Edge) continue;
    memory.push_neighbor(ev.dst, {ev.src, ev.features.flatten(hop_set), ev.timestamp});
  }
}

nn::Vec TgnModel::embed_node(int node, double t, const Memory& memory,
                             EmbedCache* cache) const {
  const NodeMemory& n = memory.node(node);
  if (cache) {
    cache->mode = cfg_.embedding;
    cache->node = node;
    cache->state = n.state;
  }
  switch (cfg_.embedding) {
    case EmbeddingMode::Identity:
      return n.state;
    case EmbeddingMode::TimeProjection: {
      double dt = t - n.last_update;
      const nn::Vec& w = store_->at("tproj.w").value.v;
      nn::Vec z(n.state.size());
      for (std::size_t i = 0; i < z.size(); ++i)
        z[i] = (1.0 + dt * w[i]) * n.state[i];
      if (cache) cache->dt = dt;
      return z;
    }
    case EmbeddingMode::Tga: {
      std::vector<nn::AttentionNeighbor> neighbors;
      neighbors.reserve(n.ring.size());
      for (const NeighborRecord& r : n.ring)
        neighbors.push_back({memory.node(r.neighbor).state, r.features,
                             t - r.timestamp});
      return tga_.forward(n.state, neighbors, cache ? &cache->tga : nullptr);
    }
  }
  throw contract_error("embed_node: bad mode");
}

void TgnModel::embed_backward(const EmbedCache& cache, const nn::Vec& dz) const {
  switch (cache.mode) {
    case EmbeddingMode::Identity:
      return;  // no parameters on this path
    case EmbeddingMode::TimeProjection: {
      nn::Vec& dw = store_->at("tproj.w").grad.v;
      for (std::size_t i = 0; i < dz.size(); ++i)
        dw[i] += dz[i] * cache.dt * cache.state[i];
      return;
    }
    case EmbeddingMode::Tga:
      tga_.backward(cache.tga, dz);
      return;
  }
}

}  // namespace loggraph
