#include "loggraph/detector.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace loggraph {

void TrainConfig::validate() const {
  if (hop_set.empty()) throw contract_error("TrainConfig: empty hop set");
  if (batch_size < 1) throw contract_error("TrainConfig: batch size must be >= 1");
  if (negatives_per_positive < 1)
    throw contract_error("TrainConfig: negatives per positive must be >= 1");
  if (threshold <= 0.0 || threshold >= 1.0)
    throw contract_error("TrainConfig: threshold must be in (0,1)");
  if (epochs < 1) throw contract_error("TrainConfig: epochs must be >= 1");
}

LinkModel::LinkModel(const TgnConfig& tgn_config, int hidden_dim, std::uint64_t seed)
    : store_(seed),
      tgn_(store_, tgn_config),
      l1_(store_, "link.l1", 2 * tgn_config.dim + tgn_config.feat_dim, hidden_dim),
      l2_(store_, "link.l2", hidden_dim, 1) {}

// The raw co-occurrence frequency is count/total, which packs rare-but-real
// pairs and never-seen pairs into a sliver near zero. The head reads it on a
// log scale so that distinction is resolvable at trainable weight magnitudes.
static double cf_input_transform(double cf) {
  return std::log1p(std::max(cf, 0.0) * 1e4);
}

// The interval feature is unbounded above; a linear head input would
// extrapolate wildly on intervals beyond anything seen in training. Squashing
// it keeps far-tail intervals from dominating the logit.
static double ti_input_transform(double ti) { return std::tanh(ti / 4.0); }

double LinkModel::predict_logit(const nn::Vec& z_i, const nn::Vec& z_j,
                                const nn::Vec& features, PredCache* cache) const {
  nn::Vec in;
  in.reserve(z_i.size() + z_j.size() + features.size());
  in.insert(in.end(), z_i.begin(), z_i.end());
  in.insert(in.end(), z_j.begin(), z_j.end());
  in.insert(in.end(), features.begin(), features.end());
  // feature layout: [ss, cf, ti, level one-hot, hop one-hot]
  in[z_i.size() + z_j.size() + 1] = cf_input_transform(features[1]);
  in[z_i.size() + z_j.size() + 2] = ti_input_transform(features[2]);
  nn::Vec h = l1_.forward(in);
  for (double& x : h) x = std::tanh(x);
  double logit = l2_.forward(h)[0];
  if (cache) {
    cache->input = std::move(in);
    cache->hidden = std::move(h);
  }
  return logit;
}

double LinkModel::predict_link(const nn::Vec& z_i, const nn::Vec& z_j,
                               const nn::Vec& features) const {
  return nn::sigmoid(predict_logit(z_i, z_j, features));
}

std::pair<nn::Vec, nn::Vec> LinkModel::predict_backward(const PredCache& cache,
                                                        double dlogit) const {
  nn::Vec dh = l2_.backward(cache.hidden, {dlogit});
  for (std::size_t i = 0; i < dh.size(); ++i)
    dh[i] *= 1.0 - cache.hidden[i] * cache.hidden[i];
  nn::Vec din = l1_.backward(cache.input, dh);
  const int d = tgn_.config().dim;
  nn::Vec dz_i(din.begin(), din.begin() + d);
  nn::Vec dz_j(din.begin() + d, din.begin() + 2 * d);
  return {std::move(dz_i), std::move(dz_j)};
}

std::vector<NegativeEdge> sample_negatives(const GraphEvent& positive,
                                           const Memory& memory,
                                           const CooccurrenceTable& table,
                                           const std::vector<SemanticVector>& vectors,
                                           const std::vector<LogLevel>& levels,
                                           int k, Rng& rng,
                                           const FeatureMask& mask) {
  std::vector<NegativeEdge> out;
  const int universe = static_cast<int>(memory.size());
  if (universe < 2) return out;  // nothing to corrupt with
  std::uniform_int_distribution<int> pick(0, universe - 2);
  for (int i = 0; i < k; ++i) {
    int dst = pick(rng);
    if (dst >= positive.dst) ++dst;  // exclude the true destination
    NegativeEdge neg;
    neg.src = positive.src;
    neg.dst = dst;
    neg.features.hop = positive.hop;
    neg.features.ss = cosine_similarity(vectors.at(positive.src), vectors.at(dst));
    neg.features.cf = table.frequency(positive.hop, positive.src, dst);
    neg.features.ti_norm =
        normalize_ti(positive.timestamp - memory.node(dst).last_update);
    neg.features.ll_dst = levels.at(dst);
    mask.apply(neg.features);
    out.push_back(std::move(neg));
  }
  return out;
}

namespace {

// One scored example whose backward pass is deferred until the optimizer
// window closes; every cache copies its inputs, so applying later events to
// the memory does not invalidate it.
struct ScoredExample {
  TgnModel::EmbedCache src_cache;
  nn::Vec dsrc;
  std::vector<std::pair<TgnModel::EmbedCache, nn::Vec>> dst_caches;
  std::vector<LinkModel::PredCache> pred_caches;
  std::vector<double> dlogits;
};

}  // namespace

EpochMetrics train_epoch(const std::vector<GraphEvent>& events, LinkModel& model,
                         Memory& memory, const CooccurrenceTable& table,
                         const std::vector<SemanticVector>& vectors,
                         const std::vector<LogLevel>& levels,
                         const TrainConfig& config, Rng& rng) {
  config.validate();
  TgnModel& tgn = model.tgn();
  EpochMetrics acc;
  double loss_total = 0.0;
  std::uint64_t windows = 0;

  // Scoring mirrors detection exactly: a log event's edges are scored against
  // the memory with every earlier event applied but not its own, then the
  // event is applied. Gradients are averaged per window of batch_size edges.
  std::vector<ScoredExample> window;
  double window_loss = 0.0;
  std::uint64_t window_examples = 0;
  int window_edges = 0;
  std::int64_t window_start = 0;

  auto close_window = [&]() {
    if (window.empty()) return;
    const double mean_loss = window_loss / static_cast<double>(window_examples);
    if (std::isnan(mean_loss))
      throw std::runtime_error("NaN loss in training window at seq_index " +
                               std::to_string(window_start));
    loss_total += mean_loss;
    ++windows;
    const double inv = 1.0 / static_cast<double>(window_examples);
    model.store().zero_grad();
    for (ScoredExample& ex : window) {
      for (std::size_t e = 0; e < ex.pred_caches.size(); ++e) {
        auto [dz_i, dz_j] =
            model.predict_backward(ex.pred_caches[e], ex.dlogits[e] * inv);
        for (std::size_t i = 0; i < dz_i.size(); ++i) ex.dsrc[i] += dz_i[i];
        tgn.embed_backward(ex.dst_caches[e].first, dz_j);
      }
      tgn.embed_backward(ex.src_cache, ex.dsrc);
    }
    model.store().adam_step(config.learning_rate);
    window.clear();
    window_loss = 0.0;
    window_examples = 0;
    window_edges = 0;
  };

  std::size_t i = 0;
  while (i < events.size()) {
    const std::int64_t seq = events[i].seq_index;
    std::size_t j = i;
    while (j < events.size() && events[j].seq_index == seq) ++j;

    std::vector<GraphEvent> edges;
    for (std::size_t k = i; k < j; ++k) {
      const GraphEvent& ev = events[k];
      if (ev.kind == EventKind::NodeAdd) {
        if (!memory.has(ev.dst)) memory.add_node(vectors.at(ev.dst), ev.timestamp);
      } else {
        edges.push_back(ev);
      }
    }

    for (const GraphEvent& ev : edges) {
      if (window.empty() && window_edges == 0) window_start = ev.seq_index;
      ScoredExample ex;
      nn::Vec z_src = tgn.embed_node(ev.src, ev.timestamp, memory, &ex.src_cache);
      ex.dsrc.assign(z_src.size(), 0.0);

      TgnModel::EmbedCache dst_cache;
      nn::Vec z_dst = tgn.embed_node(ev.dst, ev.timestamp, memory, &dst_cache);
      LinkModel::PredCache pc;
      double logit =
          model.predict_logit(z_src, z_dst, ev.features.flatten(config.hop_set), &pc);
      nn::BceResult pos = nn::bce_on_logit(logit, 1.0);
      window_loss += pos.loss;
      ++window_examples;
      acc.positive_mean_prob += pos.p;
      acc.positive_accuracy += pos.p >= 0.5 ? 1.0 : 0.0;
      ++acc.positives;
      ex.dst_caches.emplace_back(std::move(dst_cache), nn::Vec());
      ex.pred_caches.push_back(std::move(pc));
      ex.dlogits.push_back(pos.dlogit);

      for (const NegativeEdge& neg :
           sample_negatives(ev, memory, table, vectors, levels,
                            config.negatives_per_positive, rng, config.feature_mask)) {
        TgnModel::EmbedCache neg_cache;
        nn::Vec z_neg = tgn.embed_node(neg.dst, ev.timestamp, memory, &neg_cache);
        LinkModel::PredCache npc;
        double nlogit = model.predict_logit(z_src, z_neg,
                                            neg.features.flatten(config.hop_set), &npc);
        nn::BceResult res = nn::bce_on_logit(nlogit, 0.0);
        window_loss += res.loss;
        ++window_examples;
        acc.negative_mean_prob += res.p;
        acc.negative_accuracy += res.p < 0.5 ? 1.0 : 0.0;
        ++acc.negatives;
        ex.dst_caches.emplace_back(std::move(neg_cache), nn::Vec());
        ex.pred_caches.push_back(std::move(npc));
        ex.dlogits.push_back(res.dlogit);
      }
      window.push_back(std::move(ex));
      ++window_edges;
    }
    if (!edges.empty()) tgn.apply_events(edges, memory, config.hop_set);
    if (window_edges >= config.batch_size) close_window();
    i = j;
  }
  close_window();

  if (acc.positives) {
    acc.positive_mean_prob /= static_cast<double>(acc.positives);
    acc.positive_accuracy /= static_cast<double>(acc.positives);
  }
  if (acc.negatives) {
    acc.negative_mean_prob /= static_cast<double>(acc.negatives);
    acc.negative_accuracy /= static_cast<double>(acc.negatives);
  }
  acc.mean_loss = windows ? loss_total / static_cast<double>(windows) : 0.0;
  return acc;
}

std::vector<Verdict> detect(const std::vector<GraphEvent>& events, LinkModel& model,
                            Memory& memory, double threshold,
                            const std::vector<int>& hop_set,
                            const std::vector<SemanticVector>& vectors) {
  TgnModel& tgn = model.tgn();
  std::vector<Verdict> verdicts;

  std::size_t i = 0;
  while (i < events.size()) {
    const std::int64_t seq = events[i].seq_index;
    // one log event = the contiguous run of graph events it produced
    std::size_t j = i;
    while (j < events.size() && events[j].seq_index == seq) ++j;

    std::vector<GraphEvent> edges;
    for (std::size_t k = i; k < j; ++k) {
      const GraphEvent& ev = events[k];
      if (ev.kind == EventKind::NodeAdd) {
        if (!memory.has(ev.dst)) memory.add_node(vectors.at(ev.dst), ev.timestamp);
      } else {
        edges.push_back(ev);
      }
    }

    if (!edges.empty()) {
      Verdict v;
      v.seq_index = seq;
      v.timestamp = edges.front().timestamp;
      v.template_id = edges.front().dst;
      v.truth = edges.front().anomaly;
      for (const GraphEvent& ev : edges) {
        nn::Vec z_src = tgn.embed_node(ev.src, ev.timestamp, memory);
        nn::Vec z_dst = tgn.embed_node(ev.dst, ev.timestamp, memory);
        double p = model.predict_link(z_src, z_dst, ev.features.flatten(hop_set));
        v.hop_probs.emplace_back(ev.hop, p);
        if (p < threshold && !v.trigger_hop) {
          v.anomaly = true;
          v.trigger_hop = ev.hop;
        }
      }
      verdicts.push_back(std::move(v));
      tgn.apply_events(edges, memory, hop_set);
    }
    i = j;
  }
  return verdicts;
}

void save_verdicts(const std::string& path, const std::vector<Verdict>& verdicts,
                   const std::vector<int>& hop_set) {
  std::ofstream out(path);
  if (!out) throw format_error("cannot write verdicts: " + path);
  out << "seq_index,timestamp,template_id";
  for (int h : hop_set) out << ",p" << h;
  out << ",decision,trigger_hop,label\n";
  for (const Verdict& v : verdicts) {
    out << v.seq_index << ',' << format_double(v.timestamp) << ',' << v.template_id;
    for (int h : hop_set) {
      auto it = std::find_if(v.hop_probs.begin(), v.hop_probs.end(),
                             [&](const auto& hp) { return hp.first == h; });
      out << ',';
      if (it != v.hop_probs.end()) out << format_double(it->second);
    }
    out << ',' << (v.anomaly ? "anomaly" : "normal") << ','
        << (v.trigger_hop ? std::to_string(*v.trigger_hop) : std::string()) << ','
        << (v.truth ? 1 : 0) << '\n';
  }
  if (!out) throw format_error("write failure on verdicts: " + path);
}

std::vector<Verdict> load_verdicts(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw format_error("cannot open verdicts: " + path);
  std::string header;
  if (!std::getline(in, header)) throw format_error("empty verdicts file: " + path);
  std::vector<std::string> cols = [&] {
    std::vector<std::string> c;
    std::istringstream ss(header);
    std::string f;
    while (std::getline(ss, f, ',')) c.push_back(f);
    return c;
  }();
  std::vector<int> hops;
  for (const std::string& c : cols)
    if (c.size() > 1 && c[0] == 'p' && std::isdigit(static_cast<unsigned char>(c[1])))
      hops.push_back(std::stoi(c.substr(1)));

  std::vector<Verdict> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::istringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) f.push_back(field);
    while (f.size() < cols.size()) f.emplace_back();
    if (f.size() != cols.size()) throw format_error("bad verdict row: " + line);
    Verdict v;
    v.seq_index = std::stoll(f[0]);
    v.timestamp = std::stod(f[1]);
    v.template_id = std::stoi(f[2]);
    std::size_t base = 3;
    for (std::size_t h = 0; h < hops.size(); ++h)
      if (!f[base + h].empty()) v.hop_probs.emplace_back(hops[h], std::stod(f[base + h]));
    v.anomaly = f[base + hops.size()] == "anomaly";
    if (!f[base + hops.size() + 1].empty())
      v.trigger_hop = std::stoi(f[base + hops.size() + 1]);
    v.truth = f[base + hops.size() + 2] == "1";
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace loggraph
