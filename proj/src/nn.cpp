#include "loggraph/nn.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace loggraph::nn {

ParamStore::ParamStore(std::uint64_t seed) : rng_(seed) {}

Param& ParamStore::add(const std::string& name, int rows, int cols, Init init) {
  if (index_.count(name)) throw contract_error("duplicate parameter: " + name);
  Param p;
  p.value = Tensor(rows, cols);
  p.grad = Tensor(rows, cols);
  p.m = Tensor(rows, cols);
  p.v = Tensor(rows, cols);
  if (init == Init::Xavier) {
    double limit = std::sqrt(6.0 / (rows + cols));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (double& x : p.value.v) x = u(rng_);
  }
  index_[name] = static_cast<int>(order_.size());
  order_.push_back(name);
  return params_.emplace(name, std::move(p)).first->second;
}

Param& ParamStore::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw contract_error("unknown parameter: " + name);
  return it->second;
}

const Param& ParamStore::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw contract_error("unknown parameter: " + name);
  return it->second;
}

void ParamStore::zero_grad() {
  for (auto& name : order_) params_[name].grad.zero();
}

void ParamStore::adam_step(double lr, double beta1, double beta2, double eps) {
  ++step_;
  double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_));
  double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_));
  for (const std::string& name : order_) {
    Param& p = params_[name];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      double g = p.grad.v[i];
      if (std::isnan(g)) throw std::runtime_error("NaN gradient in parameter " + name);
      p.m.v[i] = beta1 * p.m.v[i] + (1.0 - beta1) * g;
      p.v.v[i] = beta2 * p.v.v[i] + (1.0 - beta2) * g * g;
      double mhat = p.m.v[i] / bc1;
      double vhat = p.v.v[i] / bc2;
      p.value.v[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

static constexpr char kMagic[4] = {'L', 'G', 'C', 'K'};

void ParamStore::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw format_error("cannot write checkpoint: " + path);
  out.write(kMagic, 4);
  std::uint32_t count = static_cast<std::uint32_t>(order_.size());
  out.write(reinterpret_cast<const char*>(&count), 4);
  out.write(reinterpret_cast<const char*>(&step_), 8);
  auto write_f32 = [&](const Tensor& t) {
    for (double x : t.v) {
      float f = static_cast<float>(x);
      out.write(reinterpret_cast<const char*>(&f), 4);
    }
  };
  for (const std::string& name : order_) {
    const Param& p = params_.at(name);
    std::uint32_t nlen = static_cast<std::uint32_t>(name.size());
    std::uint32_t rows = static_cast<std::uint32_t>(p.value.rows);
    std::uint32_t cols = static_cast<std::uint32_t>(p.value.cols);
    out.write(reinterpret_cast<const char*>(&nlen), 4);
    out.write(name.data(), nlen);
    out.write(reinterpret_cast<const char*>(&rows), 4);
    out.write(reinterpret_cast<const char*>(&cols), 4);
    write_f32(p.value);
    write_f32(p.m);
    write_f32(p.v);
  }
  if (!out) throw format_error("write failure on checkpoint: " + path);
}

void ParamStore::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw format_error("cannot open checkpoint: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw format_error("bad magic in checkpoint: " + path);
  std::uint32_t count = 0;
  in.read(reinterpret_cast<char*>(&count), 4);
  in.read(reinterpret_cast<char*>(&step_), 8);
  auto read_f32 = [&](Tensor& t) {
    for (double& x : t.v) {
      float f;
      in.read(reinterpret_cast<char*>(&f), 4);
      x = static_cast<double>(f);
    }
  };
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint32_t nlen = 0, rows = 0, cols = 0;
    in.read(reinterpret_cast<char*>(&nlen), 4);
    if (!in) throw format_error("truncated checkpoint: " + path);
    std::string name(nlen, '\0');
    in.read(name.data(), nlen);
    in.read(reinterpret_cast<char*>(&rows), 4);
    in.read(reinterpret_cast<char*>(&cols), 4);
    auto it = params_.find(name);
    if (it == params_.end())
      throw format_error("checkpoint parameter not registered: " + name);
    Param& p = it->second;
    if (p.value.rows != static_cast<int>(rows) || p.value.cols != static_cast<int>(cols))
      throw format_error("checkpoint shape mismatch for " + name);
    read_f32(p.value);
    read_f32(p.m);
    read_f32(p.v);
    if (!in) throw format_error("truncated checkpoint: " + path);
  }
}

// --- small dense helpers (row vector x matrix) ---

static void matvec(const Tensor& w, const Vec& x, Vec& y) {
  // y += x W, W is in x out
  const int in = w.rows, out = w.cols;
  for (int i = 0; i < in; ++i) {
    double xi = x[i];
    const double* row = &w.v[static_cast<std::size_t>(i) * out];
    for (int j = 0; j < out; ++j) y[j] += xi * row[j];
  }
}

static void matvec_t(const Tensor& w, const Vec& dy, Vec& dx) {
  // dx += dy W^T
  const int in = w.rows, out = w.cols;
  for (int i = 0; i < in; ++i) {
    const double* row = &w.v[static_cast<std::size_t>(i) * out];
    double acc = 0.0;
    for (int j = 0; j < out; ++j) acc += dy[j] * row[j];
    dx[i] += acc;
  }
}

static void outer_acc(Tensor& dw, const Vec& x, const Vec& dy) {
  // dW += x^T dy
  const int in = dw.rows, out = dw.cols;
  for (int i = 0; i < in; ++i) {
    double xi = x[i];
    if (xi == 0.0) continue;
    double* row = &dw.v[static_cast<std::size_t>(i) * out];
    for (int j = 0; j < out; ++j) row[j] += xi * dy[j];
  }
}

Linear::Linear(ParamStore& store, const std::string& prefix, int in, int out,
               Init weight_init)
    : store_(&store), w_(prefix + ".W"), b_(prefix + ".b"), in_(in), out_(out) {
  store.add(w_, in, out, weight_init);
  store.add(b_, 1, out, Init::Zero);
}

Vec Linear::forward(const Vec& x) const {
  if (static_cast<int>(x.size()) != in_) throw contract_error("Linear: input shape mismatch");
  Vec y = store_->at(b_).value.v;
  matvec(store_->at(w_).value, x, y);
  return y;
}

Vec Linear::backward(const Vec& x, const Vec& dy) const {
  if (static_cast<int>(dy.size()) != out_)
    throw contract_error("Linear: gradient shape mismatch");
  Param& w = store_->at(w_);
  Param& b = store_->at(b_);
  outer_acc(w.grad, x, dy);
  for (int j = 0; j < out_; ++j) b.grad.v[j] += dy[j];
  Vec dx(in_, 0.0);
  matvec_t(w.value, dy, dx);
  return dx;
}

GruCell::GruCell(ParamStore& store, const std::string& prefix, int input_dim,
                 int state_dim)
    : store_(&store), p_(prefix), in_(input_dim), state_(state_dim) {
  for (const char* g : {"z", "r", "h"}) {
    store.add(p_ + ".W" + g, in_, state_);
    store.add(p_ + ".U" + g, state_, state_);
    store.add(p_ + ".b" + g, 1, state_, Init::Zero);
  }
}

Vec GruCell::forward(const Vec& input, const Vec& h_prev, Cache* cache) const {
  if (static_cast<int>(input.size()) != in_ ||
      static_cast<int>(h_prev.size()) != state_)
    throw contract_error("GruCell: shape mismatch");
  auto gate = [&](const char* g, const Vec& h_in) {
    Vec a = store_->at(p_ + ".b" + g).value.v;
    matvec(store_->at(p_ + ".W" + g).value, input, a);
    matvec(store_->at(p_ + ".U" + g).value, h_in, a);
    return a;
  };
  Vec z = gate("z", h_prev);
  Vec r = gate("r", h_prev);
  for (double& x : z) x = sigmoid(x);
  for (double& x : r) x = sigmoid(x);
  Vec rh(state_);
  for (int i = 0; i < state_; ++i) rh[i] = r[i] * h_prev[i];
  Vec cand = gate("h", rh);
  for (double& x : cand) x = std::tanh(x);
  Vec h_new(state_);
  for (int i = 0; i < state_; ++i)
    h_new[i] = (1.0 - z[i]) * h_prev[i] + z[i] * cand[i];
  if (cache) {
    cache->input = input;
    cache->h_prev = h_prev;
    cache->z = z;
    cache->r = r;
    cache->cand = cand;
  }
  return h_new;
}

std::pair<Vec, Vec> GruCell::backward(const Cache& c, const Vec& dh_new) const {
  Vec dm(in_, 0.0), dh(state_, 0.0);
  Vec dz(state_), dcand(state_);
  for (int i = 0; i < state_; ++i) {
    dz[i] = dh_new[i] * (c.cand[i] - c.h_prev[i]);
    dcand[i] = dh_new[i] * c.z[i];
    dh[i] = dh_new[i] * (1.0 - c.z[i]);
  }
  // candidate: cand = tanh(Wh m + Uh (r*h) + bh)
  Vec da_h(state_);
  for (int i = 0; i < state_; ++i) da_h[i] = dcand[i] * (1.0 - c.cand[i] * c.cand[i]);
  Vec rh(state_);
  for (int i = 0; i < state_; ++i) rh[i] = c.r[i] * c.h_prev[i];
  outer_acc(store_->at(p_ + ".Wh").grad, c.input, da_h);
  outer_acc(store_->at(p_ + ".Uh").grad, rh, da_h);
  for (int i = 0; i < state_; ++i) store_->at(p_ + ".bh").grad.v[i] += da_h[i];
  matvec_t(store_->at(p_ + ".Wh").value, da_h, dm);
  Vec drh(state_, 0.0);
  matvec_t(store_->at(p_ + ".Uh").value, da_h, drh);
  Vec dr(state_);
  for (int i = 0; i < state_; ++i) {
    dr[i] = drh[i] * c.h_prev[i];
    dh[i] += drh[i] * c.r[i];
  }
  // gates
  auto gate_back = [&](const char* g, const Vec& dgate, const Vec& gval) {
    Vec da(state_);
    for (int i = 0; i < state_; ++i) da[i] = dgate[i] * gval[i] * (1.0 - gval[i]);
    outer_acc(store_->at(p_ + ".W" + g).grad, c.input, da);
    outer_acc(store_->at(p_ + ".U" + g).grad, c.h_prev, da);
    for (int i = 0; i < state_; ++i) store_->at(p_ + ".b" + std::string(g)).grad.v[i] += da[i];
    matvec_t(store_->at(p_ + ".W" + g).value, da, dm);
    matvec_t(store_->at(p_ + ".U" + g).value, da, dh);
  };
  gate_back("z", dz, c.z);
  gate_back("r", dr, c.r);
  return {dm, dh};
}

TimeEncoder::TimeEncoder(ParamStore& store, const std::string& prefix, int dim)
    : store_(&store), w_(prefix + ".w"), b_(prefix + ".b"), dim_(dim) {
  store.add(w_, 1, dim);
  store.add(b_, 1, dim, Init::Zero);
}

Vec TimeEncoder::forward(double dt) const {
  const Vec& w = store_->at(w_).value.v;
  const Vec& b = store_->at(b_).value.v;
  Vec y(dim_);
  for (int i = 0; i < dim_; ++i) y[i] = std::cos(w[i] * dt + b[i]);
  return y;
}

void TimeEncoder::backward(double dt, const Vec& dy) const {
  const Vec& w = store_->at(w_).value.v;
  const Vec& b = store_->at(b_).value.v;
  Vec& dw = store_->at(w_).grad.v;
  Vec& db = store_->at(b_).grad.v;
  for (int i = 0; i < dim_; ++i) {
    double ds = -std::sin(w[i] * dt + b[i]) * dy[i];
    dw[i] += ds * dt;
    db[i] += ds;
  }
}

TemporalAttention::TemporalAttention(ParamStore& store, const std::string& prefix,
                                     int model_dim, int feat_dim,
                                     TimeEncoder& time_encoder, int heads)
    : store_(&store),
      p_(prefix),
      time_(&time_encoder),
      d_(model_dim),
      feat_(feat_dim),
      heads_(heads),
      head_dim_(model_dim / heads) {
  if (d_ % heads_ != 0)
    throw contract_error("TemporalAttention: model dim must divide by heads");
  int key_in = d_ + feat_ + time_encoder.dim();
  store.add(p_ + ".Wq", d_, d_);
  store.add(p_ + ".Wk", key_in, d_);
  store.add(p_ + ".Wv", key_in, d_);
  store.add(p_ + ".Wm", d_, d_);
  store.add(p_ + ".bm", 1, d_, Init::Zero);
  store.add(p_ + ".Wc", 2 * d_, d_);
  store.add(p_ + ".bc", 1, d_, Init::Zero);
}

Vec TemporalAttention::forward(const Vec& query,
                               const std::vector<AttentionNeighbor>& neighbors,
                               Cache* cache) const {
  if (static_cast<int>(query.size()) != d_)
    throw contract_error("TemporalAttention: query dim mismatch");
  const std::size_t n = neighbors.size();
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim_));

  Vec q(d_, 0.0);
  matvec(store_->at(p_ + ".Wq").value, query, q);

  std::vector<Vec> key_in(n), keys(n), values(n);
  for (std::size_t j = 0; j < n; ++j) {
    const AttentionNeighbor& nb = neighbors[j];
    if (static_cast<int>(nb.state.size()) != d_ ||
        static_cast<int>(nb.features.size()) != feat_)
      throw contract_error("TemporalAttention: neighbor shape mismatch");
    Vec in;
    in.reserve(d_ + feat_ + time_->dim());
    in.insert(in.end(), nb.state.begin(), nb.state.end());
    in.insert(in.end(), nb.features.begin(), nb.features.end());
    Vec te = time_->forward(nb.dt);
    in.insert(in.end(), te.begin(), te.end());
    keys[j].assign(d_, 0.0);
    values[j].assign(d_, 0.0);
    matvec(store_->at(p_ + ".Wk").value, in, keys[j]);
    matvec(store_->at(p_ + ".Wv").value, in, values[j]);
    key_in[j] = std::move(in);
  }

  std::vector<Vec> weights(heads_);
  Vec attended(d_, 0.0);
  for (int h = 0; h < heads_; ++h) {
    weights[h].assign(n, 0.0);
    if (n == 0) continue;
    int off = h * head_dim_;
    double maxs = -1e300;
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (int i = 0; i < head_dim_; ++i) s += q[off + i] * keys[j][off + i];
      weights[h][j] = s * scale;
      maxs = std::max(maxs, weights[h][j]);
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      weights[h][j] = std::exp(weights[h][j] - maxs);
      sum += weights[h][j];
    }
    for (std::size_t j = 0; j < n; ++j) {
      weights[h][j] /= sum;
      for (int i = 0; i < head_dim_; ++i)
        attended[off + i] += weights[h][j] * values[j][off + i];
    }
  }

  Vec mlp_pre = store_->at(p_ + ".bm").value.v;
  matvec(store_->at(p_ + ".Wm").value, query, mlp_pre);
  Vec combined(2 * d_);
  for (int i = 0; i < d_; ++i) combined[i] = std::tanh(mlp_pre[i]);
  for (int i = 0; i < d_; ++i) combined[d_ + i] = attended[i];

  Vec z = store_->at(p_ + ".bc").value.v;
  matvec(store_->at(p_ + ".Wc").value, combined, z);

  if (cache) {
    cache->query = query;
    cache->neighbors = neighbors;
    cache->key_in = std::move(key_in);
    cache->keys = std::move(keys);
    cache->values = std::move(values);
    cache->q = std::move(q);
    cache->weights = std::move(weights);
    cache->attended = std::move(attended);
    cache->mlp_pre = std::move(mlp_pre);
    cache->combined = std::move(combined);
  }
  return z;
}

void TemporalAttention::backward(const Cache& c, const Vec& dz) const {
  const std::size_t n = c.neighbors.size();
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim_));

  // output projection
  outer_acc(store_->at(p_ + ".Wc").grad, c.combined, dz);
  for (int i = 0; i < d_; ++i) store_->at(p_ + ".bc").grad.v[i] += dz[i];
  Vec dcombined(2 * d_, 0.0);
  matvec_t(store_->at(p_ + ".Wc").value, dz, dcombined);

  // query MLP branch
  Vec dmlp_pre(d_);
  for (int i = 0; i < d_; ++i) {
    double t = std::tanh(c.mlp_pre[i]);
    dmlp_pre[i] = dcombined[i] * (1.0 - t * t);
  }
  outer_acc(store_->at(p_ + ".Wm").grad, c.query, dmlp_pre);
  for (int i = 0; i < d_; ++i) store_->at(p_ + ".bm").grad.v[i] += dmlp_pre[i];

  if (n == 0) return;

  Vec dattended(d_);
  for (int i = 0; i < d_; ++i) dattended[i] = dcombined[d_ + i];

  Vec dq(d_, 0.0);
  std::vector<Vec> dkeys(n, Vec(d_, 0.0)), dvalues(n, Vec(d_, 0.0));
  for (int h = 0; h < heads_; ++h) {
    int off = h * head_dim_;
    const Vec& w = c.weights[h];
    // d alpha_j = dattended . v_j (head slice); softmax jacobian
    Vec dalpha(n, 0.0);
    double mix = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      double a = 0.0;
      for (int i = 0; i < head_dim_; ++i) {
        a += dattended[off + i] * c.values[j][off + i];
        dvalues[j][off + i] += w[j] * dattended[off + i];
      }
      dalpha[j] = a;
      mix += a * w[j];
    }
    for (std::size_t j = 0; j < n; ++j) {
      double dscore = w[j] * (dalpha[j] - mix) * scale;
      for (int i = 0; i < head_dim_; ++i) {
        dq[off + i] += dscore * c.keys[j][off + i];
        dkeys[j][off + i] += dscore * c.q[off + i];
      }
    }
  }

  outer_acc(store_->at(p_ + ".Wq").grad, c.query, dq);
  for (std::size_t j = 0; j < n; ++j) {
    outer_acc(store_->at(p_ + ".Wk").grad, c.key_in[j], dkeys[j]);
    outer_acc(store_->at(p_ + ".Wv").grad, c.key_in[j], dvalues[j]);
    // gradient into the shared time encoder through the key/value inputs
    Vec dkey_in(c.key_in[j].size(), 0.0);
    matvec_t(store_->at(p_ + ".Wk").value, dkeys[j], dkey_in);
    matvec_t(store_->at(p_ + ".Wv").value, dvalues[j], dkey_in);
    Vec dte(time_->dim());
    for (int i = 0; i < time_->dim(); ++i) dte[i] = dkey_in[d_ + feat_ + i];
    time_->backward(c.neighbors[j].dt, dte);
  }
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

BceResult bce_on_logit(double logit, double label) {
  constexpr double eps = 1e-7;
  double p = sigmoid(logit);
  double pc = std::min(std::max(p, eps), 1.0 - eps);
  double loss = -(label * std::log(pc) + (1.0 - label) * std::log(1.0 - pc));
  return {p, loss, p - label};
}

}  // namespace loggraph::nn
