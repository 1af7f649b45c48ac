#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "loggraph/common.hpp"

namespace loggraph::nn {

struct Tensor {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;

  Tensor() = default;
  Tensor(int r, int c) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, 0.0) {}

  double& at(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }
  std::size_t size() const { return v.size(); }
  void zero() { std::fill(v.begin(), v.end(), 0.0); }
};

enum class Init { Xavier, Zero };

struct Param {
  Tensor value;
  Tensor grad;
  Tensor m;  // Adam first moment
  Tensor v;  // Adam second moment
};

// Named parameters plus optimizer state. Registration order is fixed, so
// initialization is deterministic for a given seed.
class ParamStore {
 public:
  explicit ParamStore(std::uint64_t seed = 0);

  Param& add(const std::string& name, int rows, int cols, Init init = Init::Xavier);
  Param& at(const std::string& name);
  const Param& at(const std::string& name) const;
  bool has(const std::string& name) const { return index_.count(name) != 0; }

  void zero_grad();
  // Standard Adam with bias correction; throws on NaN gradients, naming the
  // offending parameter.
  void adam_step(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999,
                 double eps = 1e-8);

  std::uint64_t step() const { return step_; }
  std::size_t count() const { return order_.size(); }
  const std::vector<std::string>& names() const { return order_; }

  // float32 on disk; values, optimizer moments and the step counter all
  // round-trip bit-exactly.
  void save(const std::string& path) const;
  void load(const std::string& path);

 private:
  Rng rng_;
  std::vector<std::string> order_;
  std::unordered_map<std::string, Param> params_;
  std::unordered_map<std::string, int> index_;
  std::uint64_t step_ = 0;
};

using Vec = std::vector<double>;

// y = x W + b, with x a single row.
class Linear {
 public:
  Linear(ParamStore& store, const std::string& prefix, int in, int out,
         Init weight_init = Init::Xavier);

  Vec forward(const Vec& x) const;
  // Accumulates dW, db; returns dx.
  Vec backward(const Vec& x, const Vec& dy) const;

  int in() const { return in_; }
  int out() const { return out_; }

 private:
  ParamStore* store_;
  std::string w_, b_;
  int in_, out_;
};

class GruCell {
 public:
  struct Cache {
    Vec input, h_prev, z, r, cand;
  };

  GruCell(ParamStore& store, const std::string& prefix, int input_dim, int state_dim);

  Vec forward(const Vec& input, const Vec& h_prev, Cache* cache = nullptr) const;
  // Returns (d_input, d_h_prev) and accumulates parameter gradients.
  std::pair<Vec, Vec> backward(const Cache& cache, const Vec& dh_new) const;

  int input_dim() const { return in_; }
  int state_dim() const { return state_; }

 private:
  ParamStore* store_;
  std::string p_;
  int in_, state_;
};

// cos(w * dt + b) with learnable w, b.
class TimeEncoder {
 public:
  TimeEncoder(ParamStore& store, const std::string& prefix, int dim);

  Vec forward(double dt) const;
  void backward(double dt, const Vec& dy) const;

  int dim() const { return dim_; }

 private:
  ParamStore* store_;
  std::string w_, b_;
  int dim_;
};

struct AttentionNeighbor {
  Vec state;  // neighbor memory at t-
  Vec features;
  double dt = 0.0;  // query time minus interaction time
};

// Single-layer multi-head scaled dot-product attention over a node's temporal
// neighbors. Keys and values are built from [state || features || phi(dt)].
// The output combines a small MLP of the query with the attended vector and
// projects back to the model dimension; with no neighbors the attended block
// is zero, so the result is a projection of the query alone.
class TemporalAttention {
 public:
  struct Cache {
    Vec query;
    std::vector<AttentionNeighbor> neighbors;
    std::vector<Vec> key_in;   // per neighbor, includes time encoding
    std::vector<Vec> keys;     // projected
    std::vector<Vec> values;   // projected
    Vec q;                     // projected query
    std::vector<Vec> weights;  // per head, softmax over neighbors
    Vec attended;
    Vec mlp_pre;  // pre-tanh
    Vec combined;
  };

  TemporalAttention(ParamStore& store, const std::string& prefix, int model_dim,
                    int feat_dim, TimeEncoder& time_encoder, int heads);

  Vec forward(const Vec& query, const std::vector<AttentionNeighbor>& neighbors,
              Cache* cache = nullptr) const;
  // Accumulates parameter gradients (including the shared time encoder's).
  // Gradients w.r.t. the query and neighbor states are not produced: memory
  // states are inputs on the training path.
  void backward(const Cache& cache, const Vec& dz) const;

  int model_dim() const { return d_; }
  int feat_dim() const { return feat_; }
  int heads() const { return heads_; }

 private:
  ParamStore* store_;
  std::string p_;
  TimeEncoder* time_;
  int d_, feat_, heads_, head_dim_;
};

double sigmoid(double x);

// Numerically clamped binary cross entropy on a sigmoid output.
// d loss / d logit = p - y.
struct BceResult {
  double p;
  double loss;
  double dlogit;
};
BceResult bce_on_logit(double logit, double label);

}  // namespace loggraph::nn
