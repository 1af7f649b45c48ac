#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "loggraph/common.hpp"

namespace loggraph {

enum class LogLevel : int { Debug = 0, Info = 1, Warn = 2, Error = 3, Fatal = 4 };

constexpr int kNumLevels = 5;

const char* level_name(LogLevel level);

// Case-insensitive keyword rules, highest severity wins:
// critical/fatal -> FATAL, error/fail -> ERROR, warn/deprecated -> WARN,
// debug/trace -> DEBUG, otherwise INFO.
LogLevel infer_log_level(const std::string& template_text);

std::array<double, kNumLevels> one_hot_level(LogLevel level);

struct SemanticVector {
  std::vector<double> values;

  std::size_t dim() const { return values.size(); }
  double norm() const;
  void normalize();
};

double cosine_similarity(const SemanticVector& a, const SemanticVector& b);

// Deterministic bag-of-tokens embedder. Each literal token contributes +-1 at
// a hashed coordinate (one hash picks the position, an independent one the
// sign); wildcard tokens are skipped and the sum is L2-normalized.
class HashedEmbedder {
 public:
  explicit HashedEmbedder(std::size_t dim = 64, std::uint64_t seed = 0);

  SemanticVector embed(const std::vector<std::string>& tokens) const;
  SemanticVector embed_text(const std::string& template_text) const;

  std::size_t dim() const { return dim_; }

 private:
  std::size_t dim_;
  std::uint64_t seed_;
};

// Precomputed vectors keyed by template text. Vectors whose dimension differs
// from the configured one are mapped through a fixed random orthogonal
// projection seeded from the run seed, then renormalized.
class EmbeddingStore {
 public:
  EmbeddingStore(std::size_t dim, std::uint64_t seed);

  // Binary format: magic "LGEB", u32 count, u32 source dim, then per entry a
  // u32 key length, the UTF-8 key and `source dim` float32 values.
  static void save(const std::string& path,
                   const std::map<std::string, SemanticVector>& vectors);
  void load(const std::string& path);

  // Falls back to the hashed embedder on a miss; the miss is counted.
  SemanticVector get(const std::string& template_text) const;

  std::size_t size() const { return vectors_.size(); }
  std::size_t dim() const { return dim_; }
  std::size_t fallback_count() const { return fallbacks_; }
  const std::map<std::string, SemanticVector>& vectors() const { return vectors_; }

 private:
  SemanticVector project(const std::vector<float>& raw) const;

  std::size_t dim_;
  std::uint64_t seed_;
  HashedEmbedder hashed_;
  std::map<std::string, SemanticVector> vectors_;
  mutable std::size_t fallbacks_ = 0;
  // projection cache per source dimension
  mutable std::map<std::size_t, std::vector<double>> projections_;
  const std::vector<double>& projection_for(std::size_t src_dim) const;
};

}  // namespace loggraph
