#include "loggraph/embed.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>

namespace loggraph {

const char* level_name(LogLevel level) {
  switch (level) {
    case LogLevel::Debug: return "DEBUG";
    case LogLevel::Info: return "INFO";
    case LogLevel::Warn: return "WARN";
    case LogLevel::Error: return "ERROR";
    case LogLevel::Fatal: return "FATAL";
  }
  return "INFO";
}

static std::string lower(const std::string& s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

LogLevel infer_log_level(const std::string& template_text) {
  const std::string t = lower(template_text);
  auto has = [&](const char* kw) { return t.find(kw) != std::string::npos; };
  if (has("critical") || has("fatal")) return LogLevel::Fatal;
  if (has("error") || has("fail")) return LogLevel::Error;
  if (has("warn") || has("deprecated")) return LogLevel::Warn;
  if (has("debug") || has("trace")) return LogLevel::Debug;
  return LogLevel::Info;
}

std::array<double, kNumLevels> one_hot_level(LogLevel level) {
  std::array<double, kNumLevels> v{};
  v[static_cast<int>(level)] = 1.0;
  return v;
}

double SemanticVector::norm() const {
  double s = 0.0;
  for (double x : values) s += x * x;
  return std::sqrt(s);
}

void SemanticVector::normalize() {
  double n = norm();
  if (n > 0.0) {
    for (double& x : values) x /= n;
  }
}

double cosine_similarity(const SemanticVector& a, const SemanticVector& b) {
  if (a.dim() != b.dim()) throw contract_error("cosine_similarity: dimension mismatch");
  double dot = 0.0;
  double na = a.norm();
  double nb = b.norm();
  if (na == 0.0 || nb == 0.0)
    throw contract_error("cosine_similarity: zero-norm input");
  for (std::size_t i = 0; i < a.dim(); ++i) dot += a.values[i] * b.values[i];
  double c = dot / (na * nb);
  return std::clamp(c, -1.0, 1.0);
}

HashedEmbedder::HashedEmbedder(std::size_t dim, std::uint64_t seed)
    : dim_(dim), seed_(seed) {
  if (dim_ == 0) throw contract_error("HashedEmbedder: dim must be positive");
}

SemanticVector HashedEmbedder::embed(const std::vector<std::string>& tokens) const {
  if (tokens.empty()) throw contract_error("embed: template has no tokens");
  SemanticVector v;
  v.values.assign(dim_, 0.0);
  for (const auto& tok : tokens) {
    if (tok == "<*>") continue;
    std::uint64_t pos = fnv1a64(tok, seed_);
    std::uint64_t sgn = fnv1a64(tok, seed_ ^ 0x9e3779b97f4a7c15ull);
    v.values[pos % dim_] += (sgn & 1) ? 1.0 : -1.0;
  }
  if (v.norm() == 0.0) {
    // all-wildcard or fully cancelled template; fall back to a fixed unit vector
    v.values[0] = 1.0;
  }
  v.normalize();
  return v;
}

SemanticVector HashedEmbedder::embed_text(const std::string& template_text) const {
  return embed(split_ws(template_text));
}

EmbeddingStore::EmbeddingStore(std::size_t dim, std::uint64_t seed)
    : dim_(dim), seed_(seed), hashed_(dim, seed) {}

static constexpr char kMagic[4] = {'L', 'G', 'E', 'B'};

void EmbeddingStore::save(const std::string& path,
                          const std::map<std::string, SemanticVector>& vectors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw format_error("cannot write embeddings file: " + path);
  out.write(kMagic, 4);
  std::uint32_t count = static_cast<std::uint32_t>(vectors.size());
  std::uint32_t dim = vectors.empty()
                          ? 0u
                          : static_cast<std::uint32_t>(vectors.begin()->second.dim());
  out.write(reinterpret_cast<const char*>(&count), 4);
  out.write(reinterpret_cast<const char*>(&dim), 4);
  for (const auto& [key, vec] : vectors) {
    if (vec.dim() != dim)
      throw contract_error("save embeddings: inconsistent dimensions");
    std::uint32_t klen = static_cast<std::uint32_t>(key.size());
    out.write(reinterpret_cast<const char*>(&klen), 4);
    out.write(key.data(), klen);
    for (double x : vec.values) {
      float f = static_cast<float>(x);
      out.write(reinterpret_cast<const char*>(&f), 4);
    }
  }
}

void EmbeddingStore::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw format_error("cannot open embeddings file: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw format_error("bad magic in embeddings file: " + path);
  std::uint32_t count = 0, src_dim = 0;
  in.read(reinterpret_cast<char*>(&count), 4);
  in.read(reinterpret_cast<char*>(&src_dim), 4);
  if (!in) throw format_error("truncated embeddings header: " + path);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint32_t klen = 0;
    in.read(reinterpret_cast<char*>(&klen), 4);
    if (!in) throw format_error("truncated embeddings entry: " + path);
    std::string key(klen, '\0');
    in.read(key.data(), klen);
    std::vector<float> raw(src_dim);
    in.read(reinterpret_cast<char*>(raw.data()), 4 * static_cast<std::streamsize>(src_dim));
    if (!in) throw format_error("truncated embeddings entry: " + path);
    vectors_[key] = project(raw);
  }
}

const std::vector<double>& EmbeddingStore::projection_for(std::size_t src_dim) const {
  auto it = projections_.find(src_dim);
  if (it != projections_.end()) return it->second;
  // Random Gaussian matrix (src_dim x dim_), columns orthonormalized by
  // Gram-Schmidt. Requires src_dim >= dim_ for exact orthogonality; smaller
  // inputs keep whatever independent directions exist.
  Rng rng(seed_ ^ 0x70726f6aull ^ src_dim);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> m(src_dim * dim_);
  for (double& x : m) x = gauss(rng);
  for (std::size_t c = 0; c < dim_; ++c) {
    for (std::size_t p = 0; p < c; ++p) {
      double dot = 0.0;
      for (std::size_t r = 0; r < src_dim; ++r) dot += m[r * dim_ + c] * m[r * dim_ + p];
      for (std::size_t r = 0; r < src_dim; ++r) m[r * dim_ + c] -= dot * m[r * dim_ + p];
    }
    double n = 0.0;
    for (std::size_t r = 0; r < src_dim; ++r) n += m[r * dim_ + c] * m[r * dim_ + c];
    n = std::sqrt(n);
    if (n > 1e-12)
      for (std::size_t r = 0; r < src_dim; ++r) m[r * dim_ + c] /= n;
  }
  return projections_.emplace(src_dim, std::move(m)).first->second;
}

SemanticVector EmbeddingStore::project(const std::vector<float>& raw) const {
  SemanticVector v;
  if (raw.size() == dim_) {
    v.values.assign(raw.begin(), raw.end());
  } else {
    const std::vector<double>& m = projection_for(raw.size());
    v.values.assign(dim_, 0.0);
    for (std::size_t r = 0; r < raw.size(); ++r)
      for (std::size_t c = 0; c < dim_; ++c)
        v.values[c] += static_cast<double>(raw[r]) * m[r * dim_ + c];
  }
  v.normalize();
  return v;
}

SemanticVector EmbeddingStore::get(const std::string& template_text) const {
  auto it = vectors_.find(template_text);
  if (it != vectors_.end()) return it->second;
  ++fallbacks_;
  return hashed_.embed_text(template_text);
}

}  // namespace loggraph
