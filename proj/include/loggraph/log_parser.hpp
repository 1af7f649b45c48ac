#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "loggraph/embed.hpp"

namespace loggraph {

inline constexpr const char* kWildcard = "<*>";

struct LogRecord {
  bool anomaly = false;
  double timestamp = 0.0;  // seconds since epoch
  std::string label;       // raw label column ("-" for normal)
  std::vector<std::string> content;
};

struct Template {
  int id = -1;
  std::vector<std::string> tokens;
  std::uint64_t occurrences = 0;
  LogLevel level = LogLevel::Info;

  std::string text() const;
};

// Column layout of one dataset. Token indices refer to the whitespace-split
// line; content runs from content_from to end of line.
struct FormatSpec {
  int label_col = 0;
  int time_col = 1;
  int content_from = 2;
};

// Replaces numeric payloads (pure integers, 0x hex literals, dotted IPv4,
// paths containing digits) inside a token with the wildcard marker.
std::string mask_token(const std::string& token);

// Parses one raw line into a LogRecord. Returns nullopt with a diagnostic for
// malformed lines (bad timestamp, too few columns).
std::optional<LogRecord> tokenize(const std::string& raw_line, const FormatSpec& format,
                                  std::string* diagnostic = nullptr);

// Positional similarity with wildcard-matches-anything. Token lists must have
// equal length.
double template_similarity(const std::vector<std::string>& a,
                           const std::vector<std::string>& b);

// Fixed-depth prefix-tree template miner. Sequential single-writer; queries
// are safe to share once parsing is finished.
class TemplateMiner {
 public:
  struct Params {
    int depth = 4;                 // tree depth incl. root and length level
    double similarity_threshold = 0.5;
    int max_children = 100;
  };

  TemplateMiner();
  explicit TemplateMiner(Params params);
  ~TemplateMiner();
  TemplateMiner(TemplateMiner&&) noexcept;
  TemplateMiner& operator=(TemplateMiner&&) noexcept;

  // Returns (template id, parameter tokens at wildcard positions).
  std::pair<int, std::vector<std::string>> parse(const std::vector<std::string>& tokens);

  const std::vector<Template>& templates() const { return templates_; }
  const Template& template_at(int id) const { return templates_.at(id); }
  std::size_t size() const { return templates_.size(); }

  // CSV with columns EventId, EventTemplate, Occurrences, LogLevel in id order.
  std::size_t export_csv(const std::string& path) const;
  static std::vector<Template> import_csv(const std::string& path);

 private:
  struct Node;
  Params params_;
  std::unique_ptr<Node> root_;
  std::vector<Template> templates_;
};

}  // namespace loggraph
