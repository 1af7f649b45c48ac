#include "loggraph/log_parser.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

namespace loggraph {

std::string Template::text() const {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

static bool is_hex_digit(char c) {
  return std::isxdigit(static_cast<unsigned char>(c)) != 0;
}

static bool has_digit(const std::string& s) {
  for (char c : s)
    if (std::isdigit(static_cast<unsigned char>(c))) return true;
  return false;
}

std::string mask_token(const std::string& token) {
  if (token.find('/') != std::string::npos && has_digit(token)) return kWildcard;
  std::string out;
  std::size_t i = 0;
  const std::size_t n = token.size();
  while (i < n) {
    char c = token[i];
    if (c == '0' && i + 2 < n && (token[i + 1] == 'x' || token[i + 1] == 'X') &&
        is_hex_digit(token[i + 2])) {
      i += 2;
      while (i < n && is_hex_digit(token[i])) ++i;
      out += kWildcard;
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      // maximal run of digits, including dots followed by another digit;
      // covers integers, floats and dotted IPv4 alike
      while (i < n) {
        if (std::isdigit(static_cast<unsigned char>(token[i]))) {
          ++i;
        } else if (token[i] == '.' && i + 1 < n &&
                   std::isdigit(static_cast<unsigned char>(token[i + 1]))) {
          ++i;
        } else {
          break;
        }
      }
      out += kWildcard;
    } else {
      out += c;
      ++i;
    }
  }
  return out;
}

std::optional<LogRecord> tokenize(const std::string& raw_line, const FormatSpec& format,
                                  std::string* diagnostic) {
  auto fail = [&](const std::string& why) -> std::optional<LogRecord> {
    if (diagnostic) *diagnostic = why;
    return std::nullopt;
  };
  if (raw_line.empty()) return fail("empty line");
  std::vector<std::string> cols = split_ws(raw_line);
  int needed = std::max(std::max(format.label_col, format.time_col), format.content_from);
  if (static_cast<int>(cols.size()) <= needed) return fail("too few columns");

  LogRecord rec;
  rec.label = cols[format.label_col];
  rec.anomaly = rec.label != "-";

  const std::string& ts = cols[format.time_col];
  char* end = nullptr;
  rec.timestamp = std::strtod(ts.c_str(), &end);
  if (end == ts.c_str() || *end != '\0' || rec.timestamp < 0.0 ||
      !(rec.timestamp == rec.timestamp))
    return fail("malformed timestamp: " + ts);

  for (std::size_t i = format.content_from; i < cols.size(); ++i)
    rec.content.push_back(mask_token(cols[i]));
  return rec;
}

double template_similarity(const std::vector<std::string>& a,
                           const std::vector<std::string>& b) {
  if (a.size() != b.size())
    throw contract_error("template_similarity: unequal token counts");
  if (a.empty()) return 1.0;
  std::size_t same = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] == b[i] || a[i] == kWildcard || b[i] == kWildcard) ++same;
  return static_cast<double>(same) / static_cast<double>(a.size());
}

struct TemplateMiner::Node {
  std::map<std::string, std::unique_ptr<Node>> children;
  std::vector<int> template_ids;  // leaves only
};

TemplateMiner::TemplateMiner() : TemplateMiner(Params()) {}

TemplateMiner::TemplateMiner(Params params) : params_(params), root_(new Node) {
  if (params_.depth < 3) throw contract_error("TemplateMiner: depth must be >= 3");
  if (params_.similarity_threshold <= 0.0 || params_.similarity_threshold >= 1.0)
    throw contract_error("TemplateMiner: similarity threshold must be in (0,1)");
  if (params_.max_children < 1)
    throw contract_error("TemplateMiner: max_children must be >= 1");
}

TemplateMiner::~TemplateMiner() = default;
TemplateMiner::TemplateMiner(TemplateMiner&&) noexcept = default;
TemplateMiner& TemplateMiner::operator=(TemplateMiner&&) noexcept = default;

static bool is_variable_token(const std::string& tok) {
  return has_digit(tok) || tok.find(kWildcard) != std::string::npos;
}

std::pair<int, std::vector<std::string>> TemplateMiner::parse(
    const std::vector<std::string>& tokens) {
  if (tokens.empty()) throw contract_error("parse: empty token list");

  Node* node = root_.get();
  std::string len_key = std::to_string(tokens.size());
  auto& len_child = node->children[len_key];
  if (!len_child) len_child.reset(new Node);
  node = len_child.get();

  int levels = std::min<int>(params_.depth - 2, static_cast<int>(tokens.size()));
  for (int i = 0; i < levels; ++i) {
    std::string key = is_variable_token(tokens[i]) ? kWildcard : tokens[i];
    auto it = node->children.find(key);
    if (it == node->children.end()) {
      if (key != kWildcard &&
          static_cast<int>(node->children.size()) >= params_.max_children) {
        key = kWildcard;
        it = node->children.find(key);
      }
    }
    if (it == node->children.end()) {
      auto& child = node->children[key];
      child.reset(new Node);
      node = child.get();
    } else {
      node = it->second.get();
    }
  }

  int best_id = -1;
  double best_sim = -1.0;
  for (int id : node->template_ids) {
    double sim = template_similarity(templates_[id].tokens, tokens);
    if (sim > best_sim) {
      best_sim = sim;
      best_id = id;
    }
  }

  if (best_id >= 0 && best_sim >= params_.similarity_threshold) {
    Template& t = templates_[best_id];
    for (std::size_t i = 0; i < t.tokens.size(); ++i)
      if (t.tokens[i] != tokens[i]) t.tokens[i] = kWildcard;
    t.occurrences += 1;
    t.level = infer_log_level(t.text());
    std::vector<std::string> params;
    for (std::size_t i = 0; i < t.tokens.size(); ++i)
      if (t.tokens[i] == kWildcard) params.push_back(tokens[i]);
    return {best_id, std::move(params)};
  }

  Template t;
  t.id = static_cast<int>(templates_.size());
  t.tokens = tokens;
  t.occurrences = 1;
  t.level = infer_log_level(t.text());
  std::vector<std::string> params;
  for (std::size_t i = 0; i < tokens.size(); ++i)
    if (tokens[i] == kWildcard) params.push_back(tokens[i]);
  node->template_ids.push_back(t.id);
  templates_.push_back(std::move(t));
  return {templates_.back().id, std::move(params)};
}

static std::string csv_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    out += c;
  }
  out += '"';
  return out;
}

std::size_t TemplateMiner::export_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw format_error("cannot write templates CSV: " + path);
  out << "EventId,EventTemplate,Occurrences,LogLevel\n";
  for (const Template& t : templates_)
    out << t.id << ',' << csv_quote(t.text()) << ',' << t.occurrences << ','
        << level_name(t.level) << '\n';
  if (!out) throw format_error("write failure on templates CSV: " + path);
  return templates_.size();
}

// Minimal CSV field scanner for our own quoting.
static std::vector<std::string> csv_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else {
      field += c;
    }
  }
  out.push_back(std::move(field));
  return out;
}

std::vector<Template> TemplateMiner::import_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw format_error("cannot open templates CSV: " + path);
  std::string line;
  if (!std::getline(in, line)) throw format_error("empty templates CSV: " + path);
  std::vector<Template> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f = csv_fields(line);
    if (f.size() != 4) throw format_error("bad templates CSV row: " + line);
    Template t;
    t.id = std::stoi(f[0]);
    t.tokens = split_ws(f[1]);
    t.occurrences = std::stoull(f[2]);
    t.level = infer_log_level(f[1]);
    if (t.id != static_cast<int>(out.size()))
      throw format_error("non-contiguous template ids in " + path);
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace loggraph
