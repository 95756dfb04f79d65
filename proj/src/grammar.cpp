#include "pcfgsr/grammar.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace pcfgsr {

GrammarError::GrammarError(const std::string& what, SourceLocation where)
    : std::runtime_error("line " + std::to_string(where.line) + ", column " +
                         std::to_string(where.column) + ": " + what),
      where_(where) {}

std::string to_string(const Diagnostic& d) {
  std::ostringstream out;
  out << (d.is_error() ? "error" : "warning");
  if (d.where.line > 0) out << " (line " << d.where.line << ")";
  if (!d.symbol.empty()) out << " " << d.symbol;
  out << ": " << d.message;
  return out.str();
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool is_symbol_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
}

// Length of a `<name>` reference starting at s[pos], or 0.
std::size_t nonterminal_length(std::string_view s, std::size_t pos) {
  if (s[pos] != '<') return 0;
  std::size_t end = pos + 1;
  while (end < s.size() && is_symbol_char(s[end])) ++end;
  if (end == pos + 1 || end >= s.size() || s[end] != '>') return 0;
  return end - pos + 1;
}

struct RawToken {
  bool nonterminal = false;
  std::string text;
};

std::vector<RawToken> tokenize_body(std::string_view body, SourceLocation where) {
  std::vector<RawToken> out;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) out.push_back({false, std::move(word)});
    word.clear();
  };
  for (std::size_t i = 0; i < body.size();) {
    const char c = body[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      flush();
      ++i;
    } else if (c == '(' || c == ')') {
      flush();
      out.push_back({false, std::string(1, c)});
      ++i;
    } else if (c == '"') {
      flush();
      const auto close = body.find('"', i + 1);
      if (close == std::string_view::npos) throw GrammarError("unterminated quoted terminal", where);
      out.push_back({false, std::string(body.substr(i + 1, close - i - 1))});
      i = close + 1;
    } else if (const auto len = nonterminal_length(body, i); len > 0) {
      flush();
      out.push_back({true, std::string(body.substr(i, len))});
      i += len;
    } else {
      word.push_back(c);
      ++i;
    }
  }
  flush();
  return out;
}

// Splits on a single '|' that is not part of '||'.
std::vector<std::string_view> split_alternatives(std::string_view rhs) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  for (std::size_t i = 0; i < rhs.size(); ++i) {
    if (rhs[i] == '|') {
      parts.push_back(rhs.substr(start, i - start));
      start = i + 1;
    }
  }
  parts.push_back(rhs.substr(start));
  return parts;
}

double parse_number(std::string_view s, const GrammarOptions& options, SourceLocation where) {
  s = trim(s);
  if (s == "nvar") {
    if (!options.nvar) throw GrammarError("'nvar' used but no variable count was supplied", where);
    return static_cast<double>(*options.nvar);
  }
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty())
    throw GrammarError("malformed probability '" + std::string(s) + "'", where);
  return value;
}

double parse_probability(std::string_view entry, const GrammarOptions& options,
                         SourceLocation where) {
  const auto slash = entry.find('/');
  if (slash == std::string_view::npos) return parse_number(entry, options, where);
  const double num = parse_number(entry.substr(0, slash), options, where);
  const double den = parse_number(entry.substr(slash + 1), options, where);
  if (den == 0.0) throw GrammarError("zero denominator in probability", where);
  return num / den;
}

// Expands `[a, b, ..., z]`, repeating the value before an ellipsis until
// the list has `count` entries.
std::vector<double> parse_probability_list(std::string_view text, std::size_t count,
                                           const GrammarOptions& options, SourceLocation where,
                                           bool& count_mismatch) {
  text = trim(text);
  if (text.substr(0, 5) != "probs")
    throw GrammarError("expected 'probs' after '||'", where);
  text = trim(text.substr(5));
  if (text.empty() || text.front() != '[' || text.back() != ']')
    throw GrammarError("probability list must be enclosed in [ ]", where);
  text = text.substr(1, text.size() - 2);

  std::vector<std::string> entries;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) entries.push_back(std::move(current));
    current.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == ',' || std::isspace(static_cast<unsigned char>(c))) {
      flush();
    } else if (text.substr(i, 3) == "...") {
      flush();
      entries.emplace_back("...");
      i += 2;
    } else {
      current.push_back(c);
    }
  }
  flush();

  std::vector<double> before;
  std::vector<double> after;
  bool ellipsis = false;
  for (const auto& e : entries) {
    if (e == "...") {
      if (ellipsis || before.empty())
        throw GrammarError("ellipsis must follow a value and appear once", where);
      ellipsis = true;
    } else {
      (ellipsis ? after : before).push_back(parse_probability(e, options, where));
    }
  }

  count_mismatch = false;
  if (!ellipsis) {
    count_mismatch = before.size() != count;
    return before;
  }
  const double fill = before.back();
  if (before.size() + after.size() > count) {
    const bool all_same = std::all_of(before.begin(), before.end(), [&](double v) { return v == fill; }) &&
                          std::all_of(after.begin(), after.end(), [&](double v) { return v == fill; });
    if (!all_same) {
      count_mismatch = true;
      return before;
    }
    return std::vector<double>(count, fill);
  }
  std::vector<double> out = before;
  out.insert(out.end(), count - before.size() - after.size(), fill);
  out.insert(out.end(), after.begin(), after.end());
  return out;
}

// `1... nvar` style shorthand; returns the first index when matched.
std::optional<long> parametric_start(std::string_view body) {
  body = trim(body);
  const auto dots = body.find("...");
  if (dots == std::string_view::npos) return std::nullopt;
  const auto lo = trim(body.substr(0, dots));
  const auto hi = trim(body.substr(dots + 3));
  if (hi != "nvar") return std::nullopt;
  long first = 0;
  const auto [ptr, ec] = std::from_chars(lo.data(), lo.data() + lo.size(), first);
  if (ec != std::errc{} || ptr != lo.data() + lo.size()) return std::nullopt;
  return first;
}

bool needs_quotes(const std::string& t) {
  if (t.empty()) return true;
  if (t == "(" || t == ")") return false;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const char c = t[i];
    if (std::isspace(static_cast<unsigned char>(c)) || c == '|' || c == '"' || c == '(' ||
        c == ')')
      return true;
    if (nonterminal_length(t, i) > 0) return true;
  }
  return t.find("...") != std::string::npos;
}

std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

struct LogicalLine {
  std::string text;
  SourceLocation where;
};

std::vector<LogicalLine> logical_productions(std::string_view text) {
  std::vector<LogicalLine> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    ++line_no;
    std::string_view raw = text.substr(pos, nl - pos);
    pos = nl + 1;
    if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    if (line.find("::=") != std::string_view::npos) {
      const auto column = static_cast<std::size_t>(line.data() - raw.data()) + 1;
      out.push_back({std::string(line), {line_no, column}});
    } else {
      if (out.empty()) throw GrammarError("text before the first production", {line_no, 1});
      out.back().text += ' ';
      out.back().text += line;
    }
  }
  return out;
}

}  // namespace

const Rule& Grammar::rule(ActionId a) const {
  if (a >= rules_.size())
    throw std::out_of_range("action index " + std::to_string(a) + " out of range");
  return rules_[a];
}

std::optional<SymbolId> Grammar::find_symbol(std::string_view name) const {
  for (SymbolId s = 0; s < nonterminals_.size(); ++s)
    if (nonterminals_[s] == name) return s;
  return std::nullopt;
}

const Mask& Grammar::mask(SymbolId s) const {
  if (s >= masks_.size()) throw std::out_of_range("unknown symbol id " + std::to_string(s));
  return masks_[s];
}

ChildSymbols Grammar::child_symbols(ActionId a) const {
  ChildSymbols out;
  for (const auto& tok : rule(a).body) {
    if (tok.is_nonterminal())
      out.nonterminals.push_back(tok.symbol);
    else
      out.terminals.push_back(tok.text);
  }
  return out;
}

std::vector<std::string> Grammar::terminals() const {
  std::vector<std::string> out;
  for (const auto& r : rules_)
    for (const auto& t : r.body)
      if (!t.is_nonterminal() && std::find(out.begin(), out.end(), t.text) == out.end())
        out.push_back(t.text);
  return out;
}

bool Grammar::uses_constants() const {
  for (const auto& r : rules_)
    for (const auto& t : r.body)
      if (!t.is_nonterminal() && t.text.find("const") != std::string::npos) return true;
  return false;
}

SymbolId Grammar::intern(const std::string& name) {
  if (auto s = find_symbol(name)) return *s;
  nonterminals_.push_back(name);
  productions_.push_back({});
  return nonterminals_.size() - 1;
}

std::string Grammar::serialize() const {
  std::ostringstream out;
  for (SymbolId s = 0; s < nonterminals_.size(); ++s) {
    const auto& prod = productions_[s];
    if (prod.count == 0) continue;
    out << nonterminals_[s] << " ::=";
    for (std::size_t k = 0; k < prod.count; ++k) {
      if (k > 0) out << " |";
      for (const auto& tok : rules_[prod.first + k].body) {
        out << ' ';
        if (!tok.is_nonterminal() && needs_quotes(tok.text))
          out << '"' << tok.text << '"';
        else
          out << tok.text;
      }
    }
    out << " || probs [";
    for (std::size_t k = 0; k < prod.count; ++k) {
      if (k > 0) out << ", ";
      out << format_double(rules_[prod.first + k].probability);
    }
    out << "]\n";
  }
  return out.str();
}

Grammar parse_grammar_unchecked(std::string_view text, const GrammarOptions& options) {
  Grammar g;
  const auto lines = logical_productions(text);
  if (lines.empty()) throw GrammarError("grammar has no productions", {1, 1});

  struct Pending {
    SymbolId owner;
    std::vector<std::vector<RawToken>> bodies;
    std::optional<std::string> probs;
    SourceLocation where;
  };
  std::vector<Pending> pending;

  for (const auto& line : lines) {
    const std::string_view full = line.text;
    const auto sep = full.find("::=");
    const auto lhs = trim(full.substr(0, sep));
    if (lhs.empty() || nonterminal_length(lhs, 0) != lhs.size())
      throw GrammarError("left-hand side must be a single <symbol>", line.where);
    const std::string name(lhs);
    if (const auto existing = g.find_symbol(name)) {
      for (const auto& p : pending)
        if (p.owner == *existing)
          throw GrammarError("duplicate production for " + name, line.where);
    }
    Pending p{g.intern(name), {}, std::nullopt, line.where};

    std::string_view rhs = full.substr(sep + 3);
    if (const auto dbl = rhs.find("||"); dbl != std::string_view::npos) {
      p.probs = std::string(rhs.substr(dbl + 2));
      rhs = rhs.substr(0, dbl);
    }
    const auto alternatives = split_alternatives(rhs);
    if (alternatives.size() == 1) {
      if (const auto first = parametric_start(alternatives.front())) {
        if (!options.nvar)
          throw GrammarError(name + " uses the '... nvar' shorthand but no variable count was supplied",
                             line.where);
        if (*options.nvar < 1) throw GrammarError("nvar must be at least 1", line.where);
        for (std::size_t i = 0; i < *options.nvar; ++i)
          p.bodies.push_back({{false, std::to_string(*first + static_cast<long>(i))}});
      }
    }
    if (p.bodies.empty()) {
      for (const auto alt : alternatives) {
        auto toks = tokenize_body(alt, line.where);
        if (toks.empty()) throw GrammarError("empty rule in production " + name, line.where);
        p.bodies.push_back(std::move(toks));
      }
    }
    pending.push_back(std::move(p));
  }

  for (auto& p : pending) {
    auto& prod = g.productions_[p.owner];
    prod.first = g.rules_.size();
    prod.count = p.bodies.size();
    prod.where = p.where;

    std::vector<double> declared(p.bodies.size(), 1.0 / static_cast<double>(p.bodies.size()));
    if (p.probs) {
      bool mismatch = false;
      auto values = parse_probability_list(*p.probs, p.bodies.size(), options, p.where, mismatch);
      if (mismatch) {
        g.parse_diagnostics_.push_back(
            {Diagnostic::Severity::Error,
             "probability count " + std::to_string(values.size()) + " does not match rule count " +
                 std::to_string(p.bodies.size()),
             g.nonterminals_[p.owner], p.where});
      } else {
        declared = std::move(values);
      }
    }

    double sum = 0.0;
    bool negative = false;
    for (double v : declared) {
      sum += v;
      negative = negative || v < 0.0 || !std::isfinite(v);
    }
    if (negative || sum <= 0.0) {
      g.parse_diagnostics_.push_back({Diagnostic::Severity::Error,
                                      "probabilities must be finite, nonnegative, and not all zero",
                                      g.nonterminals_[p.owner], p.where});
    } else if (std::abs(sum - 1.0) > 1e-6) {
      g.parse_diagnostics_.push_back({Diagnostic::Severity::Warning,
                                      "probabilities sum to " + format_double(sum) +
                                          " (sum != 1); renormalized",
                                      g.nonterminals_[p.owner], p.where});
    }
    const bool renormalize = !negative && sum > 0.0 && std::abs(sum - 1.0) > 1e-12;

    for (std::size_t k = 0; k < p.bodies.size(); ++k) {
      Rule r;
      r.owner = p.owner;
      r.declared_probability = declared[k];
      r.probability = renormalize ? declared[k] / sum : declared[k];
      if (negative || sum <= 0.0) r.probability = 1.0 / static_cast<double>(p.bodies.size());
      for (auto& raw : p.bodies[k]) {
        Token t;
        t.text = std::move(raw.text);
        if (raw.nonterminal) {
          t.kind = Token::Kind::Nonterminal;
          t.symbol = g.intern(t.text);
        }
        r.body.push_back(std::move(t));
      }
      g.rules_.push_back(std::move(r));
    }
  }

  // Symbols referenced but never defined keep an empty production.
  g.productions_.resize(g.nonterminals_.size());
  for (SymbolId s = 0; s < g.nonterminals_.size(); ++s) {
    Mask m(g.rules_.size(), false);
    const auto& prod = g.productions_[s];
    for (std::size_t k = 0; k < prod.count; ++k) m[prod.first + k] = true;
    g.masks_.push_back(std::move(m));
  }
  return g;
}

std::vector<Diagnostic> validate_grammar(const Grammar& g) {
  std::vector<Diagnostic> out = g.parse_diagnostics();
  const std::size_t n = g.nonterminal_count();

  for (SymbolId s = 0; s < n; ++s)
    if (!g.is_defined(s))
      out.push_back({Diagnostic::Severity::Error, "undefined nonterminal", g.symbol_name(s), {}});

  std::vector<bool> reachable(n, false);
  std::vector<SymbolId> stack{g.start()};
  reachable[g.start()] = true;
  while (!stack.empty()) {
    const SymbolId s = stack.back();
    stack.pop_back();
    const auto& prod = g.production(s);
    for (std::size_t k = 0; k < prod.count; ++k)
      for (const auto& t : g.rule(prod.first + k).body)
        if (t.is_nonterminal() && !reachable[t.symbol]) {
          reachable[t.symbol] = true;
          stack.push_back(t.symbol);
        }
  }

  std::vector<bool> productive(n, false);
  for (bool changed = true; changed;) {
    changed = false;
    for (SymbolId s = 0; s < n; ++s) {
      if (productive[s]) continue;
      const auto& prod = g.production(s);
      for (std::size_t k = 0; k < prod.count && !productive[s]; ++k) {
        const auto& body = g.rule(prod.first + k).body;
        if (std::all_of(body.begin(), body.end(),
                        [&](const Token& t) { return !t.is_nonterminal() || productive[t.symbol]; })) {
          productive[s] = true;
          changed = true;
        }
      }
    }
  }

  for (SymbolId s = 0; s < n; ++s) {
    const auto where = g.production(s).where;
    if (!reachable[s])
      out.push_back({Diagnostic::Severity::Error, "symbol is unreachable from the start symbol",
                     g.symbol_name(s), where});
    if (g.is_defined(s) && !productive[s])
      out.push_back({Diagnostic::Severity::Error, "symbol cannot terminate", g.symbol_name(s), where});
  }
  return out;
}

Grammar parse_grammar(std::string_view text, const GrammarOptions& options) {
  auto g = parse_grammar_unchecked(text, options);
  for (const auto& d : validate_grammar(g))
    if (d.is_error()) throw GrammarError(d.symbol + ": " + d.message, d.where);
  return g;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Grammar load_grammar_file(const std::string& path, const GrammarOptions& options) {
  return parse_grammar(read_text_file(path), options);
}

Mask action_mask(const Grammar& g, std::string_view symbol) {
  const auto s = g.find_symbol(symbol);
  if (!s) throw std::invalid_argument("unknown symbol " + std::string(symbol));
  return g.mask(*s);
}

}  // namespace pcfgsr
