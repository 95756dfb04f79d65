#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pcfgsr {

using SymbolId = std::size_t;
// Actions are 0-based internally; user-facing numbering (grammar listings,
// logs) adds one so the first rule of the first production is "action 1".
using ActionId = std::size_t;
using Mask = std::vector<bool>;

struct SourceLocation {
  std::size_t line = 0;
  std::size_t column = 0;
};

class GrammarError : public std::runtime_error {
 public:
  GrammarError(const std::string& what, SourceLocation where);
  SourceLocation where() const { return where_; }

 private:
  SourceLocation where_;
};

struct Token {
  enum class Kind { Terminal, Nonterminal };
  Kind kind = Kind::Terminal;
  std::string text;      // terminal text, or "<name>" for nonterminals
  SymbolId symbol = 0;   // valid only for nonterminals
  bool is_nonterminal() const { return kind == Kind::Nonterminal; }
};

struct Rule {
  SymbolId owner = 0;
  std::vector<Token> body;
  double probability = 0.0;           // normalized within the production
  double declared_probability = 0.0;  // as written in the source
};

struct ChildSymbols {
  std::vector<SymbolId> nonterminals;
  std::vector<std::string> terminals;
};

struct Diagnostic {
  enum class Severity { Warning, Error };
  Severity severity = Severity::Error;
  std::string message;
  std::string symbol;
  SourceLocation where;
  bool is_error() const { return severity == Severity::Error; }
};

std::string to_string(const Diagnostic& d);

struct GrammarOptions {
  // Width used to expand `<sym> ::= 1... nvar` productions.
  std::optional<std::size_t> nvar;
};

class Grammar {
 public:
  struct Production {
    ActionId first = 0;
    std::size_t count = 0;
    SourceLocation where;
  };

  SymbolId start() const { return 0; }
  const std::string& symbol_name(SymbolId s) const { return nonterminals_.at(s); }
  const std::vector<std::string>& nonterminals() const { return nonterminals_; }
  std::vector<std::string> terminals() const;
  std::size_t nonterminal_count() const { return nonterminals_.size(); }
  std::size_t action_count() const { return rules_.size(); }

  const Rule& rule(ActionId a) const;
  std::span<const Rule> rules() const { return rules_; }
  const Production& production(SymbolId s) const { return productions_.at(s); }
  bool is_defined(SymbolId s) const { return productions_.at(s).count > 0; }
  std::optional<SymbolId> find_symbol(std::string_view name) const;

  const Mask& mask(SymbolId s) const;
  ChildSymbols child_symbols(ActionId a) const;

  bool uses_constants() const;

  // Source-level issues recorded while parsing (count mismatches,
  // renormalized probabilities, undefined references).
  const std::vector<Diagnostic>& parse_diagnostics() const { return parse_diagnostics_; }

  // Canonical text form; parse(serialize(g)) reproduces rules and
  // probabilities exactly.
  std::string serialize() const;

 private:
  friend Grammar parse_grammar_unchecked(std::string_view, const GrammarOptions&);
  SymbolId intern(const std::string& name);

  std::vector<std::string> nonterminals_;
  std::vector<Production> productions_;
  std::vector<Rule> rules_;
  std::vector<Mask> masks_;
  std::vector<Diagnostic> parse_diagnostics_;
};

// Syntax-level parse; semantic problems are recorded, not thrown.
Grammar parse_grammar_unchecked(std::string_view text, const GrammarOptions& options = {});

// Full parse: throws GrammarError on syntax errors and on any
// error-severity diagnostic from validate_grammar.
Grammar parse_grammar(std::string_view text, const GrammarOptions& options = {});

Grammar load_grammar_file(const std::string& path, const GrammarOptions& options = {});
std::string read_text_file(const std::string& path);

std::vector<Diagnostic> validate_grammar(const Grammar& g);

Mask action_mask(const Grammar& g, std::string_view symbol);

}  // namespace pcfgsr
