#include "pcfgsr/derivation.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>

namespace pcfgsr {

double StateObservation::depth_feature() const {
  if (!toggles.depth) return 0.0;
  return static_cast<double>(depth) / static_cast<double>(std::max<std::size_t>(horizon, 1));
}

std::vector<double> StateObservation::symbol_one_hot() const {
  std::vector<double> v(symbol_count, 0.0);
  if (symbol && *symbol < symbol_count) v[*symbol] = 1.0;
  return v;
}

DerivationState::DerivationState(const Grammar& g) : grammar_(&g) {
  nodes_.push_back({g.start(), std::nullopt, kNoParent, {}});
  pending_.push_back(0);
}

std::optional<SymbolId> DerivationState::current_symbol() const {
  if (pending_.empty()) return std::nullopt;
  return nodes_[pending_.back()].symbol;
}

std::size_t DerivationState::current_node() const {
  if (pending_.empty()) throw std::logic_error("derivation is complete");
  return pending_.back();
}

std::vector<std::size_t> DerivationState::queue() const {
  return {pending_.rbegin(), pending_.rend()};
}

void DerivationState::apply(ActionId a) {
  if (pending_.empty()) throw std::logic_error("cannot expand a complete derivation");
  const std::size_t id = pending_.back();
  const SymbolId sym = nodes_[id].symbol;
  const auto& prod = grammar_->production(sym);
  if (a < prod.first || a >= prod.first + prod.count)
    throw std::logic_error("action " + std::to_string(a + 1) + " is masked for symbol " +
                           grammar_->symbol_name(sym));
  pending_.pop_back();
  nodes_[id].action = a;

  const auto& body = grammar_->rule(a).body;
  std::vector<std::size_t> created;
  for (const auto& tok : body) {
    if (!tok.is_nonterminal()) continue;
    nodes_.push_back({tok.symbol, std::nullopt, id, {}});
    created.push_back(nodes_.size() - 1);
  }
  nodes_[id].children = created;
  // leftmost child ends up at the back, i.e. the front of the queue
  for (auto it = created.rbegin(); it != created.rend(); ++it) pending_.push_back(*it);
  trajectory_.push_back(a);
}

StateObservation DerivationState::observe(const ObservationConfig& config) const {
  if (pending_.empty()) throw std::logic_error("observation of a complete derivation");
  const std::size_t id = pending_.back();
  const auto& node = nodes_[id];

  StateObservation obs;
  obs.toggles = config.toggles;
  obs.depth = trajectory_.size();
  obs.horizon = config.horizon;
  obs.symbol_count = grammar_->nonterminal_count();
  if (config.toggles.symbol) obs.symbol = node.symbol;
  obs.mask = grammar_->mask(node.symbol);

  obs.past_actions.assign(config.past_window, kNullAction);
  if (config.toggles.past) {
    const std::size_t n = std::min(config.past_window, trajectory_.size());
    std::copy(trajectory_.end() - static_cast<long>(n), trajectory_.end(),
              obs.past_actions.end() - static_cast<long>(n));
  }

  obs.sibling_actions.assign(config.sibling_window, kNullAction);
  if (node.parent != kNoParent) {
    const auto& parent = nodes_[node.parent];
    if (config.toggles.parent) obs.parent_action = *parent.action;
    if (config.toggles.siblings) {
      std::vector<ActionId> done;
      for (auto child : parent.children) {
        if (child == id) break;
        if (nodes_[child].action) done.push_back(*nodes_[child].action);
      }
      const std::size_t n = std::min(config.sibling_window, done.size());
      std::copy(done.end() - static_cast<long>(n), done.end(),
                obs.sibling_actions.end() - static_cast<long>(n));
    }
  }
  return obs;
}

namespace {

// Expansions containing an operator outside brackets are parenthesized so
// the text keeps the parse tree's grouping.
bool needs_grouping(const std::string& s) {
  int depth = 0;
  bool has_operand = false;
  bool top_level_op = false;
  for (char c : s) {
    if (c == '(' || c == '[') ++depth;
    else if (c == ')' || c == ']') --depth;
    else if (depth == 0 && (c == '+' || c == '-' || c == '*' || c == '/' || c == '^')) top_level_op = true;
    if (std::isalnum(static_cast<unsigned char>(c))) has_operand = true;
  }
  return top_level_op && has_operand;
}

}  // namespace

void DerivationState::render(std::size_t id, std::string& out) const {
  const auto& node = nodes_[id];
  if (!node.action) {
    out += grammar_->symbol_name(node.symbol);
    return;
  }
  std::size_t child = 0;
  for (const auto& tok : grammar_->rule(*node.action).body) {
    if (!tok.is_nonterminal()) {
      out += tok.text;
      continue;
    }
    std::string sub;
    render(node.children[child++], sub);
    if (needs_grouping(sub)) {
      out += '(';
      out += sub;
      out += ')';
    } else {
      out += sub;
    }
  }
}

std::string DerivationState::text() const {
  std::string out;
  render(0, out);
  return out;
}

DerivationState init_derivation(const Grammar& g) { return DerivationState(g); }

DerivationState apply_action(DerivationState s, ActionId a) {
  s.apply(a);
  return s;
}

StateObservation observation(const DerivationState& s, const ObservationConfig& config) {
  return s.observe(config);
}

bool is_complete(const DerivationState& s) { return s.is_complete(); }

Expression to_expression(const DerivationState& s, std::span<const std::string> feature_names) {
  if (!s.is_complete()) throw std::logic_error("to_expression on an incomplete derivation");
  return parse_expression(s.text(), feature_names);
}

}  // namespace pcfgsr
