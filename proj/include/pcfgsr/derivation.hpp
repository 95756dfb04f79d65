#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pcfgsr/expression.hpp"
#include "pcfgsr/grammar.hpp"

namespace pcfgsr {

// Padding value for action windows and the parent slot of the root.
inline constexpr ActionId kNullAction = std::numeric_limits<ActionId>::max();

struct ObservationToggles {
  bool parent = true;
  bool siblings = true;
  bool past = true;
  bool depth = true;
  bool symbol = true;
};

struct ObservationConfig {
  std::size_t past_window = 10;
  std::size_t sibling_window = 4;
  std::size_t horizon = 50;
  ObservationToggles toggles;
};

struct StateObservation {
  std::vector<ActionId> past_actions;     // oldest first, left-padded with kNullAction
  ActionId parent_action = kNullAction;
  std::vector<ActionId> sibling_actions;  // left-padded with kNullAction
  std::size_t depth = 0;
  std::size_t horizon = 1;
  std::optional<SymbolId> symbol;         // nullopt when the symbol input is off
  std::size_t symbol_count = 0;
  Mask mask;
  ObservationToggles toggles;

  double depth_feature() const;
  std::vector<double> symbol_one_hot() const;
};

class DerivationState {
 public:
  static constexpr std::size_t kNoParent = std::numeric_limits<std::size_t>::max();

  struct TreeNode {
    SymbolId symbol = 0;
    std::optional<ActionId> action;
    std::size_t parent = kNoParent;
    std::vector<std::size_t> children;  // nonterminal children, body order
  };

  explicit DerivationState(const Grammar& g);

  const Grammar& grammar() const { return *grammar_; }
  const std::vector<ActionId>& trajectory() const { return trajectory_; }
  const std::vector<TreeNode>& tree() const { return nodes_; }
  std::size_t depth() const { return trajectory_.size(); }
  bool is_complete() const { return pending_.empty(); }
  std::optional<SymbolId> current_symbol() const;
  // Node ids awaiting expansion, front (next to expand) first.
  std::vector<std::size_t> queue() const;
  std::size_t current_node() const;

  // Expands the front node in place. Throws std::logic_error for a masked
  // action or a complete state.
  void apply(ActionId a);

  StateObservation observe(const ObservationConfig& config) const;

  // Concatenated terminal text; pending nonterminals print as <name>.
  std::string text() const;

 private:
  void render(std::size_t node, std::string& out) const;

  const Grammar* grammar_;
  std::vector<TreeNode> nodes_;
  std::vector<std::size_t> pending_;  // back = front of the queue
  std::vector<ActionId> trajectory_;
};

DerivationState init_derivation(const Grammar& g);
DerivationState apply_action(DerivationState s, ActionId a);
StateObservation observation(const DerivationState& s, const ObservationConfig& config);
bool is_complete(const DerivationState& s);
// Throws std::logic_error on an incomplete state.
Expression to_expression(const DerivationState& s, std::span<const std::string> feature_names = {});

}  // namespace pcfgsr
