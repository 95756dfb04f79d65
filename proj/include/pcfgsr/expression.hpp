#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pcfgsr {

enum class Op : std::uint8_t {
  // binary
  Add,
  Sub,
  Mul,
  Div,
  Pow,
  // unary
  Neg,
  Cos,
  Sin,
  Exp,
  Log,
  Log10,
  Sqrt,
  Abs,
  Asinh,
  Harmonic,
  // leaves
  Feature,
  Literal,
  Constant,
};

int arity(Op op);
bool is_operator(Op op);
std::string_view op_name(Op op);

struct Node {
  Op op = Op::Literal;
  std::uint32_t feature = 0;  // 0-based column, Feature only
  double value = 0.0;         // Literal / Constant
};

class ExpressionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Expression tree stored in postfix order; the last node is the root.
class Expression {
 public:
  Expression() = default;
  explicit Expression(std::vector<Node> postfix);

  std::span<const Node> nodes() const { return nodes_; }
  bool empty() const { return nodes_.empty(); }
  std::size_t size() const { return nodes_.size(); }

  std::size_t constant_count() const;
  std::vector<double> constants() const;
  // Copy with Constant leaves set to `values` (still Constant leaves).
  Expression with_constants(std::span<const double> values) const;
  // Copy with Constant leaves replaced by Literal leaves.
  Expression freeze_constants() const;

  // Number of columns the expression needs (max feature index + 1).
  std::size_t required_width() const;

  // Fully parenthesized infix form using x[i] (1-based) references.
  std::string to_string() const;
  // Same, but features printed as x.<name> when a name is available.
  std::string to_string(std::span<const std::string> names) const;

  friend bool operator==(const Expression& a, const Expression& b);

 private:
  std::vector<Node> nodes_;
};

// Parses infix text. Features are `x[i]` (1-based) or `x.name`, which is
// resolved against `feature_names`. `const` is a fittable constant leaf.
Expression parse_expression(std::string_view text, std::span<const std::string> feature_names = {});

// Operator nodes plus feature-leaf occurrences; literals and constants
// are not counted.
std::size_t complexity(const Expression& e);

}  // namespace pcfgsr
