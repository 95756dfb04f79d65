#include "pcfgsr/expression.hpp"

#include <cctype>
#include <charconv>
#include <cstdlib>

namespace pcfgsr {

int arity(Op op) {
  switch (op) {
    case Op::Add:
    case Op::Sub:
    case Op::Mul:
    case Op::Div:
    case Op::Pow:
      return 2;
    case Op::Feature:
    case Op::Literal:
    case Op::Constant:
      return 0;
    default:
      return 1;
  }
}

bool is_operator(Op op) { return arity(op) > 0; }

std::string_view op_name(Op op) {
  switch (op) {
    case Op::Add: return "+";
    case Op::Sub: return "-";
    case Op::Mul: return "*";
    case Op::Div: return "/";
    case Op::Pow: return "^";
    case Op::Neg: return "-";
    case Op::Cos: return "cos";
    case Op::Sin: return "sin";
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    case Op::Log10: return "log10";
    case Op::Sqrt: return "sqrt";
    case Op::Abs: return "abs";
    case Op::Asinh: return "asinh";
    case Op::Harmonic: return "harmonic";
    case Op::Feature: return "x";
    case Op::Literal: return "literal";
    case Op::Constant: return "const";
  }
  return "?";
}

Expression::Expression(std::vector<Node> postfix) : nodes_(std::move(postfix)) {
  long depth = 0;
  for (const auto& n : nodes_) {
    depth -= arity(n.op);
    if (depth < 0) throw ExpressionError("malformed postfix expression");
    ++depth;
  }
  if (!nodes_.empty() && depth != 1) throw ExpressionError("malformed postfix expression");
}

std::size_t Expression::constant_count() const {
  std::size_t n = 0;
  for (const auto& node : nodes_) n += node.op == Op::Constant;
  return n;
}

std::vector<double> Expression::constants() const {
  std::vector<double> out;
  for (const auto& node : nodes_)
    if (node.op == Op::Constant) out.push_back(node.value);
  return out;
}

Expression Expression::with_constants(std::span<const double> values) const {
  if (values.size() != constant_count())
    throw std::invalid_argument("constant count mismatch");
  Expression out = *this;
  std::size_t k = 0;
  for (auto& node : out.nodes_)
    if (node.op == Op::Constant) node.value = values[k++];
  return out;
}

Expression Expression::freeze_constants() const {
  Expression out = *this;
  for (auto& node : out.nodes_)
    if (node.op == Op::Constant) node.op = Op::Literal;
  return out;
}

std::size_t Expression::required_width() const {
  std::size_t w = 0;
  for (const auto& node : nodes_)
    if (node.op == Op::Feature) w = std::max<std::size_t>(w, node.feature + 1);
  return w;
}

bool operator==(const Expression& a, const Expression& b) {
  if (a.nodes_.size() != b.nodes_.size()) return false;
  for (std::size_t i = 0; i < a.nodes_.size(); ++i) {
    const auto& x = a.nodes_[i];
    const auto& y = b.nodes_[i];
    if (x.op != y.op || x.feature != y.feature || x.value != y.value) return false;
  }
  return true;
}

namespace {

std::string format_number(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, ptr);
  return v < 0 ? "(" + s + ")" : s;
}

std::string render(std::span<const Node> nodes, std::span<const std::string> names) {
  std::vector<std::string> stack;
  for (const auto& n : nodes) {
    switch (arity(n.op)) {
      case 0:
        if (n.op == Op::Feature) {
          if (n.feature < names.size() && !names[n.feature].empty())
            stack.push_back("x." + names[n.feature]);
          else
            stack.push_back("x[" + std::to_string(n.feature + 1) + "]");
        } else if (n.op == Op::Constant) {
          stack.emplace_back("const");
        } else {
          stack.push_back(format_number(n.value));
        }
        break;
      case 1: {
        auto a = std::move(stack.back());
        stack.pop_back();
        if (n.op == Op::Neg)
          stack.push_back("(-" + a + ")");
        else
          stack.push_back(std::string(op_name(n.op)) + "(" + a + ")");
        break;
      }
      default: {
        auto b = std::move(stack.back());
        stack.pop_back();
        auto a = std::move(stack.back());
        stack.pop_back();
        stack.push_back("(" + a + " " + std::string(op_name(n.op)) + " " + b + ")");
      }
    }
  }
  return stack.empty() ? std::string() : stack.back();
}

class Parser {
 public:
  Parser(std::string_view text, std::span<const std::string> names) : text_(text), names_(names) {}

  std::vector<Node> parse() {
    parse_sum();
    skip_space();
    if (pos_ != text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "'");
    return std::move(out_);
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw ExpressionError("column " + std::to_string(pos_ + 1) + ": " + msg + " in '" +
                          std::string(text_) + "'");
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) fail(std::string("expected '") + c + "'");
  }

  std::string identifier() {
    skip_space();
    const auto start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
      ++pos_;
    return std::string(text_.substr(start, pos_ - start));
  }

  void parse_sum() {
    parse_product();
    for (;;) {
      if (accept('+')) {
        parse_product();
        out_.push_back({Op::Add});
      } else if (accept('-')) {
        parse_product();
        out_.push_back({Op::Sub});
      } else {
        return;
      }
    }
  }

  void parse_product() {
    parse_unary();
    for (;;) {
      if (accept('*')) {
        parse_unary();
        out_.push_back({Op::Mul});
      } else if (accept('/')) {
        parse_unary();
        out_.push_back({Op::Div});
      } else {
        return;
      }
    }
  }

  void parse_unary() {
    if (accept('-')) {
      const auto mark = out_.size();
      parse_unary();
      // fold -<number> into a negative literal
      if (out_.size() == mark + 1 && out_.back().op == Op::Literal)
        out_.back().value = -out_.back().value;
      else
        out_.push_back({Op::Neg});
      return;
    }
    if (accept('+')) {
      parse_unary();
      return;
    }
    parse_power();
  }

  void parse_power() {
    parse_primary();
    if (accept('^')) {
      parse_unary();
      out_.push_back({Op::Pow});
    }
  }

  void parse_number() {
    const char* begin = text_.data() + pos_;
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin) fail("expected a number");
    pos_ += static_cast<std::size_t>(end - begin);
    out_.push_back({Op::Literal, 0, v});
  }

  void parse_primary() {
    skip_space();
    if (pos_ >= text_.size()) fail("unexpected end of input");
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      parse_sum();
      expect(')');
      return;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      parse_number();
      return;
    }
    const auto name = identifier();
    if (name.empty()) fail("unexpected '" + std::string(1, c) + "'");
    if (name == "x") {
      parse_feature();
      return;
    }
    if (name == "const") {
      out_.push_back({Op::Constant, 0, 1.0});
      return;
    }
    if (name == "pow") {
      expect('(');
      parse_sum();
      expect(',');
      parse_sum();
      expect(')');
      out_.push_back({Op::Pow});
      return;
    }
    Op op;
    if (name == "cos") op = Op::Cos;
    else if (name == "sin") op = Op::Sin;
    else if (name == "exp") op = Op::Exp;
    else if (name == "log" || name == "ln") op = Op::Log;
    else if (name == "log10") op = Op::Log10;
    else if (name == "sqrt") op = Op::Sqrt;
    else if (name == "abs") op = Op::Abs;
    else if (name == "asinh") op = Op::Asinh;
    else if (name == "harmonic") op = Op::Harmonic;
    else fail("unknown function '" + name + "'");
    expect('(');
    parse_sum();
    expect(')');
    out_.push_back({op});
  }

  void parse_feature() {
    if (accept('[')) {
      skip_space();
      const char* begin = text_.data() + pos_;
      unsigned long idx = 0;
      const auto [ptr, ec] = std::from_chars(begin, text_.data() + text_.size(), idx);
      if (ec != std::errc{} || idx == 0) fail("feature index must be a positive integer");
      pos_ += static_cast<std::size_t>(ptr - begin);
      expect(']');
      out_.push_back({Op::Feature, static_cast<std::uint32_t>(idx - 1), 0.0});
      return;
    }
    if (pos_ < text_.size() && text_[pos_] == '.') {
      ++pos_;
      const auto name = identifier();
      for (std::size_t i = 0; i < names_.size(); ++i)
        if (names_[i] == name) {
          out_.push_back({Op::Feature, static_cast<std::uint32_t>(i), 0.0});
          return;
        }
      fail("unknown feature name '" + name + "'");
    }
    fail("expected '[' or '.' after x");
  }

  std::string_view text_;
  std::span<const std::string> names_;
  std::size_t pos_ = 0;
  std::vector<Node> out_;
};

}  // namespace

std::string Expression::to_string() const { return render(nodes_, {}); }

std::string Expression::to_string(std::span<const std::string> names) const {
  return render(nodes_, names);
}

Expression parse_expression(std::string_view text, std::span<const std::string> feature_names) {
  return Expression(Parser(text, feature_names).parse());
}

std::size_t complexity(const Expression& e) {
  std::size_t c = 0;
  for (const auto& n : e.nodes()) c += is_operator(n.op) || n.op == Op::Feature;
  return c;
}

}  // namespace pcfgsr
