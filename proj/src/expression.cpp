#include "timedreach/expression.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <optional>

namespace timedreach {

namespace {

const std::map<std::string, double>& builtin_constants() {
  static const std::map<std::string, double> k = {{"pi", 3.14159265358979323846}};
  return k;
}

}  // namespace

class ExprParser {
 public:
  ExprParser(const std::string& text, int dim_x, int dim_u,
             const std::map<std::string, double>& constants)
      : text_(text), dim_x_(dim_x), dim_u_(dim_u), constants_(constants) {}

  Expression run() {
    Expression e;
    e.text_ = text_;
    out_ = &e;
    parse_expr();
    skip_ws();
    if (pos_ < text_.size()) fail("unexpected trailing input");
    if (max_stack_ > 32) fail("expression too deep");
    e.max_stack_ = max_stack_;
    return e;
  }

 private:
  const std::string& text_;
  int dim_x_;
  int dim_u_;
  const std::map<std::string, double>& constants_;
  std::size_t pos_ = 0;
  Expression* out_ = nullptr;
  int stack_ = 0;
  int max_stack_ = 0;

  [[noreturn]] void fail(const std::string& msg) const { fail_at(msg, pos_); }

  [[noreturn]] void fail_at(const std::string& msg, std::size_t at) const {
    int line = 1, col = 1;
    for (std::size_t i = 0; i < at && i < text_.size(); ++i) {
      if (text_[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ExpressionError(msg, line, col);
  }

  void emit(Expression::Instr in, int pushes) {
    out_->program_.push_back(in);
    stack_ += pushes;
    if (stack_ > max_stack_) max_stack_ = stack_;
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool eat(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  char peek() {
    skip_ws();
    return pos_ < text_.size() ? text_[pos_] : '\0';
  }

  void parse_expr() {
    parse_term();
    for (;;) {
      if (eat('+')) {
        parse_term();
        emit({Expression::Op::add}, -1);
      } else if (eat('-')) {
        parse_term();
        emit({Expression::Op::sub}, -1);
      } else {
        return;
      }
    }
  }

  void parse_term() {
    parse_power();
    for (;;) {
      if (eat('*')) {
        parse_power();
        emit({Expression::Op::mul}, -1);
      } else if (eat('/')) {
        parse_power();
        emit({Expression::Op::div}, -1);
      } else {
        return;
      }
    }
  }

  void parse_power() {
    parse_unary();
    if (eat('^')) {
      parse_power();  // right associative
      emit({Expression::Op::pow}, -1);
    }
  }

  void parse_unary() {
    if (eat('-')) {
      parse_unary();
      emit({Expression::Op::neg}, 0);
      return;
    }
    parse_primary();
  }

  void parse_primary() {
    skip_ws();
    if (pos_ >= text_.size()) fail("unexpected end of expression");
    const char c = text_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      parse_number();
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      parse_ident();
      return;
    }
    if (c == '(') {
      ++pos_;
      parse_expr();
      if (!eat(')')) fail("expected ')'");
      return;
    }
    fail(std::string("unexpected character '") + c + "'");
  }

  void parse_number() {
    const char* begin = text_.c_str() + pos_;
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin) fail("invalid number");
    pos_ += static_cast<std::size_t>(end - begin);
    emit({Expression::Op::push_const, 0, v}, 1);
  }

  void parse_ident() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
      ++pos_;
    const std::string name = text_.substr(start, pos_ - start);

    if (peek() == '(') {
      parse_call(name, start);
      return;
    }

    // x<k> / u<k> variables, then user constants, then builtins.
    if (auto idx = var_index(name, 'x', dim_x_)) {
      emit({Expression::Op::push_x, *idx - 1}, 1);
      return;
    }
    if (auto idx = var_index(name, 'u', dim_u_)) {
      emit({Expression::Op::push_u, *idx - 1}, 1);
      return;
    }
    if (auto it = constants_.find(name); it != constants_.end()) {
      emit({Expression::Op::push_const, 0, it->second}, 1);
      return;
    }
    if (auto it = builtin_constants().find(name); it != builtin_constants().end()) {
      emit({Expression::Op::push_const, 0, it->second}, 1);
      return;
    }
    fail_at("unknown identifier '" + name + "'", start);
  }

  // Returns the 1-based index if name is '<prefix><digits>' within [1, dim].
  std::optional<int> var_index(const std::string& name, char prefix, int dim) const {
    if (name.size() < 2 || name[0] != prefix) return std::nullopt;
    int idx = 0;
    for (std::size_t i = 1; i < name.size(); ++i) {
      if (!std::isdigit(static_cast<unsigned char>(name[i]))) return std::nullopt;
      idx = idx * 10 + (name[i] - '0');
    }
    if (idx < 1 || idx > dim) return std::nullopt;  // falls through to constants / error
    return idx;
  }

  void parse_call(const std::string& name, std::size_t at) {
    static const std::map<std::string, std::pair<Expression::Op, int>> fns = {
        {"sin", {Expression::Op::fn_sin, 1}},   {"cos", {Expression::Op::fn_cos, 1}},
        {"tan", {Expression::Op::fn_tan, 1}},   {"exp", {Expression::Op::fn_exp, 1}},
        {"log", {Expression::Op::fn_log, 1}},   {"sqrt", {Expression::Op::fn_sqrt, 1}},
        {"abs", {Expression::Op::fn_abs, 1}},   {"min", {Expression::Op::fn_min, 2}},
        {"max", {Expression::Op::fn_max, 2}},
    };
    const auto it = fns.find(name);
    if (it == fns.end()) fail_at("unknown function '" + name + "'", at);
    eat('(');
    int argc = 0;
    if (peek() != ')') {
      parse_expr();
      ++argc;
      while (eat(',')) {
        parse_expr();
        ++argc;
      }
    }
    if (!eat(')')) fail("expected ')'");
    if (argc != it->second.second)
      fail_at("function '" + name + "' expects " + std::to_string(it->second.second) +
                  " argument(s), got " + std::to_string(argc),
              at);
    emit({it->second.first}, 1 - argc);
  }
};

Expression Expression::parse(const std::string& text, int dim_x, int dim_u,
                             const std::map<std::string, double>& constants) {
  return ExprParser(text, dim_x, dim_u, constants).run();
}

double Expression::eval(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const {
  double stack[32];
  int sp = 0;
  for (const Instr& in : program_) {
    switch (in.op) {
      case Op::push_const: stack[sp++] = in.value; break;
      case Op::push_x: stack[sp++] = x[in.index]; break;
      case Op::push_u: stack[sp++] = u[in.index]; break;
      case Op::add: --sp; stack[sp - 1] += stack[sp]; break;
      case Op::sub: --sp; stack[sp - 1] -= stack[sp]; break;
      case Op::mul: --sp; stack[sp - 1] *= stack[sp]; break;
      case Op::div: --sp; stack[sp - 1] /= stack[sp]; break;
      case Op::pow: --sp; stack[sp - 1] = std::pow(stack[sp - 1], stack[sp]); break;
      case Op::neg: stack[sp - 1] = -stack[sp - 1]; break;
      case Op::fn_sin: stack[sp - 1] = std::sin(stack[sp - 1]); break;
      case Op::fn_cos: stack[sp - 1] = std::cos(stack[sp - 1]); break;
      case Op::fn_tan: stack[sp - 1] = std::tan(stack[sp - 1]); break;
      case Op::fn_exp: stack[sp - 1] = std::exp(stack[sp - 1]); break;
      case Op::fn_log: stack[sp - 1] = std::log(stack[sp - 1]); break;
      case Op::fn_sqrt: stack[sp - 1] = std::sqrt(stack[sp - 1]); break;
      case Op::fn_abs: stack[sp - 1] = std::fabs(stack[sp - 1]); break;
      case Op::fn_min: --sp; stack[sp - 1] = std::fmin(stack[sp - 1], stack[sp]); break;
      case Op::fn_max: --sp; stack[sp - 1] = std::fmax(stack[sp - 1], stack[sp]); break;
    }
  }
  return stack[0];
}

}  // namespace timedreach
