#pragma once

#include <Eigen/Core>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace timedreach {

// Raised on malformed expression text; line/column are 1-based.
struct ExpressionError : std::runtime_error {
  int line;
  int col;
  ExpressionError(const std::string& what, int line_, int col_)
      : std::runtime_error(what + " (line " + std::to_string(line_) + ", col " +
                           std::to_string(col_) + ")"),
        line(line_),
        col(col_) {}
};

// A scalar-valued expression over state variables x1..xn, input variables
// u1..um and named constants.
//
//   expr   := term (('+'|'-') term)*
//   term   := power (('*'|'/') power)*
//   power  := unary ('^' power)?            right associative
//   unary  := '-' unary | primary
//   primary:= number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')'
//
// Functions: sin cos tan exp log sqrt abs min max.  Evaluation is pure and
// allocation free; the parse compiles to a small postfix program.
class Expression {
 public:
  Expression() = default;

  static Expression parse(const std::string& text, int dim_x, int dim_u,
                          const std::map<std::string, double>& constants);

  double eval(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const;

  const std::string& text() const { return text_; }

 private:
  enum class Op : std::uint8_t {
    push_const,
    push_x,
    push_u,
    add,
    sub,
    mul,
    div,
    pow,
    neg,
    fn_sin,
    fn_cos,
    fn_tan,
    fn_exp,
    fn_log,
    fn_sqrt,
    fn_abs,
    fn_min,
    fn_max,
  };
  struct Instr {
    Op op;
    int index = 0;     // variable index for push_x / push_u
    double value = 0;  // literal for push_const
  };
  std::vector<Instr> program_;
  int max_stack_ = 0;
  std::string text_;

  friend class ExprParser;
};

}  // namespace timedreach
