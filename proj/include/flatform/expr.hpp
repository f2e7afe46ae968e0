#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "flatform/rational.hpp"

namespace flatform {

class Chart;

enum class Op : std::uint8_t { Const, Var, Add, Mul, Neg, Div, Pow, Sin, Cos, Exp, Ln, Sqrt };

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t offset)
        : std::runtime_error(what + " at byte " + std::to_string(offset)), offset_(offset) {}
    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

// Domain violation during evaluation; path lists child indices from the root.
class EvalError : public std::runtime_error {
public:
    EvalError(const std::string& what, std::string path) : std::runtime_error(what), path_(std::move(path)) {}
    const std::string& path() const { return path_; }

private:
    std::string path_;
};

// Immutable expression tree. Variables are chart coordinate indices.
// Construction goes through light simplification: constant folding, 0/1
// identities, flattening of sums and products, sign normalization.
class Expr {
public:
    Expr();  // zero constant
    Expr(Rational c);
    Expr(int c) : Expr(Rational(c)) {}

    static Expr var(int index);
    static Expr apply(Op fn, const Expr& arg);  // Sin, Cos, Exp, Ln, Sqrt, Neg

    Op op() const;
    const Rational& value() const;    // Const only
    int var_index() const;            // Var only
    int exponent() const;             // Pow only
    const std::vector<Expr>& args() const;

    bool is_const() const { return op() == Op::Const; }
    bool is_zero() const { return is_const() && value().is_zero(); }
    bool is_one() const { return is_const() && value().is_one(); }

    Expr diff(int var) const;
    // Replaces variable i by repl[i]; repl.size() must cover every variable used.
    Expr substitute(const std::vector<Expr>& repl) const;
    bool depends_on(int var) const;
    int max_var() const;  // -1 when constant
    std::size_t node_count() const;

    friend Expr operator+(const Expr& a, const Expr& b);
    friend Expr operator-(const Expr& a, const Expr& b);
    friend Expr operator*(const Expr& a, const Expr& b);
    friend Expr operator/(const Expr& a, const Expr& b);
    friend Expr operator-(const Expr& a);

    struct Node;

private:
    explicit Expr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
    std::shared_ptr<const Node> node_;

    friend Expr make_sum(std::vector<Expr> terms);
    friend Expr make_product(std::vector<Expr> factors);
    friend Expr pow(const Expr& base, int k);
    friend Expr make_node(Op op, std::vector<Expr> args, Rational value, int ival);
};

Expr make_sum(std::vector<Expr> terms);
Expr make_product(std::vector<Expr> factors);
Expr pow(const Expr& base, int k);
Expr sin(const Expr& a);
Expr cos(const Expr& a);
Expr exp(const Expr& a);
Expr ln(const Expr& a);
Expr sqrt(const Expr& a);

bool structurally_equal(const Expr& a, const Expr& b);

std::string to_string(const Expr& e, const std::vector<std::string>& names);
Expr parse(std::string_view text, const std::vector<std::string>& names);
Expr parse(std::string_view text, const Chart& chart);
Expr differentiate(const Expr& e, const std::string& var, const std::vector<std::string>& names);

// Tree evaluation; throws EvalError naming the offending sub-expression.
double evaluate(const Expr& e, std::span<const double> x, const std::vector<std::string>* names = nullptr);

// Flattened postfix program for fast repeated evaluation. Falls back to the
// tree evaluator to produce a located EvalError when a domain check trips.
class CompiledExpr {
public:
    CompiledExpr() = default;
    explicit CompiledExpr(const Expr& e);
    double operator()(const double* x) const;
    double operator()(std::span<const double> x) const { return (*this)(x.data()); }
    const Expr& source() const { return src_; }

private:
    struct Instr {
        Op op;
        int arg;   // var index, exponent, or arity
        double c;  // constant value
    };
    std::vector<Instr> code_;
    int depth_ = 0;
    Expr src_;
};

}  // namespace flatform
