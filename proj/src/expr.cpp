#include <algorithm>
#include "flatform/expr.hpp"

#include <cctype>
#include <cmath>
#include <sstream>

#include "flatform/chart.hpp"

namespace flatform {

struct Expr::Node {
    Op op;
    Rational value;
    int ival = 0;
    std::vector<Expr> args;
};

Expr make_node(Op op, std::vector<Expr> args, Rational value, int ival) {
    auto n = std::make_shared<Expr::Node>();
    n->op = op;
    n->value = value;
    n->ival = ival;
    n->args = std::move(args);
    return Expr(std::shared_ptr<const Expr::Node>(std::move(n)));
}

namespace {

const Expr& zero_expr() {
    static const Expr z = make_node(Op::Const, {}, Rational(0), 0);
    return z;
}

Expr constant(Rational c) { return make_node(Op::Const, {}, c, 0); }

Expr negate(const Expr& x);

}  // namespace

Expr::Expr() : node_(zero_expr().node_) {}
Expr::Expr(Rational c) : node_(constant(c).node_) {}

Expr Expr::var(int index) {
    if (index < 0) throw std::invalid_argument("negative variable index");
    return make_node(Op::Var, {}, Rational(0), index);
}

Op Expr::op() const { return node_->op; }
const Rational& Expr::value() const { return node_->value; }
int Expr::var_index() const { return node_->ival; }
int Expr::exponent() const { return node_->ival; }
const std::vector<Expr>& Expr::args() const { return node_->args; }

Expr make_sum(std::vector<Expr> terms) {
    std::vector<Expr> flat;
    Rational c(0);
    for (auto& t : terms) {
        if (t.op() == Op::Add) {
            for (const auto& s : t.args()) {
                if (s.is_const()) c = c + s.value();
                else flat.push_back(s);
            }
        } else if (t.is_const()) {
            c = c + t.value();
        } else {
            flat.push_back(std::move(t));
        }
    }
    // Collect like terms: c·t + d·t → (c+d)·t.
    std::vector<std::pair<Rational, Expr>> like;
    for (const auto& t : flat) {
        Rational k(1);
        Expr body = t;
        if (t.op() == Op::Neg) {
            k = Rational(-1);
            body = t.args()[0];
        }
        if (body.op() == Op::Mul && body.args()[0].is_const()) {
            k = k * body.args()[0].value();
            std::vector<Expr> rest(body.args().begin() + 1, body.args().end());
            body = rest.size() == 1 ? rest.front() : make_node(Op::Mul, std::move(rest), Rational(0), 0);
        }
        auto it = std::find_if(like.begin(), like.end(), [&](const auto& e) { return structurally_equal(e.second, body); });
        if (it == like.end()) like.emplace_back(k, body);
        else it->first = it->first + k;
    }
    if (like.size() < flat.size()) {
        flat.clear();
        for (auto& [k, body] : like)
            if (!k.is_zero()) flat.push_back(k.is_one() ? body : make_product({Expr(k), body}));
    }
    if (flat.empty()) return Expr(c);
    if (!c.is_zero()) flat.push_back(Expr(c));
    if (flat.size() == 1) return flat.front();
    return make_node(Op::Add, std::move(flat), Rational(0), 0);
}

Expr make_product(std::vector<Expr> factors) {
    std::vector<Expr> flat;
    Rational c(1);
    bool flip = false;
    auto push = [&](const Expr& f, auto& self) -> void {
        if (f.op() == Op::Mul) {
            for (const auto& s : f.args()) self(s, self);
        } else if (f.op() == Op::Neg) {
            flip = !flip;
            self(f.args()[0], self);
        } else if (f.is_const()) {
            c = c * f.value();
        } else {
            flat.push_back(f);
        }
    };
    for (const auto& f : factors) push(f, push);
    if (flip) c = -c;
    if (c.is_zero()) return Expr(0);
    if (flat.empty()) return Expr(c);
    if (c == Rational(-1)) {
        Expr rest = flat.size() == 1 ? flat.front() : make_node(Op::Mul, std::move(flat), Rational(0), 0);
        return make_node(Op::Neg, {rest}, Rational(0), 0);
    }
    if (!c.is_one()) flat.insert(flat.begin(), Expr(c));
    if (flat.size() == 1) return flat.front();
    return make_node(Op::Mul, std::move(flat), Rational(0), 0);
}

namespace {

Expr negate(const Expr& x) {
    switch (x.op()) {
        case Op::Const: return Expr(-x.value());
        case Op::Neg: return x.args()[0];
        case Op::Mul:
            if (x.args()[0].is_const()) {
                std::vector<Expr> f = x.args();
                f[0] = Expr(-f[0].value());
                return make_product(std::move(f));
            }
            break;
        default: break;
    }
    return make_node(Op::Neg, {x}, Rational(0), 0);
}

Expr divide(const Expr& a, const Expr& b) {
    if (b.is_const() && !b.value().is_zero()) return make_product({Expr(Rational(1) / b.value()), a});
    if (a.is_zero() && !b.is_const()) return Expr(0);
    if (a.op() == Op::Neg) return negate(divide(a.args()[0], b));
    if (b.op() == Op::Neg) return negate(divide(a, b.args()[0]));
    return make_node(Op::Div, {a, b}, Rational(0), 0);
}

}  // namespace

Expr pow(const Expr& base, int k) {
    if (k == 0) return Expr(1);
    if (k == 1) return base;
    if (base.is_const() && !(base.value().is_zero() && k < 0)) {
        try {
            return Expr(base.value().pow(k));
        } catch (const std::overflow_error&) {
        }
    }
    if (base.op() == Op::Pow) {
        long long e = static_cast<long long>(base.exponent()) * k;
        if (e <= 1000000 && e >= -1000000) return pow(base.args()[0], static_cast<int>(e));
    }
    if (base.op() == Op::Neg) {
        Expr p = pow(base.args()[0], k);
        return (k % 2 == 0) ? p : negate(p);
    }
    return make_node(Op::Pow, {base}, Rational(0), k);
}

Expr Expr::apply(Op fn, const Expr& a) {
    switch (fn) {
        case Op::Neg: return negate(a);
        case Op::Sin: if (a.is_zero()) return Expr(0); break;
        case Op::Cos: if (a.is_zero()) return Expr(1); break;
        case Op::Exp: if (a.is_zero()) return Expr(1); break;
        case Op::Ln: if (a.is_one()) return Expr(0); break;
        case Op::Sqrt: if (a.is_zero() || a.is_one()) return a; break;
        default: throw std::invalid_argument("Expr::apply: not a unary function");
    }
    return make_node(fn, {a}, Rational(0), 0);
}

Expr sin(const Expr& a) { return Expr::apply(Op::Sin, a); }
Expr cos(const Expr& a) { return Expr::apply(Op::Cos, a); }
Expr exp(const Expr& a) { return Expr::apply(Op::Exp, a); }
Expr ln(const Expr& a) { return Expr::apply(Op::Ln, a); }
Expr sqrt(const Expr& a) { return Expr::apply(Op::Sqrt, a); }

Expr operator+(const Expr& a, const Expr& b) { return make_sum({a, b}); }
Expr operator-(const Expr& a, const Expr& b) { return make_sum({a, negate(b)}); }
Expr operator*(const Expr& a, const Expr& b) { return make_product({a, b}); }
Expr operator/(const Expr& a, const Expr& b) { return divide(a, b); }
Expr operator-(const Expr& a) { return negate(a); }

Expr Expr::diff(int v) const {
    const auto& a = args();
    switch (op()) {
        case Op::Const: return Expr(0);
        case Op::Var: return Expr(var_index() == v ? 1 : 0);
        case Op::Add: {
            std::vector<Expr> t;
            for (const auto& s : a) t.push_back(s.diff(v));
            return make_sum(std::move(t));
        }
        case Op::Mul: {
            std::vector<Expr> t;
            for (std::size_t i = 0; i < a.size(); ++i) {
                Expr d = a[i].diff(v);
                if (d.is_zero()) continue;
                std::vector<Expr> f = a;
                f[i] = d;
                t.push_back(make_product(std::move(f)));
            }
            return make_sum(std::move(t));
        }
        case Op::Neg: return negate(a[0].diff(v));
        case Op::Div: {
            Expr da = a[0].diff(v), db = a[1].diff(v);
            if (db.is_zero()) return da / a[1];
            return (da * a[1] - a[0] * db) / pow(a[1], 2);
        }
        case Op::Pow: {
            int k = exponent();
            return make_product({Expr(k), pow(a[0], k - 1), a[0].diff(v)});
        }
        case Op::Sin: return cos(a[0]) * a[0].diff(v);
        case Op::Cos: return negate(sin(a[0]) * a[0].diff(v));
        case Op::Exp: return *this * a[0].diff(v);
        case Op::Ln: return a[0].diff(v) / a[0];
        case Op::Sqrt: return a[0].diff(v) / (Expr(2) * *this);
    }
    return Expr(0);
}

Expr Expr::substitute(const std::vector<Expr>& repl) const {
    switch (op()) {
        case Op::Const: return *this;
        case Op::Var:
            if (var_index() >= static_cast<int>(repl.size())) throw std::out_of_range("substitute: variable not covered");
            return repl[var_index()];
        default: break;
    }
    std::vector<Expr> a;
    for (const auto& s : args()) a.push_back(s.substitute(repl));
    switch (op()) {
        case Op::Add: return make_sum(std::move(a));
        case Op::Mul: return make_product(std::move(a));
        case Op::Neg: return negate(a[0]);
        case Op::Div: return a[0] / a[1];
        case Op::Pow: return pow(a[0], exponent());
        default: return apply(op(), a[0]);
    }
}

bool Expr::depends_on(int v) const {
    if (op() == Op::Var) return var_index() == v;
    for (const auto& s : args())
        if (s.depends_on(v)) return true;
    return false;
}

int Expr::max_var() const {
    if (op() == Op::Var) return var_index();
    int m = -1;
    for (const auto& s : args()) m = std::max(m, s.max_var());
    return m;
}

std::size_t Expr::node_count() const {
    std::size_t n = 1;
    for (const auto& s : args()) n += s.node_count();
    return n;
}

bool structurally_equal(const Expr& a, const Expr& b) {
    if (a.op() != b.op()) return false;
    switch (a.op()) {
        case Op::Const: return a.value() == b.value();
        case Op::Var: return a.var_index() == b.var_index();
        case Op::Pow:
            if (a.exponent() != b.exponent()) return false;
            break;
        default: break;
    }
    if (a.args().size() != b.args().size()) return false;
    for (std::size_t i = 0; i < a.args().size(); ++i)
        if (!structurally_equal(a.args()[i], b.args()[i])) return false;
    return true;
}

// ---------------------------------------------------------------- printing

namespace {

const char* fn_name(Op op) {
    switch (op) {
        case Op::Sin: return "sin";
        case Op::Cos: return "cos";
        case Op::Exp: return "exp";
        case Op::Ln: return "ln";
        case Op::Sqrt: return "sqrt";
        default: return nullptr;
    }
}

int prec(const Expr& e) {
    switch (e.op()) {
        case Op::Add: return 1;
        case Op::Neg:
        case Op::Mul:
        case Op::Div: return 2;
        case Op::Pow: return 4;
        case Op::Const: return (e.value().is_integer() && !e.value().is_negative()) ? 5 : 2;
        default: return 5;
    }
}

void print(const Expr& e, const std::vector<std::string>& names, std::ostream& os);

void print_wrapped(const Expr& e, bool wrap, const std::vector<std::string>& names, std::ostream& os) {
    if (wrap) os << '(';
    print(e, names, os);
    if (wrap) os << ')';
}

void print(const Expr& e, const std::vector<std::string>& names, std::ostream& os) {
    const auto& a = e.args();
    switch (e.op()) {
        case Op::Const: os << e.value().str(); return;
        case Op::Var:
            if (e.var_index() < static_cast<int>(names.size())) os << names[e.var_index()];
            else os << "x" << e.var_index();
            return;
        case Op::Add:
            for (std::size_t i = 0; i < a.size(); ++i) {
                const Expr& t = a[i];
                if (i == 0) {
                    print(t, names, os);
                } else if (t.op() == Op::Neg) {
                    os << " - ";
                    print_wrapped(t.args()[0], prec(t.args()[0]) < 2, names, os);
                } else if (t.is_const() && t.value().is_negative()) {
                    os << " - " << (-t.value()).str();
                } else if (t.op() == Op::Mul && t.args()[0].is_const() && t.args()[0].value().is_negative()) {
                    os << " - ";
                    print(-t, names, os);
                } else {
                    os << " + ";
                    print(t, names, os);
                }
            }
            return;
        case Op::Mul:
            for (std::size_t i = 0; i < a.size(); ++i) {
                if (i > 0) os << '*';
                if (i == 0 && a[i].is_const()) os << a[i].value().str();
                else print_wrapped(a[i], prec(a[i]) <= 2, names, os);
            }
            return;
        case Op::Neg:
            os << '-';
            print_wrapped(a[0], prec(a[0]) < 2, names, os);
            return;
        case Op::Div:
            print_wrapped(a[0], prec(a[0]) < 2, names, os);
            os << '/';
            print_wrapped(a[1], prec(a[1]) <= 2, names, os);
            return;
        case Op::Pow:
            print_wrapped(a[0], prec(a[0]) < 5, names, os);
            if (e.exponent() < 0) os << "^(" << e.exponent() << ')';
            else os << '^' << e.exponent();
            return;
        default:
            os << fn_name(e.op()) << '(';
            print(a[0], names, os);
            os << ')';
            return;
    }
}

}  // namespace

std::string to_string(const Expr& e, const std::vector<std::string>& names) {
    std::ostringstream os;
    print(e, names, os);
    return os.str();
}

// ---------------------------------------------------------------- parsing

namespace {

class Parser {
public:
    Parser(std::string_view s, const std::vector<std::string>& names) : s_(s), names_(names) {}

    Expr run() {
        Expr e = expr();
        skip();
        if (pos_ != s_.size()) fail("unexpected character '" + std::string(1, s_[pos_]) + "'");
        return e;
    }

private:
    std::string_view s_;
    const std::vector<std::string>& names_;
    std::size_t pos_ = 0;

    [[noreturn]] void fail(const std::string& msg) const { throw ParseError("syntax error: " + msg, pos_); }

    void skip() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }
    bool accept(char c) {
        skip();
        if (pos_ < s_.size() && s_[pos_] == c) { ++pos_; return true; }
        return false;
    }
    void expect(char c) {
        if (!accept(c)) {
            if (pos_ >= s_.size()) fail(std::string("expected '") + c + "' before end of input");
            fail(std::string("expected '") + c + "'");
        }
    }

    Expr expr() {
        std::vector<Expr> terms{term()};
        for (;;) {
            if (accept('+')) terms.push_back(term());
            else if (accept('-')) terms.push_back(-term());
            else break;
        }
        return make_sum(std::move(terms));
    }

    Expr term() {
        Expr e = unary();
        for (;;) {
            if (accept('*')) {
                e = e * unary();
            } else if (accept('/')) {
                e = e / unary();
            } else {
                break;
            }
        }
        return e;
    }

    Expr unary() {
        if (accept('-')) return -unary();
        if (accept('+')) return unary();
        return power();
    }

    Expr power() {
        Expr base = atom();
        if (accept('^')) {
            std::size_t at = pos_;
            Expr k = unary();
            if (!k.is_const() || !k.value().is_integer() || k.value().num() > 1000000 || k.value().num() < -1000000) {
                pos_ = at;
                fail("exponent must be an integer constant");
            }
            return pow(base, static_cast<int>(k.value().num()));
        }
        return base;
    }

    Expr atom() {
        skip();
        if (pos_ >= s_.size()) fail("unexpected end of input");
        char c = s_[pos_];
        if (c == '(') {
            ++pos_;
            Expr e = expr();
            expect(')');
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t start = pos_;
            while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
            std::string id(s_.substr(start, pos_ - start));
            static const std::pair<const char*, Op> fns[] = {
                {"sin", Op::Sin}, {"cos", Op::Cos}, {"exp", Op::Exp}, {"ln", Op::Ln}, {"sqrt", Op::Sqrt}};
            for (const auto& [name, op] : fns) {
                if (id == name) {
                    expect('(');
                    Expr arg = expr();
                    expect(')');
                    return Expr::apply(op, arg);
                }
            }
            for (std::size_t i = 0; i < names_.size(); ++i)
                if (names_[i] == id) return Expr::var(static_cast<int>(i));
            pos_ = start;
            fail("undeclared variable '" + id + "'");
        }
        fail("unexpected character '" + std::string(1, c) + "'");
    }

    Expr number() {
        std::size_t start = pos_;
        while (pos_ < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.')) ++pos_;
        if (pos_ < s_.size() && (s_[pos_] == 'e' || s_[pos_] == 'E')) {
            std::size_t q = pos_ + 1;
            if (q < s_.size() && (s_[q] == '+' || s_[q] == '-')) ++q;
            if (q < s_.size() && std::isdigit(static_cast<unsigned char>(s_[q]))) {
                pos_ = q;
                while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
            }
        }
        try {
            return Expr(Rational::from_decimal(std::string(s_.substr(start, pos_ - start))));
        } catch (const std::exception& ex) {
            pos_ = start;
            fail(std::string("bad number: ") + ex.what());
        }
    }
};

}  // namespace

Expr parse(std::string_view text, const std::vector<std::string>& names) { return Parser(text, names).run(); }

Expr parse(std::string_view text, const Chart& chart) { return parse(text, chart.names()); }

Expr differentiate(const Expr& e, const std::string& var, const std::vector<std::string>& names) {
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == var) return e.diff(static_cast<int>(i));
    throw std::invalid_argument("differentiate: undeclared variable '" + var + "'");
}

// ---------------------------------------------------------------- evaluation

namespace {

double eval_rec(const Expr& e, std::span<const double> x, std::vector<int>& path,
                const std::vector<std::string>* names) {
    auto fail = [&](const std::string& what) -> double {
        std::string p;
        for (int i : path) p += "/" + std::to_string(i);
        if (p.empty()) p = "/";
        std::string sub = to_string(e, names ? *names : std::vector<std::string>{});
        throw EvalError("domain violation: " + what + " in '" + sub + "' at path " + p, p);
    };
    auto child = [&](std::size_t i) {
        path.push_back(static_cast<int>(i));
        double v = eval_rec(e.args()[i], x, path, names);
        path.pop_back();
        return v;
    };
    const auto& a = e.args();
    switch (e.op()) {
        case Op::Const: return e.value().to_double();
        case Op::Var:
            if (e.var_index() >= static_cast<int>(x.size())) fail("variable index outside point");
            return x[e.var_index()];
        case Op::Add: {
            double s = 0;
            for (std::size_t i = 0; i < a.size(); ++i) s += child(i);
            return s;
        }
        case Op::Mul: {
            double s = 1;
            for (std::size_t i = 0; i < a.size(); ++i) s *= child(i);
            return s;
        }
        case Op::Neg: return -child(0);
        case Op::Div: {
            double n = child(0), d = child(1);
            if (d == 0.0) fail("division by zero");
            return n / d;
        }
        case Op::Pow: {
            double b = child(0);
            if (b == 0.0 && e.exponent() < 0) fail("division by zero");
            double r = std::pow(b, e.exponent());
            if (!std::isfinite(r)) fail("overflow");
            return r;
        }
        case Op::Sin: return std::sin(child(0));
        case Op::Cos: return std::cos(child(0));
        case Op::Exp: {
            double r = std::exp(child(0));
            if (!std::isfinite(r)) fail("overflow");
            return r;
        }
        case Op::Ln: {
            double v = child(0);
            if (!(v > 0.0)) fail("ln of non-positive value");
            return std::log(v);
        }
        case Op::Sqrt: {
            double v = child(0);
            if (!(v >= 0.0)) fail("sqrt of negative value");
            return std::sqrt(v);
        }
    }
    return 0.0;
}

void compile_rec(const Expr& e, std::vector<std::pair<Op, std::pair<int, double>>>& out, int& depth, int& maxd) {
    switch (e.op()) {
        case Op::Const:
            out.push_back({Op::Const, {0, e.value().to_double()}});
            maxd = std::max(maxd, ++depth);
            return;
        case Op::Var:
            out.push_back({Op::Var, {e.var_index(), 0.0}});
            maxd = std::max(maxd, ++depth);
            return;
        default: break;
    }
    for (const auto& s : e.args()) compile_rec(s, out, depth, maxd);
    int arity = static_cast<int>(e.args().size());
    out.push_back({e.op(), {e.op() == Op::Pow ? e.exponent() : arity, 0.0}});
    depth -= arity - 1;
}

}  // namespace

double evaluate(const Expr& e, std::span<const double> x, const std::vector<std::string>* names) {
    std::vector<int> path;
    double v = eval_rec(e, x, path, names);
    if (!std::isfinite(v)) throw EvalError("domain violation: non-finite value", "/");
    return v;
}

CompiledExpr::CompiledExpr(const Expr& e) : src_(e) {
    std::vector<std::pair<Op, std::pair<int, double>>> raw;
    int depth = 0, maxd = 0;
    compile_rec(e, raw, depth, maxd);
    depth_ = maxd;
    code_.reserve(raw.size());
    for (const auto& [op, r] : raw) code_.push_back({op, r.first, r.second});
}

double CompiledExpr::operator()(const double* x) const {
    if (code_.empty()) return 0.0;
    constexpr int kLocal = 64;
    double local[kLocal];
    std::vector<double> heap;
    double* st = local;
    if (depth_ > kLocal) {
        heap.resize(depth_);
        st = heap.data();
    }
    int sp = 0;
    bool bad = false;
    for (const Instr& in : code_) {
        switch (in.op) {
            case Op::Const: st[sp++] = in.c; break;
            case Op::Var: st[sp++] = x[in.arg]; break;
            case Op::Add: {
                double s = 0;
                for (int i = sp - in.arg; i < sp; ++i) s += st[i];
                sp -= in.arg;
                st[sp++] = s;
                break;
            }
            case Op::Mul: {
                double s = 1;
                for (int i = sp - in.arg; i < sp; ++i) s *= st[i];
                sp -= in.arg;
                st[sp++] = s;
                break;
            }
            case Op::Neg: st[sp - 1] = -st[sp - 1]; break;
            case Op::Div:
                if (st[sp - 1] == 0.0) bad = true;
                st[sp - 2] /= st[sp - 1];
                --sp;
                break;
            case Op::Pow: {
                double b = st[sp - 1];
                int k = in.arg;
                if (k == 2) st[sp - 1] = b * b;
                else if (k == 3) st[sp - 1] = b * b * b;
                else {
                    if (b == 0.0 && k < 0) bad = true;
                    st[sp - 1] = std::pow(b, k);
                }
                break;
            }
            case Op::Sin: st[sp - 1] = std::sin(st[sp - 1]); break;
            case Op::Cos: st[sp - 1] = std::cos(st[sp - 1]); break;
            case Op::Exp: st[sp - 1] = std::exp(st[sp - 1]); break;
            case Op::Ln:
                if (!(st[sp - 1] > 0.0)) bad = true;
                st[sp - 1] = std::log(st[sp - 1]);
                break;
            case Op::Sqrt:
                if (!(st[sp - 1] >= 0.0)) bad = true;
                st[sp - 1] = std::sqrt(st[sp - 1]);
                break;
        }
    }
    double v = st[0];
    if (bad || !std::isfinite(v)) {
        int n = src_.max_var() + 1;
        evaluate(src_, std::span<const double>(x, static_cast<std::size_t>(n)));
        throw EvalError("domain violation: non-finite value", "/");
    }
    return v;
}

}  // namespace flatform
