#include "feller/expression.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <vector>

namespace feller {

struct Expression::Node {
    enum class Op { number, var_x, var_y, var_r, add, sub, mul, div, pow, neg, exp, log, sqrt, abs };
    Op op = Op::number;
    double value = 0.0;
    std::shared_ptr<const Node> lhs, rhs;

    double eval(const Point& p) const {
        switch (op) {
            case Op::number: return value;
            case Op::var_x: return p[0];
            case Op::var_y: return p[1];
            case Op::var_r: return p.norm();
            case Op::add: return lhs->eval(p) + rhs->eval(p);
            case Op::sub: return lhs->eval(p) - rhs->eval(p);
            case Op::mul: return lhs->eval(p) * rhs->eval(p);
            case Op::div: return lhs->eval(p) / rhs->eval(p);
            case Op::pow: return std::pow(lhs->eval(p), rhs->eval(p));
            case Op::neg: return -lhs->eval(p);
            case Op::exp: return std::exp(lhs->eval(p));
            case Op::log: return std::log(lhs->eval(p));
            case Op::sqrt: return std::sqrt(lhs->eval(p));
            case Op::abs: return std::abs(lhs->eval(p));
        }
        return 0.0;
    }
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;
using Op = Expression::Node::Op;

NodePtr make(Op op, NodePtr lhs = nullptr, NodePtr rhs = nullptr, double value = 0.0) {
    auto n = std::make_shared<Expression::Node>();
    n->op = op;
    n->lhs = std::move(lhs);
    n->rhs = std::move(rhs);
    n->value = value;
    return n;
}

// expr  := term (('+'|'-') term)*
// term  := unary (('*'|'/') unary)*
// unary := '-' unary | power
// power := primary ('^' unary)?
class Parser {
public:
    explicit Parser(std::string_view s) : s_(s) {}

    NodePtr parse() {
        NodePtr e = expr();
        skip();
        if (pos_ != s_.size()) fail("unexpected trailing input");
        return e;
    }

private:
    [[noreturn]] void fail(const std::string& what) const {
        throw std::invalid_argument("expression '" + std::string(s_) + "': " + what +
                                    " at offset " + std::to_string(pos_));
    }
    void skip() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }
    bool accept(char c) {
        skip();
        if (pos_ < s_.size() && s_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    NodePtr expr() {
        NodePtr lhs = term();
        for (;;) {
            if (accept('+')) lhs = make(Op::add, lhs, term());
            else if (accept('-')) lhs = make(Op::sub, lhs, term());
            else return lhs;
        }
    }
    NodePtr term() {
        NodePtr lhs = unary();
        for (;;) {
            if (accept('*')) lhs = make(Op::mul, lhs, unary());
            else if (accept('/')) lhs = make(Op::div, lhs, unary());
            else return lhs;
        }
    }
    NodePtr unary() {
        if (accept('-')) return make(Op::neg, unary());
        if (accept('+')) return unary();
        return power();
    }
    NodePtr power() {
        NodePtr base = primary();
        if (accept('^')) return make(Op::pow, base, unary());
        return base;
    }
    NodePtr primary() {
        skip();
        if (pos_ >= s_.size()) fail("unexpected end of input");
        if (accept('(')) {
            NodePtr e = expr();
            if (!accept(')')) fail("expected ')'");
            return e;
        }
        const char c = s_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            const std::string rest(s_.substr(pos_));
            char* end = nullptr;
            const double v = std::strtod(rest.c_str(), &end);
            if (end == rest.c_str()) fail("bad number");
            pos_ += static_cast<std::size_t>(end - rest.c_str());
            return make(Op::number, nullptr, nullptr, v);
        }
        if (std::isalpha(static_cast<unsigned char>(c))) {
            std::size_t start = pos_;
            while (pos_ < s_.size() && std::isalnum(static_cast<unsigned char>(s_[pos_]))) ++pos_;
            const std::string_view name = s_.substr(start, pos_ - start);
            if (name == "x") return make(Op::var_x);
            if (name == "y") return make(Op::var_y);
            if (name == "r") return make(Op::var_r);
            Op fn;
            if (name == "exp") fn = Op::exp;
            else if (name == "log") fn = Op::log;
            else if (name == "sqrt") fn = Op::sqrt;
            else if (name == "abs") fn = Op::abs;
            else fail("unknown identifier '" + std::string(name) + "'");
            if (!accept('(')) fail("expected '(' after function name");
            NodePtr arg = expr();
            if (!accept(')')) fail("expected ')'");
            return make(fn, arg);
        }
        fail(std::string("unexpected character '") + c + "'");
    }

    std::string_view s_;
    std::size_t pos_ = 0;
};

}  // namespace

Expression Expression::parse(std::string_view text) {
    Expression e;
    e.text_ = std::string(text);
    e.root_ = Parser(text).parse();
    return e;
}

double Expression::operator()(const Point& x) const {
    return root_->eval(x);
}

}  // namespace feller
