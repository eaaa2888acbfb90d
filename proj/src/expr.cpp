#include "piezo/expr.hpp"
#include "piezo/errors.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>

namespace piezo {

namespace {

struct Parser {
    const std::string& s;
    size_t pos = 0;
    std::vector<Expr>* unused = nullptr;

    explicit Parser(const std::string& str) : s(str) {}

    void skip_ws() {
        while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    }
    bool eof() {
        skip_ws();
        return pos >= s.size();
    }
    char peek() {
        skip_ws();
        return pos < s.size() ? s[pos] : '\0';
    }
    bool consume(char c) {
        skip_ws();
        if (pos < s.size() && s[pos] == c) {
            ++pos;
            return true;
        }
        return false;
    }
    [[noreturn]] void fail(const std::string& msg) {
        throw ConfigError("expression parse error at position " + std::to_string(pos) +
                          " in \"" + s + "\": " + msg);
    }
};

} // namespace

// Recursive-descent grammar:
//   expr   := term (('+'|'-') term)*
//   term   := unary (('*'|'/') unary)*
//   unary  := '-' unary | power           (so -x^2 == -(x^2))
//   power  := primary ('^' unary)?        (right associative)
//   primary:= number | ident | ident '(' expr ')' | '(' expr ')'
struct ExprBuilder {
    using Instr = std::vector<std::pair<int, double>>;
    Parser p;
    std::vector<std::pair<int, double>> code; // (op, value)
    bool uses_xy = false;

    explicit ExprBuilder(const std::string& s) : p(s) {}

    void emit(int op, double v = 0.0) { code.emplace_back(op, v); }

    void parse_expr() {
        parse_term();
        while (true) {
            if (p.consume('+')) {
                parse_term();
                emit(4);
            } else if (p.consume('-')) {
                parse_term();
                emit(5);
            } else
                break;
        }
    }
    void parse_term() {
        parse_unary();
        while (true) {
            if (p.consume('*')) {
                parse_unary();
                emit(6);
            } else if (p.consume('/')) {
                parse_unary();
                emit(7);
            } else
                break;
        }
    }
    void parse_unary() {
        if (p.consume('-')) {
            parse_unary();
            emit(9);
        } else
            parse_power();
    }
    void parse_power() {
        parse_primary();
        if (p.consume('^')) {
            parse_unary();
            emit(8);
        }
    }
    void parse_primary() {
        p.skip_ws();
        if (p.pos >= p.s.size()) p.fail("unexpected end of input");
        char c = p.s[p.pos];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            char* end = nullptr;
            double v = std::strtod(p.s.c_str() + p.pos, &end);
            if (end == p.s.c_str() + p.pos) p.fail("bad number");
            p.pos = static_cast<size_t>(end - p.s.c_str());
            emit(0, v);
            return;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            size_t start = p.pos;
            while (p.pos < p.s.size() &&
                   (std::isalnum(static_cast<unsigned char>(p.s[p.pos])) || p.s[p.pos] == '_'))
                ++p.pos;
            std::string name = p.s.substr(start, p.pos - start);
            if (name == "x") {
                emit(1);
                uses_xy = true;
                return;
            }
            if (name == "y") {
                emit(2);
                uses_xy = true;
                return;
            }
            if (name == "r") {
                emit(3);
                uses_xy = true;
                return;
            }
            if (name == "pi") {
                emit(0, M_PI);
                return;
            }
            if (name == "e") {
                emit(0, M_E);
                return;
            }
            int fn = -1;
            if (name == "sin") fn = 10;
            else if (name == "cos") fn = 11;
            else if (name == "tan") fn = 12;
            else if (name == "exp") fn = 13;
            else if (name == "log") fn = 14;
            else if (name == "sqrt") fn = 15;
            else if (name == "abs") fn = 16;
            if (fn < 0) p.fail("unknown identifier '" + name + "'");
            if (!p.consume('(')) p.fail("expected '(' after function name");
            parse_expr();
            if (!p.consume(')')) p.fail("expected ')'");
            emit(fn);
            return;
        }
        if (p.consume('(')) {
            parse_expr();
            if (!p.consume(')')) p.fail("expected ')'");
            return;
        }
        p.fail(std::string("unexpected character '") + c + "'");
    }
};

Expr Expr::parse(const std::string& text) {
    ExprBuilder b(text);
    b.parse_expr();
    if (!b.p.eof()) b.p.fail("trailing input");
    Expr e;
    e.text_ = text;
    e.constant_ = !b.uses_xy;
    e.program_.reserve(b.code.size());
    for (auto& [op, v] : b.code) e.program_.push_back({static_cast<Op>(op), v});
    return e;
}

double Expr::eval(double x, double y) const {
    double stack[64];
    int top = -1;
    for (const Instr& in : program_) {
        switch (in.op) {
        case Op::PushConst: stack[++top] = in.value; break;
        case Op::PushX: stack[++top] = x; break;
        case Op::PushY: stack[++top] = y; break;
        case Op::PushR: stack[++top] = std::hypot(x, y); break;
        case Op::Add: stack[top - 1] += stack[top]; --top; break;
        case Op::Sub: stack[top - 1] -= stack[top]; --top; break;
        case Op::Mul: stack[top - 1] *= stack[top]; --top; break;
        case Op::Div: stack[top - 1] /= stack[top]; --top; break;
        case Op::Pow: stack[top - 1] = std::pow(stack[top - 1], stack[top]); --top; break;
        case Op::Neg: stack[top] = -stack[top]; break;
        case Op::Sin: stack[top] = std::sin(stack[top]); break;
        case Op::Cos: stack[top] = std::cos(stack[top]); break;
        case Op::Tan: stack[top] = std::tan(stack[top]); break;
        case Op::Exp: stack[top] = std::exp(stack[top]); break;
        case Op::Log: stack[top] = std::log(stack[top]); break;
        case Op::Sqrt: stack[top] = std::sqrt(stack[top]); break;
        case Op::Abs: stack[top] = std::fabs(stack[top]); break;
        }
    }
    return top >= 0 ? stack[top] : 0.0;
}

} // namespace piezo
