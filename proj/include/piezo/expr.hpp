#ifndef PIEZO_EXPR_HPP
#define PIEZO_EXPR_HPP

#include <string>
#include <vector>

namespace piezo {

// Closed-form coefficient expression in the plane variables x, y
// (r = sqrt(x^2+y^2) is predefined). Supports + - * / ^, parentheses,
// unary minus, the constants pi and e, and the functions
// sin cos tan exp log sqrt abs.
class Expr {
public:
    Expr() = default;
    static Expr parse(const std::string& text);

    double eval(double x, double y) const;
    const std::string& text() const { return text_; }
    bool is_constant() const { return constant_; }

private:
    enum class Op : int {
        PushConst, PushX, PushY, PushR,
        Add, Sub, Mul, Div, Pow, Neg,
        Sin, Cos, Tan, Exp, Log, Sqrt, Abs
    };
    struct Instr {
        Op op;
        double value = 0.0;
    };
    std::vector<Instr> program_;
    std::string text_;
    bool constant_ = false;
};

} // namespace piezo

#endif
