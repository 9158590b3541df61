#pragma once

#include "feller/common.hpp"

#include <memory>
#include <string>
#include <string_view>

namespace feller {

/// Closed-form scalar expression in the coordinates `x`, `y` and the radius
/// `r` = |x|. Supports + - * / ^, unary minus, parentheses, numeric literals
/// and the functions exp, log, sqrt, abs.
///
///     auto a = Expression::parse("r^(-1.5)");
///     double v = a(Point(2.0, 0.0));
class Expression {
public:
    static Expression parse(std::string_view text);

    double operator()(const Point& x) const;
    const std::string& text() const noexcept { return text_; }

    struct Node;

private:
    std::string text_;
    std::shared_ptr<const Node> root_;
};

}  // namespace feller
