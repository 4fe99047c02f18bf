#include "fts/opset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace fts {

namespace {

constexpr double kEps = 1e-10;
constexpr double kGuardClamp = 1e100;

double guard_finite(double x) {
    if (std::isnan(x)) return 0.0;
    if (x > kGuardClamp) return kGuardClamp;
    if (x < -kGuardClamp) return -kGuardClamp;
    return x;
}

std::vector<double> minmax_scale(const std::vector<double>& col, EvalMode mode) {
    double lo = *std::min_element(col.begin(), col.end());
    double hi = *std::max_element(col.begin(), col.end());
    std::vector<double> out(col.size());
    if (lo == hi) {
        // Guarded: a constant column maps to all zeros. Strict keeps 0/0.
        for (size_t i = 0; i < col.size(); ++i)
            out[i] = mode == EvalMode::Guarded ? 0.0 : (col[i] - lo) / (hi - lo);
        return out;
    }
    for (size_t i = 0; i < col.size(); ++i) out[i] = (col[i] - lo) / (hi - lo);
    return out;
}

// Empirical CDF position: average rank / (n-1), ties averaged; constant -> 0.5.
std::vector<double> quantile_transform(const std::vector<double>& col) {
    size_t n = col.size();
    std::vector<double> out(n, 0.5);
    if (n < 2) return out;
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return col[a] < col[b]; });
    if (col[order.front()] == col[order.back()]) return out;
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && col[order[j + 1]] == col[order[i]]) ++j;
        double avg_rank = 0.5 * static_cast<double>(i + j);
        for (size_t k = i; k <= j; ++k)
            out[order[k]] = avg_rank / static_cast<double>(n - 1);
        i = j + 1;
    }
    return out;
}

}  // namespace

const std::vector<Operation>& operation_set() {
    static const std::vector<Operation> ops = {
        {"sqrt", 1, false},     {"square", 1, false},   {"cos", 1, false},
        {"sin", 1, false},      {"tan", 1, false},      {"exp", 1, false},
        {"cube", 1, false},     {"log", 1, false},      {"reciprocal", 1, false},
        {"quantile", 1, true},  {"minmax", 1, true},    {"sigmoid", 1, false},
        {"plus", 2, false},     {"subtract", 2, false}, {"multiply", 2, false},
        {"divide", 2, false},
    };
    return ops;
}

int operation_count() { return static_cast<int>(operation_set().size()); }

int operation_id(const std::string& name) {
    const auto& ops = operation_set();
    for (size_t i = 0; i < ops.size(); ++i)
        if (ops[i].name == name) return static_cast<int>(i);
    return -1;
}

const Operation& operation(int op_id) {
    if (op_id < 0 || op_id >= operation_count())
        throw std::out_of_range("unknown operation id " + std::to_string(op_id));
    return operation_set()[static_cast<size_t>(op_id)];
}

std::vector<double> apply_unary(int op_id, const std::vector<double>& col, EvalMode mode) {
    const Operation& op = operation(op_id);
    if (op.arity != 1) throw std::invalid_argument(op.name + " is not unary");
    if (col.empty()) throw std::invalid_argument("empty column");

    if (op.name == "minmax") return minmax_scale(col, mode);
    if (op.name == "quantile") return quantile_transform(col);

    bool guarded = mode == EvalMode::Guarded;
    std::vector<double> out(col.size());
    for (size_t i = 0; i < col.size(); ++i) {
        double x = col[i];
        double y;
        if (op.name == "sqrt") {
            y = guarded ? std::sqrt(std::fabs(x)) : std::sqrt(x);
        } else if (op.name == "square") {
            y = x * x;
        } else if (op.name == "cos") {
            y = std::cos(x);
        } else if (op.name == "sin") {
            y = std::sin(x);
        } else if (op.name == "tan") {
            y = std::tan(x);
        } else if (op.name == "exp") {
            y = std::exp(x);
        } else if (op.name == "cube") {
            y = x * x * x;
        } else if (op.name == "log") {
            y = guarded ? std::log(std::fabs(x) + kEps) : std::log(x);
        } else if (op.name == "reciprocal") {
            y = guarded ? 1.0 / (x + kEps * (x < 0 ? -1.0 : 1.0)) : 1.0 / x;
        } else if (op.name == "sigmoid") {
            y = 1.0 / (1.0 + std::exp(-x));
        } else {
            throw std::logic_error("unhandled unary " + op.name);
        }
        out[i] = guarded ? guard_finite(y) : y;
    }
    return out;
}

std::vector<double> apply_binary(int op_id, const std::vector<double>& a,
                                 const std::vector<double>& b, EvalMode mode) {
    const Operation& op = operation(op_id);
    if (op.arity != 2) throw std::invalid_argument(op.name + " is not binary");
    if (a.size() != b.size()) throw std::invalid_argument("column length mismatch");
    if (a.empty()) throw std::invalid_argument("empty column");

    bool guarded = mode == EvalMode::Guarded;
    std::vector<double> out(a.size());
    for (size_t i = 0; i < a.size(); ++i) {
        double y;
        if (op.name == "plus") {
            y = a[i] + b[i];
        } else if (op.name == "subtract") {
            y = a[i] - b[i];
        } else if (op.name == "multiply") {
            y = a[i] * b[i];
        } else if (op.name == "divide") {
            double den = b[i];
            if (guarded && den == 0.0) den = kEps;
            y = a[i] / den;
        } else {
            throw std::logic_error("unhandled binary " + op.name);
        }
        out[i] = guarded ? guard_finite(y) : y;
    }
    return out;
}

}  // namespace fts
