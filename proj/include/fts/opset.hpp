#pragma once

#include <string>
#include <vector>

namespace fts {

// Strict mode computes the textbook function and may emit NaN/inf;
// guarded mode substitutes finite fallbacks at the singular points.
enum class EvalMode { Strict, Guarded };

struct Operation {
    std::string name;
    int arity;                // 1 or 2
    bool column_statistical;  // operates on the whole column, not elementwise
};

// The fixed set of 16 operations (12 unary, 4 binary).
const std::vector<Operation>& operation_set();
int operation_count();

// Returns -1 when the name is not a known operation.
int operation_id(const std::string& name);
const Operation& operation(int op_id);

std::vector<double> apply_unary(int op_id, const std::vector<double>& col, EvalMode mode);
std::vector<double> apply_binary(int op_id, const std::vector<double>& a,
                                 const std::vector<double>& b, EvalMode mode);

}  // namespace fts
