#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace fts {

enum class Task { Classification, Regression };

// Column-major tabular features plus a target vector. Immutable after load.
struct Dataset {
    std::vector<std::vector<double>> X;  // [n_features][n_samples]
    std::vector<double> y;
    Task task = Task::Regression;
    std::vector<std::string> feature_names;

    size_t n_samples() const { return y.size(); }
    size_t n_features() const { return X.size(); }
    int n_classes() const;
};

struct SplitDataset {
    Dataset train;
    Dataset test;
    uint64_t split_seed = 0;
};

// Numeric CSV with one header row; target defaults to the last column.
Dataset load_csv(const std::string& path, Task task, const std::string& target_column = "");

// Seeded shuffle, first 80% of rows to train (floor), rest to test.
SplitDataset split(const Dataset& d, uint64_t seed);

// 7 descriptive statistics (count, std, min, max, q25, q50, q75) per column,
// then the same 7 over each statistic row; flattened row-major.
std::array<double, 49> describe(const std::vector<std::vector<double>>& X);
std::array<double, 49> describe_column(const std::vector<double>& col);

}  // namespace fts
