#include "fts/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace fts {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ',')) {
        // trim surrounding whitespace and a possible trailing \r
        size_t a = cell.find_first_not_of(" \t\r");
        size_t b = cell.find_last_not_of(" \t\r");
        cells.push_back(a == std::string::npos ? "" : cell.substr(a, b - a + 1));
    }
    return cells;
}

double stat_std(const std::vector<double>& v) {
    size_t n = v.size();
    if (n < 2) return 0.0;
    double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(n - 1));
}

// Linear interpolation between order statistics.
double stat_quantile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    double pos = q * static_cast<double>(v.size() - 1);
    size_t lo = static_cast<size_t>(std::floor(pos));
    size_t hi = static_cast<size_t>(std::ceil(pos));
    double frac = pos - static_cast<double>(lo);
    return v[lo] + frac * (v[hi] - v[lo]);
}

std::array<double, 7> seven_stats(const std::vector<double>& v) {
    return {static_cast<double>(v.size()),
            stat_std(v),
            *std::min_element(v.begin(), v.end()),
            *std::max_element(v.begin(), v.end()),
            stat_quantile(v, 0.25),
            stat_quantile(v, 0.50),
            stat_quantile(v, 0.75)};
}

}  // namespace

int Dataset::n_classes() const {
    if (task != Task::Classification) return 0;
    int max_label = -1;
    for (double v : y) max_label = std::max(max_label, static_cast<int>(v));
    return max_label + 1;
}

Dataset load_csv(const std::string& path, Task task, const std::string& target_column) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dataset file: " + path);

    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty dataset file: " + path);
    std::vector<std::string> header = split_line(line);
    if (header.size() < 2) throw std::runtime_error("dataset needs >=2 columns: " + path);

    size_t target_idx = header.size() - 1;
    if (!target_column.empty()) {
        auto it = std::find(header.begin(), header.end(), target_column);
        if (it == header.end())
            throw std::runtime_error("target column `" + target_column + "` not found");
        target_idx = static_cast<size_t>(it - header.begin());
    }

    Dataset d;
    d.task = task;
    for (size_t i = 0; i < header.size(); ++i)
        if (i != target_idx) d.feature_names.push_back(header[i]);
    d.X.resize(header.size() - 1);

    size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::vector<std::string> cells = split_line(line);
        if (cells.size() != header.size())
            throw std::runtime_error("row " + std::to_string(row) + ": expected " +
                                     std::to_string(header.size()) + " cells, got " +
                                     std::to_string(cells.size()));
        size_t fi = 0;
        for (size_t i = 0; i < cells.size(); ++i) {
            char* end = nullptr;
            double v = std::strtod(cells[i].c_str(), &end);
            if (end == cells[i].c_str() || *end != '\0' || !std::isfinite(v))
                throw std::runtime_error("row " + std::to_string(row) + ": non-numeric cell `" +
                                         cells[i] + "`");
            if (i == target_idx)
                d.y.push_back(v);
            else
                d.X[fi++].push_back(v);
        }
    }
    if (d.n_samples() < 10)
        throw std::runtime_error("dataset too small: " + std::to_string(d.n_samples()) +
                                 " samples");

    if (task == Task::Classification) {
        // Remap labels onto a contiguous 0-based set, ordered by value.
        std::map<double, int> remap;
        for (double v : d.y) remap.emplace(v, 0);
        int next = 0;
        for (auto& [_, id] : remap) id = next++;
        for (double& v : d.y) v = remap[v];
    }
    return d;
}

SplitDataset split(const Dataset& d, uint64_t seed) {
    size_t n = d.n_samples();
    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);

    size_t n_train = static_cast<size_t>(0.8 * static_cast<double>(n));
    SplitDataset s;
    s.split_seed = seed;
    for (Dataset* part : {&s.train, &s.test}) {
        part->task = d.task;
        part->feature_names = d.feature_names;
        part->X.resize(d.n_features());
    }
    for (size_t i = 0; i < n; ++i) {
        Dataset& part = i < n_train ? s.train : s.test;
        part.y.push_back(d.y[idx[i]]);
        for (size_t f = 0; f < d.n_features(); ++f) part.X[f].push_back(d.X[f][idx[i]]);
    }
    return s;
}

std::array<double, 49> describe(const std::vector<std::vector<double>>& X) {
    if (X.empty() || X[0].empty()) throw std::invalid_argument("describe: empty matrix");
    size_t n_features = X.size();
    // 7 x n_features: statistic rows over columns.
    std::vector<std::vector<double>> stat_rows(7, std::vector<double>(n_features));
    for (size_t f = 0; f < n_features; ++f) {
        auto s = seven_stats(X[f]);
        for (size_t k = 0; k < 7; ++k) stat_rows[k][f] = s[k];
    }
    std::array<double, 49> out{};
    for (size_t k = 0; k < 7; ++k) {
        auto s = seven_stats(stat_rows[k]);
        for (size_t j = 0; j < 7; ++j) out[k * 7 + j] = s[j];
    }
    return out;
}

std::array<double, 49> describe_column(const std::vector<double>& col) {
    return describe({col});
}

}  // namespace fts
