#include "fts/downstream.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <stdexcept>

namespace fts {

namespace {

using Matrix = std::vector<std::vector<double>>;

struct TreeNode {
    int feature = -1;  // -1: leaf
    double threshold = 0.0;
    int left = -1, right = -1;
    double value = 0.0;               // regression leaf
    std::vector<double> class_probs;  // classification leaf
};

struct Tree {
    std::vector<TreeNode> nodes;
};

struct Model {
    ModelKind kind = ModelKind::RandomForest;
    Task task = Task::Regression;
    int n_classes = 0;
    std::vector<Tree> trees;
    std::vector<double> ridge_w;
    double ridge_b = 0.0;
};

struct TreeBuilder {
    const Matrix& X;
    const std::vector<double>& y;
    Task task;
    int n_classes;
    const EvalConfig& cfg;
    std::mt19937_64 rng;
    Tree tree;

    int make_leaf(const std::vector<int>& idx) {
        TreeNode node;
        if (task == Task::Classification) {
            node.class_probs.assign(static_cast<size_t>(n_classes), 0.0);
            for (int i : idx) node.class_probs[static_cast<size_t>(y[i])] += 1.0;
            for (double& p : node.class_probs) p /= static_cast<double>(idx.size());
        } else {
            double s = 0.0;
            for (int i : idx) s += y[i];
            node.value = s / static_cast<double>(idx.size());
        }
        tree.nodes.push_back(std::move(node));
        return static_cast<int>(tree.nodes.size()) - 1;
    }

    std::vector<int> candidate_features() {
        int p = static_cast<int>(X.size());
        std::vector<int> feats(p);
        std::iota(feats.begin(), feats.end(), 0);
        if (!cfg.feature_subsample) return feats;
        int m = std::max(1, static_cast<int>(std::floor(std::sqrt(static_cast<double>(p)))));
        std::shuffle(feats.begin(), feats.end(), rng);
        feats.resize(static_cast<size_t>(m));
        std::sort(feats.begin(), feats.end());
        return feats;
    }

    double node_impurity(const std::vector<int>& idx) {
        double n = static_cast<double>(idx.size());
        if (task == Task::Classification) {
            std::vector<double> counts(static_cast<size_t>(n_classes), 0.0);
            for (int i : idx) counts[static_cast<size_t>(y[i])] += 1.0;
            double g = 1.0;
            for (double c : counts) g -= (c / n) * (c / n);
            return g * n;
        }
        double s = 0.0, ss = 0.0;
        for (int i : idx) {
            s += y[i];
            ss += y[i] * y[i];
        }
        return ss - s * s / n;
    }

    // Returns true and fills (feature, threshold) when a split reduces impurity.
    bool best_split(const std::vector<int>& idx, int& best_f, double& best_t) {
        size_t n = idx.size();
        size_t msl = static_cast<size_t>(cfg.min_samples_leaf);
        double parent = node_impurity(idx);
        double best = parent - 1e-12;
        bool found = false;

        std::vector<int> sorted;
        for (int f : candidate_features()) {
            sorted = idx;
            std::sort(sorted.begin(), sorted.end(), [&](int a, int b) {
                if (X[f][a] != X[f][b]) return X[f][a] < X[f][b];
                return a < b;
            });
            if (task == Task::Classification) {
                std::vector<double> left(static_cast<size_t>(n_classes), 0.0);
                std::vector<double> total(static_cast<size_t>(n_classes), 0.0);
                for (int i : sorted) total[static_cast<size_t>(y[i])] += 1.0;
                for (size_t k = 0; k + 1 < n; ++k) {
                    left[static_cast<size_t>(y[sorted[k]])] += 1.0;
                    if (X[f][sorted[k]] == X[f][sorted[k + 1]]) continue;
                    size_t nl = k + 1, nr = n - nl;
                    if (nl < msl || nr < msl) continue;
                    double gl = 1.0, gr = 1.0;
                    for (int c = 0; c < n_classes; ++c) {
                        double lc = left[c], rc = total[c] - left[c];
                        gl -= (lc / nl) * (lc / nl);
                        gr -= (rc / nr) * (rc / nr);
                    }
                    double score = gl * static_cast<double>(nl) + gr * static_cast<double>(nr);
                    if (score < best) {
                        best = score;
                        best_f = f;
                        best_t = 0.5 * (X[f][sorted[k]] + X[f][sorted[k + 1]]);
                        found = true;
                    }
                }
            } else {
                double ls = 0.0, lss = 0.0, ts = 0.0, tss = 0.0;
                for (int i : sorted) {
                    ts += y[i];
                    tss += y[i] * y[i];
                }
                for (size_t k = 0; k + 1 < n; ++k) {
                    ls += y[sorted[k]];
                    lss += y[sorted[k]] * y[sorted[k]];
                    if (X[f][sorted[k]] == X[f][sorted[k + 1]]) continue;
                    size_t nl = k + 1, nr = n - nl;
                    if (nl < msl || nr < msl) continue;
                    double rs = ts - ls, rss = tss - lss;
                    double score = (lss - ls * ls / static_cast<double>(nl)) +
                                   (rss - rs * rs / static_cast<double>(nr));
                    if (score < best) {
                        best = score;
                        best_f = f;
                        best_t = 0.5 * (X[f][sorted[k]] + X[f][sorted[k + 1]]);
                        found = true;
                    }
                }
            }
        }
        return found;
    }

    int build(const std::vector<int>& idx, int depth) {
        bool pure = true;
        for (size_t k = 1; k < idx.size(); ++k)
            if (y[idx[k]] != y[idx[0]]) {
                pure = false;
                break;
            }
        if (pure || depth >= cfg.max_depth ||
            idx.size() < 2 * static_cast<size_t>(cfg.min_samples_leaf))
            return make_leaf(idx);

        int f = -1;
        double t = 0.0;
        if (!best_split(idx, f, t)) return make_leaf(idx);

        std::vector<int> li, ri;
        for (int i : idx) (X[f][i] <= t ? li : ri).push_back(i);
        TreeNode node;
        node.feature = f;
        node.threshold = t;
        int self = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back(node);
        tree.nodes[self].left = build(li, depth + 1);
        tree.nodes[self].right = build(ri, depth + 1);
        return self;
    }
};

const TreeNode& tree_leaf(const Tree& tree, const Matrix& X, size_t sample) {
    int n = 0;
    while (tree.nodes[n].feature >= 0) {
        const TreeNode& node = tree.nodes[n];
        n = X[node.feature][sample] <= node.threshold ? node.left : node.right;
    }
    return tree.nodes[n];
}

// Unregularized-intercept ridge: center, solve (Xc'Xc + lambda I) w = Xc' yc.
void fit_ridge(const Matrix& X, const std::vector<double>& y, double lambda, Model& m) {
    size_t p = X.size(), n = y.size();
    std::vector<double> xm(p, 0.0);
    double ym = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
    for (size_t f = 0; f < p; ++f)
        xm[f] = std::accumulate(X[f].begin(), X[f].end(), 0.0) / static_cast<double>(n);

    std::vector<std::vector<double>> A(p, std::vector<double>(p + 1, 0.0));
    for (size_t a = 0; a < p; ++a) {
        for (size_t b = a; b < p; ++b) {
            double s = 0.0;
            for (size_t i = 0; i < n; ++i) s += (X[a][i] - xm[a]) * (X[b][i] - xm[b]);
            A[a][b] = A[b][a] = s;
        }
        A[a][a] += lambda;
        double s = 0.0;
        for (size_t i = 0; i < n; ++i) s += (X[a][i] - xm[a]) * (y[i] - ym);
        A[a][p] = s;
    }
    // Gaussian elimination with partial pivoting.
    for (size_t col = 0; col < p; ++col) {
        size_t piv = col;
        for (size_t r = col + 1; r < p; ++r)
            if (std::fabs(A[r][col]) > std::fabs(A[piv][col])) piv = r;
        std::swap(A[col], A[piv]);
        double d = A[col][col];
        if (std::fabs(d) < 1e-300) continue;
        for (size_t r = 0; r < p; ++r) {
            if (r == col) continue;
            double factor = A[r][col] / d;
            for (size_t c = col; c <= p; ++c) A[r][c] -= factor * A[col][c];
        }
    }
    m.ridge_w.assign(p, 0.0);
    for (size_t f = 0; f < p; ++f)
        if (std::fabs(A[f][f]) >= 1e-300) m.ridge_w[f] = A[f][p] / A[f][f];
    m.ridge_b = ym;
    for (size_t f = 0; f < p; ++f) m.ridge_b -= m.ridge_w[f] * xm[f];
}

Model fit_model(const Matrix& X, const std::vector<double>& y, Task task, const EvalConfig& cfg,
                uint64_t seed) {
    Model m;
    m.kind = cfg.model;
    m.task = task;
    if (task == Task::Classification) {
        int max_label = 0;
        for (double v : y) max_label = std::max(max_label, static_cast<int>(v));
        m.n_classes = max_label + 1;
    }
    if (cfg.model == ModelKind::Ridge) {
        if (task != Task::Regression)
            throw std::invalid_argument("ridge supports regression tasks only");
        fit_ridge(X, y, cfg.ridge_lambda, m);
        return m;
    }

    bool single = cfg.model == ModelKind::DecisionTree;
    int n_trees = single ? 1 : cfg.n_trees;
    std::mt19937_64 seeder(seed);
    for (int t = 0; t < n_trees; ++t) {
        uint64_t tree_seed = seeder();
        EvalConfig tree_cfg = cfg;
        if (single) {
            tree_cfg.bootstrap = false;
            tree_cfg.feature_subsample = false;
        }
        std::vector<int> idx;
        size_t n = y.size();
        if (tree_cfg.bootstrap) {
            std::mt19937_64 brng(tree_seed);
            std::uniform_int_distribution<size_t> pick(0, n - 1);
            idx.reserve(n);
            for (size_t i = 0; i < n; ++i) idx.push_back(static_cast<int>(pick(brng)));
        } else {
            idx.resize(n);
            std::iota(idx.begin(), idx.end(), 0);
        }
        TreeBuilder builder{X, y, task, m.n_classes, tree_cfg, std::mt19937_64(tree_seed ^ 0x9e3779b97f4a7c15ULL), {}};
        builder.build(idx, 0);
        m.trees.push_back(std::move(builder.tree));
    }
    return m;
}

std::vector<std::vector<double>> predict_probs(const Model& m, const Matrix& X) {
    size_t n = X.empty() ? 0 : X[0].size();
    std::vector<std::vector<double>> probs(
        static_cast<size_t>(m.n_classes), std::vector<double>(n, 0.0));
    for (size_t i = 0; i < n; ++i) {
        for (const Tree& t : m.trees) {
            const TreeNode& leaf = tree_leaf(t, X, i);
            for (int c = 0; c < m.n_classes; ++c) probs[c][i] += leaf.class_probs[c];
        }
        for (int c = 0; c < m.n_classes; ++c) probs[c][i] /= static_cast<double>(m.trees.size());
    }
    return probs;
}

std::vector<int> probs_to_labels(const std::vector<std::vector<double>>& probs) {
    size_t n = probs.empty() ? 0 : probs[0].size();
    std::vector<int> labels(n, 0);
    for (size_t i = 0; i < n; ++i) {
        double best = -1.0;
        for (size_t c = 0; c < probs.size(); ++c)
            if (probs[c][i] > best) {
                best = probs[c][i];
                labels[i] = static_cast<int>(c);
            }
    }
    return labels;
}

std::vector<double> predict_regression(const Model& m, const Matrix& X) {
    size_t n = X.empty() ? 0 : X[0].size();
    std::vector<double> out(n, 0.0);
    if (m.kind == ModelKind::Ridge) {
        for (size_t i = 0; i < n; ++i) {
            double v = m.ridge_b;
            for (size_t f = 0; f < m.ridge_w.size(); ++f) v += m.ridge_w[f] * X[f][i];
            out[i] = v;
        }
        return out;
    }
    for (size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (const Tree& t : m.trees) s += tree_leaf(t, X, i).value;
        out[i] = s / static_cast<double>(m.trees.size());
    }
    return out;
}

double score_fold(const Model& m, const Matrix& X_test, const std::vector<double>& y_test,
                  Metric metric) {
    if (m.task == Task::Classification) {
        auto probs = predict_probs(m, X_test);
        std::vector<int> yt(y_test.size());
        for (size_t i = 0; i < y_test.size(); ++i) yt[i] = static_cast<int>(y_test[i]);
        switch (metric) {
            case Metric::F1: return metric_f1(yt, probs_to_labels(probs));
            case Metric::Precision: return metric_precision(yt, probs_to_labels(probs));
            case Metric::Recall: return metric_recall(yt, probs_to_labels(probs));
            case Metric::RocAuc: return metric_roc_auc(yt, probs);
            default: throw std::invalid_argument("regression metric on classification task");
        }
    }
    auto pred = predict_regression(m, X_test);
    switch (metric) {
        case Metric::OneMinusRae: return metric_one_minus_rae(y_test, pred);
        case Metric::OneMinusMae: return metric_one_minus_mae(y_test, pred);
        case Metric::OneMinusMse: return metric_one_minus_mse(y_test, pred);
        case Metric::OneMinusRmse: return metric_one_minus_rmse(y_test, pred);
        default: throw std::invalid_argument("classification metric on regression task");
    }
}

void check_finite(const Matrix& X) {
    for (const auto& col : X)
        for (double v : col)
            if (!std::isfinite(v)) throw std::invalid_argument("non-finite feature value");
}

std::vector<std::vector<int>> make_folds(const std::vector<double>& y, Task task, int k,
                                         uint64_t seed) {
    std::vector<std::vector<int>> folds(static_cast<size_t>(k));
    std::mt19937_64 rng(seed);
    if (task == Task::Classification) {
        std::map<int, std::vector<int>> by_class;
        for (size_t i = 0; i < y.size(); ++i)
            by_class[static_cast<int>(y[i])].push_back(static_cast<int>(i));
        for (auto& [_, idx] : by_class) {
            std::shuffle(idx.begin(), idx.end(), rng);
            for (size_t j = 0; j < idx.size(); ++j) folds[j % k].push_back(idx[j]);
        }
    } else {
        std::vector<int> idx(y.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::shuffle(idx.begin(), idx.end(), rng);
        for (size_t j = 0; j < idx.size(); ++j) folds[j % k].push_back(idx[j]);
    }
    for (auto& f : folds) std::sort(f.begin(), f.end());
    return folds;
}

}  // namespace

std::string metric_name(Metric m) {
    switch (m) {
        case Metric::F1: return "f1";
        case Metric::Precision: return "precision";
        case Metric::Recall: return "recall";
        case Metric::RocAuc: return "rocauc";
        case Metric::OneMinusRae: return "one_minus_rae";
        case Metric::OneMinusMae: return "one_minus_mae";
        case Metric::OneMinusMse: return "one_minus_mse";
        case Metric::OneMinusRmse: return "one_minus_rmse";
    }
    throw std::logic_error("bad metric");
}

Metric metric_from_name(const std::string& name) {
    for (Metric m : {Metric::F1, Metric::Precision, Metric::Recall, Metric::RocAuc,
                     Metric::OneMinusRae, Metric::OneMinusMae, Metric::OneMinusMse,
                     Metric::OneMinusRmse})
        if (metric_name(m) == name) return m;
    throw std::invalid_argument("unknown metric `" + name + "`");
}

bool metric_for_classification(Metric m) {
    return m == Metric::F1 || m == Metric::Precision || m == Metric::Recall ||
           m == Metric::RocAuc;
}

std::string model_name(ModelKind m) {
    switch (m) {
        case ModelKind::RandomForest: return "random_forest";
        case ModelKind::DecisionTree: return "decision_tree";
        case ModelKind::Ridge: return "ridge";
    }
    throw std::logic_error("bad model kind");
}

ModelKind model_from_name(const std::string& name) {
    for (ModelKind m : {ModelKind::RandomForest, ModelKind::DecisionTree, ModelKind::Ridge})
        if (model_name(m) == name) return m;
    throw std::invalid_argument("unknown model `" + name + "`");
}

EvalConfig default_eval_config(Task task) {
    EvalConfig cfg;
    cfg.metric = task == Task::Classification ? Metric::F1 : Metric::OneMinusRae;
    return cfg;
}

Score train_eval(const std::vector<std::vector<double>>& X, const std::vector<double>& y,
                 Task task, const EvalConfig& cfg) {
    if (X.empty() || y.empty()) throw std::invalid_argument("empty training data");
    check_finite(X);
    if (metric_for_classification(cfg.metric) != (task == Task::Classification))
        throw std::invalid_argument("metric incompatible with task");
    if (task == Task::Classification) {
        int max_label = 0;
        for (double v : y) max_label = std::max(max_label, static_cast<int>(v));
        if (max_label < 1) throw std::invalid_argument("classification needs >=2 classes");
    }

    const int k = 5;
    auto folds = make_folds(y, task, k, cfg.cv_seed);
    std::mt19937_64 seeder(cfg.cv_seed ^ 0x5bf03635f0a5b1c3ULL);
    double total = 0.0;
    for (int fi = 0; fi < k; ++fi) {
        uint64_t fold_seed = seeder();
        std::vector<char> in_test(y.size(), 0);
        for (int i : folds[fi]) in_test[i] = 1;
        Matrix Xtr(X.size()), Xte(X.size());
        std::vector<double> ytr, yte;
        for (size_t i = 0; i < y.size(); ++i) {
            (in_test[i] ? yte : ytr).push_back(y[i]);
            for (size_t f = 0; f < X.size(); ++f) (in_test[i] ? Xte : Xtr)[f].push_back(X[f][i]);
        }
        Model m = fit_model(Xtr, ytr, task, cfg, fold_seed);
        total += score_fold(m, Xte, yte, cfg.metric);
    }
    return {total / k, cfg.metric};
}

Score holdout_eval(const std::vector<std::vector<double>>& X_train,
                   const std::vector<double>& y_train,
                   const std::vector<std::vector<double>>& X_test,
                   const std::vector<double>& y_test, Task task, const EvalConfig& cfg) {
    check_finite(X_train);
    check_finite(X_test);
    Model m = fit_model(X_train, y_train, task, cfg, cfg.cv_seed);
    return {score_fold(m, X_test, y_test, cfg.metric), cfg.metric};
}

namespace {

struct Confusion {
    double tp = 0, fp = 0, fn = 0;
};

std::map<int, Confusion> confusion_by_class(const std::vector<int>& y_true,
                                            const std::vector<int>& y_pred) {
    if (y_true.size() != y_pred.size()) throw std::invalid_argument("length mismatch");
    std::map<int, Confusion> conf;
    for (int c : y_true) conf.emplace(c, Confusion{});
    for (size_t i = 0; i < y_true.size(); ++i) {
        if (y_true[i] == y_pred[i]) {
            conf[y_true[i]].tp += 1;
        } else {
            conf[y_true[i]].fn += 1;
            if (conf.count(y_pred[i])) conf[y_pred[i]].fp += 1;
        }
    }
    return conf;
}

}  // namespace

double metric_precision(const std::vector<int>& y_true, const std::vector<int>& y_pred) {
    auto conf = confusion_by_class(y_true, y_pred);
    double total = 0.0;
    for (auto& [_, c] : conf)
        total += c.tp + c.fp > 0 ? c.tp / (c.tp + c.fp) : 0.0;
    return total / static_cast<double>(conf.size());
}

double metric_recall(const std::vector<int>& y_true, const std::vector<int>& y_pred) {
    auto conf = confusion_by_class(y_true, y_pred);
    double total = 0.0;
    for (auto& [_, c] : conf)
        total += c.tp + c.fn > 0 ? c.tp / (c.tp + c.fn) : 0.0;
    return total / static_cast<double>(conf.size());
}

double metric_f1(const std::vector<int>& y_true, const std::vector<int>& y_pred) {
    auto conf = confusion_by_class(y_true, y_pred);
    double total = 0.0;
    for (auto& [_, c] : conf) {
        double p = c.tp + c.fp > 0 ? c.tp / (c.tp + c.fp) : 0.0;
        double r = c.tp + c.fn > 0 ? c.tp / (c.tp + c.fn) : 0.0;
        total += p + r > 0 ? 2 * p * r / (p + r) : 0.0;
    }
    return total / static_cast<double>(conf.size());
}

double metric_roc_auc(const std::vector<int>& y_true,
                      const std::vector<std::vector<double>>& scores) {
    // Rank-based one-vs-rest AUC with tie correction, macro over classes that
    // have both positives and negatives.
    double total = 0.0;
    int counted = 0;
    for (size_t c = 0; c < scores.size(); ++c) {
        size_t n = y_true.size();
        if (scores[c].size() != n) throw std::invalid_argument("score length mismatch");
        size_t pos = 0;
        for (int t : y_true) pos += t == static_cast<int>(c);
        if (pos == 0 || pos == n) continue;
        std::vector<size_t> order(n);
        std::iota(order.begin(), order.end(), size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](size_t a, size_t b) { return scores[c][a] < scores[c][b]; });
        std::vector<double> rank(n);
        size_t i = 0;
        while (i < n) {
            size_t j = i;
            while (j + 1 < n && scores[c][order[j + 1]] == scores[c][order[i]]) ++j;
            double avg = 0.5 * static_cast<double>(i + j) + 1.0;
            for (size_t k2 = i; k2 <= j; ++k2) rank[order[k2]] = avg;
            i = j + 1;
        }
        double rank_sum = 0.0;
        for (size_t s = 0; s < n; ++s)
            if (y_true[s] == static_cast<int>(c)) rank_sum += rank[s];
        double np = static_cast<double>(pos), nn = static_cast<double>(n - pos);
        total += (rank_sum - np * (np + 1) / 2.0) / (np * nn);
        ++counted;
    }
    if (counted == 0) throw std::invalid_argument("AUC undefined: single-class y_true");
    return total / counted;
}

namespace {

void check_pair(const std::vector<double>& y_true, const std::vector<double>& y_pred) {
    if (y_true.size() != y_pred.size()) throw std::invalid_argument("length mismatch");
    if (y_true.size() < 2) throw std::invalid_argument("need n >= 2");
}

}  // namespace

double metric_one_minus_rae(const std::vector<double>& y_true,
                            const std::vector<double>& y_pred) {
    check_pair(y_true, y_pred);
    double mean = std::accumulate(y_true.begin(), y_true.end(), 0.0) /
                  static_cast<double>(y_true.size());
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < y_true.size(); ++i) {
        num += std::fabs(y_true[i] - y_pred[i]);
        den += std::fabs(y_true[i] - mean);
    }
    if (den == 0.0) throw std::invalid_argument("RAE undefined: constant y_true");
    return 1.0 - num / den;
}

double metric_one_minus_mae(const std::vector<double>& y_true,
                            const std::vector<double>& y_pred) {
    check_pair(y_true, y_pred);
    double s = 0.0;
    for (size_t i = 0; i < y_true.size(); ++i) s += std::fabs(y_true[i] - y_pred[i]);
    return 1.0 - s / static_cast<double>(y_true.size());
}

double metric_one_minus_mse(const std::vector<double>& y_true,
                            const std::vector<double>& y_pred) {
    check_pair(y_true, y_pred);
    double s = 0.0;
    for (size_t i = 0; i < y_true.size(); ++i)
        s += (y_true[i] - y_pred[i]) * (y_true[i] - y_pred[i]);
    return 1.0 - s / static_cast<double>(y_true.size());
}

double metric_one_minus_rmse(const std::vector<double>& y_true,
                             const std::vector<double>& y_pred) {
    return 1.0 - std::sqrt(1.0 - metric_one_minus_mse(y_true, y_pred));
}

}  // namespace fts
