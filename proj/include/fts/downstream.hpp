#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fts/data.hpp"

namespace fts {

enum class ModelKind { RandomForest, DecisionTree, Ridge };

enum class Metric {
    F1,
    Precision,
    Recall,
    RocAuc,
    OneMinusRae,
    OneMinusMae,
    OneMinusMse,
    OneMinusRmse,
};

std::string metric_name(Metric m);
Metric metric_from_name(const std::string& name);
bool metric_for_classification(Metric m);

std::string model_name(ModelKind m);
ModelKind model_from_name(const std::string& name);

struct EvalConfig {
    ModelKind model = ModelKind::RandomForest;
    int n_trees = 10;
    int max_depth = 10;
    int min_samples_leaf = 2;
    Metric metric = Metric::F1;
    uint64_t cv_seed = 0;
    double ridge_lambda = 1.0;
    // Forest knobs; a forest with n_trees=1, no bagging and no subsampling
    // reduces to the decision tree.
    bool bootstrap = true;
    bool feature_subsample = true;  // sqrt(p) features per split
};

struct Score {
    double value = 0.0;
    Metric metric = Metric::F1;
};

EvalConfig default_eval_config(Task task);

// Mean metric over 5-fold CV (stratified for classification). Deterministic
// given cv_seed; throws on non-finite features or incompatible metric/task.
Score train_eval(const std::vector<std::vector<double>>& X, const std::vector<double>& y,
                 Task task, const EvalConfig& cfg);

// Fit on the train matrix, score on the held-out test matrix.
Score holdout_eval(const std::vector<std::vector<double>>& X_train,
                   const std::vector<double>& y_train,
                   const std::vector<std::vector<double>>& X_test,
                   const std::vector<double>& y_test, Task task, const EvalConfig& cfg);

// Classification metrics, macro-averaged over classes present in y_true.
double metric_f1(const std::vector<int>& y_true, const std::vector<int>& y_pred);
double metric_precision(const std::vector<int>& y_true, const std::vector<int>& y_pred);
double metric_recall(const std::vector<int>& y_true, const std::vector<int>& y_pred);
// One-vs-rest macro AUC; scores[c][i] is the score of class c for sample i.
double metric_roc_auc(const std::vector<int>& y_true,
                      const std::vector<std::vector<double>>& scores);

double metric_one_minus_rae(const std::vector<double>& y_true, const std::vector<double>& y_pred);
double metric_one_minus_mae(const std::vector<double>& y_true, const std::vector<double>& y_pred);
double metric_one_minus_mse(const std::vector<double>& y_true, const std::vector<double>& y_pred);
double metric_one_minus_rmse(const std::vector<double>& y_true, const std::vector<double>& y_pred);

}  // namespace fts
