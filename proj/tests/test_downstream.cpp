#include <doctest.h>

#include <cmath>
#include <random>

#include "fts/downstream.hpp"

using namespace fts;

namespace {

// Linearly separable 3-class blobs in 2-D.
void make_blobs(std::vector<std::vector<double>>& X, std::vector<double>& y, int per_class,
                uint64_t seed, double spread = 0.4) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, spread);
    const double centers[3][2] = {{0, 0}, {4, 0}, {0, 4}};
    X.assign(2, {});
    y.clear();
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < per_class; ++i) {
            X[0].push_back(centers[c][0] + n(rng));
            X[1].push_back(centers[c][1] + n(rng));
            y.push_back(c);
        }
}

}  // namespace

TEST_CASE("classification metrics against a hand-built confusion matrix") {
    //          pred: 0 0 1 1 2 0
    //          true: 0 1 1 1 2 2
    std::vector<int> yt = {0, 1, 1, 1, 2, 2};
    std::vector<int> yp = {0, 0, 1, 1, 2, 0};
    // class 0: tp=1 fp=2 fn=0  -> p=1/3 r=1    f1=1/2
    // class 1: tp=2 fp=0 fn=1  -> p=1   r=2/3  f1=4/5
    // class 2: tp=1 fp=0 fn=1  -> p=1   r=1/2  f1=2/3
    CHECK(metric_precision(yt, yp) == doctest::Approx((1.0 / 3 + 1 + 1) / 3));
    CHECK(metric_recall(yt, yp) == doctest::Approx((1.0 + 2.0 / 3 + 0.5) / 3));
    CHECK(metric_f1(yt, yp) == doctest::Approx((0.5 + 0.8 + 2.0 / 3) / 3));
    CHECK(metric_f1(yt, yt) == doctest::Approx(1.0));
    CHECK_THROWS(metric_f1({0, 1}, {0}));
}

TEST_CASE("roc auc: separation, ties, and degenerate input") {
    std::vector<int> yt = {0, 0, 1, 1};
    // perfect separation for both classes
    CHECK(metric_roc_auc(yt, {{0.9, 0.8, 0.1, 0.2}, {0.1, 0.2, 0.9, 0.8}}) ==
          doctest::Approx(1.0));
    // inverted scores
    CHECK(metric_roc_auc(yt, {{0.1, 0.2, 0.9, 0.8}, {0.9, 0.8, 0.1, 0.2}}) ==
          doctest::Approx(0.0));
    // constant scores: tie-corrected AUC is 0.5
    CHECK(metric_roc_auc(yt, {{0.5, 0.5, 0.5, 0.5}, {0.5, 0.5, 0.5, 0.5}}) ==
          doctest::Approx(0.5));
    // class 0 all-tied -> 0.5; class 1 positives at ranks {2, 4} ->
    // (6 - 3) / (2*2) = 0.75; macro average 0.625
    CHECK(metric_roc_auc(yt, {{0.0, 0.0, 0.0, 0.0}, {0.6, 0.1, 0.4, 0.9}}) ==
          doctest::Approx(0.625));
    CHECK_THROWS(metric_roc_auc({1, 1}, {{0.1, 0.2}, {0.3, 0.4}}));
}

TEST_CASE("regression metrics") {
    std::vector<double> yt = {1.0, 2.0, 3.0, 6.0};
    // predicting the mean gives exactly 1-RAE = 0
    std::vector<double> mean_pred(4, 3.0);
    CHECK(metric_one_minus_rae(yt, mean_pred) == doctest::Approx(0.0));
    CHECK(metric_one_minus_rae(yt, yt) == doctest::Approx(1.0));
    CHECK_THROWS(metric_one_minus_rae({2.0, 2.0}, {1.0, 3.0}));

    std::vector<double> yp = {1.5, 2.0, 2.0, 7.0};
    CHECK(metric_one_minus_mae(yt, yp) == doctest::Approx(1.0 - 2.5 / 4));
    CHECK(metric_one_minus_mse(yt, yp) == doctest::Approx(1.0 - 2.25 / 4));
    CHECK(metric_one_minus_rmse(yt, yp) == doctest::Approx(1.0 - std::sqrt(2.25 / 4)));
}

TEST_CASE("forest with one tree, no bagging, no subsampling equals the decision tree") {
    std::vector<std::vector<double>> X;
    std::vector<double> y;
    make_blobs(X, y, 30, 11, 1.2);

    EvalConfig forest = default_eval_config(Task::Classification);
    forest.model = ModelKind::RandomForest;
    forest.n_trees = 1;
    forest.bootstrap = false;
    forest.feature_subsample = false;
    forest.cv_seed = 3;

    EvalConfig tree = forest;
    tree.model = ModelKind::DecisionTree;

    CHECK(train_eval(X, y, Task::Classification, forest).value ==
          train_eval(X, y, Task::Classification, tree).value);
}

TEST_CASE("train_eval learns separable blobs and is deterministic") {
    std::vector<std::vector<double>> X;
    std::vector<double> y;
    make_blobs(X, y, 25, 21);
    EvalConfig cfg = default_eval_config(Task::Classification);
    cfg.cv_seed = 1;
    Score a = train_eval(X, y, Task::Classification, cfg);
    CHECK(a.value > 0.95);
    CHECK(a.metric == Metric::F1);
    CHECK(train_eval(X, y, Task::Classification, cfg).value == a.value);

    cfg.metric = Metric::RocAuc;
    CHECK(train_eval(X, y, Task::Classification, cfg).value > 0.95);

    // incompatible metric/task combinations throw
    cfg.metric = Metric::OneMinusRae;
    CHECK_THROWS(train_eval(X, y, Task::Classification, cfg));
    std::vector<double> y_reg(y.begin(), y.end());
    EvalConfig rcfg = default_eval_config(Task::Regression);
    rcfg.metric = Metric::F1;
    CHECK_THROWS(train_eval(X, y_reg, Task::Regression, rcfg));

    // non-finite features are rejected
    auto X_bad = X;
    X_bad[0][3] = std::nan("");
    EvalConfig ccfg = default_eval_config(Task::Classification);
    CHECK_THROWS(train_eval(X_bad, y, Task::Classification, ccfg));
}

TEST_CASE("random forest regression recovers a noisy product signal") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<std::vector<double>> X(2, std::vector<double>(200));
    std::vector<double> y(200);
    for (int i = 0; i < 200; ++i) {
        X[0][i] = u(rng);
        X[1][i] = u(rng);
        y[i] = 2.0 * X[0][i] + 0.5 * X[1][i];
    }
    EvalConfig cfg = default_eval_config(Task::Regression);
    cfg.cv_seed = 5;
    CHECK(train_eval(X, y, Task::Regression, cfg).value > 0.5);
}

TEST_CASE("ridge fits a linear function almost exactly") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    std::vector<std::vector<double>> X(3, std::vector<double>(120));
    std::vector<double> y(120);
    for (int i = 0; i < 120; ++i) {
        for (int f = 0; f < 3; ++f) X[f][i] = u(rng);
        y[i] = 1.5 * X[0][i] - 2.0 * X[1][i] + 0.25 * X[2][i] + 4.0;
    }
    EvalConfig cfg = default_eval_config(Task::Regression);
    cfg.model = ModelKind::Ridge;
    cfg.ridge_lambda = 1e-8;
    cfg.metric = Metric::OneMinusRae;
    CHECK(train_eval(X, y, Task::Regression, cfg).value > 0.99);

    // ridge is regression-only
    std::vector<double> y_cls(120);
    for (int i = 0; i < 120; ++i) y_cls[i] = i % 2;
    EvalConfig ccfg = default_eval_config(Task::Classification);
    ccfg.model = ModelKind::Ridge;
    CHECK_THROWS(train_eval(X, y_cls, Task::Classification, ccfg));
}

TEST_CASE("holdout_eval scores a fixed train/test split deterministically") {
    std::vector<std::vector<double>> X;
    std::vector<double> y;
    make_blobs(X, y, 30, 77);
    std::vector<std::vector<double>> Xtr(2), Xte(2);
    std::vector<double> ytr, yte;
    for (size_t i = 0; i < y.size(); ++i) {
        bool test = i % 5 == 0;
        (test ? yte : ytr).push_back(y[i]);
        for (int f = 0; f < 2; ++f) (test ? Xte : Xtr)[f].push_back(X[f][i]);
    }
    EvalConfig cfg = default_eval_config(Task::Classification);
    cfg.cv_seed = 2;
    Score s = holdout_eval(Xtr, ytr, Xte, yte, Task::Classification, cfg);
    CHECK(s.value > 0.9);
    CHECK(holdout_eval(Xtr, ytr, Xte, yte, Task::Classification, cfg).value == s.value);
}

TEST_CASE("model and metric names round-trip") {
    for (ModelKind m : {ModelKind::RandomForest, ModelKind::DecisionTree, ModelKind::Ridge})
        CHECK(model_from_name(model_name(m)) == m);
    for (Metric m : {Metric::F1, Metric::Precision, Metric::Recall, Metric::RocAuc,
                     Metric::OneMinusRae, Metric::OneMinusMae, Metric::OneMinusMse,
                     Metric::OneMinusRmse})
        CHECK(metric_from_name(metric_name(m)) == m);
    CHECK_THROWS(model_from_name("svm"));
    CHECK_THROWS(metric_from_name("accuracy"));
}
