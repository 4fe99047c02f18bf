#pragma once

#include <deque>
#include <memory>
#include <optional>
#include <random>
#include <vector>

#include "fts/data.hpp"
#include "fts/downstream.hpp"
#include "fts/expr.hpp"
#include "fts/neurocore.hpp"

namespace fts {

struct CollectorConfig {
    int epochs = 512;  // one episode per epoch
    int steps_per_episode = 6;
    double eps_start = 1.0;
    double eps_end = 0.1;
    bool random_mode = false;  // pure random selection, no training
    uint64_t seed = 0;
    EvalConfig eval;
    double discount = 0.95;
    double penalty = -0.05;  // reward for a discarded (non-finite/constant) column
    int replay_batch = 32;
    size_t replay_capacity = 4096;
    int target_sync = 100;
    double q_lr = 0.001;
};

struct Transition {
    std::vector<double> state;
    int action = 0;
    double reward = 0.0;
    std::vector<double> next_state;
    int next_valid_actions = 0;
    bool terminal = false;
};

// Value network: 2 hidden ReLU layers of width 100, linear action values,
// plus a periodically synced target copy.
class QNetwork {
  public:
    QNetwork(int input_dim, int n_actions, uint64_t seed, double lr);

    std::vector<double> values(const std::vector<double>& state) const;
    std::vector<double> target_values(const std::vector<double>& state) const;
    double train_step(const std::vector<Transition>& batch, double discount);
    void sync_target();
    int n_actions() const { return n_actions_; }

  private:
    nn::TensorPtr forward(const nn::ParamStore& store,
                          const std::vector<double>& state) const;
    int input_dim_, n_actions_;
    nn::ParamStore online_, target_;
    std::unique_ptr<nn::Adam> opt_;
};

// Three cascading agents (head feature, operation, tail feature) generating
// one composition per step; episodes reset to the original features.
class Collector {
  public:
    Collector(const Dataset& d, const CollectorConfig& cfg);

    struct Actions {
        int head = 0;
        int op = 0;
        int tail = -1;  // -1 for unary operations
    };

    struct StepOutcome {
        double reward = 0.0;
        bool accepted = false;
        double score = 0.0;  // score of the feature space after the step
    };

    void reset_episode();
    Actions select_actions(double eps);
    StepOutcome step(const Actions& a);
    double train_networks();  // one Bellman-MSE update per agent, mean loss

    std::vector<TransformationRecord> collect();

    double epsilon_for_epoch(int epoch) const;
    const std::vector<std::vector<double>>& feature_space() const { return columns_; }
    double current_score() const { return current_score_; }

  private:
    std::vector<double> head_state() const;
    std::vector<double> op_state(int head) const;
    std::vector<double> tail_state(const std::vector<double>& op_st, int op) const;
    void push_pending(int agent, std::vector<double> state, int action);
    void complete_pending(int agent, double reward, const std::vector<double>& next_state,
                          int next_valid, bool terminal);
    void flush_pending_terminal();

    const Dataset& data_;
    CollectorConfig cfg_;
    std::mt19937_64 rng_;
    int max_features_;

    std::vector<QNetwork> nets_;  // head, op, tail
    std::vector<std::deque<Transition>> buffers_;
    struct Pending {
        std::vector<double> state;
        int action = 0;
        double reward = 0.0;
        bool armed = false;
    };
    std::vector<Pending> pending_;
    int train_steps_ = 0;

    std::vector<std::vector<double>> columns_;  // originals + accepted generated
    std::vector<InfixTree> trees_;              // one per generated column
    double baseline_score_ = 0.0;
    double current_score_ = 0.0;
};

std::vector<TransformationRecord> collect(const Dataset& d, const CollectorConfig& cfg);

}  // namespace fts
