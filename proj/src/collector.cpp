#include "fts/collector.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fts {

namespace {
enum Agent { kHead = 0, kOp = 1, kTail = 2 };
}

QNetwork::QNetwork(int input_dim, int n_actions, uint64_t seed, double lr)
    : input_dim_(input_dim), n_actions_(n_actions) {
    std::mt19937_64 rng(seed);
    for (nn::ParamStore* store : {&online_, &target_}) {
        std::mt19937_64 init_rng(rng);  // identical init for online and target
        store->create("W1", input_dim, 100, init_rng);
        store->create_zeros("b1", 1, 100);
        store->create("W2", 100, 100, init_rng);
        store->create_zeros("b2", 1, 100);
        store->create("W3", 100, n_actions, init_rng);
        store->create_zeros("b3", 1, n_actions);
    }
    nn::AdamConfig cfg;
    cfg.lr = lr;
    opt_ = std::make_unique<nn::Adam>(online_.all(), cfg);
}

nn::TensorPtr QNetwork::forward(const nn::ParamStore& store,
                                const std::vector<double>& state) const {
    if (static_cast<int>(state.size()) != input_dim_)
        throw std::invalid_argument("bad state dimension");
    auto x = nn::make_tensor(1, input_dim_, state);
    auto h1 = nn::relu(nn::dense({store.get("W1"), store.get("b1")}, x));
    auto h2 = nn::relu(nn::dense({store.get("W2"), store.get("b2")}, h1));
    return nn::dense({store.get("W3"), store.get("b3")}, h2);
}

std::vector<double> QNetwork::values(const std::vector<double>& state) const {
    return forward(online_, state)->v;
}

std::vector<double> QNetwork::target_values(const std::vector<double>& state) const {
    return forward(target_, state)->v;
}

double QNetwork::train_step(const std::vector<Transition>& batch, double discount) {
    if (batch.empty()) throw std::invalid_argument("empty training batch");
    double total_loss = 0.0;
    double inv = 1.0 / static_cast<double>(batch.size());
    for (const Transition& tr : batch) {
        double target = tr.reward;
        if (!tr.terminal && tr.next_valid_actions > 0) {
            auto nv = target_values(tr.next_state);
            double best = nv[0];
            for (int a = 1; a < tr.next_valid_actions && a < n_actions_; ++a)
                best = std::max(best, nv[a]);
            target += discount * best;
        }
        auto q = forward(online_, tr.state);
        auto qa = nn::slice_cols(q, tr.action, 1);
        auto loss = nn::mse(qa, nn::make_tensor(1, 1, std::vector<double>{target}));
        total_loss += loss->scalar() * inv;
        nn::backward(nn::scale(loss, inv));
    }
    opt_->step();
    return total_loss;
}

void QNetwork::sync_target() {
    auto src = online_.all();
    auto dst = target_.all();
    for (size_t i = 0; i < src.size(); ++i) dst[i]->v = src[i]->v;
}

Collector::Collector(const Dataset& d, const CollectorConfig& cfg)
    : data_(d), cfg_(cfg), rng_(cfg.seed) {
    int n_orig = static_cast<int>(d.n_features());
    max_features_ = n_orig + cfg.steps_per_episode;
    int n_ops = operation_count();
    nets_.emplace_back(49, max_features_, rng_(), cfg.q_lr);
    nets_.emplace_back(49 + 49, n_ops, rng_(), cfg.q_lr);
    nets_.emplace_back(49 + 49 + n_ops, max_features_, rng_(), cfg.q_lr);
    buffers_.resize(3);
    pending_.resize(3);
    columns_ = d.X;
    baseline_score_ = train_eval(columns_, data_.y, data_.task, cfg_.eval).value;
    current_score_ = baseline_score_;
}

double Collector::epsilon_for_epoch(int epoch) const {
    if (cfg_.random_mode) return 1.0;
    double half = std::max(1.0, 0.5 * cfg_.epochs);
    double frac = std::min(1.0, static_cast<double>(epoch) / half);
    return cfg_.eps_start + (cfg_.eps_end - cfg_.eps_start) * frac;
}

std::vector<double> Collector::head_state() const {
    auto s = describe(columns_);
    return {s.begin(), s.end()};
}

std::vector<double> Collector::op_state(int head) const {
    auto s = head_state();
    auto rep = describe_column(columns_[static_cast<size_t>(head)]);
    s.insert(s.end(), rep.begin(), rep.end());
    return s;
}

std::vector<double> Collector::tail_state(const std::vector<double>& op_st, int op) const {
    auto s = op_st;
    s.resize(s.size() + static_cast<size_t>(operation_count()), 0.0);
    s[s.size() - operation_count() + op] = 1.0;
    return s;
}

void Collector::push_pending(int agent, std::vector<double> state, int action) {
    pending_[agent] = {std::move(state), action, 0.0, true};
}

void Collector::complete_pending(int agent, double reward, const std::vector<double>& next,
                                 int next_valid, bool terminal) {
    auto& p = pending_[agent];
    if (!p.armed) return;
    buffers_[agent].push_back({p.state, p.action, p.reward, next, next_valid, terminal});
    if (buffers_[agent].size() > cfg_.replay_capacity) buffers_[agent].pop_front();
    p.armed = false;
}

void Collector::flush_pending_terminal() {
    for (int agent = 0; agent < 3; ++agent) complete_pending(agent, 0.0, {}, 0, true);
}

void Collector::reset_episode() {
    flush_pending_terminal();
    columns_ = data_.X;
    trees_.clear();
    current_score_ = baseline_score_;
}

Collector::Actions Collector::select_actions(double eps) {
    int n_cols = static_cast<int>(columns_.size());
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    auto pick = [&](QNetwork& net, const std::vector<double>& state, int valid) {
        if (coin(rng_) < eps) {
            std::uniform_int_distribution<int> uni(0, valid - 1);
            return uni(rng_);
        }
        auto q = net.values(state);
        int best = 0;
        for (int a = 1; a < valid; ++a)
            if (q[a] > q[best]) best = a;
        return best;
    };

    Actions actions;
    auto hs = head_state();
    complete_pending(kHead, 0.0, hs, n_cols, false);
    actions.head = pick(nets_[kHead], hs, n_cols);
    push_pending(kHead, hs, actions.head);

    auto os = op_state(actions.head);
    complete_pending(kOp, 0.0, os, operation_count(), false);
    actions.op = pick(nets_[kOp], os, operation_count());
    push_pending(kOp, os, actions.op);

    if (operation(actions.op).arity == 2) {
        auto ts = tail_state(os, actions.op);
        complete_pending(kTail, 0.0, ts, n_cols, false);
        actions.tail = pick(nets_[kTail], ts, n_cols);
        push_pending(kTail, ts, actions.tail);
    }
    return actions;
}

Collector::StepOutcome Collector::step(const Actions& a) {
    const auto& head_col = columns_[static_cast<size_t>(a.head)];
    std::vector<double> new_col;
    if (operation(a.op).arity == 1) {
        new_col = apply_unary(a.op, head_col, EvalMode::Guarded);
    } else {
        if (a.tail < 0) throw std::invalid_argument("binary operation without a tail feature");
        new_col = apply_binary(a.op, head_col, columns_[static_cast<size_t>(a.tail)],
                               EvalMode::Guarded);
    }

    bool finite = std::all_of(new_col.begin(), new_col.end(),
                              [](double x) { return std::isfinite(x); });
    bool constant = std::all_of(new_col.begin(), new_col.end(),
                                [&](double x) { return x == new_col[0]; });

    StepOutcome outcome;
    if (!finite || constant ||
        static_cast<int>(columns_.size()) >= max_features_) {
        outcome.reward = cfg_.penalty;
        outcome.score = current_score_;
    } else {
        int n_orig = static_cast<int>(data_.n_features());
        auto subtree = [&](int idx) {
            return idx < n_orig ? make_feature_node(idx)
                                : clone_tree(trees_[static_cast<size_t>(idx - n_orig)]);
        };
        std::vector<InfixTree> children{subtree(a.head)};
        if (operation(a.op).arity == 2) children.push_back(subtree(a.tail));
        columns_.push_back(std::move(new_col));
        trees_.push_back(make_op_node(a.op, std::move(children)));

        double score = train_eval(columns_, data_.y, data_.task, cfg_.eval).value;
        outcome.reward = score - current_score_;
        outcome.accepted = true;
        outcome.score = score;
        current_score_ = score;
    }
    for (auto& p : pending_)
        if (p.armed) p.reward = outcome.reward;
    return outcome;
}

double Collector::train_networks() {
    double total = 0.0;
    int trained = 0;
    for (int agent = 0; agent < 3; ++agent) {
        auto& buffer = buffers_[agent];
        if (buffer.size() < static_cast<size_t>(cfg_.replay_batch)) continue;
        std::vector<Transition> batch;
        for (int i = 0; i < cfg_.replay_batch; ++i) {
            std::uniform_int_distribution<size_t> pick(0, buffer.size() - 1);
            batch.push_back(buffer[pick(rng_)]);
        }
        total += nets_[static_cast<size_t>(agent)].train_step(batch, cfg_.discount);
        ++trained;
    }
    if (trained > 0) {
        ++train_steps_;
        if (train_steps_ % cfg_.target_sync == 0)
            for (auto& net : nets_) net.sync_target();
    }
    return trained > 0 ? total / trained : 0.0;
}

std::vector<TransformationRecord> Collector::collect() {
    std::vector<TransformationRecord> records;
    for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
        reset_episode();
        double eps = epsilon_for_epoch(epoch);
        for (int s = 0; s < cfg_.steps_per_episode; ++s) {
            Actions actions = select_actions(eps);
            StepOutcome outcome = step(actions);
            if (!cfg_.random_mode) train_networks();
            if (outcome.accepted) {
                TransformationRecord rec;
                rec.program = infix_to_postfix(trees_);
                rec.performance = outcome.score;
                rec.provenance = cfg_.random_mode ? "random" : "rl";
                records.push_back(std::move(rec));
            }
        }
    }
    flush_pending_terminal();
    return records;
}

std::vector<TransformationRecord> collect(const Dataset& d, const CollectorConfig& cfg) {
    Collector collector(d, cfg);
    return collector.collect();
}

}  // namespace fts
