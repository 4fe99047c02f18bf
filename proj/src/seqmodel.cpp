#include "fts/seqmodel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>

namespace fts {

namespace {
constexpr int kCheckpointVersion = 1;
}

SeqModel::SeqModel(const Vocabulary& vocab, uint64_t init_seed) : vocab_(vocab) {
    std::mt19937_64 rng(init_seed);
    int C = vocab_.size();
    int d = kHiddenDim, e = kEmbedDim;
    embedding_ = store_.create("embedding", C + 1, e, rng);
    enc_ = {store_.create("enc.W", e + d, 4 * d, rng), store_.create_zeros("enc.b", 1, 4 * d),
            e, d};
    dec_ = {store_.create("dec.W", e + d, 4 * d, rng), store_.create_zeros("dec.b", 1, 4 * d),
            e, d};
    dec_h0_ = store_.create("dec.h0", 1, d, rng);
    dec_c0_ = store_.create("dec.c0", 1, d, rng);
    out_proj_ = {store_.create("out.W", 2 * d, C, rng), store_.create_zeros("out.b", 1, C)};
    eval1_ = {store_.create("eval1.W", d, kEvalHidden, rng),
              store_.create_zeros("eval1.b", 1, kEvalHidden)};
    eval2_ = {store_.create("eval2.W", kEvalHidden, kEvalHidden, rng),
              store_.create_zeros("eval2.b", 1, kEvalHidden)};
    eval3_ = {store_.create("eval3.W", kEvalHidden, 1, rng),
              store_.create_zeros("eval3.b", 1, 1)};
}

nn::TensorPtr SeqModel::encode(const std::vector<int>& codes) const {
    nn::LstmState state{nn::make_tensor(1, kHiddenDim), nn::make_tensor(1, kHiddenDim)};
    std::vector<nn::TensorPtr> hidden_rows;
    for (int code : codes) {
        if (code == pad_code()) continue;
        if (code < 0 || code > pad_code())
            throw std::out_of_range("token code out of vocabulary");
        state = nn::lstm_step(enc_, nn::row(embedding_, code), state);
        hidden_rows.push_back(state.h);
    }
    if (hidden_rows.empty()) throw std::invalid_argument("cannot encode an empty sequence");
    return nn::concat_rows(hidden_rows);
}

nn::LstmState SeqModel::decoder_init() const { return {dec_h0_, dec_c0_}; }

SeqModel::DecoderStep SeqModel::decoder_step(const nn::TensorPtr& E, int prev_code,
                                             const nn::LstmState& state) const {
    auto next = nn::lstm_step(dec_, nn::row(embedding_, prev_code), state);
    // Dot-product attention over the encoder rows.
    auto scores = nn::transpose(nn::matmul(E, nn::transpose(next.h)));  // [1 x M]
    auto weights = nn::softmax_rows(scores);
    auto context = nn::matmul(weights, E);  // [1 x d]
    auto logits = nn::dense(out_proj_, nn::concat_cols(next.h, context));
    return {logits, nn::softmax_rows(logits), next};
}

nn::TensorPtr SeqModel::evaluator_forward(const nn::TensorPtr& E) const {
    auto pooled = nn::mean_rows(E);
    auto h1 = nn::relu(nn::dense(eval1_, pooled));
    auto h2 = nn::relu(nn::dense(eval2_, h1));
    return nn::dense(eval3_, h2);
}

nn::TensorPtr SeqModel::estimate_node(const nn::TensorPtr& E) const {
    auto norm = evaluator_forward(E);
    auto scaled = nn::scale(norm, v_max_ - v_min_);
    auto offset = nn::make_tensor(1, 1, std::vector<double>{v_min_});
    return nn::add(scaled, offset);
}

double SeqModel::estimate(const nn::TensorPtr& E) const {
    return estimate_node(E)->scalar();
}

double SeqModel::normalize_v(double v) const {
    if (v_max_ == v_min_) return 0.5;
    return (v - v_min_) / (v_max_ - v_min_);
}

double SeqModel::denormalize_v(double v) const { return v_min_ + v * (v_max_ - v_min_); }

LossParts SeqModel::loss(const std::vector<std::vector<int>>& programs,
                         const std::vector<double>& targets, double alpha,
                         bool accumulate_grads) {
    if (programs.empty() || programs.size() != targets.size())
        throw std::invalid_argument("bad loss batch");
    LossParts parts;
    double batch_inv = 1.0 / static_cast<double>(programs.size());
    for (size_t s = 0; s < programs.size(); ++s) {
        std::vector<int> codes;
        for (int c : programs[s])
            if (c != pad_code()) codes.push_back(c);
        if (codes.size() < 2) throw std::invalid_argument("sequence too short");

        auto E = encode(codes);
        // Teacher-forced reconstruction over positions 2..M, per-sequence mean.
        nn::LstmState state = decoder_init();
        nn::TensorPtr rec;
        for (size_t t = 1; t < codes.size(); ++t) {
            auto step = decoder_step(E, codes[t - 1], state);
            auto ce = nn::softmax_cross_entropy(step.logits, codes[t]);
            rec = rec ? nn::add(rec, ce) : ce;
            state = step.state;
        }
        rec = nn::scale(rec, 1.0 / static_cast<double>(codes.size() - 1));

        auto target = nn::make_tensor(1, 1, std::vector<double>{normalize_v(targets[s])});
        auto est = nn::mse(evaluator_forward(E), target);
        auto total = nn::add(nn::scale(rec, alpha), nn::scale(est, 1.0 - alpha));

        parts.rec += rec->scalar() * batch_inv;
        parts.est += est->scalar() * batch_inv;
        parts.total += total->scalar() * batch_inv;
        if (accumulate_grads) nn::backward(nn::scale(total, batch_inv));
    }
    return parts;
}

double SeqModel::token_accuracy(const std::vector<std::vector<int>>& programs) const {
    size_t correct = 0, count = 0;
    for (const auto& prog : programs) {
        std::vector<int> codes;
        for (int c : prog)
            if (c != pad_code()) codes.push_back(c);
        auto E = encode(codes);
        nn::LstmState state = decoder_init();
        for (size_t t = 1; t < codes.size(); ++t) {
            auto step = decoder_step(E, codes[t - 1], state);
            const auto& p = step.probs->v;
            int argmax = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
            correct += argmax == codes[t];
            ++count;
            state = step.state;
        }
    }
    return count == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(count);
}

std::vector<LossParts> SeqModel::train(const std::vector<TransformationRecord>& records,
                                       const TrainConfig& cfg) {
    if (records.empty()) throw std::invalid_argument("no training records");
    last_train_cfg_ = cfg;

    v_min_ = records[0].performance;
    v_max_ = records[0].performance;
    for (const auto& r : records) {
        v_min_ = std::min(v_min_, r.performance);
        v_max_ = std::max(v_max_, r.performance);
    }

    std::vector<std::vector<int>> programs;
    std::vector<double> targets;
    programs.reserve(records.size());
    for (const auto& r : records) {
        programs.push_back(encode_tokens(r.program, vocab_));
        targets.push_back(r.performance);
    }

    size_t n = programs.size();
    size_t batch = std::min(static_cast<size_t>(std::max(1, cfg.batch_size)), n);
    nn::AdamConfig acfg;
    acfg.lr = cfg.lr;
    nn::Adam opt(store_.all(), acfg);
    opt.zero_grad();

    std::mt19937_64 rng(cfg.seed);
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});

    std::vector<LossParts> curve;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        LossParts epoch_parts;
        for (size_t start = 0; start < n; start += batch) {
            size_t end = std::min(start + batch, n);
            size_t max_len = 0;
            for (size_t i = start; i < end; ++i)
                max_len = std::max(max_len, programs[order[i]].size());
            std::vector<std::vector<int>> bp;
            std::vector<double> bt;
            for (size_t i = start; i < end; ++i) {
                auto padded = programs[order[i]];
                padded.resize(max_len, pad_code());
                bp.push_back(std::move(padded));
                bt.push_back(targets[order[i]]);
            }
            LossParts p = loss(bp, bt, cfg.alpha, true);
            opt.step();
            double w = static_cast<double>(end - start) / static_cast<double>(n);
            epoch_parts.total += p.total * w;
            epoch_parts.rec += p.rec * w;
            epoch_parts.est += p.est * w;
        }
        curve.push_back(epoch_parts);
    }
    return curve;
}

nlohmann::json SeqModel::to_checkpoint() const {
    return {{"format_version", kCheckpointVersion},
            {"vocab", {{"n_features", vocab_.n_features}, {"n_ops", vocab_.n_ops}}},
            {"v_min", v_min_},
            {"v_max", v_max_},
            {"train_config",
             {{"alpha", last_train_cfg_.alpha},
              {"batch_size", last_train_cfg_.batch_size},
              {"epochs", last_train_cfg_.epochs},
              {"lr", last_train_cfg_.lr},
              {"seed", last_train_cfg_.seed}}},
            {"params", store_.to_json()}};
}

SeqModel SeqModel::from_checkpoint(const nlohmann::json& j) {
    if (j.at("format_version").get<int>() != kCheckpointVersion)
        throw std::runtime_error("unsupported checkpoint version");
    Vocabulary vocab;
    vocab.n_features = j.at("vocab").at("n_features").get<int>();
    vocab.n_ops = j.at("vocab").at("n_ops").get<int>();
    if (vocab.n_ops != operation_count())
        throw std::runtime_error("checkpoint operation set size mismatch");
    SeqModel m(vocab, 0);
    m.store_.from_json(j.at("params"));
    m.v_min_ = j.at("v_min").get<double>();
    m.v_max_ = j.at("v_max").get<double>();
    const auto& tc = j.at("train_config");
    m.last_train_cfg_.alpha = tc.at("alpha").get<double>();
    m.last_train_cfg_.batch_size = tc.at("batch_size").get<int>();
    m.last_train_cfg_.epochs = tc.at("epochs").get<int>();
    m.last_train_cfg_.lr = tc.at("lr").get<double>();
    m.last_train_cfg_.seed = tc.at("seed").get<uint64_t>();
    return m;
}

void SeqModel::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out << to_checkpoint().dump() << "\n";
}

SeqModel SeqModel::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    nlohmann::json j;
    in >> j;
    return from_checkpoint(j);
}

}  // namespace fts
