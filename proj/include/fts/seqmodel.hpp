#pragma once

#include <memory>
#include <string>
#include <vector>

#include "fts/expr.hpp"
#include "fts/neurocore.hpp"

namespace fts {

struct TrainConfig {
    double alpha = 0.05;  // weight of the reconstruction loss
    int batch_size = 1024;
    int epochs = 100;
    double lr = 0.001;
    uint64_t seed = 0;
};

struct LossParts {
    double total = 0.0;
    double rec = 0.0;
    double est = 0.0;
};

// Encoder/decoder LSTMs (d=64) with dot-product attention, token embeddings
// (32), and a 3-layer performance evaluator (hidden 200) over mean-pooled
// encoder states. One internal pad code (= vocab size) is masked everywhere.
class SeqModel {
  public:
    static constexpr int kEmbedDim = 32;
    static constexpr int kHiddenDim = 64;
    static constexpr int kEvalHidden = 200;

    SeqModel(const Vocabulary& vocab, uint64_t init_seed);

    const Vocabulary& vocab() const { return vocab_; }
    int pad_code() const { return vocab_.size(); }

    // Row t is the encoder hidden state after consuming token t; pad skipped.
    nn::TensorPtr encode(const std::vector<int>& codes) const;

    struct DecoderStep {
        nn::TensorPtr logits;  // [1 x |C|]
        nn::TensorPtr probs;   // [1 x |C|]
        nn::LstmState state;
    };
    nn::LstmState decoder_init() const;
    DecoderStep decoder_step(const nn::TensorPtr& E, int prev_code,
                             const nn::LstmState& state) const;

    // Evaluator output in the normalized [0,1] training space.
    nn::TensorPtr evaluator_forward(const nn::TensorPtr& E) const;
    // Denormalized predicted performance as a differentiable scalar node.
    nn::TensorPtr estimate_node(const nn::TensorPtr& E) const;
    double estimate(const nn::TensorPtr& E) const;

    LossParts loss(const std::vector<std::vector<int>>& programs,
                   const std::vector<double>& targets, double alpha,
                   bool accumulate_grads = false);

    std::vector<LossParts> train(const std::vector<TransformationRecord>& records,
                                 const TrainConfig& cfg);

    // Teacher-forced argmax accuracy over positions 2..M of each sequence.
    double token_accuracy(const std::vector<std::vector<int>>& programs) const;

    double normalize_v(double v) const;
    double denormalize_v(double v) const;

    std::vector<nn::TensorPtr> parameters() const { return store_.all(); }

    void save(const std::string& path) const;
    static SeqModel load(const std::string& path);
    nlohmann::json to_checkpoint() const;
    static SeqModel from_checkpoint(const nlohmann::json& j);

  private:
    Vocabulary vocab_;
    nn::ParamStore store_;
    nn::TensorPtr embedding_;  // [(|C|+1) x 32], last row is pad
    nn::LstmParams enc_, dec_;
    nn::TensorPtr dec_h0_, dec_c0_;
    nn::DenseParams out_proj_;  // [2d x |C|]
    nn::DenseParams eval1_, eval2_, eval3_;
    double v_min_ = 0.0, v_max_ = 1.0;
    TrainConfig last_train_cfg_;
};

}  // namespace fts
