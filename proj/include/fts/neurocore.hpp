#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

namespace fts::nn {

struct Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

// Dense row-major 2-D node in a reverse-mode computation graph.
struct Tensor {
    int rows = 0, cols = 0;
    std::vector<double> v;
    std::vector<double> g;
    bool requires_grad = false;
    std::vector<TensorPtr> parents;
    std::function<void()> back;

    double& at(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }
    double& grad_at(int r, int c) { return g[static_cast<size_t>(r) * cols + c]; }
    size_t size() const { return v.size(); }
    double scalar() const { return v.at(0); }
    void zero_grad() { std::fill(g.begin(), g.end(), 0.0); }
};

TensorPtr make_tensor(int rows, int cols, bool requires_grad = false);
TensorPtr make_tensor(int rows, int cols, std::vector<double> values,
                      bool requires_grad = false);

// Reverse pass from a 1x1 root; accumulates into .g of every reachable node.
void backward(const TensorPtr& root);

TensorPtr add(const TensorPtr& a, const TensorPtr& b);
TensorPtr add_rowvec(const TensorPtr& a, const TensorPtr& b);  // b is [1 x cols]
TensorPtr sub(const TensorPtr& a, const TensorPtr& b);
TensorPtr mul(const TensorPtr& a, const TensorPtr& b);  // elementwise
TensorPtr scale(const TensorPtr& a, double s);
TensorPtr matmul(const TensorPtr& a, const TensorPtr& b);
TensorPtr transpose(const TensorPtr& a);
TensorPtr concat_cols(const TensorPtr& a, const TensorPtr& b);
TensorPtr concat_rows(const std::vector<TensorPtr>& rows);
TensorPtr slice_cols(const TensorPtr& a, int start, int len);
TensorPtr row(const TensorPtr& a, int r);
TensorPtr sigmoid(const TensorPtr& a);
TensorPtr tanh_op(const TensorPtr& a);
TensorPtr relu(const TensorPtr& a);
TensorPtr mean_rows(const TensorPtr& a);     // [n x m] -> [1 x m]
TensorPtr softmax_rows(const TensorPtr& a);  // softmax along each row
TensorPtr softmax_cross_entropy(const TensorPtr& logits, int target);  // [1 x C] -> [1 x 1]
TensorPtr mse(const TensorPtr& pred, const TensorPtr& target);         // mean over entries

struct LstmParams {
    TensorPtr W;  // [(input+hidden) x 4*hidden], gate order i,f,o,g
    TensorPtr b;  // [1 x 4*hidden]
    int input_dim = 0, hidden_dim = 0;
};

struct LstmState {
    TensorPtr h, c;
};

LstmState lstm_step(const LstmParams& p, const TensorPtr& x, const LstmState& prev);

struct DenseParams {
    TensorPtr W, b;
};

TensorPtr dense(const DenseParams& p, const TensorPtr& x);

struct AdamConfig {
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double clip_norm = 5.0;  // global-norm gradient clip, <=0 disables
};

class Adam {
  public:
    Adam(std::vector<TensorPtr> params, AdamConfig cfg = {});
    void step();  // applies the update and zeroes gradients
    void zero_grad();

  private:
    std::vector<TensorPtr> params_;
    std::vector<std::vector<double>> m_, s_;
    AdamConfig cfg_;
    long t_ = 0;
};

// Named parameter registry; serialization is name -> shape + flat values.
class ParamStore {
  public:
    TensorPtr create(const std::string& name, int rows, int cols, std::mt19937_64& rng);
    TensorPtr create_zeros(const std::string& name, int rows, int cols);
    TensorPtr get(const std::string& name) const;
    std::vector<TensorPtr> all() const;  // insertion order

    nlohmann::json to_json() const;
    void from_json(const nlohmann::json& j);

  private:
    std::vector<std::string> order_;
    std::map<std::string, TensorPtr> params_;
};

}  // namespace fts::nn
