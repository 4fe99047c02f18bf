#include "fts/neurocore.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace fts::nn {

TensorPtr make_tensor(int rows, int cols, bool requires_grad) {
    auto t = std::make_shared<Tensor>();
    t->rows = rows;
    t->cols = cols;
    t->v.assign(static_cast<size_t>(rows) * cols, 0.0);
    t->g.assign(t->v.size(), 0.0);
    t->requires_grad = requires_grad;
    return t;
}

TensorPtr make_tensor(int rows, int cols, std::vector<double> values, bool requires_grad) {
    if (values.size() != static_cast<size_t>(rows) * cols)
        throw std::invalid_argument("value count does not match shape");
    auto t = make_tensor(rows, cols, requires_grad);
    t->v = std::move(values);
    return t;
}

namespace {

void check_same_shape(const TensorPtr& a, const TensorPtr& b) {
    if (a->rows != b->rows || a->cols != b->cols)
        throw std::invalid_argument("shape mismatch");
}

TensorPtr make_node(int rows, int cols, std::vector<TensorPtr> parents) {
    auto t = make_tensor(rows, cols);
    t->parents = std::move(parents);
    return t;
}

}  // namespace

void backward(const TensorPtr& root) {
    if (root->size() != 1) throw std::invalid_argument("backward needs a scalar root");
    // Topological order via iterative DFS.
    std::vector<TensorPtr> topo;
    std::unordered_set<Tensor*> visited;
    std::vector<std::pair<TensorPtr, size_t>> stack{{root, 0}};
    visited.insert(root.get());
    while (!stack.empty()) {
        auto& [node, child] = stack.back();
        if (child < node->parents.size()) {
            TensorPtr next = node->parents[child++];
            if (visited.insert(next.get()).second) stack.emplace_back(next, 0);
        } else {
            topo.push_back(node);
            stack.pop_back();
        }
    }
    root->g[0] = 1.0;
    for (auto it = topo.rbegin(); it != topo.rend(); ++it)
        if ((*it)->back) (*it)->back();
}

TensorPtr add(const TensorPtr& a, const TensorPtr& b) {
    check_same_shape(a, b);
    auto out = make_node(a->rows, a->cols, {a, b});
    for (size_t i = 0; i < out->size(); ++i) out->v[i] = a->v[i] + b->v[i];
    out->back = [out, a, b] {
        for (size_t i = 0; i < out->size(); ++i) {
            a->g[i] += out->g[i];
            b->g[i] += out->g[i];
        }
    };
    return out;
}

TensorPtr add_rowvec(const TensorPtr& a, const TensorPtr& b) {
    if (b->rows != 1 || b->cols != a->cols) throw std::invalid_argument("bad row vector");
    auto out = make_node(a->rows, a->cols, {a, b});
    for (int r = 0; r < a->rows; ++r)
        for (int c = 0; c < a->cols; ++c) out->at(r, c) = a->at(r, c) + b->v[c];
    out->back = [out, a, b] {
        for (int r = 0; r < a->rows; ++r)
            for (int c = 0; c < a->cols; ++c) {
                a->grad_at(r, c) += out->grad_at(r, c);
                b->g[c] += out->grad_at(r, c);
            }
    };
    return out;
}

TensorPtr sub(const TensorPtr& a, const TensorPtr& b) {
    check_same_shape(a, b);
    auto out = make_node(a->rows, a->cols, {a, b});
    for (size_t i = 0; i < out->size(); ++i) out->v[i] = a->v[i] - b->v[i];
    out->back = [out, a, b] {
        for (size_t i = 0; i < out->size(); ++i) {
            a->g[i] += out->g[i];
            b->g[i] -= out->g[i];
        }
    };
    return out;
}

TensorPtr mul(const TensorPtr& a, const TensorPtr& b) {
    check_same_shape(a, b);
    auto out = make_node(a->rows, a->cols, {a, b});
    for (size_t i = 0; i < out->size(); ++i) out->v[i] = a->v[i] * b->v[i];
    out->back = [out, a, b] {
        for (size_t i = 0; i < out->size(); ++i) {
            a->g[i] += out->g[i] * b->v[i];
            b->g[i] += out->g[i] * a->v[i];
        }
    };
    return out;
}

TensorPtr scale(const TensorPtr& a, double s) {
    auto out = make_node(a->rows, a->cols, {a});
    for (size_t i = 0; i < out->size(); ++i) out->v[i] = a->v[i] * s;
    out->back = [out, a, s] {
        for (size_t i = 0; i < out->size(); ++i) a->g[i] += out->g[i] * s;
    };
    return out;
}

TensorPtr matmul(const TensorPtr& a, const TensorPtr& b) {
    if (a->cols != b->rows) throw std::invalid_argument("matmul shape mismatch");
    int n = a->rows, k = a->cols, m = b->cols;
    auto out = make_node(n, m, {a, b});
    for (int i = 0; i < n; ++i) {
        double* orow = &out->v[static_cast<size_t>(i) * m];
        const double* arow = &a->v[static_cast<size_t>(i) * k];
        for (int p = 0; p < k; ++p) {
            double av = arow[p];
            const double* brow = &b->v[static_cast<size_t>(p) * m];
            for (int j = 0; j < m; ++j) orow[j] += av * brow[j];
        }
    }
    out->back = [out, a, b, n, k, m] {
        // dA += dC * B^T
        for (int i = 0; i < n; ++i) {
            const double* grow = &out->g[static_cast<size_t>(i) * m];
            double* agrow = &a->g[static_cast<size_t>(i) * k];
            for (int p = 0; p < k; ++p) {
                const double* brow = &b->v[static_cast<size_t>(p) * m];
                double s = 0.0;
                for (int j = 0; j < m; ++j) s += grow[j] * brow[j];
                agrow[p] += s;
            }
        }
        // dB += A^T * dC
        for (int p = 0; p < k; ++p) {
            double* bgrow = &b->g[static_cast<size_t>(p) * m];
            for (int i = 0; i < n; ++i) {
                double av = a->v[static_cast<size_t>(i) * k + p];
                const double* grow = &out->g[static_cast<size_t>(i) * m];
                for (int j = 0; j < m; ++j) bgrow[j] += av * grow[j];
            }
        }
    };
    return out;
}

TensorPtr transpose(const TensorPtr& a) {
    auto out = make_node(a->cols, a->rows, {a});
    for (int r = 0; r < a->rows; ++r)
        for (int c = 0; c < a->cols; ++c) out->at(c, r) = a->at(r, c);
    out->back = [out, a] {
        for (int r = 0; r < a->rows; ++r)
            for (int c = 0; c < a->cols; ++c) a->grad_at(r, c) += out->grad_at(c, r);
    };
    return out;
}

TensorPtr concat_cols(const TensorPtr& a, const TensorPtr& b) {
    if (a->rows != b->rows) throw std::invalid_argument("concat_cols row mismatch");
    auto out = make_node(a->rows, a->cols + b->cols, {a, b});
    for (int r = 0; r < a->rows; ++r) {
        for (int c = 0; c < a->cols; ++c) out->at(r, c) = a->at(r, c);
        for (int c = 0; c < b->cols; ++c) out->at(r, a->cols + c) = b->at(r, c);
    }
    out->back = [out, a, b] {
        for (int r = 0; r < a->rows; ++r) {
            for (int c = 0; c < a->cols; ++c) a->grad_at(r, c) += out->grad_at(r, c);
            for (int c = 0; c < b->cols; ++c) b->grad_at(r, c) += out->grad_at(r, a->cols + c);
        }
    };
    return out;
}

TensorPtr concat_rows(const std::vector<TensorPtr>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows needs >=1 part");
    int cols = parts[0]->cols, rows = 0;
    for (const auto& p : parts) {
        if (p->cols != cols) throw std::invalid_argument("concat_rows col mismatch");
        rows += p->rows;
    }
    auto out = make_node(rows, cols, parts);
    size_t off = 0;
    for (const auto& p : parts) {
        std::copy(p->v.begin(), p->v.end(), out->v.begin() + off);
        off += p->size();
    }
    out->back = [out, parts] {
        size_t o = 0;
        for (const auto& p : parts) {
            for (size_t i = 0; i < p->size(); ++i) p->g[i] += out->g[o + i];
            o += p->size();
        }
    };
    return out;
}

TensorPtr slice_cols(const TensorPtr& a, int start, int len) {
    if (start < 0 || len <= 0 || start + len > a->cols)
        throw std::invalid_argument("bad column slice");
    auto out = make_node(a->rows, len, {a});
    for (int r = 0; r < a->rows; ++r)
        for (int c = 0; c < len; ++c) out->at(r, c) = a->at(r, start + c);
    out->back = [out, a, start, len] {
        for (int r = 0; r < a->rows; ++r)
            for (int c = 0; c < len; ++c) a->grad_at(r, start + c) += out->grad_at(r, c);
    };
    return out;
}

TensorPtr row(const TensorPtr& a, int r) {
    if (r < 0 || r >= a->rows) throw std::out_of_range("row index");
    auto out = make_node(1, a->cols, {a});
    for (int c = 0; c < a->cols; ++c) out->v[c] = a->at(r, c);
    out->back = [out, a, r] {
        for (int c = 0; c < a->cols; ++c) a->grad_at(r, c) += out->g[c];
    };
    return out;
}

TensorPtr sigmoid(const TensorPtr& a) {
    auto out = make_node(a->rows, a->cols, {a});
    for (size_t i = 0; i < out->size(); ++i) out->v[i] = 1.0 / (1.0 + std::exp(-a->v[i]));
    out->back = [out, a] {
        for (size_t i = 0; i < out->size(); ++i)
            a->g[i] += out->g[i] * out->v[i] * (1.0 - out->v[i]);
    };
    return out;
}

TensorPtr tanh_op(const TensorPtr& a) {
    auto out = make_node(a->rows, a->cols, {a});
    for (size_t i = 0; i < out->size(); ++i) out->v[i] = std::tanh(a->v[i]);
    out->back = [out, a] {
        for (size_t i = 0; i < out->size(); ++i)
            a->g[i] += out->g[i] * (1.0 - out->v[i] * out->v[i]);
    };
    return out;
}

TensorPtr relu(const TensorPtr& a) {
    auto out = make_node(a->rows, a->cols, {a});
    for (size_t i = 0; i < out->size(); ++i) out->v[i] = a->v[i] > 0 ? a->v[i] : 0.0;
    out->back = [out, a] {
        for (size_t i = 0; i < out->size(); ++i)
            if (a->v[i] > 0) a->g[i] += out->g[i];
    };
    return out;
}

TensorPtr mean_rows(const TensorPtr& a) {
    auto out = make_node(1, a->cols, {a});
    for (int r = 0; r < a->rows; ++r)
        for (int c = 0; c < a->cols; ++c) out->v[c] += a->at(r, c);
    for (int c = 0; c < a->cols; ++c) out->v[c] /= a->rows;
    out->back = [out, a] {
        double inv = 1.0 / a->rows;
        for (int r = 0; r < a->rows; ++r)
            for (int c = 0; c < a->cols; ++c) a->grad_at(r, c) += out->g[c] * inv;
    };
    return out;
}

TensorPtr softmax_rows(const TensorPtr& a) {
    auto out = make_node(a->rows, a->cols, {a});
    for (int r = 0; r < a->rows; ++r) {
        double mx = a->at(r, 0);
        for (int c = 1; c < a->cols; ++c) mx = std::max(mx, a->at(r, c));
        double sum = 0.0;
        for (int c = 0; c < a->cols; ++c) {
            out->at(r, c) = std::exp(a->at(r, c) - mx);
            sum += out->at(r, c);
        }
        for (int c = 0; c < a->cols; ++c) out->at(r, c) /= sum;
    }
    out->back = [out, a] {
        for (int r = 0; r < a->rows; ++r) {
            double dot = 0.0;
            for (int c = 0; c < a->cols; ++c) dot += out->grad_at(r, c) * out->at(r, c);
            for (int c = 0; c < a->cols; ++c)
                a->grad_at(r, c) += out->at(r, c) * (out->grad_at(r, c) - dot);
        }
    };
    return out;
}

TensorPtr softmax_cross_entropy(const TensorPtr& logits, int target) {
    if (logits->rows != 1) throw std::invalid_argument("expected a [1 x C] logit row");
    if (target < 0 || target >= logits->cols) throw std::out_of_range("target index");
    auto out = make_node(1, 1, {logits});
    double mx = *std::max_element(logits->v.begin(), logits->v.end());
    double sum = 0.0;
    for (double z : logits->v) sum += std::exp(z - mx);
    out->v[0] = std::log(sum) - (logits->v[target] - mx);
    out->back = [out, logits, target, mx, sum] {
        for (int c = 0; c < logits->cols; ++c) {
            double p = std::exp(logits->v[c] - mx) / sum;
            logits->g[c] += out->g[0] * (p - (c == target ? 1.0 : 0.0));
        }
    };
    return out;
}

TensorPtr mse(const TensorPtr& pred, const TensorPtr& target) {
    check_same_shape(pred, target);
    auto out = make_node(1, 1, {pred, target});
    double n = static_cast<double>(pred->size());
    for (size_t i = 0; i < pred->size(); ++i) {
        double d = pred->v[i] - target->v[i];
        out->v[0] += d * d;
    }
    out->v[0] /= n;
    out->back = [out, pred, target, n] {
        for (size_t i = 0; i < pred->size(); ++i) {
            double d = 2.0 * (pred->v[i] - target->v[i]) / n;
            pred->g[i] += out->g[0] * d;
            target->g[i] -= out->g[0] * d;
        }
    };
    return out;
}

LstmState lstm_step(const LstmParams& p, const TensorPtr& x, const LstmState& prev) {
    int h = p.hidden_dim;
    auto z = add_rowvec(matmul(concat_cols(x, prev.h), p.W), p.b);
    auto i_gate = sigmoid(slice_cols(z, 0, h));
    auto f_gate = sigmoid(slice_cols(z, h, h));
    auto o_gate = sigmoid(slice_cols(z, 2 * h, h));
    auto g_cand = tanh_op(slice_cols(z, 3 * h, h));
    auto c = add(mul(f_gate, prev.c), mul(i_gate, g_cand));
    auto hh = mul(o_gate, tanh_op(c));
    return {hh, c};
}

TensorPtr dense(const DenseParams& p, const TensorPtr& x) {
    return add_rowvec(matmul(x, p.W), p.b);
}

Adam::Adam(std::vector<TensorPtr> params, AdamConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
    for (const auto& p : params_) {
        m_.emplace_back(p->size(), 0.0);
        s_.emplace_back(p->size(), 0.0);
    }
}

void Adam::zero_grad() {
    for (auto& p : params_) p->zero_grad();
}

void Adam::step() {
    ++t_;
    if (cfg_.clip_norm > 0) {
        double sq = 0.0;
        for (const auto& p : params_)
            for (double g : p->g) sq += g * g;
        double norm = std::sqrt(sq);
        if (norm > cfg_.clip_norm) {
            double f = cfg_.clip_norm / norm;
            for (auto& p : params_)
                for (double& g : p->g) g *= f;
        }
    }
    double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (size_t k = 0; k < params_.size(); ++k) {
        auto& p = params_[k];
        for (size_t i = 0; i < p->size(); ++i) {
            double g = p->g[i];
            m_[k][i] = cfg_.beta1 * m_[k][i] + (1.0 - cfg_.beta1) * g;
            s_[k][i] = cfg_.beta2 * s_[k][i] + (1.0 - cfg_.beta2) * g * g;
            double mhat = m_[k][i] / bc1;
            double shat = s_[k][i] / bc2;
            p->v[i] -= cfg_.lr * mhat / (std::sqrt(shat) + cfg_.eps);
        }
        p->zero_grad();
    }
}

TensorPtr ParamStore::create(const std::string& name, int rows, int cols,
                             std::mt19937_64& rng) {
    auto t = make_tensor(rows, cols, true);
    double r = std::sqrt(6.0 / (rows + cols));
    std::uniform_real_distribution<double> dist(-r, r);
    for (double& x : t->v) x = dist(rng);
    if (!params_.emplace(name, t).second)
        throw std::invalid_argument("duplicate parameter `" + name + "`");
    order_.push_back(name);
    return t;
}

TensorPtr ParamStore::create_zeros(const std::string& name, int rows, int cols) {
    auto t = make_tensor(rows, cols, true);
    if (!params_.emplace(name, t).second)
        throw std::invalid_argument("duplicate parameter `" + name + "`");
    order_.push_back(name);
    return t;
}

TensorPtr ParamStore::get(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("unknown parameter `" + name + "`");
    return it->second;
}

std::vector<TensorPtr> ParamStore::all() const {
    std::vector<TensorPtr> out;
    out.reserve(order_.size());
    for (const auto& name : order_) out.push_back(params_.at(name));
    return out;
}

nlohmann::json ParamStore::to_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& name : order_) {
        const auto& p = params_.at(name);
        j[name] = {{"shape", {p->rows, p->cols}}, {"values", p->v}};
    }
    return j;
}

void ParamStore::from_json(const nlohmann::json& j) {
    for (const auto& name : order_) {
        if (!j.contains(name)) throw std::runtime_error("checkpoint misses `" + name + "`");
        const auto& e = j.at(name);
        auto& p = params_.at(name);
        if (e.at("shape")[0] != p->rows || e.at("shape")[1] != p->cols)
            throw std::runtime_error("checkpoint shape mismatch for `" + name + "`");
        p->v = e.at("values").get<std::vector<double>>();
        p->zero_grad();
    }
}

}  // namespace fts::nn
