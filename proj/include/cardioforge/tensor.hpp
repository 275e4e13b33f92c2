#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "cardioforge/common.hpp"

// Small reverse-mode autodiff engine used by the model, diffusion and train
// modules. Graphs are built dynamically per forward pass; parameter tensors
// are long-lived leaves owned by a ParamStore. All reductions run in a fixed
// loop order, so results are bit-reproducible given identical inputs.

namespace cardioforge::tensor {

class Node;
using Tensor = std::shared_ptr<Node>;

class Node {
public:
    std::vector<std::size_t> shape;
    std::vector<double> value;
    std::vector<double> grad;
    bool trainable = false;
    std::string name;

    // Parents hold ownership of upstream nodes; backprop closures capture raw
    // pointers into them and stay valid for the lifetime of this node.
    std::vector<Tensor> parents;
    std::function<void()> backprop;

    std::size_t size() const { return value.size(); }
    std::size_t rows() const;
    std::size_t cols() const;
    double& at(std::size_t r, std::size_t c) { return value[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return value[r * cols() + c]; }
};

std::size_t shape_size(const std::vector<std::size_t>& shape);

Tensor constant(std::vector<std::size_t> shape, std::vector<double> data);
Tensor zeros(std::vector<std::size_t> shape);
Tensor scalar(double v);

// Elementwise / scalar ops.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor relu(const Tensor& x);
Tensor gelu(const Tensor& x);
Tensor tanh_act(const Tensor& x);
Tensor sigmoid(const Tensor& x);

// Shape ops.
Tensor reshape(const Tensor& x, std::vector<std::size_t> shape);
Tensor transpose(const Tensor& x);
Tensor slice_cols(const Tensor& x, std::size_t c0, std::size_t c1);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor concat_rows(const std::vector<Tensor>& parts);

// Linear algebra.
Tensor matmul(const Tensor& a, const Tensor& b);
// x: [n, d_in], w: [d_out, d_in], b: [d_out] or null -> [n, d_out]
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

// x: [c_in, len], w: [c_out, c_in, k], b: [c_out] or null.
// out[o][t] = b[o] + sum_{i,k} w[o][i][k] * x[i][t*stride + k*dilation]
Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& b,
              std::size_t stride, std::size_t dilation = 1);

// Broadcast a [c] vector across the length axis of a [c, len] tensor.
Tensor add_channel_bias(const Tensor& x, const Tensor& bias);

// Row-wise ops on [n, d] tensors.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps = 1e-5);
Tensor softmax_rows(const Tensor& x);
Tensor mean_rows(const Tensor& x);   // [n, d] -> [1, d]
Tensor mean_all(const Tensor& x);    // -> [1]

// Losses (scalar outputs).
Tensor l1_loss(const Tensor& a, const Tensor& b);
// logits: [n, n_classes]; per-class weights; weighted mean of -log p[y].
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels,
                     const std::vector<double>& class_weights);

// Seeds root->grad with 1 and runs backprop in reverse topological order.
// Gradients accumulate into leaves; call ParamStore::zero_grad between steps.
void backward(const Tensor& root);

std::vector<double> values(const Tensor& t);

// Named parameter registry: insertion-ordered, used by optimizers and
// checkpoint serialization.
class ParamStore {
public:
    Tensor add_uniform(const std::string& name, std::vector<std::size_t> shape,
                       std::size_t fan_in, Rng& rng);
    Tensor add_zeros(const std::string& name, std::vector<std::size_t> shape);
    Tensor add_value(const std::string& name, std::vector<std::size_t> shape,
                     std::vector<double> data);

    Tensor get(const std::string& name) const;
    bool has(const std::string& name) const { return map_.count(name) != 0; }
    const std::vector<std::string>& names() const { return order_; }
    std::size_t total_size() const;
    void zero_grad();

private:
    Tensor insert(const std::string& name, Tensor t);
    std::vector<std::string> order_;
    std::unordered_map<std::string, Tensor> map_;
};

std::map<std::string, std::vector<double>> snapshot(const ParamStore& store);
void restore(ParamStore& store, const std::map<std::string, std::vector<double>>& snap);

// Checkpoint container: "CFCK" magic, u32 version, u64 header length, a JSON
// header {meta, params: [{name, shape}]}, then raw little-endian doubles in
// header order. Writing is deterministic byte-for-byte given identical state.
struct Checkpoint {
    nlohmann::json meta;
    std::vector<std::pair<std::string, Tensor>> params;

    const Tensor& find(const std::string& name) const;
};

void save_checkpoint(const std::filesystem::path& path, const nlohmann::json& meta,
                     const ParamStore& store);
Checkpoint load_checkpoint(const std::filesystem::path& path);
// Copies checkpoint values into matching store parameters (by name and shape).
void load_into(ParamStore& store, const Checkpoint& ck);

}  // namespace cardioforge::tensor
