#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "ntn/rng.hpp"

namespace ntn {

enum class Activation { Relu, Tanh, Identity };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

struct DenseLayer {
    Eigen::MatrixXd weight;  // (out, in)
    Eigen::VectorXd bias;    // (out)
    bool operator==(const DenseLayer& o) const { return weight == o.weight && bias == o.bias; }
};

/// Values kept by a batched forward pass for the matching backward pass.
/// Columns are samples.
struct ForwardCache {
    std::vector<Eigen::MatrixXd> inputs;  // input to each layer
    std::vector<Eigen::MatrixXd> outputs;  // post-activation output of each layer
};

struct MlpGrad {
    std::vector<Eigen::MatrixXd> weight;
    std::vector<Eigen::VectorXd> bias;
};

/// Fully connected network: rectifier on hidden layers, configurable head.
class Mlp {
public:
    Mlp() = default;
    /// `sizes` = {input, hidden..., output}. Weights uniform in +-1/sqrt(fan_in), biases zero.
    Mlp(std::vector<int> sizes, Activation head, Rng& rng);
    /// Zero-initialized network, useful for tests and as a deserialization target.
    Mlp(std::vector<int> sizes, Activation head);

    const std::vector<int>& sizes() const { return sizes_; }
    Activation head() const { return head_; }
    std::vector<DenseLayer>& layers() { return layers_; }
    const std::vector<DenseLayer>& layers() const { return layers_; }
    int input_size() const { return sizes_.front(); }
    int output_size() const { return sizes_.back(); }

    /// Sum over layers of in*out + out.
    std::size_t parameter_count() const;

    Eigen::VectorXd forward(const Eigen::VectorXd& x) const;
    /// Batched forward; columns of `x` are samples. Fills `cache` when non-null.
    Eigen::MatrixXd forward(const Eigen::MatrixXd& x, ForwardCache* cache) const;

    /// Reverse pass for a batch. `upstream` is dLoss/dOutput, same shape as the
    /// forward output. Gradients are summed over the batch columns. When
    /// `input_grad` is non-null it receives dLoss/dInput.
    MlpGrad backward(const ForwardCache& cache, const Eigen::MatrixXd& upstream,
                     Eigen::MatrixXd* input_grad = nullptr) const;

    bool same_shape(const Mlp& other) const { return sizes_ == other.sizes_ && head_ == other.head_; }
    bool all_finite() const;

    bool operator==(const Mlp& o) const { return sizes_ == o.sizes_ && head_ == o.head_ && layers_ == o.layers_; }

private:
    std::vector<int> sizes_;
    Activation head_ = Activation::Identity;
    std::vector<DenseLayer> layers_;
};

/// Bias-corrected adaptive-moment optimizer. With moments disabled the update
/// is plain gradient descent: param -= lr * grad.
class Optimizer {
public:
    Optimizer() = default;
    Optimizer(const Mlp& net, double lr, bool adaptive_moments);

    void step(Mlp& net, const MlpGrad& grad);

    double learning_rate() const { return lr_; }
    long steps() const { return steps_; }

    nlohmann::json to_json() const;
    static Optimizer from_json(const nlohmann::json& j);

    bool operator==(const Optimizer& o) const;

    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEpsilon = 1e-8;

private:
    double lr_ = 1e-3;
    bool adaptive_ = true;
    long steps_ = 0;
    MlpGrad m_, v_;
};

/// target <- tau * primary + (1 - tau) * target, parameter-wise.
void soft_update(const Mlp& primary, Mlp& target, double tau);

/// Versioned checkpoint document.
inline constexpr const char* kMlpFormat = "ntn.mlp.v1";
nlohmann::json to_json(const Mlp& net);
Mlp mlp_from_json(const nlohmann::json& j);
void save_mlp(const Mlp& net, const std::string& path);
Mlp load_mlp(const std::string& path);

}  // namespace ntn
