#include "ntn/nn.hpp"

#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "ntn/errors.hpp"

namespace ntn {

std::string to_string(Activation a) {
    switch (a) {
        case Activation::Relu: return "relu";
        case Activation::Tanh: return "tanh";
        case Activation::Identity: return "identity";
    }
    return "?";
}

Activation activation_from_string(const std::string& name) {
    if (name == "relu") return Activation::Relu;
    if (name == "tanh") return Activation::Tanh;
    if (name == "identity") return Activation::Identity;
    throw InterfaceError(fmt::format("unknown activation '{}'", name));
}

namespace {

void check_sizes(const std::vector<int>& sizes) {
    if (sizes.size() < 2) throw ConfigError("network needs at least an input and an output layer");
    for (int s : sizes) {
        if (s <= 0) throw ConfigError(fmt::format("layer size {} must be positive", s));
    }
}

Eigen::MatrixXd activate(const Eigen::MatrixXd& z, Activation a) {
    switch (a) {
        case Activation::Relu: return z.cwiseMax(0.0);
        case Activation::Tanh: return z.array().tanh().matrix();
        case Activation::Identity: return z;
    }
    return z;
}

// dLoss/dz from dLoss/dy, given y = act(z).
Eigen::MatrixXd activation_backward(const Eigen::MatrixXd& y, const Eigen::MatrixXd& dy, Activation a) {
    switch (a) {
        case Activation::Relu: return (y.array() > 0.0).select(dy, 0.0);
        case Activation::Tanh: return (dy.array() * (1.0 - y.array().square())).matrix();
        case Activation::Identity: return dy;
    }
    return dy;
}

}  // namespace

Mlp::Mlp(std::vector<int> sizes, Activation head) : sizes_(std::move(sizes)), head_(head) {
    check_sizes(sizes_);
    for (std::size_t i = 0; i + 1 < sizes_.size(); ++i) {
        layers_.push_back({Eigen::MatrixXd::Zero(sizes_[i + 1], sizes_[i]), Eigen::VectorXd::Zero(sizes_[i + 1])});
    }
}

Mlp::Mlp(std::vector<int> sizes, Activation head, Rng& rng) : Mlp(std::move(sizes), head) {
    for (auto& layer : layers_) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(layer.weight.cols()));
        std::uniform_real_distribution<double> dist(-bound, bound);
        // Row-major fill so the draw order does not depend on Eigen's storage.
        for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
            for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = dist(rng);
        }
    }
}

std::size_t Mlp::parameter_count() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i + 1 < sizes_.size(); ++i) {
        n += static_cast<std::size_t>(sizes_[i]) * sizes_[i + 1] + sizes_[i + 1];
    }
    return n;
}

bool Mlp::all_finite() const {
    for (const auto& l : layers_) {
        if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
    }
    return true;
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& x) const {
    Eigen::MatrixXd out = forward(Eigen::MatrixXd(x), nullptr);
    return out.col(0);
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x, ForwardCache* cache) const {
    if (x.rows() != input_size()) {
        throw PreconditionError(fmt::format("network input has {} rows, expected {}", x.rows(), input_size()));
    }
    if (cache) {
        cache->inputs.clear();
        cache->outputs.clear();
    }
    Eigen::MatrixXd h = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const bool last = i + 1 == layers_.size();
        Eigen::MatrixXd z = layers_[i].weight * h;
        z.colwise() += layers_[i].bias;
        Eigen::MatrixXd y = activate(z, last ? head_ : Activation::Relu);
        if (cache) {
            cache->inputs.push_back(std::move(h));
            cache->outputs.push_back(y);
        }
        h = std::move(y);
    }
    return h;
}

MlpGrad Mlp::backward(const ForwardCache& cache, const Eigen::MatrixXd& upstream, Eigen::MatrixXd* input_grad) const {
    if (cache.outputs.size() != layers_.size()) throw PreconditionError("backward without a matching forward cache");
    if (upstream.rows() != output_size() || upstream.cols() != cache.outputs.back().cols()) {
        throw PreconditionError("upstream gradient shape does not match the forward output");
    }
    MlpGrad g;
    g.weight.resize(layers_.size());
    g.bias.resize(layers_.size());
    Eigen::MatrixXd dy = upstream;
    for (std::size_t k = layers_.size(); k-- > 0;) {
        const bool last = k + 1 == layers_.size();
        const Eigen::MatrixXd dz = activation_backward(cache.outputs[k], dy, last ? head_ : Activation::Relu);
        g.weight[k] = dz * cache.inputs[k].transpose();
        g.bias[k] = dz.rowwise().sum();
        if (k > 0 || input_grad) dy = layers_[k].weight.transpose() * dz;
    }
    if (input_grad) *input_grad = std::move(dy);
    return g;
}

Optimizer::Optimizer(const Mlp& net, double lr, bool adaptive_moments) : lr_(lr), adaptive_(adaptive_moments) {
    if (!(lr > 0.0)) throw ConfigError(fmt::format("learning rate {} must be positive", lr));
    for (const auto& l : net.layers()) {
        m_.weight.push_back(Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()));
        m_.bias.push_back(Eigen::VectorXd::Zero(l.bias.size()));
    }
    v_ = m_;
}

void Optimizer::step(Mlp& net, const MlpGrad& grad) {
    auto& layers = net.layers();
    if (grad.weight.size() != layers.size() || m_.weight.size() != layers.size()) {
        throw PreconditionError("optimizer and gradient do not match the network");
    }
    ++steps_;
    if (!adaptive_) {
        for (std::size_t i = 0; i < layers.size(); ++i) {
            layers[i].weight -= lr_ * grad.weight[i];
            layers[i].bias -= lr_ * grad.bias[i];
        }
        return;
    }
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(steps_));
    auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
        m = kBeta1 * m + (1.0 - kBeta1) * g;
        v = kBeta2 * v + (1.0 - kBeta2) * g.cwiseProduct(g);
        param.array() -= lr_ * (m.array() / c1) / ((v.array() / c2).sqrt() + kEpsilon);
    };
    for (std::size_t i = 0; i < layers.size(); ++i) {
        update(layers[i].weight, m_.weight[i], v_.weight[i], grad.weight[i]);
        update(layers[i].bias, m_.bias[i], v_.bias[i], grad.bias[i]);
    }
}

bool Optimizer::operator==(const Optimizer& o) const {
    if (lr_ != o.lr_ || adaptive_ != o.adaptive_ || steps_ != o.steps_) return false;
    if (m_.weight.size() != o.m_.weight.size()) return false;
    for (std::size_t i = 0; i < m_.weight.size(); ++i) {
        if (m_.weight[i] != o.m_.weight[i] || m_.bias[i] != o.m_.bias[i]) return false;
        if (v_.weight[i] != o.v_.weight[i] || v_.bias[i] != o.v_.bias[i]) return false;
    }
    return true;
}

void soft_update(const Mlp& primary, Mlp& target, double tau) {
    if (!primary.same_shape(target)) throw PreconditionError("soft_update: shape mismatch");
    if (!(tau > 0.0 && tau <= 1.0)) throw PreconditionError(fmt::format("soft_update: tau {} outside (0, 1]", tau));
    for (std::size_t i = 0; i < target.layers().size(); ++i) {
        auto& t = target.layers()[i];
        const auto& p = primary.layers()[i];
        t.weight = tau * p.weight + (1.0 - tau) * t.weight;
        t.bias = tau * p.bias + (1.0 - tau) * t.bias;
    }
}

namespace {

nlohmann::json matrix_to_json(const Eigen::MatrixXd& a) {
    std::vector<double> flat;
    flat.reserve(a.size());
    for (Eigen::Index r = 0; r < a.rows(); ++r) {
        for (Eigen::Index c = 0; c < a.cols(); ++c) flat.push_back(a(r, c));
    }
    return flat;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, Eigen::Index rows, Eigen::Index cols) {
    const auto flat = j.get<std::vector<double>>();
    if (static_cast<Eigen::Index>(flat.size()) != rows * cols) {
        throw InterfaceError(fmt::format("array has {} entries, expected {}x{}", flat.size(), rows, cols));
    }
    Eigen::MatrixXd a(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) a(r, c) = flat[r * cols + c];
    }
    return a;
}

nlohmann::json grad_to_json(const MlpGrad& g) {
    nlohmann::json out = nlohmann::json::array();
    for (std::size_t i = 0; i < g.weight.size(); ++i) {
        out.push_back({{"weight", matrix_to_json(g.weight[i])}, {"bias", matrix_to_json(g.bias[i])}});
    }
    return out;
}

MlpGrad grad_from_json(const nlohmann::json& j, const MlpGrad& shape) {
    MlpGrad g = shape;
    if (j.size() != shape.weight.size()) throw InterfaceError("optimizer state has the wrong layer count");
    for (std::size_t i = 0; i < g.weight.size(); ++i) {
        g.weight[i] = matrix_from_json(j[i].at("weight"), shape.weight[i].rows(), shape.weight[i].cols());
        g.bias[i] = matrix_from_json(j[i].at("bias"), shape.bias[i].size(), 1);
    }
    return g;
}

}  // namespace

nlohmann::json Optimizer::to_json() const {
    nlohmann::json shapes = nlohmann::json::array();
    for (const auto& w : m_.weight) shapes.push_back({w.rows(), w.cols()});
    return {{"lr", lr_}, {"adaptive", adaptive_}, {"steps", steps_}, {"shapes", shapes},
            {"m", grad_to_json(m_)}, {"v", grad_to_json(v_)}};
}

Optimizer Optimizer::from_json(const nlohmann::json& j) {
    Optimizer o;
    o.lr_ = j.at("lr").get<double>();
    o.adaptive_ = j.at("adaptive").get<bool>();
    o.steps_ = j.at("steps").get<long>();
    MlpGrad shape;
    for (const auto& s : j.at("shapes")) {
        shape.weight.push_back(Eigen::MatrixXd::Zero(s[0].get<long>(), s[1].get<long>()));
        shape.bias.push_back(Eigen::VectorXd::Zero(s[0].get<long>()));
    }
    o.m_ = grad_from_json(j.at("m"), shape);
    o.v_ = grad_from_json(j.at("v"), shape);
    return o;
}

nlohmann::json to_json(const Mlp& net) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : net.layers()) {
        layers.push_back({{"weight", matrix_to_json(l.weight)}, {"bias", matrix_to_json(l.bias)}});
    }
    return {{"format", kMlpFormat}, {"sizes", net.sizes()}, {"head", to_string(net.head())}, {"layers", layers}};
}

Mlp mlp_from_json(const nlohmann::json& j) {
    if (!j.contains("format") || j.at("format") != kMlpFormat) {
        throw InterfaceError(fmt::format("unsupported network format {}", j.value("format", std::string("<none>"))));
    }
    Mlp net(j.at("sizes").get<std::vector<int>>(), activation_from_string(j.at("head").get<std::string>()));
    const auto& layers = j.at("layers");
    if (layers.size() != net.layers().size()) throw InterfaceError("network document has the wrong layer count");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        auto& l = net.layers()[i];
        l.weight = matrix_from_json(layers[i].at("weight"), l.weight.rows(), l.weight.cols());
        l.bias = matrix_from_json(layers[i].at("bias"), l.bias.size(), 1);
    }
    return net;
}

void save_mlp(const Mlp& net, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw InterfaceError(fmt::format("cannot write {}", path));
    os << to_json(net).dump() << '\n';
}

Mlp load_mlp(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw InterfaceError(fmt::format("cannot read {}", path));
    try {
        return mlp_from_json(nlohmann::json::parse(is));
    } catch (const nlohmann::json::exception& e) {
        throw InterfaceError(fmt::format("{}: {}", path, e.what()));
    }
}

}  // namespace ntn
