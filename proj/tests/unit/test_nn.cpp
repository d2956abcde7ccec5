#include "doctest.h"

#include <cmath>
#include <cstdio>

#include "ntn/errors.hpp"
#include "ntn/nn.hpp"

using namespace ntn;

namespace {

Mlp scalar_linear(double w, double b) {
    Mlp net({1, 1}, Activation::Identity);
    net.layers()[0].weight(0, 0) = w;
    net.layers()[0].bias(0) = b;
    return net;
}

// Loss 0.5 * |f(x)|^2 summed over a batch, so dLoss/dOutput = f(x).
double half_square(const Mlp& net, const Eigen::MatrixXd& x) {
    return 0.5 * net.forward(x, nullptr).squaredNorm();
}

}  // namespace

TEST_SUITE("nn") {

TEST_CASE("forward examples") {
    const Mlp zero({3, 4, 2}, Activation::Identity);
    CHECK(zero.forward(Eigen::VectorXd::Ones(3)).isZero());
    CHECK(scalar_linear(2.0, 1.0).forward(Eigen::VectorXd::Constant(1, 3.0))(0) == 7.0);
    Mlp relu({1, 1, 1}, Activation::Tanh);
    relu.layers()[0].weight(0, 0) = -1.0;
    relu.layers()[1].bias(0) = 0.5;
    CHECK(relu.forward(Eigen::VectorXd::Constant(1, 2.0))(0) == doctest::Approx(std::tanh(0.5)));
    CHECK(zero.parameter_count() == 3 * 4 + 4 + 4 * 2 + 2);
}

TEST_CASE("backward examples") {
    const Mlp net = scalar_linear(1.0, 0.0);
    ForwardCache cache;
    const Eigen::MatrixXd x = Eigen::MatrixXd::Constant(1, 1, 1.0);
    const Eigen::MatrixXd y = net.forward(x, &cache);
    // Squared loss y^2 at target 0: dL/dy = 2y.
    MlpGrad g = net.backward(cache, 2.0 * y);
    CHECK(g.weight[0](0, 0) == 2.0);
    CHECK(g.bias[0](0) == 2.0);
    g = net.backward(cache, Eigen::MatrixXd::Zero(1, 1));
    CHECK(g.weight[0].isZero());
    CHECK(g.bias[0].isZero());
}

TEST_CASE("gradients match central finite differences") {
    for (Activation head : {Activation::Identity, Activation::Tanh}) {
        Rng rng(31);
        Mlp net({5, 7, 6, 3}, head, rng);
        Eigen::MatrixXd x(5, 4);
        for (int i = 0; i < x.size(); ++i) x.data()[i] = gaussian(rng, 0.0, 1.0);
        ForwardCache cache;
        const Eigen::MatrixXd y = net.forward(x, &cache);
        Eigen::MatrixXd dx;
        const MlpGrad g = net.backward(cache, y, &dx);
        const double h = 1e-6;
        for (std::size_t l = 0; l < net.layers().size(); ++l) {
            auto& W = net.layers()[l].weight;
            for (int k = 0; k < W.size(); ++k) {
                const double keep = W.data()[k];
                W.data()[k] = keep + h;
                const double up = half_square(net, x);
                W.data()[k] = keep - h;
                const double down = half_square(net, x);
                W.data()[k] = keep;
                CHECK(g.weight[l].data()[k] == doctest::Approx((up - down) / (2 * h)).epsilon(1e-5).scale(1e-6));
            }
            auto& b = net.layers()[l].bias;
            for (int k = 0; k < b.size(); ++k) {
                const double keep = b(k);
                b(k) = keep + h;
                const double up = half_square(net, x);
                b(k) = keep - h;
                const double down = half_square(net, x);
                b(k) = keep;
                CHECK(g.bias[l](k) == doctest::Approx((up - down) / (2 * h)).epsilon(1e-5).scale(1e-6));
            }
        }
        for (int k = 0; k < x.size(); ++k) {
            Eigen::MatrixXd xp = x, xm = x;
            xp.data()[k] += h;
            xm.data()[k] -= h;
            CHECK(dx.data()[k] ==
                  doctest::Approx((half_square(net, xp) - half_square(net, xm)) / (2 * h)).epsilon(1e-5).scale(1e-6));
        }
    }
}

TEST_CASE("optimizer") {
    SUBCASE("plain descent") {
        Mlp net = scalar_linear(0.0, 0.0);
        Optimizer opt(net, 0.1, false);
        MlpGrad g{{Eigen::MatrixXd::Constant(1, 1, 1.0)}, {Eigen::VectorXd::Zero(1)}};
        opt.step(net, g);
        CHECK(net.layers()[0].weight(0, 0) == doctest::Approx(-0.1).epsilon(1e-15));
        CHECK(net.layers()[0].bias(0) == 0.0);
    }
    SUBCASE("zero gradient leaves parameters alone") {
        Mlp net = scalar_linear(0.3, -0.2);
        const Mlp before = net;
        Optimizer opt(net, 0.1, true);
        MlpGrad g{{Eigen::MatrixXd::Zero(1, 1)}, {Eigen::VectorXd::Zero(1)}};
        opt.step(net, g);
        CHECK(net == before);
    }
    SUBCASE("first adaptive step moves each parameter by the learning rate") {
        Mlp net = scalar_linear(0.0, 0.0);
        Optimizer opt(net, 0.01, true);
        MlpGrad g{{Eigen::MatrixXd::Constant(1, 1, 3.0)}, {Eigen::VectorXd::Constant(1, -0.5)}};
        opt.step(net, g);
        CHECK(net.layers()[0].weight(0, 0) == doctest::Approx(-0.01).epsilon(1e-7));
        CHECK(net.layers()[0].bias(0) == doctest::Approx(0.01).epsilon(1e-6));
        CHECK(opt.steps() == 1);
    }
    SUBCASE("state round-trips") {
        Rng rng(4);
        Mlp net({2, 3, 1}, Activation::Identity, rng);
        Optimizer opt(net, 0.01, true);
        ForwardCache cache;
        const Eigen::MatrixXd y = net.forward(Eigen::MatrixXd::Ones(2, 3), &cache);
        opt.step(net, net.backward(cache, y));
        CHECK(Optimizer::from_json(opt.to_json()) == opt);
    }
}

TEST_CASE("soft update") {
    Mlp target = scalar_linear(0.0, 0.0);
    const Mlp primary = scalar_linear(2.0, 4.0);
    soft_update(primary, target, 0.5);
    CHECK(target.layers()[0].weight(0, 0) == 1.0);
    CHECK(target.layers()[0].bias(0) == 2.0);
    soft_update(primary, target, 1.0);
    CHECK(target == primary);
    CHECK_THROWS_AS(soft_update(primary, target, 0.0), PreconditionError);
    Mlp other({2, 1}, Activation::Identity);
    CHECK_THROWS_AS(soft_update(primary, other, 0.5), PreconditionError);
}

TEST_CASE("checkpoints are bit exact") {
    Rng rng(12);
    const Mlp net({4, 8, 2}, Activation::Tanh, rng);
    CHECK(mlp_from_json(to_json(net)) == net);
    const std::string path = "nn_roundtrip.json";
    save_mlp(net, path);
    const Mlp back = load_mlp(path);
    std::remove(path.c_str());
    CHECK(back == net);
    const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(4, -1.0, 1.0);
    CHECK(back.forward(x) == net.forward(x));

    nlohmann::json doc = to_json(net);
    doc["format"] = "ntn.mlp.v0";
    CHECK_THROWS_AS(mlp_from_json(doc), InterfaceError);
    CHECK_THROWS_AS(load_mlp("no/such/file.json"), InterfaceError);
}

TEST_CASE("initialization is bounded by the fan-in") {
    Rng rng(1);
    const Mlp net({100, 50, 10}, Activation::Identity, rng);
    CHECK(net.layers()[0].weight.cwiseAbs().maxCoeff() <= 0.1);
    CHECK(net.layers()[1].weight.cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(50.0));
    CHECK(net.layers()[0].bias.isZero());
    CHECK(net.all_finite());
}

}
