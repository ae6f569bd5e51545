#pragma once

#include "trio/rng.hpp"
#include "trio/tensor.hpp"

#include <memory>
#include <string>
#include <vector>

namespace trio::nets {

struct ParamTensor {
    std::vector<float> w; // values
    std::vector<float> g; // accumulated gradients
};

// Single-sample layers. forward(train=true) caches whatever backward needs;
// backward must be called on the most recent forward input and accumulates
// parameter gradients. All inner loops are OpenMP-parallel with per-element
// fixed arithmetic order, so results do not depend on the thread count.
class Layer {
public:
    virtual ~Layer() = default;
    virtual Tensor forward(const Tensor& x, bool train, Rng* rng) = 0;
    virtual Tensor backward(const Tensor& gy) = 0;
    virtual std::vector<ParamTensor*> params() { return {}; }
    virtual std::string kind() const = 0;

    bool frozen = false;
    float lr_scale = 1.0f;
};

class Conv2d final : public Layer {
public:
    Conv2d(int in_c, int out_c, int k, int stride, int pad);

    void init_weights(Rng& rng); // He-normal fan-in init, zero bias
    Tensor forward(const Tensor& x, bool train, Rng* rng) override;
    Tensor backward(const Tensor& gy) override;
    std::vector<ParamTensor*> params() override { return {&weight, &bias}; }
    std::string kind() const override { return "conv2d"; }

    int in_c, out_c, k, stride, pad;
    ParamTensor weight; // [oc][ic][k][k]
    ParamTensor bias;   // [oc]

private:
    Tensor cached_in_;
};

class ReLU final : public Layer {
public:
    Tensor forward(const Tensor& x, bool train, Rng* rng) override;
    Tensor backward(const Tensor& gy) override;
    std::string kind() const override { return "relu"; }

private:
    Tensor cached_in_;
};

class GlobalAvgPool final : public Layer {
public:
    Tensor forward(const Tensor& x, bool train, Rng* rng) override;
    Tensor backward(const Tensor& gy) override;
    std::string kind() const override { return "gap"; }

private:
    int in_h_ = 0, in_w_ = 0, in_c_ = 0;
};

class Dense final : public Layer {
public:
    Dense(int in_dim, int out_dim);

    void init_weights(Rng& rng);
    Tensor forward(const Tensor& x, bool train, Rng* rng) override;
    Tensor backward(const Tensor& gy) override;
    std::vector<ParamTensor*> params() override { return {&weight, &bias}; }
    std::string kind() const override { return "dense"; }

    int in_dim, out_dim;
    ParamTensor weight; // [out][in]
    ParamTensor bias;   // [out]

private:
    Tensor cached_in_;
};

// Inverted dropout: scales kept activations by 1/(1-p) during training,
// identity at inference.
class Dropout final : public Layer {
public:
    explicit Dropout(double p) : p_(p) {}

    Tensor forward(const Tensor& x, bool train, Rng* rng) override;
    Tensor backward(const Tensor& gy) override;
    std::string kind() const override { return "dropout"; }

    double p() const { return p_; }

private:
    double p_;
    std::vector<float> mask_;
};

// Ordered layer stack with an optional feature tap.
struct Net {
    std::vector<std::unique_ptr<Layer>> layers;
    int feature_layer = -1; // tap output of this layer index for features

    Tensor forward(const Tensor& x, bool train, Rng* rng);
    Tensor backward(const Tensor& gy); // reverse order through all layers
    std::vector<float> features(const Tensor& x); // inference pass up to the tap

    void zero_grads();
    std::vector<Layer*> param_layers();
    size_t param_count();
};

// Adaptive-moment optimizer; state buffers keyed by parameter identity.
class Adam {
public:
    Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(Net& net);
    void set_lr(double lr) { lr_ = lr; }

private:
    struct State {
        std::vector<float> m, v;
    };
    double lr_, beta1_, beta2_, eps_;
    long long t_ = 0;
    std::vector<State> state_;
    std::vector<ParamTensor*> bound_;

    void bind(Net& net);
};

} // namespace trio::nets
