#pragma once

#include <memory>
#include <string>
#include <vector>

#include "semjscc/rng.hpp"
#include "semjscc/tensor.hpp"

namespace semjscc {

struct Param {
    Tensor value;
    Tensor grad;
};

struct NamedParam {
    std::string name;
    Param* p;
};

// Persistent non-trainable tensors (running statistics). Serialized with the
// parameters so a checkpoint restores the full module state.
struct NamedTensor {
    std::string name;
    Tensor* t;
};

// Layer with an explicit backward pass. forward() caches whatever backward()
// needs; backward() consumes the cache of the most recent forward(), returns
// the gradient w.r.t. the input and accumulates (+=) into parameter grads.
class Module {
public:
    virtual ~Module() = default;
    virtual Tensor forward(const Tensor& in) = 0;
    virtual Tensor backward(const Tensor& grad_out) = 0;
    virtual void collect_params(const std::string& prefix, std::vector<NamedParam>& out) {}
    virtual void collect_buffers(const std::string& prefix, std::vector<NamedTensor>& out) {}
    virtual void set_training(bool t) { training_ = t; }
    bool training() const { return training_; }

protected:
    bool training_ = true;
};

class Sequential : public Module {
public:
    Sequential() = default;
    void add(std::unique_ptr<Module> m) { mods_.push_back(std::move(m)); }
    template <class T, class... Args>
    T* emplace(Args&&... args) {
        auto m = std::make_unique<T>(std::forward<Args>(args)...);
        T* raw = m.get();
        mods_.push_back(std::move(m));
        return raw;
    }
    std::size_t size() const { return mods_.size(); }
    Module& at(std::size_t i) { return *mods_[i]; }

    Tensor forward(const Tensor& in) override;
    Tensor backward(const Tensor& grad_out) override;
    void collect_params(const std::string& prefix, std::vector<NamedParam>& out) override;
    void collect_buffers(const std::string& prefix, std::vector<NamedTensor>& out) override;
    void set_training(bool t) override;

private:
    std::vector<std::unique_ptr<Module>> mods_;
};

class Conv2d : public Module {
public:
    Conv2d(int in_ch, int out_ch, int ksize, int stride, int pad, Rng& rng);

    Tensor forward(const Tensor& in) override;
    Tensor backward(const Tensor& grad_out) override;
    void collect_params(const std::string& prefix, std::vector<NamedParam>& out) override;

    Param weight;  // (out_ch, in_ch, k, k)
    Param bias;    // (out_ch)

private:
    int in_ch_, out_ch_, k_, stride_, pad_;
    Tensor in_cache_;
};

class Linear : public Module {
public:
    Linear(int in_dim, int out_dim, Rng& rng);

    Tensor forward(const Tensor& in) override;
    Tensor backward(const Tensor& grad_out) override;
    void collect_params(const std::string& prefix, std::vector<NamedParam>& out) override;

    Param weight;  // (out_dim, in_dim)
    Param bias;    // (out_dim)

private:
    int in_dim_, out_dim_;
    Tensor in_cache_;
};

class LeakyReLU : public Module {
public:
    explicit LeakyReLU(double slope = 0.0) : slope_(slope) {}
    Tensor forward(const Tensor& in) override;
    Tensor backward(const Tensor& grad_out) override;

private:
    double slope_;
    Tensor in_cache_;
};

class Tanh : public Module {
public:
    Tensor forward(const Tensor& in) override;
    Tensor backward(const Tensor& grad_out) override;

private:
    Tensor out_cache_;
};

class Sigmoid : public Module {
public:
    Tensor forward(const Tensor& in) override;
    Tensor backward(const Tensor& grad_out) override;

private:
    Tensor out_cache_;
};

// Per-channel normalization over the spatial dimensions with learned affine
// and running statistics. Training mode normalizes with the current sample's
// statistics and updates the running buffers; eval mode normalizes with the
// running buffers (so a frozen module is a fixed function of its input).
class InstanceNorm2d : public Module {
public:
    explicit InstanceNorm2d(int channels, double eps = 1e-5, double momentum = 0.1);

    Tensor forward(const Tensor& in) override;
    Tensor backward(const Tensor& grad_out) override;
    void collect_params(const std::string& prefix, std::vector<NamedParam>& out) override;
    void collect_buffers(const std::string& prefix, std::vector<NamedTensor>& out) override;

    Param gamma, beta;           // (C)
    Tensor running_mean, running_var;  // (C)

private:
    int channels_;
    double eps_, momentum_;
    bool used_batch_stats_ = false;
    Tensor xhat_cache_;   // normalized input (train mode)
    std::vector<double> inv_std_cache_;
};

class UpsampleNearest2x : public Module {
public:
    Tensor forward(const Tensor& in) override;
    Tensor backward(const Tensor& grad_out) override;

private:
    std::vector<int> in_shape_;
};

// (C,H,W) -> (C): mean over the spatial dimensions.
class GlobalMeanPool : public Module {
public:
    Tensor forward(const Tensor& in) override;
    Tensor backward(const Tensor& grad_out) override;

private:
    std::vector<int> in_shape_;
};

// y = x + conv2(act(conv1(x))), both convs 3x3 stride 1 same-padding.
class ResidualBlock : public Module {
public:
    ResidualBlock(int channels, double slope, Rng& rng);

    Tensor forward(const Tensor& in) override;
    Tensor backward(const Tensor& grad_out) override;
    void collect_params(const std::string& prefix, std::vector<NamedParam>& out) override;
    void set_training(bool t) override;

private:
    Conv2d conv1_, conv2_;
    LeakyReLU act_;
};

// (c_out,H,W) -> rank-1 vector of 2k interleaved reals, k = c_out/2*H*W.
// Channel c < c_out/2 holds the real part of symbol ((c*H)+y)*W+x and channel
// c + c_out/2 the imaginary part.
class ComplexInterleave : public Module {
public:
    Tensor forward(const Tensor& in) override;
    Tensor backward(const Tensor& grad_out) override;

private:
    std::vector<int> in_shape_;
};

// Inverse of ComplexInterleave for a fixed target shape.
class ComplexDeinterleave : public Module {
public:
    ComplexDeinterleave(int c_out, int h, int w) : c_out_(c_out), h_(h), w_(w) {}
    Tensor forward(const Tensor& in) override;
    Tensor backward(const Tensor& grad_out) override;

private:
    int c_out_, h_, w_;
};

// Differentiable average-power normalization, the final encoder stage.
class PowerNormalize : public Module {
public:
    Tensor forward(const Tensor& in) override;
    Tensor backward(const Tensor& grad_out) override;

private:
    Tensor in_cache_;
    double scale_ = 1.0;
    double nsq_ = 0.0;
};

void zero_grads(Module& m);
std::vector<NamedParam> named_params(Module& m, const std::string& prefix = "");
std::vector<NamedTensor> named_state(Module& m, const std::string& prefix = "");
long param_count(Module& m);

// FNV-1a over the raw bytes of all parameter values, in collection order.
// Detects any drift in trainable state.
std::uint64_t param_checksum(Module& m);

class Adam {
public:
    explicit Adam(std::vector<NamedParam> params, double beta1 = 0.9, double beta2 = 0.999,
                  double eps = 1e-8);
    void step(double lr);
    void zero_grad();
    long steps_taken() const { return t_; }

    // Moment state, exposed for checkpointing exact-resume state.
    std::vector<NamedParam>& params() { return params_; }
    std::vector<Tensor>& first_moments() { return m_; }
    std::vector<Tensor>& second_moments() { return v_; }
    void set_steps_taken(long t) { t_ = t; }

private:
    std::vector<NamedParam> params_;
    std::vector<Tensor> m_, v_;
    double beta1_, beta2_, eps_;
    long t_ = 0;
};

}  // namespace semjscc
