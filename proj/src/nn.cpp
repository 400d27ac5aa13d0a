#include "semjscc/nn.hpp"

#include <cmath>
#include <cstring>

#include "semjscc/channel.hpp"

namespace semjscc {

// ---------------------------------------------------------------- Sequential

Tensor Sequential::forward(const Tensor& in) {
    Tensor x = in;
    for (auto& m : mods_) x = m->forward(x);
    return x;
}

Tensor Sequential::backward(const Tensor& grad_out) {
    Tensor g = grad_out;
    for (auto it = mods_.rbegin(); it != mods_.rend(); ++it) g = (*it)->backward(g);
    return g;
}

void Sequential::collect_params(const std::string& prefix, std::vector<NamedParam>& out) {
    for (std::size_t i = 0; i < mods_.size(); ++i)
        mods_[i]->collect_params(prefix + std::to_string(i) + ".", out);
}

void Sequential::collect_buffers(const std::string& prefix, std::vector<NamedTensor>& out) {
    for (std::size_t i = 0; i < mods_.size(); ++i)
        mods_[i]->collect_buffers(prefix + std::to_string(i) + ".", out);
}

void Sequential::set_training(bool t) {
    training_ = t;
    for (auto& m : mods_) m->set_training(t);
}

// -------------------------------------------------------------------- Conv2d

Conv2d::Conv2d(int in_ch, int out_ch, int ksize, int stride, int pad, Rng& rng)
    : in_ch_(in_ch), out_ch_(out_ch), k_(ksize), stride_(stride), pad_(pad) {
    weight.value = Tensor({out_ch, in_ch, ksize, ksize});
    weight.grad = Tensor({out_ch, in_ch, ksize, ksize});
    bias.value = Tensor({out_ch});
    bias.grad = Tensor({out_ch});
    const double sd = std::sqrt(2.0 / (in_ch * ksize * ksize));
    for (long i = 0; i < weight.value.numel(); ++i) weight.value[i] = sd * rng.normal();
}

Tensor Conv2d::forward(const Tensor& in) {
    if (in.rank() != 3 || in.dim(0) != in_ch_)
        throw ConfigError("Conv2d: expected (" + std::to_string(in_ch_) + ",H,W), got " + in.shape_str());
    in_cache_ = in;
    const int H = in.dim(1), W = in.dim(2);
    const int OH = (H + 2 * pad_ - k_) / stride_ + 1;
    const int OW = (W + 2 * pad_ - k_) / stride_ + 1;
    Tensor out({out_ch_, OH, OW});
    for (int o = 0; o < out_ch_; ++o) {
        const double b = bias.value[o];
        for (int oy = 0; oy < OH; ++oy) {
            for (int ox = 0; ox < OW; ++ox) {
                double acc = b;
                for (int c = 0; c < in_ch_; ++c) {
                    for (int ky = 0; ky < k_; ++ky) {
                        const int iy = oy * stride_ - pad_ + ky;
                        if (iy < 0 || iy >= H) continue;
                        for (int kx = 0; kx < k_; ++kx) {
                            const int ix = ox * stride_ - pad_ + kx;
                            if (ix < 0 || ix >= W) continue;
                            acc += weight.value[((static_cast<long>(o) * in_ch_ + c) * k_ + ky) * k_ + kx] *
                                   in.at(c, iy, ix);
                        }
                    }
                }
                out.at(o, oy, ox) = acc;
            }
        }
    }
    return out;
}

Tensor Conv2d::backward(const Tensor& grad_out) {
    const Tensor& in = in_cache_;
    const int H = in.dim(1), W = in.dim(2);
    const int OH = grad_out.dim(1), OW = grad_out.dim(2);
    Tensor gin({in_ch_, H, W});
    for (int o = 0; o < out_ch_; ++o) {
        for (int oy = 0; oy < OH; ++oy) {
            for (int ox = 0; ox < OW; ++ox) {
                const double g = grad_out.at(o, oy, ox);
                bias.grad[o] += g;
                for (int c = 0; c < in_ch_; ++c) {
                    for (int ky = 0; ky < k_; ++ky) {
                        const int iy = oy * stride_ - pad_ + ky;
                        if (iy < 0 || iy >= H) continue;
                        for (int kx = 0; kx < k_; ++kx) {
                            const int ix = ox * stride_ - pad_ + kx;
                            if (ix < 0 || ix >= W) continue;
                            const long wi = ((static_cast<long>(o) * in_ch_ + c) * k_ + ky) * k_ + kx;
                            weight.grad[wi] += g * in.at(c, iy, ix);
                            gin.at(c, iy, ix) += g * weight.value[wi];
                        }
                    }
                }
            }
        }
    }
    return gin;
}

void Conv2d::collect_params(const std::string& prefix, std::vector<NamedParam>& out) {
    out.push_back({prefix + "weight", &weight});
    out.push_back({prefix + "bias", &bias});
}

// -------------------------------------------------------------------- Linear

Linear::Linear(int in_dim, int out_dim, Rng& rng) : in_dim_(in_dim), out_dim_(out_dim) {
    weight.value = Tensor({out_dim, in_dim});
    weight.grad = Tensor({out_dim, in_dim});
    bias.value = Tensor({out_dim});
    bias.grad = Tensor({out_dim});
    const double sd = std::sqrt(1.0 / in_dim);
    for (long i = 0; i < weight.value.numel(); ++i) weight.value[i] = sd * rng.normal();
}

Tensor Linear::forward(const Tensor& in) {
    if (in.numel() != in_dim_)
        throw ConfigError("Linear: expected " + std::to_string(in_dim_) + " inputs, got " + in.shape_str());
    in_cache_ = in;
    Tensor out({out_dim_});
    for (int o = 0; o < out_dim_; ++o) {
        double acc = bias.value[o];
        const double* w = weight.value.data() + static_cast<long>(o) * in_dim_;
        for (int i = 0; i < in_dim_; ++i) acc += w[i] * in[i];
        out[o] = acc;
    }
    return out;
}

Tensor Linear::backward(const Tensor& grad_out) {
    Tensor gin(in_cache_.shape());
    for (int o = 0; o < out_dim_; ++o) {
        const double g = grad_out[o];
        bias.grad[o] += g;
        const long base = static_cast<long>(o) * in_dim_;
        for (int i = 0; i < in_dim_; ++i) {
            weight.grad[base + i] += g * in_cache_[i];
            gin[i] += g * weight.value[base + i];
        }
    }
    return gin;
}

void Linear::collect_params(const std::string& prefix, std::vector<NamedParam>& out) {
    out.push_back({prefix + "weight", &weight});
    out.push_back({prefix + "bias", &bias});
}

// --------------------------------------------------------------- activations

Tensor LeakyReLU::forward(const Tensor& in) {
    in_cache_ = in;
    Tensor out(in.shape());
    for (long i = 0; i < in.numel(); ++i) out[i] = in[i] >= 0.0 ? in[i] : slope_ * in[i];
    return out;
}

Tensor LeakyReLU::backward(const Tensor& grad_out) {
    Tensor gin(in_cache_.shape());
    for (long i = 0; i < gin.numel(); ++i)
        gin[i] = in_cache_[i] >= 0.0 ? grad_out[i] : slope_ * grad_out[i];
    return gin;
}

Tensor Tanh::forward(const Tensor& in) {
    Tensor out(in.shape());
    for (long i = 0; i < in.numel(); ++i) out[i] = std::tanh(in[i]);
    out_cache_ = out;
    return out;
}

Tensor Tanh::backward(const Tensor& grad_out) {
    Tensor gin(out_cache_.shape());
    for (long i = 0; i < gin.numel(); ++i)
        gin[i] = grad_out[i] * (1.0 - out_cache_[i] * out_cache_[i]);
    return gin;
}

Tensor Sigmoid::forward(const Tensor& in) {
    Tensor out(in.shape());
    for (long i = 0; i < in.numel(); ++i) out[i] = 1.0 / (1.0 + std::exp(-in[i]));
    out_cache_ = out;
    return out;
}

Tensor Sigmoid::backward(const Tensor& grad_out) {
    Tensor gin(out_cache_.shape());
    for (long i = 0; i < gin.numel(); ++i)
        gin[i] = grad_out[i] * out_cache_[i] * (1.0 - out_cache_[i]);
    return gin;
}

// ------------------------------------------------------------- InstanceNorm2d

InstanceNorm2d::InstanceNorm2d(int channels, double eps, double momentum)
    : channels_(channels), eps_(eps), momentum_(momentum) {
    gamma.value = Tensor({channels});
    gamma.grad = Tensor({channels});
    gamma.value.fill(1.0);
    beta.value = Tensor({channels});
    beta.grad = Tensor({channels});
    running_mean = Tensor({channels});
    running_var = Tensor({channels});
    running_var.fill(1.0);
}

Tensor InstanceNorm2d::forward(const Tensor& in) {
    if (in.rank() != 3 || in.dim(0) != channels_)
        throw ConfigError("InstanceNorm2d: expected (" + std::to_string(channels_) + ",H,W), got " +
                          in.shape_str());
    const int H = in.dim(1), W = in.dim(2);
    const long M = static_cast<long>(H) * W;
    Tensor out(in.shape());
    used_batch_stats_ = training_;
    if (training_) {
        xhat_cache_ = Tensor(in.shape());
        inv_std_cache_.assign(channels_, 0.0);
        for (int c = 0; c < channels_; ++c) {
            double mean = 0.0;
            for (int h = 0; h < H; ++h)
                for (int w = 0; w < W; ++w) mean += in.at(c, h, w);
            mean /= static_cast<double>(M);
            double var = 0.0;
            for (int h = 0; h < H; ++h)
                for (int w = 0; w < W; ++w) {
                    const double d = in.at(c, h, w) - mean;
                    var += d * d;
                }
            var /= static_cast<double>(M);
            const double inv_std = 1.0 / std::sqrt(var + eps_);
            inv_std_cache_[c] = inv_std;
            for (int h = 0; h < H; ++h)
                for (int w = 0; w < W; ++w) {
                    const double xh = (in.at(c, h, w) - mean) * inv_std;
                    xhat_cache_.at(c, h, w) = xh;
                    out.at(c, h, w) = gamma.value[c] * xh + beta.value[c];
                }
            running_mean[c] = (1.0 - momentum_) * running_mean[c] + momentum_ * mean;
            running_var[c] = (1.0 - momentum_) * running_var[c] + momentum_ * var;
        }
    } else {
        for (int c = 0; c < channels_; ++c) {
            const double inv_std = 1.0 / std::sqrt(running_var[c] + eps_);
            const double mean = running_mean[c];
            for (int h = 0; h < H; ++h)
                for (int w = 0; w < W; ++w)
                    out.at(c, h, w) = gamma.value[c] * (in.at(c, h, w) - mean) * inv_std + beta.value[c];
        }
        // Cache what eval-mode backward needs.
        inv_std_cache_.assign(channels_, 0.0);
        for (int c = 0; c < channels_; ++c) inv_std_cache_[c] = 1.0 / std::sqrt(running_var[c] + eps_);
        xhat_cache_ = Tensor(in.shape());
        for (int c = 0; c < channels_; ++c)
            for (int h = 0; h < H; ++h)
                for (int w = 0; w < W; ++w)
                    xhat_cache_.at(c, h, w) = (in.at(c, h, w) - running_mean[c]) * inv_std_cache_[c];
    }
    return out;
}

Tensor InstanceNorm2d::backward(const Tensor& grad_out) {
    const int H = grad_out.dim(1), W = grad_out.dim(2);
    const long M = static_cast<long>(H) * W;
    Tensor gin(grad_out.shape());
    for (int c = 0; c < channels_; ++c) {
        double gsum = 0.0, gxsum = 0.0;
        for (int h = 0; h < H; ++h)
            for (int w = 0; w < W; ++w) {
                const double g = grad_out.at(c, h, w);
                gsum += g;
                gxsum += g * xhat_cache_.at(c, h, w);
            }
        gamma.grad[c] += gxsum;
        beta.grad[c] += gsum;
        const double scale = gamma.value[c] * inv_std_cache_[c];
        if (used_batch_stats_) {
            const double mg = gsum / static_cast<double>(M);
            const double mgx = gxsum / static_cast<double>(M);
            for (int h = 0; h < H; ++h)
                for (int w = 0; w < W; ++w)
                    gin.at(c, h, w) =
                        scale * (grad_out.at(c, h, w) - mg - xhat_cache_.at(c, h, w) * mgx);
        } else {
            for (int h = 0; h < H; ++h)
                for (int w = 0; w < W; ++w) gin.at(c, h, w) = scale * grad_out.at(c, h, w);
        }
    }
    return gin;
}

void InstanceNorm2d::collect_params(const std::string& prefix, std::vector<NamedParam>& out) {
    out.push_back({prefix + "gamma", &gamma});
    out.push_back({prefix + "beta", &beta});
}

void InstanceNorm2d::collect_buffers(const std::string& prefix, std::vector<NamedTensor>& out) {
    out.push_back({prefix + "running_mean", &running_mean});
    out.push_back({prefix + "running_var", &running_var});
}

// ------------------------------------------------------------------ resizing

Tensor UpsampleNearest2x::forward(const Tensor& in) {
    in_shape_ = in.shape();
    const int C = in.dim(0), H = in.dim(1), W = in.dim(2);
    Tensor out({C, 2 * H, 2 * W});
    for (int c = 0; c < C; ++c)
        for (int h = 0; h < H; ++h)
            for (int w = 0; w < W; ++w) {
                const double v = in.at(c, h, w);
                out.at(c, 2 * h, 2 * w) = v;
                out.at(c, 2 * h, 2 * w + 1) = v;
                out.at(c, 2 * h + 1, 2 * w) = v;
                out.at(c, 2 * h + 1, 2 * w + 1) = v;
            }
    return out;
}

Tensor UpsampleNearest2x::backward(const Tensor& grad_out) {
    Tensor gin(in_shape_);
    const int C = in_shape_[0], H = in_shape_[1], W = in_shape_[2];
    for (int c = 0; c < C; ++c)
        for (int h = 0; h < H; ++h)
            for (int w = 0; w < W; ++w)
                gin.at(c, h, w) = grad_out.at(c, 2 * h, 2 * w) + grad_out.at(c, 2 * h, 2 * w + 1) +
                                  grad_out.at(c, 2 * h + 1, 2 * w) + grad_out.at(c, 2 * h + 1, 2 * w + 1);
    return gin;
}

Tensor GlobalMeanPool::forward(const Tensor& in) {
    in_shape_ = in.shape();
    const int C = in.dim(0), H = in.dim(1), W = in.dim(2);
    Tensor out({C});
    for (int c = 0; c < C; ++c) {
        double s = 0.0;
        for (int h = 0; h < H; ++h)
            for (int w = 0; w < W; ++w) s += in.at(c, h, w);
        out[c] = s / (static_cast<double>(H) * W);
    }
    return out;
}

Tensor GlobalMeanPool::backward(const Tensor& grad_out) {
    Tensor gin(in_shape_);
    const int C = in_shape_[0], H = in_shape_[1], W = in_shape_[2];
    const double inv = 1.0 / (static_cast<double>(H) * W);
    for (int c = 0; c < C; ++c) {
        const double g = grad_out[c] * inv;
        for (int h = 0; h < H; ++h)
            for (int w = 0; w < W; ++w) gin.at(c, h, w) = g;
    }
    return gin;
}

// ------------------------------------------------------------- ResidualBlock

ResidualBlock::ResidualBlock(int channels, double slope, Rng& rng)
    : conv1_(channels, channels, 3, 1, 1, rng), conv2_(channels, channels, 3, 1, 1, rng), act_(slope) {}

Tensor ResidualBlock::forward(const Tensor& in) {
    Tensor branch = conv2_.forward(act_.forward(conv1_.forward(in)));
    Tensor out(in.shape());
    for (long i = 0; i < in.numel(); ++i) out[i] = in[i] + branch[i];
    return out;
}

Tensor ResidualBlock::backward(const Tensor& grad_out) {
    Tensor gb = conv1_.backward(act_.backward(conv2_.backward(grad_out)));
    Tensor gin(grad_out.shape());
    for (long i = 0; i < gin.numel(); ++i) gin[i] = grad_out[i] + gb[i];
    return gin;
}

void ResidualBlock::collect_params(const std::string& prefix, std::vector<NamedParam>& out) {
    conv1_.collect_params(prefix + "conv1.", out);
    conv2_.collect_params(prefix + "conv2.", out);
}

void ResidualBlock::set_training(bool t) {
    training_ = t;
    conv1_.set_training(t);
    act_.set_training(t);
    conv2_.set_training(t);
}

// ------------------------------------------------------- complex interleaving

Tensor ComplexInterleave::forward(const Tensor& in) {
    if (in.rank() != 3 || in.dim(0) % 2 != 0)
        throw ConfigError("ComplexInterleave: expected even channel count, got " + in.shape_str());
    in_shape_ = in.shape();
    const int half = in.dim(0) / 2, H = in.dim(1), W = in.dim(2);
    Tensor out({2 * half * H * W});
    for (int c = 0; c < half; ++c)
        for (int h = 0; h < H; ++h)
            for (int w = 0; w < W; ++w) {
                const long s = (static_cast<long>(c) * H + h) * W + w;
                out[2 * s] = in.at(c, h, w);
                out[2 * s + 1] = in.at(c + half, h, w);
            }
    return out;
}

Tensor ComplexInterleave::backward(const Tensor& grad_out) {
    Tensor gin(in_shape_);
    const int half = in_shape_[0] / 2, H = in_shape_[1], W = in_shape_[2];
    for (int c = 0; c < half; ++c)
        for (int h = 0; h < H; ++h)
            for (int w = 0; w < W; ++w) {
                const long s = (static_cast<long>(c) * H + h) * W + w;
                gin.at(c, h, w) = grad_out[2 * s];
                gin.at(c + half, h, w) = grad_out[2 * s + 1];
            }
    return gin;
}

Tensor ComplexDeinterleave::forward(const Tensor& in) {
    const int half = c_out_ / 2;
    if (in.numel() != static_cast<long>(c_out_) * h_ * w_)
        throw ConfigError("ComplexDeinterleave: expected " + std::to_string(static_cast<long>(c_out_) * h_ * w_) +
                          " values, got " + in.shape_str());
    Tensor out({c_out_, h_, w_});
    for (int c = 0; c < half; ++c)
        for (int h = 0; h < h_; ++h)
            for (int w = 0; w < w_; ++w) {
                const long s = (static_cast<long>(c) * h_ + h) * w_ + w;
                out.at(c, h, w) = in[2 * s];
                out.at(c + half, h, w) = in[2 * s + 1];
            }
    return out;
}

Tensor ComplexDeinterleave::backward(const Tensor& grad_out) {
    const int half = c_out_ / 2;
    Tensor gin({static_cast<int>(static_cast<long>(c_out_) * h_ * w_)});
    for (int c = 0; c < half; ++c)
        for (int h = 0; h < h_; ++h)
            for (int w = 0; w < w_; ++w) {
                const long s = (static_cast<long>(c) * h_ + h) * w_ + w;
                gin[2 * s] = grad_out.at(c, h, w);
                gin[2 * s + 1] = grad_out.at(c + half, h, w);
            }
    return gin;
}

// ------------------------------------------------------------ PowerNormalize

Tensor PowerNormalize::forward(const Tensor& in) {
    in_cache_ = in;
    ChannelCodeword cw = normalize_power(in.vec());
    nsq_ = squared_norm(in.vec());
    scale_ = std::sqrt(static_cast<double>(cw.k) / nsq_);
    return Tensor(in.shape(), std::move(cw.symbols));
}

Tensor PowerNormalize::backward(const Tensor& grad_out) {
    // y = x*sqrt(k)/||x||  =>  dL/dx = s*(g - x*(g.x)/||x||^2), s = sqrt(k)/||x||
    const double gx = dot(grad_out.vec(), in_cache_.vec());
    Tensor gin(in_cache_.shape());
    for (long i = 0; i < gin.numel(); ++i)
        gin[i] = scale_ * (grad_out[i] - in_cache_[i] * gx / nsq_);
    return gin;
}

// ----------------------------------------------------------------- utilities

void zero_grads(Module& m) {
    std::vector<NamedParam> ps;
    m.collect_params("", ps);
    for (auto& np : ps) np.p->grad.fill(0.0);
}

std::vector<NamedParam> named_params(Module& m, const std::string& prefix) {
    std::vector<NamedParam> ps;
    m.collect_params(prefix, ps);
    return ps;
}

std::vector<NamedTensor> named_state(Module& m, const std::string& prefix) {
    std::vector<NamedTensor> out;
    std::vector<NamedParam> ps;
    m.collect_params(prefix, ps);
    for (auto& np : ps) out.push_back({np.name, &np.p->value});
    m.collect_buffers(prefix, out);
    return out;
}

long param_count(Module& m) {
    long n = 0;
    for (auto& np : named_params(m)) n += np.p->value.numel();
    return n;
}

std::uint64_t param_checksum(Module& m) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (auto& np : named_params(m)) {
        const Tensor& t = np.p->value;
        const unsigned char* bytes = reinterpret_cast<const unsigned char*>(t.data());
        const std::size_t n = static_cast<std::size_t>(t.numel()) * sizeof(double);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= bytes[i];
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

// ---------------------------------------------------------------------- Adam

Adam::Adam(std::vector<NamedParam> params, double beta1, double beta2, double eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (auto& np : params_) {
        m_.emplace_back(np.p->value.shape());
        v_.emplace_back(np.p->value.shape());
    }
}

void Adam::step(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t p = 0; p < params_.size(); ++p) {
        Tensor& val = params_[p].p->value;
        const Tensor& g = params_[p].p->grad;
        Tensor& m = m_[p];
        Tensor& v = v_[p];
        for (long i = 0; i < val.numel(); ++i) {
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            val[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

void Adam::zero_grad() {
    for (auto& np : params_) np.p->grad.fill(0.0);
}

}  // namespace semjscc
