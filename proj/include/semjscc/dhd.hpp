#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "semjscc/nn.hpp"
#include "semjscc/rng.hpp"
#include "semjscc/tensor.hpp"

namespace semjscc {

// Continuous hash, every component strictly inside (-1,1).
struct HashVector {
    std::vector<double> values;
    int length() const { return static_cast<int>(values.size()); }
};

// Sign-quantized hash over {-1,+1}; ties at exactly 0 map to +1.
struct BinaryHash {
    std::vector<int> bits;
    int length() const { return static_cast<int>(bits.size()); }
};

struct DhdConfig {
    int in_channels = 3;
    std::vector<int> backbone_widths = {16, 32, 64};  // feature dim = last entry
    int hash_bits = 64;                               // N_H
    int num_classes = 21;                             // N_cls, multi-hot label width
    double tau = 0.2;       // proxy-loss softmax temperature
    double sigma_g = 0.5;   // Gaussian width of the quantization likelihoods
    double lambda_sdh = 1.0;
    double lambda_bceq = 0.5;

    int feature_dim() const { return backbone_widths.back(); }
    void validate() const;
};

// Backbone (conv stack -> pooled feature vector) plus fully connected hash
// head with tanh output, and one trainable proxy vector per class. Freezing
// switches the network to inference behavior and excludes its parameters
// from optimization; gradients still flow through it.
class DhdModule {
public:
    DhdModule(const DhdConfig& cfg, std::uint64_t init_seed);

    // Forward through backbone+head; leaves caches for hash_backward.
    HashVector hash(const Tensor& image);
    // Gradient of a scalar loss w.r.t. the input image, given its gradient
    // w.r.t. the hash values of the most recent hash() call. Accumulates
    // parameter grads as a side effect (ignored when frozen).
    Tensor hash_backward(const std::vector<double>& grad_hash);

    void freeze();
    bool frozen() const { return frozen_; }
    void set_training(bool t);

    Sequential& backbone() { return backbone_; }
    Sequential& head() { return head_; }
    Param& proxies() { return proxies_; }  // (num_classes, hash_bits)
    const DhdConfig& config() const { return cfg_; }

    std::vector<NamedParam> trainable_params();

private:
    DhdConfig cfg_;
    Sequential backbone_, head_;
    Param proxies_;
    bool frozen_ = false;
};

// ---- losses -----------------------------------------------------------

// 1 - cosine(h_t, h_s), in [0,2]. Throws UndefinedSimilarity on a zero-norm
// input and std::invalid_argument on length mismatch.
double sdh_loss(const HashVector& h_t, const HashVector& h_s);
double sdh_loss_grad(const HashVector& h_t, const HashVector& h_s, std::vector<double>* grad_t,
                     std::vector<double>* grad_s);

// Mean over components of the two binary cross entropies (base-2 logs)
// between sign labels and Gaussian likelihoods centered at +1/-1.
// Likelihoods are clamped to [1e-7, 1-1e-7] before the log; sign labels are
// constants w.r.t. the gradient.
double bce_q_loss(const HashVector& h, double sigma_g);
double bce_q_loss_grad(const HashVector& h, double sigma_g, std::vector<double>* grad_h);

// Cross entropy (natural log) between the normalized multi-hot label and the
// softmax over cosine similarities of the hash against each class proxy.
double hash_proxy_loss(const std::vector<int>& label, const HashVector& h_t, const Tensor& proxies,
                       double tau);
double hash_proxy_loss_grad(const std::vector<int>& label, const HashVector& h_t,
                            const Tensor& proxies, double tau, std::vector<double>* grad_h,
                            Tensor* grad_proxies);

BinaryHash binarize(const HashVector& h);
int hamming_distance(const BinaryHash& a, const BinaryHash& b);

// 2 hex chars per 8 bits, MSB-first within each byte; bit 1 encodes +1.
std::string hash_to_hex(const BinaryHash& h);
BinaryHash hash_from_hex(const std::string& hex, int n_bits);

// ---- teacher/student transforms ---------------------------------------

class TransformPipeline {
public:
    explicit TransformPipeline(std::vector<std::string> ops);
    Tensor apply(const Tensor& img, Rng& rng) const;
    const std::vector<std::string>& ops() const { return ops_; }

private:
    std::vector<std::string> ops_;
};

// Teacher ops are a strict subset of the student ops (enforced at
// construction): the teacher view is the less-distorted one.
struct TransformPair {
    TransformPipeline teacher;
    TransformPipeline student;
    TransformPair(TransformPipeline t, TransformPipeline s);
};

TransformPair default_transform_pair();

// ---- training ----------------------------------------------------------

struct LabeledImage {
    Tensor image;
    std::vector<int> label;  // multi-hot, 0/1
};

struct DhdTrainConfig {
    int epochs = 10;
    int batch_size = 16;
    double lr0 = 1e-3;
    double lr_decay = 0.95;
    std::uint64_t seed = 1;
};

struct DhdEpochStats {
    int epoch;
    double lr;
    double train_loss;
    double val_loss;
};

struct DhdTrainResult {
    std::vector<DhdEpochStats> log;
    double initial_val_loss;
};

// Trains in place with the combined objective; throws TrainingFailure if the
// loss goes non-finite. Optionally initializes the backbone from a saved
// module state first.
DhdTrainResult train_dhd(DhdModule& module, const std::vector<LabeledImage>& train,
                         const std::vector<LabeledImage>& val, const DhdTrainConfig& cfg,
                         const TransformPair& transforms = default_transform_pair());

void save_dhd(const std::string& path, DhdModule& module,
              const std::vector<std::pair<std::string, std::string>>& extra_meta = {});
DhdModule load_dhd(const std::string& path);

}  // namespace semjscc
