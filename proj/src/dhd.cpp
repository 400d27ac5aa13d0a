#include "semjscc/dhd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "semjscc/checkpoint.hpp"
#include "semjscc/errors.hpp"
#include "semjscc/image_ops.hpp"
#include "semjscc/training_schedule.hpp"

namespace semjscc {

namespace {
constexpr double kLikelihoodEps = 1e-7;  // clamp before logs
constexpr double kOpenClamp = 1e-12;     // keeps hash values strictly inside (-1,1)
constexpr double kLn2 = 0.69314718055994530941723212145818;

double checked_norm(const std::vector<double>& v, const char* what) {
    const double n = std::sqrt(squared_norm(v));
    if (n == 0.0) throw UndefinedSimilarity(std::string(what) + ": zero-norm vector");
    return n;
}
}  // namespace

void DhdConfig::validate() const {
    if (in_channels <= 0 || hash_bits <= 0 || num_classes <= 0)
        throw ConfigError("dhd: dimensions must be positive");
    if (backbone_widths.empty()) throw ConfigError("dhd: backbone_widths must be non-empty");
    if (tau <= 0.0 || sigma_g <= 0.0) throw ConfigError("dhd: tau and sigma_g must be positive");
    if (lambda_sdh < 0.0 || lambda_bceq < 0.0) throw ConfigError("dhd: loss weights must be >= 0");
}

DhdModule::DhdModule(const DhdConfig& cfg, std::uint64_t init_seed) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(init_seed);
    int prev = cfg_.in_channels;
    for (std::size_t i = 0; i < cfg_.backbone_widths.size(); ++i) {
        const int w = cfg_.backbone_widths[i];
        const int stride = i == 0 ? 1 : 2;
        backbone_.emplace<Conv2d>(prev, w, 3, stride, 1, rng);
        backbone_.emplace<InstanceNorm2d>(w);
        backbone_.emplace<LeakyReLU>(0.0);
        prev = w;
    }
    backbone_.emplace<GlobalMeanPool>();
    head_.emplace<Linear>(cfg_.feature_dim(), cfg_.hash_bits, rng);
    head_.emplace<Tanh>();

    Rng prng(splitmix64(init_seed ^ static_cast<std::uint64_t>(Stream::ProxyInit)));
    proxies_.value = Tensor({cfg_.num_classes, cfg_.hash_bits});
    proxies_.grad = Tensor({cfg_.num_classes, cfg_.hash_bits});
    const double sd = 1.0 / std::sqrt(static_cast<double>(cfg_.hash_bits));
    for (long i = 0; i < proxies_.value.numel(); ++i) proxies_.value[i] = sd * prng.normal();
}

HashVector DhdModule::hash(const Tensor& image) {
    if (image.rank() != 3 || image.dim(0) != cfg_.in_channels)
        throw ConfigError("dhd hash: expected (" + std::to_string(cfg_.in_channels) +
                          ",H,W) image, got " + image.shape_str());
    // Two stride-2 stages at minimum width; anything smaller collapses to
    // empty feature maps.
    if (cfg_.backbone_widths.size() > 1 && (image.dim(1) < 4 || image.dim(2) < 4))
        throw ConfigError("dhd hash: image too small for the backbone");
    Tensor h = head_.forward(backbone_.forward(image));
    HashVector out;
    out.values.resize(static_cast<std::size_t>(h.numel()));
    for (long i = 0; i < h.numel(); ++i)
        out.values[static_cast<std::size_t>(i)] = std::clamp(h[i], -1.0 + kOpenClamp, 1.0 - kOpenClamp);
    return out;
}

Tensor DhdModule::hash_backward(const std::vector<double>& grad_hash) {
    Tensor g({static_cast<int>(grad_hash.size())}, grad_hash);
    return backbone_.backward(head_.backward(g));
}

void DhdModule::freeze() {
    frozen_ = true;
    set_training(false);
}

void DhdModule::set_training(bool t) {
    if (frozen_ && t) throw ConfigError("dhd: cannot re-enter training mode on a frozen module");
    backbone_.set_training(t);
    head_.set_training(t);
}

std::vector<NamedParam> DhdModule::trainable_params() {
    std::vector<NamedParam> ps;
    backbone_.collect_params("backbone.", ps);
    head_.collect_params("head.", ps);
    ps.push_back({"proxies", &proxies_});
    return ps;
}

// ---------------------------------------------------------------- sdh loss

double sdh_loss(const HashVector& h_t, const HashVector& h_s) {
    return sdh_loss_grad(h_t, h_s, nullptr, nullptr);
}

double sdh_loss_grad(const HashVector& h_t, const HashVector& h_s, std::vector<double>* grad_t,
                     std::vector<double>* grad_s) {
    if (h_t.values.size() != h_s.values.size())
        throw std::invalid_argument("sdh_loss: hash lengths differ");
    const double nt = checked_norm(h_t.values, "sdh_loss");
    const double ns = checked_norm(h_s.values, "sdh_loss");
    const double c = dot(h_t.values, h_s.values) / (nt * ns);
    if (grad_t) {
        grad_t->resize(h_t.values.size());
        for (std::size_t i = 0; i < h_t.values.size(); ++i)
            (*grad_t)[i] = -h_s.values[i] / (nt * ns) + c * h_t.values[i] / (nt * nt);
    }
    if (grad_s) {
        grad_s->resize(h_s.values.size());
        for (std::size_t i = 0; i < h_s.values.size(); ++i)
            (*grad_s)[i] = -h_t.values[i] / (nt * ns) + c * h_s.values[i] / (ns * ns);
    }
    return 1.0 - c;
}

// -------------------------------------------------------------- bce-Q loss

double bce_q_loss(const HashVector& h, double sigma_g) {
    return bce_q_loss_grad(h, sigma_g, nullptr);
}

double bce_q_loss_grad(const HashVector& h, double sigma_g, std::vector<double>* grad_h) {
    if (!(sigma_g > 0.0)) throw std::invalid_argument("bce_q_loss: sigma_g must be > 0");
    const std::size_t n = h.values.size();
    if (grad_h) grad_h->assign(n, 0.0);
    const double inv2s2 = 1.0 / (2.0 * sigma_g * sigma_g);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double hv = h.values[i];
        const double gp_raw = std::exp(-(hv - 1.0) * (hv - 1.0) * inv2s2);
        const double gm_raw = std::exp(-(hv + 1.0) * (hv + 1.0) * inv2s2);
        const double gp = std::clamp(gp_raw, kLikelihoodEps, 1.0 - kLikelihoodEps);
        const double gm = std::clamp(gm_raw, kLikelihoodEps, 1.0 - kLikelihoodEps);
        const bool positive = hv >= 0.0;  // b+ = 1 iff sign(h) = +1 (ties at 0 -> +1)
        double term, dterm_dgp, dterm_dgm;
        if (positive) {
            term = -std::log2(gp) - std::log2(1.0 - gm);
            dterm_dgp = -1.0 / (gp * kLn2);
            dterm_dgm = 1.0 / ((1.0 - gm) * kLn2);
        } else {
            term = -std::log2(1.0 - gp) - std::log2(gm);
            dterm_dgp = 1.0 / ((1.0 - gp) * kLn2);
            dterm_dgm = -1.0 / (gm * kLn2);
        }
        total += term;
        if (grad_h) {
            const bool gp_clamped = gp_raw < kLikelihoodEps || gp_raw > 1.0 - kLikelihoodEps;
            const bool gm_clamped = gm_raw < kLikelihoodEps || gm_raw > 1.0 - kLikelihoodEps;
            const double dgp = gp_clamped ? 0.0 : gp * (-(hv - 1.0) * 2.0 * inv2s2);
            const double dgm = gm_clamped ? 0.0 : gm * (-(hv + 1.0) * 2.0 * inv2s2);
            (*grad_h)[i] = (dterm_dgp * dgp + dterm_dgm * dgm) / static_cast<double>(n);
        }
    }
    return total / static_cast<double>(n);
}

// --------------------------------------------------------- hash proxy loss

double hash_proxy_loss(const std::vector<int>& label, const HashVector& h_t, const Tensor& proxies,
                       double tau) {
    return hash_proxy_loss_grad(label, h_t, proxies, tau, nullptr, nullptr);
}

double hash_proxy_loss_grad(const std::vector<int>& label, const HashVector& h_t,
                            const Tensor& proxies, double tau, std::vector<double>* grad_h,
                            Tensor* grad_proxies) {
    if (!(tau > 0.0)) throw std::invalid_argument("hash_proxy_loss: tau must be > 0");
    const int n_cls = proxies.dim(0);
    const int n_h = proxies.dim(1);
    if (static_cast<int>(label.size()) != n_cls)
        throw std::invalid_argument("hash_proxy_loss: label width does not match proxy count");
    if (h_t.length() != n_h) throw std::invalid_argument("hash_proxy_loss: hash length mismatch");
    double l1 = 0.0;
    for (int b : label) l1 += b;
    if (l1 <= 0.0) throw std::invalid_argument("hash_proxy_loss: label has no set bits");

    const double nh = checked_norm(h_t.values, "hash_proxy_loss");
    std::vector<double> cosines(n_cls), pnorm(n_cls);
    for (int i = 0; i < n_cls; ++i) {
        const double* p = proxies.data() + static_cast<long>(i) * n_h;
        double d = 0.0, nn = 0.0;
        for (int j = 0; j < n_h; ++j) {
            d += p[j] * h_t.values[static_cast<std::size_t>(j)];
            nn += p[j] * p[j];
        }
        pnorm[i] = std::sqrt(nn);
        if (pnorm[i] == 0.0) throw UndefinedSimilarity("hash_proxy_loss: zero-norm proxy");
        cosines[i] = d / (pnorm[i] * nh);
    }
    // softmax(cos/tau), stabilized
    double zmax = -1e300;
    for (int i = 0; i < n_cls; ++i) zmax = std::max(zmax, cosines[i] / tau);
    std::vector<double> q(n_cls);
    double zsum = 0.0;
    for (int i = 0; i < n_cls; ++i) {
        q[i] = std::exp(cosines[i] / tau - zmax);
        zsum += q[i];
    }
    double loss = 0.0;
    for (int i = 0; i < n_cls; ++i) {
        q[i] /= zsum;
        if (label[i]) loss += -(label[i] / l1) * std::log(q[i]);
    }
    if (grad_h || grad_proxies) {
        if (grad_h) grad_h->assign(static_cast<std::size_t>(n_h), 0.0);
        if (grad_proxies) *grad_proxies = Tensor({n_cls, n_h});
        for (int i = 0; i < n_cls; ++i) {
            const double dldp = (q[i] - label[i] / l1) / tau;  // dL/d cos_i
            const double* p = proxies.data() + static_cast<long>(i) * n_h;
            for (int j = 0; j < n_h; ++j) {
                const double hj = h_t.values[static_cast<std::size_t>(j)];
                if (grad_h)
                    (*grad_h)[static_cast<std::size_t>(j)] +=
                        dldp * (p[j] / (pnorm[i] * nh) - cosines[i] * hj / (nh * nh));
                if (grad_proxies)
                    (*grad_proxies)[static_cast<long>(i) * n_h + j] =
                        dldp * (hj / (pnorm[i] * nh) - cosines[i] * p[j] / (pnorm[i] * pnorm[i]));
            }
        }
    }
    return loss;
}

// ----------------------------------------------------- binarize and friends

BinaryHash binarize(const HashVector& h) {
    BinaryHash b;
    b.bits.resize(h.values.size());
    for (std::size_t i = 0; i < h.values.size(); ++i) b.bits[i] = h.values[i] >= 0.0 ? 1 : -1;
    return b;
}

int hamming_distance(const BinaryHash& a, const BinaryHash& b) {
    if (a.bits.size() != b.bits.size())
        throw std::invalid_argument("hamming_distance: lengths differ");
    int d = 0;
    for (std::size_t i = 0; i < a.bits.size(); ++i) d += a.bits[i] != b.bits[i];
    return d;
}

std::string hash_to_hex(const BinaryHash& h) {
    static const char* digits = "0123456789abcdef";
    const int n = h.length();
    std::string out;
    out.reserve(static_cast<std::size_t>((n + 7) / 8) * 2);
    for (int byte = 0; byte < (n + 7) / 8; ++byte) {
        int v = 0;
        for (int bit = 0; bit < 8; ++bit) {
            const int idx = byte * 8 + bit;
            v <<= 1;
            if (idx < n && h.bits[static_cast<std::size_t>(idx)] > 0) v |= 1;
        }
        out.push_back(digits[(v >> 4) & 0xf]);
        out.push_back(digits[v & 0xf]);
    }
    return out;
}

BinaryHash hash_from_hex(const std::string& hex, int n_bits) {
    if (static_cast<int>(hex.size()) != ((n_bits + 7) / 8) * 2)
        throw ParseError("hash_from_hex: bad hex length for " + std::to_string(n_bits) + " bits");
    BinaryHash h;
    h.bits.assign(static_cast<std::size_t>(n_bits), -1);
    for (int i = 0; i < n_bits; ++i) {
        const char c = hex[static_cast<std::size_t>(i / 4)];
        int v;
        if (c >= '0' && c <= '9') v = c - '0';
        else if (c >= 'a' && c <= 'f') v = c - 'a' + 10;
        else if (c >= 'A' && c <= 'F') v = c - 'A' + 10;
        else throw ParseError("hash_from_hex: bad hex digit");
        if (v & (1 << (3 - i % 4))) h.bits[static_cast<std::size_t>(i)] = 1;
    }
    return h;
}

// ---------------------------------------------------------------- transforms

TransformPipeline::TransformPipeline(std::vector<std::string> ops) : ops_(std::move(ops)) {
    static const std::vector<std::string> known = {"resized_crop", "hflip", "color_jitter",
                                                   "grayscale", "blur"};
    for (const auto& op : ops_)
        if (std::find(known.begin(), known.end(), op) == known.end())
            throw ConfigError("unknown transform op '" + op + "'");
}

Tensor TransformPipeline::apply(const Tensor& img, Rng& rng) const {
    Tensor out = img;
    for (const auto& op : ops_) {
        if (op == "resized_crop") {
            out = random_resized_crop(out, rng, 0.5);
        } else if (op == "hflip") {
            if (rng.bernoulli(0.5)) out = hflip(out);
        } else if (op == "color_jitter") {
            out = color_jitter(out, rng, 0.3);
        } else if (op == "grayscale") {
            if (rng.bernoulli(0.2)) out = to_grayscale(out);
        } else if (op == "blur") {
            if (rng.bernoulli(0.5)) out = gaussian_blur(out, rng.uniform(0.1, 1.2));
        }
    }
    return out;
}

TransformPair::TransformPair(TransformPipeline t, TransformPipeline s)
    : teacher(std::move(t)), student(std::move(s)) {
    for (const auto& op : teacher.ops())
        if (std::find(student.ops().begin(), student.ops().end(), op) == student.ops().end())
            throw ConfigError("teacher transform op '" + op + "' missing from student pipeline");
    if (teacher.ops().size() >= student.ops().size())
        throw ConfigError("teacher pipeline must be a strict subset of the student pipeline");
}

TransformPair default_transform_pair() {
    return TransformPair(TransformPipeline({"resized_crop", "hflip"}),
                         TransformPipeline({"resized_crop", "hflip", "color_jitter", "grayscale", "blur"}));
}

// ------------------------------------------------------------------ training

namespace {

struct SampleLoss {
    double total;
    std::vector<double> grad_ht;
    std::vector<double> grad_hs;
    Tensor grad_proxies;
};

SampleLoss combined_sample_loss(const DhdConfig& cfg, const std::vector<int>& label,
                                const HashVector& h_t, const HashVector& h_s, const Tensor& proxies,
                                bool with_grads) {
    SampleLoss out;
    std::vector<double> g_hp, g_sdh_t, g_sdh_s, g_q;
    Tensor gp;
    const double hp = with_grads ? hash_proxy_loss_grad(label, h_t, proxies, cfg.tau, &g_hp, &gp)
                                 : hash_proxy_loss(label, h_t, proxies, cfg.tau);
    const double sdh = with_grads ? sdh_loss_grad(h_t, h_s, &g_sdh_t, &g_sdh_s) : sdh_loss(h_t, h_s);
    const double q = with_grads ? bce_q_loss_grad(h_t, cfg.sigma_g, &g_q)
                                : bce_q_loss(h_t, cfg.sigma_g);
    out.total = hp + cfg.lambda_sdh * sdh + cfg.lambda_bceq * q;
    if (with_grads) {
        const std::size_t n = h_t.values.size();
        out.grad_ht.assign(n, 0.0);
        out.grad_hs.assign(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            out.grad_ht[i] = g_hp[i] + cfg.lambda_sdh * g_sdh_t[i] + cfg.lambda_bceq * g_q[i];
            out.grad_hs[i] = cfg.lambda_sdh * g_sdh_s[i];
        }
        out.grad_proxies = std::move(gp);
    }
    return out;
}

double dhd_validation_loss(DhdModule& module, const std::vector<LabeledImage>& val,
                           const TransformPair& transforms, std::uint64_t seed) {
    if (val.empty()) return 0.0;
    const bool was_training = module.backbone().training();
    module.set_training(false);
    double total = 0.0;
    for (std::size_t i = 0; i < val.size(); ++i) {
        Rng rng_t(derive_seed(seed, Stream::Eval, i, 0));
        Rng rng_s(derive_seed(seed, Stream::Eval, i, 1));
        HashVector h_s = module.hash(transforms.student.apply(val[i].image, rng_s));
        HashVector h_t = module.hash(transforms.teacher.apply(val[i].image, rng_t));
        total += combined_sample_loss(module.config(), val[i].label, h_t, h_s, module.proxies().value,
                                      false)
                     .total;
    }
    if (was_training && !module.frozen()) module.set_training(true);
    return total / static_cast<double>(val.size());
}

}  // namespace

DhdTrainResult train_dhd(DhdModule& module, const std::vector<LabeledImage>& train,
                         const std::vector<LabeledImage>& val, const DhdTrainConfig& cfg,
                         const TransformPair& transforms) {
    if (module.frozen()) throw ConfigError("train_dhd: module is frozen");
    if (train.empty()) throw std::invalid_argument("train_dhd: empty training set");
    for (const auto& s : train) {
        if (static_cast<int>(s.label.size()) != module.config().num_classes)
            throw std::invalid_argument("train_dhd: label width mismatch");
        if (std::accumulate(s.label.begin(), s.label.end(), 0) == 0)
            throw std::invalid_argument("train_dhd: sample with all-zero label");
    }

    Adam opt(module.trainable_params());
    DhdTrainResult result;
    result.initial_val_loss = dhd_validation_loss(module, val, transforms, cfg.seed);

    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        // Seeded Fisher-Yates; the order stream depends only on (seed, epoch).
        Rng shuffle_rng(derive_seed(cfg.seed, Stream::DataOrder, static_cast<std::uint64_t>(epoch)));
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.uniform_int(i)]);

        module.set_training(true);
        const double lr = lr_at_epoch(cfg.lr0, cfg.lr_decay, epoch);
        double epoch_loss = 0.0;
        long epoch_samples = 0;
        std::uint64_t step = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++step) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            const double inv_bn = 1.0 / static_cast<double>(end - start);
            opt.zero_grad();
            for (std::size_t b = start; b < end; ++b) {
                const LabeledImage& sample = train[order[b]];
                Rng rng_t(derive_seed(cfg.seed, Stream::Augment, static_cast<std::uint64_t>(epoch),
                                      order[b], 0));
                Rng rng_s(derive_seed(cfg.seed, Stream::Augment, static_cast<std::uint64_t>(epoch),
                                      order[b], 1));
                Tensor s_t = transforms.teacher.apply(sample.image, rng_t);
                Tensor s_s = transforms.student.apply(sample.image, rng_s);

                HashVector h_s = module.hash(s_s);
                HashVector h_t = module.hash(s_t);  // caches now hold the teacher pass
                SampleLoss loss = combined_sample_loss(module.config(), sample.label, h_t, h_s,
                                                       module.proxies().value, true);
                if (!std::isfinite(loss.total))
                    throw TrainingFailure("train_dhd diverged at epoch " + std::to_string(epoch) +
                                          " step " + std::to_string(step));
                epoch_loss += loss.total;
                ++epoch_samples;

                for (double& g : loss.grad_ht) g *= inv_bn;
                module.hash_backward(loss.grad_ht);
                for (long i = 0; i < loss.grad_proxies.numel(); ++i)
                    module.proxies().grad[i] += inv_bn * loss.grad_proxies[i];

                module.hash(s_s);  // restore the student caches
                for (double& g : loss.grad_hs) g *= inv_bn;
                module.hash_backward(loss.grad_hs);
            }
            opt.step(lr);
        }
        DhdEpochStats stats;
        stats.epoch = epoch;
        stats.lr = lr;
        stats.train_loss = epoch_loss / static_cast<double>(std::max(1L, epoch_samples));
        stats.val_loss = dhd_validation_loss(module, val, transforms, cfg.seed);
        result.log.push_back(stats);
    }
    module.set_training(false);
    return result;
}

// -------------------------------------------------------------- persistence

void save_dhd(const std::string& path, DhdModule& module,
              const std::vector<std::pair<std::string, std::string>>& extra_meta) {
    Checkpoint ck;
    ck.meta["kind"] = "dhd";
    const DhdConfig& c = module.config();
    ck.meta["config.in_channels"] = std::to_string(c.in_channels);
    std::string widths;
    for (std::size_t i = 0; i < c.backbone_widths.size(); ++i)
        widths += (i ? "," : "") + std::to_string(c.backbone_widths[i]);
    ck.meta["config.backbone_widths"] = widths;
    ck.meta["config.feature_dim"] = std::to_string(c.feature_dim());
    ck.meta["config.hash_bits"] = std::to_string(c.hash_bits);
    ck.meta["config.num_classes"] = std::to_string(c.num_classes);
    ck.meta["config.tau"] = format_double(c.tau);
    ck.meta["config.sigma_g"] = format_double(c.sigma_g);
    ck.meta["config.lambda_sdh"] = format_double(c.lambda_sdh);
    ck.meta["config.lambda_bceq"] = format_double(c.lambda_bceq);
    ck.meta["frozen"] = module.frozen() ? "1" : "0";
    for (const auto& [k, v] : extra_meta) ck.meta[k] = v;
    store_module(ck, module.backbone(), "backbone.");
    store_module(ck, module.head(), "head.");
    ck.tensors.emplace_back("proxies", module.proxies().value);
    save_checkpoint(path, ck);
}

DhdModule load_dhd(const std::string& path) {
    Checkpoint ck = load_checkpoint(path);
    if (ck.meta_at("kind") != "dhd") throw ConfigError(path + " is not a dhd checkpoint");
    DhdConfig cfg;
    cfg.in_channels = static_cast<int>(ck.meta_long("config.in_channels"));
    cfg.backbone_widths.clear();
    {
        std::string widths = ck.meta_at("config.backbone_widths");
        std::size_t pos = 0;
        while (pos < widths.size()) {
            std::size_t comma = widths.find(',', pos);
            if (comma == std::string::npos) comma = widths.size();
            cfg.backbone_widths.push_back(std::stoi(widths.substr(pos, comma - pos)));
            pos = comma + 1;
        }
    }
    cfg.hash_bits = static_cast<int>(ck.meta_long("config.hash_bits"));
    cfg.num_classes = static_cast<int>(ck.meta_long("config.num_classes"));
    cfg.tau = ck.meta_double("config.tau");
    cfg.sigma_g = ck.meta_double("config.sigma_g");
    cfg.lambda_sdh = ck.meta_double("config.lambda_sdh");
    cfg.lambda_bceq = ck.meta_double("config.lambda_bceq");
    DhdModule module(cfg, 0);
    restore_module(ck, module.backbone(), "backbone.");
    restore_module(ck, module.head(), "head.");
    module.proxies().value = ck.tensor_at("proxies");
    if (ck.has_meta("frozen") && ck.meta_at("frozen") == "1") module.freeze();
    return module;
}

}  // namespace semjscc
