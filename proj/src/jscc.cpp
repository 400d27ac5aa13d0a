#include "semjscc/jscc.hpp"

#include "semjscc/checkpoint.hpp"
#include "semjscc/errors.hpp"
#include "semjscc/rng.hpp"

namespace semjscc {

void JsccConfig::validate() const {
    if (channels <= 0 || height <= 0 || width <= 0)
        throw ConfigError("jscc: image dimensions must be positive");
    if (height % 4 != 0 || width % 4 != 0)
        throw ConfigError("jscc: H and W must be divisible by 4 (x4 downsampling)");
    if (c_out <= 0 || c_out % 2 != 0) throw ConfigError("jscc: c_out must be a positive even integer");
    if (base_channels <= 0 || res_blocks < 0) throw ConfigError("jscc: bad architecture parameters");
}

namespace {
constexpr double kSlope = 0.1;
}

JsccCodec::JsccCodec(const JsccConfig& cfg, std::uint64_t init_seed) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(init_seed);
    const int n = cfg_.base_channels;
    const int h4 = cfg_.height / 4, w4 = cfg_.width / 4;

    encoder_.emplace<Conv2d>(cfg_.channels, n, 3, 1, 1, rng);
    encoder_.emplace<LeakyReLU>(kSlope);
    encoder_.emplace<Conv2d>(n, 2 * n, 3, 2, 1, rng);
    encoder_.emplace<LeakyReLU>(kSlope);
    encoder_.emplace<Conv2d>(2 * n, 2 * n, 3, 2, 1, rng);
    encoder_.emplace<LeakyReLU>(kSlope);
    for (int i = 0; i < cfg_.res_blocks; ++i) encoder_.emplace<ResidualBlock>(2 * n, kSlope, rng);
    encoder_.emplace<Conv2d>(2 * n, cfg_.c_out, 3, 1, 1, rng);
    encoder_.emplace<ComplexInterleave>();
    encoder_.emplace<PowerNormalize>();

    decoder_.emplace<ComplexDeinterleave>(cfg_.c_out, h4, w4);
    decoder_.emplace<Conv2d>(cfg_.c_out, 2 * n, 3, 1, 1, rng);
    decoder_.emplace<LeakyReLU>(kSlope);
    for (int i = 0; i < cfg_.res_blocks; ++i) decoder_.emplace<ResidualBlock>(2 * n, kSlope, rng);
    decoder_.emplace<UpsampleNearest2x>();
    decoder_.emplace<Conv2d>(2 * n, n, 3, 1, 1, rng);
    decoder_.emplace<LeakyReLU>(kSlope);
    decoder_.emplace<UpsampleNearest2x>();
    decoder_.emplace<Conv2d>(n, n, 3, 1, 1, rng);
    decoder_.emplace<LeakyReLU>(kSlope);
    decoder_.emplace<Conv2d>(n, cfg_.channels, 3, 1, 1, rng);
    decoder_.emplace<Sigmoid>();
}

Tensor JsccCodec::encode_forward(const Tensor& image) {
    if (image.rank() != 3 || image.dim(0) != cfg_.channels || image.dim(1) != cfg_.height ||
        image.dim(2) != cfg_.width)
        throw ConfigError("encode: image shape " + image.shape_str() + " does not match codec (" +
                          std::to_string(cfg_.channels) + "," + std::to_string(cfg_.height) + "," +
                          std::to_string(cfg_.width) + ")");
    return encoder_.forward(image);
}

Tensor JsccCodec::decode_forward(const Tensor& y_2k) {
    if (y_2k.numel() != 2L * cfg_.k())
        throw ConfigError("decode: codeword length " + std::to_string(y_2k.numel() / 2) +
                          " does not match codec k=" + std::to_string(cfg_.k()));
    return decoder_.forward(y_2k);
}

ChannelCodeword JsccCodec::encode(const Tensor& image) {
    Tensor out = encode_forward(image);
    ChannelCodeword cw;
    cw.k = cfg_.k();
    cw.symbols = out.vec();
    return cw;
}

Tensor JsccCodec::decode(const ChannelCodeword& y) {
    if (y.k != cfg_.k())
        throw ConfigError("decode: codeword k=" + std::to_string(y.k) +
                          " does not match codec k=" + std::to_string(cfg_.k()));
    return decode_forward(Tensor({static_cast<int>(y.symbols.size())}, y.symbols));
}

void save_codec(const std::string& path, JsccCodec& codec,
                const std::vector<std::pair<std::string, std::string>>& extra_meta) {
    Checkpoint ck;
    ck.meta["kind"] = "jscc";
    const JsccConfig& c = codec.config();
    ck.meta["config.channels"] = std::to_string(c.channels);
    ck.meta["config.height"] = std::to_string(c.height);
    ck.meta["config.width"] = std::to_string(c.width);
    ck.meta["config.c_out"] = std::to_string(c.c_out);
    ck.meta["config.base_channels"] = std::to_string(c.base_channels);
    ck.meta["config.res_blocks"] = std::to_string(c.res_blocks);
    ck.meta["config.k"] = std::to_string(c.k());
    ck.meta["config.bandwidth_ratio"] = format_double(c.bandwidth_ratio());
    for (const auto& [k, v] : extra_meta) ck.meta[k] = v;
    store_module(ck, codec.encoder(), "enc.");
    store_module(ck, codec.decoder(), "dec.");
    save_checkpoint(path, ck);
}

JsccCodec load_codec(const std::string& path) {
    Checkpoint ck = load_checkpoint(path);
    if (ck.meta_at("kind") != "jscc") throw ConfigError(path + " is not a jscc checkpoint");
    JsccConfig cfg;
    cfg.channels = static_cast<int>(ck.meta_long("config.channels"));
    cfg.height = static_cast<int>(ck.meta_long("config.height"));
    cfg.width = static_cast<int>(ck.meta_long("config.width"));
    cfg.c_out = static_cast<int>(ck.meta_long("config.c_out"));
    cfg.base_channels = static_cast<int>(ck.meta_long("config.base_channels"));
    cfg.res_blocks = static_cast<int>(ck.meta_long("config.res_blocks"));
    JsccCodec codec(cfg, 0);
    restore_module(ck, codec.encoder(), "enc.");
    restore_module(ck, codec.decoder(), "dec.");
    return codec;
}

}  // namespace semjscc
