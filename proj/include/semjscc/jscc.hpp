#pragma once

#include <cstdint>
#include <string>

#include "semjscc/channel.hpp"
#include "semjscc/nn.hpp"
#include "semjscc/tensor.hpp"

namespace semjscc {

// Shape contract of the codec: (C,H,W) image -> k complex symbols with
// k = (c_out/2) * (H/4) * (W/4), back to (C,H,W).
struct JsccConfig {
    int channels = 3;
    int height = 256;
    int width = 256;
    int c_out = 32;          // even; c_out/2 complex channels at H/4 x W/4
    int base_channels = 32;  // width of the first conv stage
    int res_blocks = 2;

    int k() const { return (c_out / 2) * (height / 4) * (width / 4); }
    double bandwidth_ratio() const {
        return static_cast<double>(k()) / (static_cast<double>(channels) * height * width);
    }
    void validate() const;
    bool operator==(const JsccConfig&) const = default;
};

// Convolutional autoencoder with x4 spatial downsampling in the encoder and
// x4 upsampling in the decoder. The encoder's final stages map the feature
// map to 2k interleaved reals (first half of the channels are real parts,
// second half imaginary) and normalize to unit average symbol power; the
// decoder ends in a sigmoid so reconstructions live in [0,1].
class JsccCodec {
public:
    JsccCodec(const JsccConfig& cfg, std::uint64_t init_seed);

    ChannelCodeword encode(const Tensor& image);
    Tensor decode(const ChannelCodeword& y);

    // Tensor-path equivalents used by training loops; leave backward caches
    // in place.
    Tensor encode_forward(const Tensor& image);
    Tensor decode_forward(const Tensor& y_2k);

    Sequential& encoder() { return encoder_; }
    Sequential& decoder() { return decoder_; }
    const JsccConfig& config() const { return cfg_; }
    void set_training(bool t) {
        encoder_.set_training(t);
        decoder_.set_training(t);
    }

private:
    JsccConfig cfg_;
    Sequential encoder_, decoder_;
};

// Checkpoint round-trip. `extra_meta` keys are merged into the metadata
// record (epoch, seed, metric snapshot, ...).
void save_codec(const std::string& path, JsccCodec& codec,
                const std::vector<std::pair<std::string, std::string>>& extra_meta = {});
JsccCodec load_codec(const std::string& path);

}  // namespace semjscc
