#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "semjscc/nn.hpp"
#include "semjscc/tensor.hpp"

namespace semjscc {

// Human-readable key-value checkpoint.
//
//   semjscc-checkpoint v1
//   meta.kind = jscc
//   meta.epoch = 12
//   tensor.enc.0.weight = 8,3,3,3 : 0.0123... -0.4567... ...
//
// Values are printed with %.17g, which round-trips doubles exactly, so a
// save/load cycle is bit-identical.
struct Checkpoint {
    std::map<std::string, std::string> meta;
    std::vector<std::pair<std::string, Tensor>> tensors;

    bool has_meta(const std::string& key) const { return meta.count(key) != 0; }
    const std::string& meta_at(const std::string& key) const;
    double meta_double(const std::string& key) const;
    long meta_long(const std::string& key) const;
    const Tensor& tensor_at(const std::string& name) const;
    bool has_tensor(const std::string& name) const;
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

// Snapshot/restore of a module's full state (parameters + buffers) under a
// name prefix.
void store_module(Checkpoint& ck, Module& m, const std::string& prefix);
void restore_module(const Checkpoint& ck, Module& m, const std::string& prefix);

// Adam moments and step counter, for exact training resume.
void store_optimizer(Checkpoint& ck, Adam& opt, const std::string& prefix);
void restore_optimizer(const Checkpoint& ck, Adam& opt, const std::string& prefix);

std::string format_double(double v);  // %.17g
double parse_double(const std::string& s);

}  // namespace semjscc
