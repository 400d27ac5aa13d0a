#include "semjscc/checkpoint.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "semjscc/errors.hpp"

namespace semjscc {

namespace {
constexpr const char* kHeader = "semjscc-checkpoint v1";
}

const std::string& Checkpoint::meta_at(const std::string& key) const {
    auto it = meta.find(key);
    if (it == meta.end()) throw ConfigError("checkpoint: missing meta key '" + key + "'");
    return it->second;
}

double Checkpoint::meta_double(const std::string& key) const { return parse_double(meta_at(key)); }

long Checkpoint::meta_long(const std::string& key) const { return std::stol(meta_at(key)); }

const Tensor& Checkpoint::tensor_at(const std::string& name) const {
    for (const auto& [n, t] : tensors)
        if (n == name) return t;
    throw ConfigError("checkpoint: missing tensor '" + name + "'");
}

bool Checkpoint::has_tensor(const std::string& name) const {
    for (const auto& [n, t] : tensors)
        if (n == name) return true;
    return false;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double parse_double(const std::string& s) {
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str()) throw ParseError("expected a number, got '" + s + "'");
    return v;
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open checkpoint for writing: " + path);
    f << kHeader << "\n";
    for (const auto& [k, v] : ck.meta) f << "meta." << k << " = " << v << "\n";
    for (const auto& [name, t] : ck.tensors) {
        f << "tensor." << name << " = ";
        const auto& sh = t.shape();
        for (std::size_t i = 0; i < sh.size(); ++i) f << (i ? "," : "") << sh[i];
        f << " :";
        for (long i = 0; i < t.numel(); ++i) f << " " << format_double(t[i]);
        f << "\n";
    }
    if (!f) throw std::runtime_error("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open checkpoint: " + path);
    Checkpoint ck;
    std::string line;
    long lineno = 0;
    if (!std::getline(f, line) || line != kHeader)
        throw ParseError("not a checkpoint file: " + path, 1);
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto eq = line.find(" = ");
        if (eq == std::string::npos) throw ParseError("malformed checkpoint line", lineno + 1);
        std::string key = line.substr(0, eq);
        std::string val = line.substr(eq + 3);
        if (key.rfind("meta.", 0) == 0) {
            ck.meta[key.substr(5)] = val;
        } else if (key.rfind("tensor.", 0) == 0) {
            auto colon = val.find(" :");
            if (colon == std::string::npos) throw ParseError("malformed tensor line", lineno + 1);
            std::vector<int> shape;
            {
                std::stringstream ss(val.substr(0, colon));
                std::string d;
                while (std::getline(ss, d, ',')) shape.push_back(std::stoi(d));
            }
            Tensor t(shape);
            const char* p = val.c_str() + colon + 2;
            char* end = nullptr;
            for (long i = 0; i < t.numel(); ++i) {
                t[i] = std::strtod(p, &end);
                if (end == p) throw ParseError("tensor '" + key + "' has too few values", lineno + 1);
                p = end;
            }
            ck.tensors.emplace_back(key.substr(7), std::move(t));
        } else {
            throw ParseError("unknown checkpoint key '" + key + "'", lineno + 1);
        }
    }
    return ck;
}

void store_module(Checkpoint& ck, Module& m, const std::string& prefix) {
    for (auto& nt : named_state(m, prefix)) ck.tensors.emplace_back(nt.name, *nt.t);
}

void restore_module(const Checkpoint& ck, Module& m, const std::string& prefix) {
    for (auto& nt : named_state(m, prefix)) {
        const Tensor& src = ck.tensor_at(nt.name);
        if (src.shape() != nt.t->shape())
            throw ConfigError("checkpoint tensor '" + nt.name + "' has shape " + src.shape_str() +
                              ", expected " + nt.t->shape_str());
        *nt.t = src;
    }
}

void store_optimizer(Checkpoint& ck, Adam& opt, const std::string& prefix) {
    ck.meta[prefix + "steps"] = std::to_string(opt.steps_taken());
    auto& params = opt.params();
    for (std::size_t i = 0; i < params.size(); ++i) {
        ck.tensors.emplace_back(prefix + params[i].name + ".m", opt.first_moments()[i]);
        ck.tensors.emplace_back(prefix + params[i].name + ".v", opt.second_moments()[i]);
    }
}

void restore_optimizer(const Checkpoint& ck, Adam& opt, const std::string& prefix) {
    opt.set_steps_taken(ck.meta_long(prefix + "steps"));
    auto& params = opt.params();
    for (std::size_t i = 0; i < params.size(); ++i) {
        opt.first_moments()[i] = ck.tensor_at(prefix + params[i].name + ".m");
        opt.second_moments()[i] = ck.tensor_at(prefix + params[i].name + ".v");
    }
}

}  // namespace semjscc
