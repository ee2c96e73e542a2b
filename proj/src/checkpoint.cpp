/*
 * Copyright 2026 The rqat Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


#include "rqat/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "rqat/errors.hpp"

namespace rqat {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'R', 'Q', 'A', 'T', 'C', 'K', 'P', 'T'};

std::uint64_t fnv1a(const std::uint8_t* p, std::size_t n) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

class Writer {
public:
    template <class T>
    void pod(T v) {
        static_assert(std::is_trivially_copyable_v<T>);
        const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
        out.insert(out.end(), p, p + sizeof(T));
    }
    void u8(std::uint8_t v) { pod(v); }
    void u32(std::uint32_t v) { pod(v); }
    void i32(std::int32_t v) { pod(v); }
    void u64(std::uint64_t v) { pod(v); }
    void f64(double v) { pod(v); }
    void str(const std::string& s) {
        u64(s.size());
        out.insert(out.end(), s.begin(), s.end());
    }
    void doubles(const double* p, std::size_t n) {
        u64(n);
        for (std::size_t i = 0; i < n; ++i) f64(p[i]);
    }
    void codes(const std::vector<Code>& c, int bits) {
        u64(c.size());
        for (Code v : c) {
            if (bits <= 8)
                u8(static_cast<std::uint8_t>(v));
            else
                pod(static_cast<std::uint16_t>(v));
        }
    }
    std::vector<std::uint8_t> out;
};

class Reader {
public:
    Reader(const std::uint8_t* p, std::size_t n) : p_(p), n_(n) {}
    template <class T>
    T pod() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, p_ + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    std::uint8_t u8() { return pod<std::uint8_t>(); }
    std::uint32_t u32() { return pod<std::uint32_t>(); }
    std::int32_t i32() { return pod<std::int32_t>(); }
    std::uint64_t u64() { return pod<std::uint64_t>(); }
    double f64() { return pod<double>(); }
    bool flag() {
        const auto v = u8();
        if (v > 1) throw IngestError("checkpoint: bad flag byte");
        return v == 1;
    }
    std::size_t length(std::size_t elem) {
        const auto n = u64();
        if (elem && n > (n_ - pos_) / elem) throw IngestError("checkpoint: truncated array");
        return static_cast<std::size_t>(n);
    }
    std::string str() {
        const auto n = length(1);
        std::string s(reinterpret_cast<const char*>(p_ + pos_), n);
        pos_ += n;
        return s;
    }
    void doubles(double* dst, std::size_t expected, const char* what) {
        const auto n = length(8);
        if (n != expected) throw IngestError(std::string("checkpoint: ") + what + " has the wrong size");
        for (std::size_t i = 0; i < n; ++i) dst[i] = f64();
    }
    std::vector<double> doubles() {
        std::vector<double> v(length(8));
        for (auto& x : v) x = f64();
        return v;
    }
    std::vector<Code> codes(int bits) {
        std::vector<Code> c(length(bits <= 8 ? 1 : 2));
        for (auto& v : c) v = bits <= 8 ? u8() : pod<std::uint16_t>();
        return c;
    }
    bool done() const { return pos_ == n_; }

private:
    void need(std::size_t k) {
        if (n_ - pos_ < k) throw IngestError("checkpoint: truncated");
    }
    const std::uint8_t* p_;
    std::size_t n_;
    std::size_t pos_ = 0;
};

void write_arch(Writer& w, const ArchSpec& a) {
    w.u8(static_cast<std::uint8_t>(a.kind));
    w.u64(a.height);
    w.u64(a.width);
    w.u64(a.channels);
    w.u64(a.features);
    w.u64(a.widths.size());
    for (auto x : a.widths) w.u64(x);
    w.u64(a.classes);
    w.f64(a.lif.beta);
    w.f64(a.lif.v_th);
    w.f64(a.lif.v_reset);
    w.f64(a.surrogate_width);
    w.f64(a.logit_scale);
}

ArchSpec read_arch(Reader& r) {
    ArchSpec a;
    const auto kind = r.u8();
    if (kind > static_cast<std::uint8_t>(ArchKind::snn2)) throw IngestError("checkpoint: unknown architecture");
    a.kind = static_cast<ArchKind>(kind);
    a.height = r.u64();
    a.width = r.u64();
    a.channels = r.u64();
    a.features = r.u64();
    a.widths.resize(r.length(8));
    for (auto& x : a.widths) x = r.u64();
    a.classes = r.u64();
    a.lif.beta = r.f64();
    a.lif.v_th = r.f64();
    a.lif.v_reset = r.f64();
    a.surrogate_width = r.f64();
    a.logit_scale = r.f64();
    return a;
}

void write_layer(Writer& w, const MatmulLayer& l) {
    w.str(l.name);
    w.u64(l.out_features());
    w.u64(l.in_features());
    w.doubles(l.weight.data(), static_cast<std::size_t>(l.weight.size()));
    w.doubles(l.bias.data(), static_cast<std::size_t>(l.bias.size()));
    w.doubles(l.mom_weight.data(), static_cast<std::size_t>(l.mom_weight.size()));
    w.doubles(l.mom_bias.data(), static_cast<std::size_t>(l.mom_bias.size()));
    w.u8(l.quant.has_value());
    if (l.quant) {
        const auto& q = *l.quant;
        const int bits = q.params.bits;
        w.i32(bits);
        w.u8(q.params.is_signed);
        w.u8(static_cast<std::uint8_t>(q.params.mode));
        w.doubles(q.params.multipliers.data(), q.params.multipliers.size());
        w.f64(q.params.offset);
        w.f64(q.scale.alpha);
        w.i32(q.scale.q_p);
        w.u64(q.scale.count);
        w.doubles(q.mom_multipliers.data(), q.mom_multipliers.size());
        w.f64(q.mom_offset);
        w.codes(q.codes, bits);
        w.u8(q.faults.has_value());
        if (q.faults) {
            w.u64(q.faults->count);
            w.i32(q.faults->bits);
            w.u64(q.faults->seed);
            w.f64(q.faults->rate);
            w.codes(q.faults->stuck_at_0, q.faults->bits);
            w.codes(q.faults->stuck_at_1, q.faults->bits);
        }
        w.u8(q.variability.has_value());
        if (q.variability) {
            w.u64(q.variability->count);
            w.i32(q.variability->bits);
            w.u64(q.variability->seed);
            w.f64(q.variability->sigma_over_mu);
            w.doubles(q.variability->factors.data(), q.variability->factors.size());
        }
    }
    w.u8(l.act.has_value());
    if (l.act) {
        w.f64(l.act->quantizer.scale);
        w.i32(l.act->quantizer.bits);
        w.i32(l.act->quantizer.q_p);
        w.u8(l.act->calibrated);
        w.u8(l.act->trainable);
        w.f64(l.act->mom_scale);
    }
}

void read_layer(Reader& r, MatmulLayer& l) {
    const auto name = r.str();
    if (name != l.name) throw IngestError("checkpoint: layer '" + name + "' where '" + l.name + "' was expected");
    const auto out = r.u64(), in = r.u64();
    if (out != l.out_features() || in != l.in_features())
        throw IngestError("checkpoint: layer '" + name + "' shape does not match the architecture");
    r.doubles(l.weight.data(), static_cast<std::size_t>(l.weight.size()), "weight");
    r.doubles(l.bias.data(), static_cast<std::size_t>(l.bias.size()), "bias");
    r.doubles(l.mom_weight.data(), static_cast<std::size_t>(l.mom_weight.size()), "weight momentum");
    r.doubles(l.mom_bias.data(), static_cast<std::size_t>(l.mom_bias.size()), "bias momentum");
    l.quant.reset();
    l.act.reset();
    const std::size_t count = l.weight_count();
    if (r.flag()) {
        WeightSlot q;
        q.params.bits = r.i32();
        q.params.is_signed = r.flag();
        const auto mode = r.u8();
        if (mode > static_cast<std::uint8_t>(QuantMode::non_uniform)) throw IngestError("checkpoint: bad quantizer mode");
        q.params.mode = static_cast<QuantMode>(mode);
        q.params.multipliers = r.doubles();
        q.params.offset = r.f64();
        try {
            q.params.validate();
        } catch (const Error& e) {
            throw IngestError("checkpoint: layer '" + name + "': " + e.what());
        }
        const int bits = q.params.bits;
        q.scale.alpha = r.f64();
        q.scale.q_p = r.i32();
        q.scale.count = r.u64();
        q.mom_multipliers = r.doubles();
        if (q.mom_multipliers.size() != q.params.multipliers.size())
            throw IngestError("checkpoint: quantizer momentum size mismatch");
        q.grad_multipliers.assign(q.params.multipliers.size(), 0.0);
        q.mom_offset = r.f64();
        q.codes = r.codes(bits);
        if (!q.codes.empty() && q.codes.size() != count) throw IngestError("checkpoint: code count mismatch");
        const Code code_limit = Code{1} << bits;
        for (Code c : q.codes)
            if (c >= code_limit) throw IngestError("checkpoint: code wider than the quantizer");
        if (r.flag()) {
            FaultMap f;
            f.count = r.u64();
            f.bits = r.i32();
            f.seed = r.u64();
            f.rate = r.f64();
            f.stuck_at_0 = r.codes(f.bits);
            f.stuck_at_1 = r.codes(f.bits);
            if (f.count != count || f.bits != bits || f.stuck_at_0.size() != count || f.stuck_at_1.size() != count)
                throw IngestError("checkpoint: fault map shape mismatch");
            for (std::size_t i = 0; i < count; ++i)
                if ((f.stuck_at_0[i] & f.stuck_at_1[i]) != 0 || (f.stuck_mask(i) >> bits) != 0)
                    throw IngestError("checkpoint: malformed fault map");
            q.faults = std::move(f);
        }
        if (r.flag()) {
            VariabilityMap v;
            v.count = r.u64();
            v.bits = r.i32();
            v.seed = r.u64();
            v.sigma_over_mu = r.f64();
            v.factors = r.doubles();
            if (v.count != count || v.bits != bits || v.factors.size() != count * static_cast<std::size_t>(bits))
                throw IngestError("checkpoint: variability map shape mismatch");
            q.variability = std::move(v);
        }
        l.quant = std::move(q);
    }
    if (r.flag()) {
        ActSlot a;
        a.quantizer.scale = r.f64();
        a.quantizer.bits = r.i32();
        a.quantizer.q_p = r.i32();
        a.calibrated = r.flag();
        a.trainable = r.flag();
        a.mom_scale = r.f64();
        if (a.quantizer.bits < 1 || a.quantizer.bits > kMaxBits ||
            a.quantizer.q_p != (1 << a.quantizer.bits) - 1 || !(a.quantizer.scale > 0.0))
            throw IngestError("checkpoint: malformed activation quantizer");
        l.act = a;
    }
}

}  // namespace

std::string_view to_string(Phase phase) {
    switch (phase) {
        case Phase::pretrain: return "pretrain";
        case Phase::main: return "main";
        case Phase::done: return "done";
    }
    return "?";
}

std::vector<std::uint8_t> serialize(const Checkpoint& c) {
    if (!c.net) throw InputError("checkpoint has no network");
    Writer w;
    for (char ch : kMagic) w.u8(static_cast<std::uint8_t>(ch));
    w.u32(kCheckpointVersion);
    w.u8(static_cast<std::uint8_t>(c.mode));
    w.u8(static_cast<std::uint8_t>(c.phase));
    w.i32(c.epochs_completed);
    w.f64(c.final_accuracy);
    w.u64(c.seed);
    w.str(c.config_json);
    w.str(c.metrics_jsonl);
    write_arch(w, c.net->arch());
    const auto layers = c.net->layers();
    w.u64(layers.size());
    for (const auto* l : layers) write_layer(w, *l);
    w.u64(fnv1a(w.out.data(), w.out.size()));
    return std::move(w.out);
}

Checkpoint deserialize(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < sizeof(kMagic) + 12 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
        throw IngestError("not an rqat checkpoint");
    const std::size_t body = bytes.size() - 8;
    std::uint64_t digest;
    std::memcpy(&digest, bytes.data() + body, 8);
    if (digest != fnv1a(bytes.data(), body)) throw IngestError("checkpoint digest mismatch (corrupted file)");
    Reader r(bytes.data() + sizeof(kMagic), body - sizeof(kMagic));
    const auto version = r.u32();
    if (version != kCheckpointVersion)
        throw IngestError("unsupported checkpoint version " + std::to_string(version));
    Checkpoint c;
    const auto mode = r.u8();
    if (mode > static_cast<std::uint8_t>(RunMode::variability_finetune)) throw IngestError("checkpoint: bad run mode");
    c.mode = static_cast<RunMode>(mode);
    const auto phase = r.u8();
    if (phase > static_cast<std::uint8_t>(Phase::done)) throw IngestError("checkpoint: bad phase");
    c.phase = static_cast<Phase>(phase);
    c.epochs_completed = r.i32();
    c.final_accuracy = r.f64();
    c.seed = r.u64();
    c.config_json = r.str();
    c.metrics_jsonl = r.str();
    const ArchSpec arch = read_arch(r);
    try {
        c.net = make_network(arch, 0);
    } catch (const Error& e) {
        throw IngestError(std::string("checkpoint: bad architecture: ") + e.what());
    }
    auto layers = c.net->layers();
    if (r.u64() != layers.size()) throw IngestError("checkpoint: layer count does not match the architecture");
    for (auto* l : layers) read_layer(r, *l);
    if (!r.done()) throw IngestError("checkpoint: trailing bytes");
    return c;
}

void save_checkpoint(const std::string& path, const Checkpoint& c) {
    const auto bytes = serialize(c);
    const std::filesystem::path target(path);
    if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp);
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw IoError("short write to " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, target, ec);
    if (ec) throw IoError("cannot move " + tmp + " to " + path + ": " + ec.message());
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IngestError("cannot open checkpoint " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return deserialize(bytes);
    } catch (const IngestError& e) {
        throw IngestError(path + ": " + e.what());
    }
}

}  // namespace rqat
