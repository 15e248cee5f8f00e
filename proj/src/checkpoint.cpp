#include <zlib.h>

#include <cstring>
#include <fstream>
#include <vector>

#include "qnerf/trainer.hpp"

// Versioned binary checkpoint: every named parameter tensor, its Adam
// moments, the step counter, and the master seed. A CRC32 trailer guards
// against partial or corrupted files; loading stages everything before any
// state is touched.

namespace qnerf::train {

namespace {

constexpr char kMagic[8] = {'Q', 'N', 'R', 'F', 'C', 'K', 'P', 'T'};
constexpr uint32_t kVersion = 1;

void put_u32(std::vector<char>& buf, uint32_t v) {
    buf.insert(buf.end(), reinterpret_cast<const char*>(&v), reinterpret_cast<const char*>(&v) + 4);
}
void put_u64(std::vector<char>& buf, uint64_t v) {
    buf.insert(buf.end(), reinterpret_cast<const char*>(&v), reinterpret_cast<const char*>(&v) + 8);
}
void put_i64(std::vector<char>& buf, int64_t v) { put_u64(buf, uint64_t(v)); }
void put_bytes(std::vector<char>& buf, const void* p, std::size_t n) {
    buf.insert(buf.end(), reinterpret_cast<const char*>(p), reinterpret_cast<const char*>(p) + n);
}
void put_string(std::vector<char>& buf, const std::string& s) {
    put_u32(buf, uint32_t(s.size()));
    put_bytes(buf, s.data(), s.size());
}
void put_tensor(std::vector<char>& buf, const diff::Tensor& t) {
    put_i64(buf, t.rows);
    put_i64(buf, t.cols);
    put_bytes(buf, t.v.data(), t.v.size() * sizeof(double));
}

struct Reader {
    const char* p;
    const char* end;

    void need(std::size_t n) const {
        if (std::size_t(end - p) < n) throw CheckpointError("truncated checkpoint");
    }
    uint32_t u32() {
        need(4);
        uint32_t v;
        std::memcpy(&v, p, 4);
        p += 4;
        return v;
    }
    uint64_t u64() {
        need(8);
        uint64_t v;
        std::memcpy(&v, p, 8);
        p += 8;
        return v;
    }
    int64_t i64() { return int64_t(u64()); }
    std::string str() {
        const uint32_t n = u32();
        need(n);
        std::string s(p, p + n);
        p += n;
        return s;
    }
    diff::Tensor tensor() {
        diff::Tensor t;
        t.rows = i64();
        t.cols = i64();
        if (t.rows < 0 || t.cols < 0 || t.rows * t.cols > (int64_t(1) << 31))
            throw CheckpointError("implausible tensor shape");
        t.v.resize(std::size_t(t.rows * t.cols));
        need(t.v.size() * sizeof(double));
        std::memcpy(t.v.data(), p, t.v.size() * sizeof(double));
        p += t.v.size() * sizeof(double);
        return t;
    }
};

}  // namespace

void Trainer::save_checkpoint(const std::string& path) const {
    std::vector<char> buf;
    put_bytes(buf, kMagic, 8);
    put_u32(buf, kVersion);
    put_u64(buf, uint64_t(step_));
    put_u64(buf, cfg_.seed);

    const auto params = store_.all();
    put_u32(buf, uint32_t(params.size()));
    for (const auto* p : params) {
        put_string(buf, p->name);
        put_tensor(buf, p->value);
        auto it = adam_.find(p->name);
        const bool has_adam = it != adam_.end() && it->second.m.size() == p->value.size();
        put_u32(buf, has_adam ? 1 : 0);
        if (has_adam) {
            put_i64(buf, it->second.step);
            put_tensor(buf, it->second.m);
            put_tensor(buf, it->second.v);
        }
    }
    const uint32_t crc = uint32_t(crc32(0, reinterpret_cast<const Bytef*>(buf.data()),
                                        uInt(buf.size())));
    put_u32(buf, crc);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write checkpoint: " + path);
    out.write(buf.data(), std::streamsize(buf.size()));
}

void Trainer::load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open checkpoint: " + path);
    std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (buf.size() < 8 + 4 + 4) throw CheckpointError("truncated checkpoint");

    // Verify the CRC over everything before the trailer.
    uint32_t stored_crc;
    std::memcpy(&stored_crc, buf.data() + buf.size() - 4, 4);
    const uint32_t crc = uint32_t(crc32(0, reinterpret_cast<const Bytef*>(buf.data()),
                                        uInt(buf.size() - 4)));
    if (crc != stored_crc) throw CheckpointError("checkpoint CRC mismatch");

    Reader r{buf.data(), buf.data() + buf.size() - 4};
    char magic[8];
    r.need(8);
    std::memcpy(magic, r.p, 8);
    r.p += 8;
    if (std::memcmp(magic, kMagic, 8) != 0) throw CheckpointError("bad checkpoint magic");
    if (r.u32() != kVersion) throw CheckpointError("checkpoint version mismatch");
    const uint64_t step = r.u64();
    const uint64_t seed = r.u64();
    if (seed != cfg_.seed) throw CheckpointError("checkpoint was produced with another seed");

    // Stage everything first; commit only after the whole file parses.
    struct Staged {
        diff::Parameter* target;
        diff::Tensor value;
        bool has_adam;
        diff::AdamState adam;
    };
    std::vector<Staged> staged;
    const uint32_t n_params = r.u32();
    if (n_params != store_.all().size()) throw CheckpointError("parameter set size mismatch");
    for (uint32_t i = 0; i < n_params; ++i) {
        const std::string name = r.str();
        if (!store_.contains(name)) throw CheckpointError("unknown parameter in checkpoint: " + name);
        Staged s;
        s.target = &store_.get(name);
        s.value = r.tensor();
        if (s.value.rows != s.target->value.rows || s.value.cols != s.target->value.cols)
            throw CheckpointError("parameter shape mismatch: " + name);
        s.has_adam = r.u32() != 0;
        if (s.has_adam) {
            s.adam.step = r.i64();
            s.adam.m = r.tensor();
            s.adam.v = r.tensor();
        }
        staged.push_back(std::move(s));
    }
    if (r.p != r.end) throw CheckpointError("trailing bytes in checkpoint");

    for (auto& s : staged) {
        s.target->value = std::move(s.value);
        s.target->zero_grad();
        if (s.has_adam)
            adam_[s.target->name] = std::move(s.adam);
        else
            adam_.erase(s.target->name);
    }
    step_ = int64_t(step);
}

}  // namespace qnerf::train
