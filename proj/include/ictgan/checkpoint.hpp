// Named-tensor checkpoint container, magic "ICTG0001".
//
// Layout: 8-byte magic, u32 entry count, manifest (name, element size, shape,
// payload byte offset), then little-endian IEEE-754 payloads.
#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "ictgan/common.hpp"
#include "ictgan/tensor.hpp"

namespace ictgan {

static_assert(std::endian::native == std::endian::little,
              "checkpoint payloads assume a little-endian host");

struct CheckpointEntry {
    std::string name;
    int elem_size = 4;  // 4 = f32, 8 = f64
    std::vector<int> shape;
    std::vector<unsigned char> bytes;
};

class Checkpoint {
public:
    static constexpr char kMagic[9] = "ICTG0001";

    template <class Real>
    void put(const std::string& name, const std::vector<int>& shape,
             const std::vector<Real>& values) {
        static_assert(std::is_floating_point_v<Real>);
        CheckpointEntry e;
        e.name = name;
        e.elem_size = sizeof(Real);
        e.shape = shape;
        e.bytes.resize(values.size() * sizeof(Real));
        std::memcpy(e.bytes.data(), values.data(), e.bytes.size());
        entries_.push_back(std::move(e));
    }

    template <class Real>
    void put_tensor(const std::string& name, const Tensor<Real>& t) {
        put(name, t.shape, t.values);
    }

    template <class Real>
    void put_scalar(const std::string& name, Real v) {
        put<Real>(name, {1}, {v});
    }

    bool has(const std::string& name) const { return find(name) != nullptr; }

    template <class Real>
    std::vector<Real> get(const std::string& name, std::vector<int>* shape_out = nullptr) const {
        const CheckpointEntry* e = find(name);
        if (!e) throw FormatError("checkpoint: missing tensor '" + name + "'");
        if (e->elem_size != sizeof(Real))
            throw FormatError("checkpoint: element type mismatch for '" + name + "'");
        std::vector<Real> out(e->bytes.size() / sizeof(Real));
        std::memcpy(out.data(), e->bytes.data(), e->bytes.size());
        if (shape_out) *shape_out = e->shape;
        return out;
    }

    template <class Real>
    void get_tensor(const std::string& name, Tensor<Real>& t) const {
        std::vector<int> shape;
        auto vals = get<Real>(name, &shape);
        if (shape != t.shape)
            throw FormatError("checkpoint: shape mismatch for '" + name + "': stored " +
                              shape_str(shape) + ", expected " + shape_str(t.shape));
        t.values = std::move(vals);
    }

    template <class Real>
    Real get_scalar(const std::string& name) const {
        auto v = get<Real>(name);
        if (v.size() != 1) throw FormatError("checkpoint: '" + name + "' is not scalar");
        return v[0];
    }

    const std::vector<CheckpointEntry>& entries() const { return entries_; }

    void save(const std::string& path) const {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw IoError("cannot open checkpoint for writing: " + path);
        f.write(kMagic, 8);
        write_u32(f, static_cast<std::uint32_t>(entries_.size()));
        std::uint64_t offset = 0;
        for (const auto& e : entries_) {
            write_u32(f, static_cast<std::uint32_t>(e.name.size()));
            f.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
            const unsigned char es = static_cast<unsigned char>(e.elem_size);
            f.write(reinterpret_cast<const char*>(&es), 1);
            const unsigned char nd = static_cast<unsigned char>(e.shape.size());
            f.write(reinterpret_cast<const char*>(&nd), 1);
            for (int d : e.shape) write_u32(f, static_cast<std::uint32_t>(d));
            write_u64(f, offset);
            offset += e.bytes.size();
        }
        for (const auto& e : entries_)
            f.write(reinterpret_cast<const char*>(e.bytes.data()),
                    static_cast<std::streamsize>(e.bytes.size()));
        if (!f) throw IoError("checkpoint write failed: " + path);
    }

    static Checkpoint load(const std::string& path) {
        std::ifstream f(path, std::ios::binary);
        if (!f) throw IoError("cannot open checkpoint: " + path);
        char magic[8];
        f.read(magic, 8);
        if (!f || std::memcmp(magic, kMagic, 8) != 0)
            throw FormatError("not an ICTG0001 checkpoint: " + path);
        const std::uint32_t count = read_u32(f);
        Checkpoint ck;
        std::vector<std::uint64_t> offsets(count);
        std::vector<std::uint64_t> sizes(count);
        for (std::uint32_t i = 0; i < count; ++i) {
            CheckpointEntry e;
            const std::uint32_t name_len = read_u32(f);
            e.name.resize(name_len);
            f.read(e.name.data(), name_len);
            unsigned char es = 0, nd = 0;
            f.read(reinterpret_cast<char*>(&es), 1);
            f.read(reinterpret_cast<char*>(&nd), 1);
            e.elem_size = es;
            if (es != 4 && es != 8) throw FormatError("checkpoint: bad element size");
            std::uint64_t n = 1;
            for (int d = 0; d < nd; ++d) {
                const std::uint32_t dim = read_u32(f);
                e.shape.push_back(static_cast<int>(dim));
                n *= dim;
            }
            offsets[i] = read_u64(f);
            sizes[i] = n * es;
            if (!f) throw FormatError("truncated checkpoint manifest: " + path);
            ck.entries_.push_back(std::move(e));
        }
        const std::streampos payload_start = f.tellg();
        for (std::uint32_t i = 0; i < count; ++i) {
            auto& e = ck.entries_[i];
            e.bytes.resize(sizes[i]);
            f.seekg(payload_start + static_cast<std::streamoff>(offsets[i]));
            f.read(reinterpret_cast<char*>(e.bytes.data()), static_cast<std::streamsize>(sizes[i]));
            if (!f) throw FormatError("truncated checkpoint payload: " + path);
        }
        return ck;
    }

private:
    std::vector<CheckpointEntry> entries_;

    const CheckpointEntry* find(const std::string& name) const {
        for (const auto& e : entries_)
            if (e.name == name) return &e;
        return nullptr;
    }

    static void write_u32(std::ofstream& f, std::uint32_t v) {
        f.write(reinterpret_cast<const char*>(&v), 4);
    }
    static void write_u64(std::ofstream& f, std::uint64_t v) {
        f.write(reinterpret_cast<const char*>(&v), 8);
    }
    static std::uint32_t read_u32(std::ifstream& f) {
        std::uint32_t v = 0;
        f.read(reinterpret_cast<char*>(&v), 4);
        return v;
    }
    static std::uint64_t read_u64(std::ifstream& f) {
        std::uint64_t v = 0;
        f.read(reinterpret_cast<char*>(&v), 8);
        return v;
    }
};

}  // namespace ictgan
