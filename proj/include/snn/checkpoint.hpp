#pragma once

// Named-tensor binary container. Layout (all integers little-endian):
//
//   magic      8 bytes  "SNNTENS\0"
//   version    u32      currently 1
//   count      u32      number of records
//   record*    name_len u32, name bytes (UTF-8, no terminator),
//              dtype    u8  (1 = float64, 2 = int64),
//              rank     u32, dims u64 x rank,
//              payload  numel x 8 bytes, row-major
//
// float64 payloads are IEEE-754 binary64 bit patterns.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "snn/tensor.hpp"

namespace snn {

struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class DType : std::uint8_t { Float64 = 1, Int64 = 2 };

struct Record {
    DType dtype = DType::Float64;
    Shape shape;
    std::vector<double> f64;
    std::vector<std::int64_t> i64;
};

class Container {
public:
    static constexpr char kMagic[8] = {'S', 'N', 'N', 'T', 'E', 'N', 'S', '\0'};
    static constexpr std::uint32_t kVersion = 1;

    void put(const std::string& name, const Tensor& t) {
        Record r;
        r.shape = t.shape();
        r.f64.assign(t.values().begin(), t.values().end());
        records_[name] = std::move(r);
    }
    void put_ints(const std::string& name, Shape shape, std::vector<std::int64_t> values) {
        if (numel(shape) != values.size()) throw ShapeError("container: int record " + name + " size mismatch");
        Record r;
        r.dtype = DType::Int64;
        r.shape = std::move(shape);
        r.i64 = std::move(values);
        records_[name] = std::move(r);
    }

    bool contains(const std::string& name) const { return records_.count(name) != 0; }
    const std::map<std::string, Record>& records() const { return records_; }

    Tensor tensor(const std::string& name) const {
        const Record& r = at(name);
        if (r.dtype != DType::Float64) throw FormatError("container: record '" + name + "' is not float64");
        return Tensor(r.shape, r.f64);
    }
    const std::vector<std::int64_t>& ints(const std::string& name) const {
        const Record& r = at(name);
        if (r.dtype != DType::Int64) throw FormatError("container: record '" + name + "' is not int64");
        return r.i64;
    }

    std::vector<std::uint8_t> serialize() const {
        std::vector<std::uint8_t> out(kMagic, kMagic + 8);
        write_u32(out, kVersion);
        write_u32(out, static_cast<std::uint32_t>(records_.size()));
        for (const auto& [name, r] : records_) {
            write_u32(out, static_cast<std::uint32_t>(name.size()));
            out.insert(out.end(), name.begin(), name.end());
            out.push_back(static_cast<std::uint8_t>(r.dtype));
            write_u32(out, static_cast<std::uint32_t>(r.shape.size()));
            for (auto d : r.shape) write_u64(out, d);
            if (r.dtype == DType::Float64)
                for (double v : r.f64) write_u64(out, std::bit_cast<std::uint64_t>(v));
            else
                for (auto v : r.i64) write_u64(out, static_cast<std::uint64_t>(v));
        }
        return out;
    }

    static Container deserialize(const std::vector<std::uint8_t>& bytes) {
        Reader in{bytes};
        if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 8) != 0) throw FormatError("container: bad magic");
        in.pos = 8;
        const auto version = in.u32();
        if (version != kVersion) throw FormatError("container: unsupported version " + std::to_string(version));
        const auto count = in.u32();
        Container c;
        for (std::uint32_t k = 0; k < count; ++k) {
            const auto len = in.u32();
            std::string name(reinterpret_cast<const char*>(in.take(len)), len);
            Record r;
            const auto tag = *in.take(1);
            if (tag != 1 && tag != 2) throw FormatError("container: unknown dtype tag " + std::to_string(tag));
            r.dtype = static_cast<DType>(tag);
            const auto rank = in.u32();
            for (std::uint32_t i = 0; i < rank; ++i) {
                const auto dim = in.u64();
                if (dim > bytes.size()) throw FormatError("container: implausible dimension in '" + name + "'");
                r.shape.push_back(static_cast<std::size_t>(dim));
            }
            const std::size_t n = numel(r.shape);
            if (n > (bytes.size() - in.pos) / 8) throw FormatError("container: truncated payload for '" + name + "'");
            if (r.dtype == DType::Float64) {
                r.f64.resize(n);
                for (auto& v : r.f64) v = std::bit_cast<double>(in.u64());
            } else {
                r.i64.resize(n);
                for (auto& v : r.i64) v = static_cast<std::int64_t>(in.u64());
            }
            c.records_[std::move(name)] = std::move(r);
        }
        return c;
    }

    void save(const std::string& path) const {
        const auto bytes = serialize();
        std::ofstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error("cannot open " + path + " for writing");
        f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!f) throw std::runtime_error("write failed: " + path);
    }

    static Container load(const std::string& path) {
        std::ifstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error("cannot open " + path);
        std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
        return deserialize(bytes);
    }

private:
    struct Reader {
        const std::vector<std::uint8_t>& bytes;
        std::size_t pos = 0;
        const std::uint8_t* take(std::size_t n) {
            if (bytes.size() - pos < n) throw FormatError("container: unexpected end of data");
            const auto* p = bytes.data() + pos;
            pos += n;
            return p;
        }
        std::uint32_t u32() {
            const auto* p = take(4);
            std::uint32_t v = 0;
            for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
            return v;
        }
        std::uint64_t u64() {
            const auto* p = take(8);
            std::uint64_t v = 0;
            for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
            return v;
        }
    };

    static void write_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    static void write_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
        for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }

    const Record& at(const std::string& name) const {
        auto it = records_.find(name);
        if (it == records_.end()) throw FormatError("container: missing record '" + name + "'");
        return it->second;
    }

    std::map<std::string, Record> records_;
};

}  // namespace snn
