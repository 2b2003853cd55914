#pragma once

#include "hsd/core/error.hpp"
#include "hsd/core/io.hpp"
#include "hsd/nn/tensor.hpp"

#include "json.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace hsd::nn {

// Minimal safetensors codec: 8-byte little-endian header length, a JSON
// header, then raw little-endian tensor bytes. Reads F32/F64/F16/BF16,
// writes F32 or F64.
class SafetensorsFile {
  public:
    struct Entry {
        std::string dtype;
        Shape shape;
        std::size_t begin = 0;
        std::size_t end = 0;
    };

    static SafetensorsFile parse(std::string bytes, const std::string &origin = "<memory>") {
        static_assert(std::endian::native == std::endian::little, "little-endian host required");
        SafetensorsFile f;
        f.origin_ = origin;
        if (bytes.size() < 8) {
            throw CheckpointError(origin + ": truncated safetensors file");
        }
        std::uint64_t header_len = 0;
        std::memcpy(&header_len, bytes.data(), 8);
        if (header_len > bytes.size() - 8) {
            throw CheckpointError(origin + ": header length exceeds file size");
        }
        nlohmann::json header;
        try {
            header = nlohmann::json::parse(bytes.substr(8, header_len));
        } catch (const nlohmann::json::exception &e) {
            throw CheckpointError(origin + ": bad safetensors header: " + e.what());
        }
        const std::size_t data_start = 8 + header_len;
        for (const auto &[name, v] : header.items()) {
            if (name == "__metadata__") {
                for (const auto &[k, val] : v.items()) {
                    f.metadata_[k] = val.get<std::string>();
                }
                continue;
            }
            Entry e;
            e.dtype = v.at("dtype").get<std::string>();
            e.shape = v.at("shape").get<Shape>();
            e.begin = data_start + v.at("data_offsets")[0].get<std::size_t>();
            e.end = data_start + v.at("data_offsets")[1].get<std::size_t>();
            std::size_t n = 1;
            for (const auto d : e.shape) {
                n *= static_cast<std::size_t>(d);
            }
            if (e.end > bytes.size() || e.end < e.begin || (e.end - e.begin) != n * dtype_size(e.dtype, origin)) {
                throw CheckpointError(origin + ": tensor " + name + " has inconsistent offsets");
            }
            f.entries_.emplace(name, std::move(e));
        }
        f.bytes_ = std::move(bytes);
        return f;
    }

    static SafetensorsFile load(const std::filesystem::path &path) { return parse(read_file(path), path.string()); }

    [[nodiscard]] const std::map<std::string, Entry> &entries() const noexcept { return entries_; }
    [[nodiscard]] const std::map<std::string, std::string> &metadata() const noexcept { return metadata_; }
    [[nodiscard]] bool contains(const std::string &name) const { return entries_.contains(name); }
    [[nodiscard]] const std::string &origin() const noexcept { return origin_; }

    template <typename S>
    void copy_to(const std::string &name, Parameter<S> &dst) const {
        const auto it = entries_.find(name);
        if (it == entries_.end()) {
            throw CheckpointError(origin_ + ": missing tensor " + name);
        }
        const Entry &e = it->second;
        if (e.shape != dst.shape) {
            throw CheckpointError(origin_ + ": tensor " + name + " has shape " + shape_str(e.shape) + ", expected " +
                                  shape_str(dst.shape));
        }
        const char *src = bytes_.data() + e.begin;
        S *out = dst.value.data();
        const auto n = static_cast<std::size_t>(dst.value.size());
        for (std::size_t i = 0; i < n; ++i) {
            out[i] = static_cast<S>(read_scalar(e.dtype, src, i));
        }
    }

    template <typename S>
    struct Item {
        std::string name;
        Shape shape;
        const S *data;
    };

    // Serialises tensors in the given order. `f64` stores doubles, otherwise float32.
    template <typename S>
    static std::string serialize(const std::vector<Item<S>> &items, const std::map<std::string, std::string> &metadata,
                                 bool f64 = false) {
        nlohmann::ordered_json header;
        if (!metadata.empty()) {
            header["__metadata__"] = metadata;
        }
        std::size_t offset = 0;
        const std::size_t width = f64 ? 8 : 4;
        for (const auto &it : items) {
            std::size_t n = 1;
            for (const auto d : it.shape) {
                n *= static_cast<std::size_t>(d);
            }
            header[it.name] = {{"dtype", f64 ? "F64" : "F32"}, {"shape", it.shape}, {"data_offsets", {offset, offset + n * width}}};
            offset += n * width;
        }
        std::string h = header.dump();
        while ((h.size() + 8) % 8 != 0) {
            h.push_back(' ');
        }
        std::string out(8, '\0');
        const std::uint64_t len = h.size();
        std::memcpy(out.data(), &len, 8);
        out += h;
        out.reserve(out.size() + offset);
        for (const auto &it : items) {
            std::size_t n = 1;
            for (const auto d : it.shape) {
                n *= static_cast<std::size_t>(d);
            }
            for (std::size_t i = 0; i < n; ++i) {
                if (f64) {
                    const double v = static_cast<double>(it.data[i]);
                    out.append(reinterpret_cast<const char *>(&v), 8);
                } else {
                    const float v = static_cast<float>(it.data[i]);
                    out.append(reinterpret_cast<const char *>(&v), 4);
                }
            }
        }
        return out;
    }

  private:
    static std::size_t dtype_size(const std::string &dtype, const std::string &origin) {
        if (dtype == "F32") {
            return 4;
        }
        if (dtype == "F64") {
            return 8;
        }
        if (dtype == "F16" || dtype == "BF16") {
            return 2;
        }
        if (dtype == "I64") {
            return 8;
        }
        throw CheckpointError(origin + ": unsupported tensor dtype " + dtype);
    }

    static double half_to_double(std::uint16_t h) {
        const int sign = (h >> 15) & 1;
        const int exp = (h >> 10) & 0x1f;
        const int frac = h & 0x3ff;
        double v = 0.0;
        if (exp == 0) {
            v = std::ldexp(frac, -24);
        } else if (exp == 31) {
            v = frac ? std::nan("") : INFINITY;
        } else {
            v = std::ldexp(frac + 1024, exp - 25);
        }
        return sign ? -v : v;
    }

    static double read_scalar(const std::string &dtype, const char *base, std::size_t i) {
        if (dtype == "F32") {
            float v;
            std::memcpy(&v, base + i * 4, 4);
            return v;
        }
        if (dtype == "F64") {
            double v;
            std::memcpy(&v, base + i * 8, 8);
            return v;
        }
        if (dtype == "I64") {
            std::int64_t v;
            std::memcpy(&v, base + i * 8, 8);
            return static_cast<double>(v);
        }
        std::uint16_t h;
        std::memcpy(&h, base + i * 2, 2);
        if (dtype == "BF16") {
            const std::uint32_t bits = static_cast<std::uint32_t>(h) << 16;
            float v;
            std::memcpy(&v, &bits, 4);
            return v;
        }
        return half_to_double(h);
    }

    std::string origin_;
    std::string bytes_;
    std::map<std::string, Entry> entries_;
    std::map<std::string, std::string> metadata_;
};

}  // namespace hsd::nn
