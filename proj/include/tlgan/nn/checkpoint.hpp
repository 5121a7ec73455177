#pragma once

#include "tlgan/types.hpp"

#include <json.hpp>

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

namespace tlgan::nn {

static_assert(std::endian::native == std::endian::little,
              "checkpoint archives are little-endian");

namespace detail {
constexpr char kMagic[10] = {'T', 'L', 'G', 'A', 'N', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

template <class S>
const char* dtype_name();
template <>
inline const char* dtype_name<float>() {
    return "f32";
}
template <>
inline const char* dtype_name<double>() {
    return "f64";
}
}  // namespace detail

/// Single-file weight archive: a JSON manifest (free-form `meta` plus a
/// blob table) followed by raw little-endian arrays. Writes are atomic
/// (temp file + rename) and carry no timestamps, so identical state
/// yields identical bytes.
class CheckpointWriter {
public:
    nlohmann::json meta = nlohmann::json::object();

    template <class S>
    void add(const std::string& name, const S* p, Eigen::Index n) {
        Blob b;
        b.name = name;
        b.dtype = detail::dtype_name<S>();
        b.count = static_cast<std::uint64_t>(n);
        b.offset = data_.size();
        blobs_.push_back(b);
        const char* raw = reinterpret_cast<const char*>(p);
        data_.append(raw, raw + static_cast<std::size_t>(n) * sizeof(S));
    }

    void write(const std::filesystem::path& path) const {
        nlohmann::json manifest;
        manifest["meta"] = meta;
        auto& table = manifest["blobs"] = nlohmann::json::array();
        for (const Blob& b : blobs_)
            table.push_back({{"name", b.name},
                             {"dtype", b.dtype},
                             {"count", b.count},
                             {"offset", b.offset}});
        const std::string text = manifest.dump();

        const std::filesystem::path tmp = path.string() + ".tmp";
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            if (!out) throw DataError("checkpoint: cannot open " + tmp.string());
            out.write(detail::kMagic, sizeof(detail::kMagic));
            const std::uint32_t version = detail::kVersion;
            out.write(reinterpret_cast<const char*>(&version), sizeof version);
            const std::uint64_t len = text.size();
            out.write(reinterpret_cast<const char*>(&len), sizeof len);
            out.write(text.data(), static_cast<std::streamsize>(text.size()));
            out.write(data_.data(), static_cast<std::streamsize>(data_.size()));
            if (!out) throw DataError("checkpoint: write failed for " + tmp.string());
        }
        std::filesystem::rename(tmp, path);
    }

private:
    struct Blob {
        std::string name, dtype;
        std::uint64_t count = 0, offset = 0;
    };
    std::vector<Blob> blobs_;
    std::string data_;
};

class CheckpointReader {
public:
    explicit CheckpointReader(const std::filesystem::path& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw DataError("checkpoint: cannot open " + path.string());
        char magic[sizeof(detail::kMagic)];
        in.read(magic, sizeof magic);
        if (!in || std::memcmp(magic, detail::kMagic, sizeof magic) != 0)
            throw DataError("checkpoint: bad magic in " + path.string());
        std::uint32_t version = 0;
        in.read(reinterpret_cast<char*>(&version), sizeof version);
        if (!in || version != detail::kVersion)
            throw DataError("checkpoint: unsupported version in " + path.string());
        std::uint64_t len = 0;
        in.read(reinterpret_cast<char*>(&len), sizeof len);
        if (!in) throw DataError("checkpoint: truncated manifest in " + path.string());
        std::string text(len, '\0');
        in.read(text.data(), static_cast<std::streamsize>(len));
        if (!in) throw DataError("checkpoint: truncated manifest in " + path.string());

        nlohmann::json manifest = nlohmann::json::parse(text, nullptr, false);
        if (manifest.is_discarded() || !manifest.contains("blobs"))
            throw DataError("checkpoint: corrupt manifest in " + path.string());
        meta_ = manifest.value("meta", nlohmann::json::object());

        data_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
        for (const auto& e : manifest["blobs"]) {
            Blob b;
            b.dtype = e.at("dtype").get<std::string>();
            b.count = e.at("count").get<std::uint64_t>();
            b.offset = e.at("offset").get<std::uint64_t>();
            const std::size_t width = b.dtype == "f64" ? 8 : 4;
            if (b.offset + b.count * width > data_.size())
                throw DataError("checkpoint: blob out of range in " + path.string());
            blobs_[e.at("name").get<std::string>()] = b;
        }
    }

    const nlohmann::json& meta() const { return meta_; }
    bool has(const std::string& name) const { return blobs_.count(name) != 0; }

    std::uint64_t count(const std::string& name) const { return find(name).count; }

    template <class S>
    void read(const std::string& name, S* dst, Eigen::Index n) const {
        const Blob& b = find(name);
        if (b.dtype != detail::dtype_name<S>())
            throw DataError("checkpoint: dtype mismatch for " + name);
        if (b.count != static_cast<std::uint64_t>(n))
            throw DataError("checkpoint: size mismatch for " + name);
        std::memcpy(dst, data_.data() + b.offset, static_cast<std::size_t>(n) * sizeof(S));
    }

private:
    struct Blob {
        std::string dtype;
        std::uint64_t count = 0, offset = 0;
    };

    const Blob& find(const std::string& name) const {
        auto it = blobs_.find(name);
        if (it == blobs_.end()) throw DataError("checkpoint: missing blob " + name);
        return it->second;
    }

    nlohmann::json meta_;
    std::map<std::string, Blob> blobs_;
    std::string data_;
};

}  // namespace tlgan::nn
