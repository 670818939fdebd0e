#pragma once

// Exact (flat) cosine index with a bit-exact binary file format:
//   "SSIX" | version u32 | dim u32 | count u64 | metric u8 (1 = cosine)
//   count x { id_len u16 | id utf8 | dim x float32 }
// All integers and floats little-endian.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "specrag/embedder.hpp"
#include "specrag/error.hpp"

namespace specrag {

struct IndexEntry {
    std::string chunk_id;
    EmbeddingVector vector;
};

struct SearchResult {
    std::string chunk_id;
    double score = 0.0;

    bool operator==(const SearchResult&) const = default;
};

struct RetrieverConfig {
    std::size_t k = 3;
};

class VectorIndex {
public:
    static constexpr char kMagic[4] = {'S', 'S', 'I', 'X'};
    static constexpr std::uint32_t kVersion = 1;
    static constexpr std::uint8_t kMetricCosine = 1;

    VectorIndex() = default;

    /// Rejects duplicate ids and vectors whose dim differs from `dim`.
    static VectorIndex build(std::vector<IndexEntry> entries, std::size_t dim) {
        if (dim == 0 || dim > 0xFFFFFFFFu) throw InvalidArgument("index dim out of range");
        VectorIndex idx;
        idx.dim_ = dim;
        idx.ids_.reserve(entries.size());
        idx.vectors_.reserve(entries.size());
        for (auto& e : entries) {
            if (e.vector.dim() != dim)
                throw InvalidArgument("index entry '" + e.chunk_id + "' has dim " + std::to_string(e.vector.dim()) +
                                      ", expected " + std::to_string(dim));
            if (e.chunk_id.size() > 0xFFFF) throw InvalidArgument("chunk_id too long for index format");
            if (!idx.positions_.emplace(e.chunk_id, idx.ids_.size()).second)
                throw InvalidArgument("duplicate chunk_id '" + e.chunk_id + "'");
            idx.ids_.push_back(std::move(e.chunk_id));
            idx.vectors_.push_back(std::move(e.vector));
        }
        return idx;
    }

    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return ids_.size(); }
    bool empty() const noexcept { return ids_.empty(); }
    const std::vector<std::string>& ids() const noexcept { return ids_; }
    const EmbeddingVector& vector_at(std::size_t i) const { return vectors_.at(i); }
    bool contains(const std::string& id) const { return positions_.count(id) > 0; }

    /// Top min(k, size) by cosine, score descending, ties by ascending chunk_id.
    std::vector<SearchResult> search(const EmbeddingVector& query, const RetrieverConfig& cfg) const {
        if (empty()) throw InvalidArgument("empty index");
        if (query.dim() != dim_)
            throw InvalidArgument("query dim " + std::to_string(query.dim()) + " does not match index dim " +
                                  std::to_string(dim_));
        if (cfg.k < 1) throw InvalidArgument("k must be >= 1");
        std::vector<SearchResult> all;
        all.reserve(size());
        for (std::size_t i = 0; i < size(); ++i) all.push_back({ids_[i], cosine(query, vectors_[i])});
        std::size_t n = std::min(cfg.k, all.size());
        auto better = [](const SearchResult& a, const SearchResult& b) {
            if (a.score != b.score) return a.score > b.score;
            return a.chunk_id < b.chunk_id;
        };
        std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n), all.end(), better);
        all.resize(n);
        return all;
    }

    std::string serialize() const {
        std::string out;
        out.append(kMagic, 4);
        put_u32(out, kVersion);
        put_u32(out, static_cast<std::uint32_t>(dim_));
        put_u64(out, ids_.size());
        out.push_back(static_cast<char>(kMetricCosine));
        for (std::size_t i = 0; i < ids_.size(); ++i) {
            put_u16(out, static_cast<std::uint16_t>(ids_[i].size()));
            out.append(ids_[i]);
            for (float f : vectors_[i].values) put_u32(out, std::bit_cast<std::uint32_t>(f));
        }
        return out;
    }

    static VectorIndex deserialize(std::string_view bytes, const std::string& file_name = "<index>") {
        Cursor c{bytes, 0, file_name};
        if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw ParseError(file_name, 0, "bad magic");
        c.pos = 4;
        auto version = c.u32();
        if (version != kVersion) throw ParseError(file_name, 4, "unsupported index version " + std::to_string(version));
        auto dim = c.u32();
        auto count = c.u64();
        auto metric = c.u8();
        if (metric != kMetricCosine) throw ParseError(file_name, 20, "unsupported metric " + std::to_string(metric));
        std::vector<IndexEntry> entries;
        for (std::uint64_t i = 0; i < count; ++i) {
            IndexEntry e;
            auto len = c.u16();
            e.chunk_id = std::string(c.take(len));
            e.vector.values.resize(dim);
            for (std::uint32_t d = 0; d < dim; ++d) e.vector.values[d] = std::bit_cast<float>(c.u32());
            entries.push_back(std::move(e));
        }
        if (c.pos != bytes.size()) throw ParseError(file_name, c.pos, "trailing bytes after index records");
        try {
            return build(std::move(entries), dim);
        } catch (const InvalidArgument& e) {
            throw ParseError(file_name, 0, e.what());
        }
    }

    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write index " + path);
        auto bytes = serialize();
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw Error("write failed for " + path);
    }

    static VectorIndex load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw Error("cannot open index " + path);
        std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        return deserialize(bytes, path);
    }

private:
    static void put_u16(std::string& out, std::uint16_t v) {
        out.push_back(static_cast<char>(v & 0xFF));
        out.push_back(static_cast<char>(v >> 8));
    }
    static void put_u32(std::string& out, std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
    static void put_u64(std::string& out, std::uint64_t v) {
        for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }

    struct Cursor {
        std::string_view s;
        std::size_t pos;
        const std::string& file;

        std::string_view take(std::size_t n) {
            if (n > s.size() - pos) throw ParseError(file, pos, "truncated index file");
            auto v = s.substr(pos, n);
            pos += n;
            return v;
        }
        std::uint64_t le(std::size_t n) {
            auto b = take(n);
            std::uint64_t v = 0;
            for (std::size_t i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[i])) << (8 * i);
            return v;
        }
        std::uint8_t u8() { return static_cast<std::uint8_t>(le(1)); }
        std::uint16_t u16() { return static_cast<std::uint16_t>(le(2)); }
        std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
        std::uint64_t u64() { return le(8); }
    };

    std::size_t dim_ = 0;
    std::vector<std::string> ids_;
    std::vector<EmbeddingVector> vectors_;
    std::unordered_map<std::string, std::size_t> positions_;
};

inline VectorIndex build_index(std::vector<IndexEntry> entries, std::size_t dim) {
    return VectorIndex::build(std::move(entries), dim);
}

inline std::vector<SearchResult> search_top_k(const VectorIndex& index, const EmbeddingVector& query,
                                              const RetrieverConfig& cfg = {}) {
    return index.search(query, cfg);
}

}  // namespace specrag
