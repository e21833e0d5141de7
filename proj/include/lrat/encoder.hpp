#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "error.hpp"
#include "hash.hpp"
#include "io.hpp"
#include "text.hpp"

namespace lrat {

/// Trainable state of the bi-encoder: one embedding row per hashed feature.
struct EncoderParams {
    std::size_t vocab_size = 0;  // V
    std::size_t dim = 0;         // h
    std::uint64_t hash_seed = 0;
    std::vector<double> table;   // row-major V x h

    std::span<double> row(std::size_t r) { return {table.data() + r * dim, dim}; }
    std::span<const double> row(std::size_t r) const { return {table.data() + r * dim, dim}; }

    bool finite() const {
        for (double v : table) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }

    friend bool operator==(const EncoderParams&, const EncoderParams&) = default;
};

inline constexpr std::size_t kDefaultVocab = std::size_t{1} << 16;
inline constexpr std::size_t kDefaultDim = 64;

/// Entries uniform in [-0.5/h, 0.5/h]; entry (r, c) depends only on
/// (init_seed, r, c).
inline EncoderParams init_encoder(std::size_t vocab_size, std::size_t dim, std::uint64_t hash_seed, std::uint64_t init_seed) {
    if (vocab_size == 0 || dim == 0) throw InputError("encoder vocabulary size and dimension must be positive");
    EncoderParams p{vocab_size, dim, hash_seed, std::vector<double>(vocab_size * dim)};
    const double scale = 1.0 / static_cast<double>(dim);
    for (std::size_t r = 0; r < vocab_size; ++r) {
        for (std::size_t c = 0; c < dim; ++c) {
            const std::uint64_t bits = mix_seed(init_seed, r, c);
            const double u = static_cast<double>(bits >> 11) * 0x1.0p-53;
            p.table[r * dim + c] = (u - 0.5) * scale;
        }
    }
    return p;
}

/// 64-bit FNV-1a over the seed's 8 little-endian bytes followed by the token
/// bytes, reduced mod V.
inline std::uint32_t feature_id(std::string_view token, std::uint64_t hash_seed, std::size_t vocab_size) {
    std::uint64_t h = kFnvOffset;
    for (int i = 0; i < 8; ++i) {
        h ^= static_cast<unsigned char>(hash_seed >> (8 * i));
        h *= kFnvPrime;
    }
    h = fnv1a64(token, h);
    return static_cast<std::uint32_t>(h % vocab_size);
}

inline std::vector<std::uint32_t> feature_ids(const EncoderParams& p, std::string_view text, std::size_t max_tokens) {
    std::vector<std::uint32_t> ids;
    for (const auto& tok : tokenize(text)) {
        if (ids.size() >= max_tokens) break;
        ids.push_back(feature_id(tok, p.hash_seed, p.vocab_size));
    }
    return ids;
}

/// L2-normalized embedding. `unit` is false for the zero vector produced by
/// empty text, which scores 0 against everything.
struct Embedding {
    std::vector<double> values;
    double norm = 0.0;  // norm before normalization
    bool unit = false;
};

inline std::vector<double> sum_rows(const EncoderParams& p, std::span<const std::uint32_t> ids) {
    std::vector<double> sum(p.dim, 0.0);
    for (std::uint32_t id : ids) {
        const auto r = p.row(id);
        for (std::size_t c = 0; c < p.dim; ++c) sum[c] += r[c];
    }
    return sum;
}

inline Embedding normalize(std::vector<double> v) {
    double sq = 0.0;
    for (double x : v) sq += x * x;
    const double norm = std::sqrt(sq);
    Embedding e;
    e.norm = norm;
    if (norm > 0.0) {
        for (double& x : v) x /= norm;
        e.unit = true;
    }
    e.values = std::move(v);
    return e;
}

inline Embedding encode(const EncoderParams& p, std::span<const std::uint32_t> ids) { return normalize(sum_rows(p, ids)); }

inline Embedding encode_text(const EncoderParams& p, std::string_view text, std::size_t max_tokens = 512) {
    return encode(p, feature_ids(p, text, max_tokens));
}

inline double similarity(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double similarity(const Embedding& a, const Embedding& b) {
    if (!a.unit || !b.unit) return 0.0;
    return similarity(a.values, b.values);
}

// ---------------------------------------------------------------------------
// Checkpoint: magic "LRATCKPT", u32 format version, u64 V, u64 h, u64
// hash_seed, then V*h IEEE-754 doubles row-major; all little-endian.

inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

template <typename T>
void put_le(std::string& out, T v) {
    std::uint64_t bits = 0;
    if constexpr (std::is_same_v<T, double>) {
        std::memcpy(&bits, &v, sizeof v);
    } else {
        bits = static_cast<std::uint64_t>(v);
    }
    for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

template <typename T>
T get_le(std::string_view in, std::size_t& pos) {
    if (pos + sizeof(T) > in.size()) throw InputError("checkpoint truncated");
    std::uint64_t bits = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
    pos += sizeof(T);
    if constexpr (std::is_same_v<T, double>) {
        double d;
        std::memcpy(&d, &bits, sizeof d);
        return d;
    } else {
        return static_cast<T>(bits);
    }
}

}  // namespace detail

inline std::string serialize_checkpoint(const EncoderParams& p) {
    std::string out = "LRATCKPT";
    out.reserve(8 + 4 + 24 + p.table.size() * 8);
    detail::put_le<std::uint32_t>(out, kCheckpointVersion);
    detail::put_le<std::uint64_t>(out, p.vocab_size);
    detail::put_le<std::uint64_t>(out, p.dim);
    detail::put_le<std::uint64_t>(out, p.hash_seed);
    for (double v : p.table) detail::put_le<double>(out, v);
    return out;
}

inline EncoderParams deserialize_checkpoint(std::string_view bytes) {
    if (bytes.substr(0, 8) != "LRATCKPT") throw InputError("not a checkpoint file (bad magic)");
    std::size_t pos = 8;
    const auto version = detail::get_le<std::uint32_t>(bytes, pos);
    if (version != kCheckpointVersion) throw InputError("unsupported checkpoint version " + std::to_string(version));
    EncoderParams p;
    p.vocab_size = detail::get_le<std::uint64_t>(bytes, pos);
    p.dim = detail::get_le<std::uint64_t>(bytes, pos);
    p.hash_seed = detail::get_le<std::uint64_t>(bytes, pos);
    if (p.vocab_size == 0 || p.dim == 0 || (bytes.size() - pos) != p.vocab_size * p.dim * 8) {
        throw InputError("checkpoint size does not match its header");
    }
    p.table.resize(p.vocab_size * p.dim);
    for (double& v : p.table) v = detail::get_le<double>(bytes, pos);
    if (!p.finite()) throw InputError("checkpoint contains non-finite entries");
    return p;
}

inline void save_checkpoint(const std::filesystem::path& path, const EncoderParams& p) {
    auto out = open_output(path, true);
    const auto bytes = serialize_checkpoint(p);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("failed writing checkpoint " + path.string());
}

inline EncoderParams load_checkpoint(const std::filesystem::path& path) { return deserialize_checkpoint(read_file(path)); }

}  // namespace lrat
