#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace plandistill {

std::uint64_t fnv1a64(std::string_view bytes);

// Derives an independent stream seed from a run seed and a label, so that
// per-item randomness does not depend on processing order.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label);

// Seeded generator whose outputs are identical on every platform: the engine
// is fully specified by the standard and the conversions below avoid the
// implementation-defined std:: distributions.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Uniform in [0, n). n must be positive.
    std::size_t bounded(std::size_t n) {
        const std::uint64_t bound = n;
        const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return static_cast<std::size_t>(x % bound);
    }

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const std::size_t j = bounded(i);
            using std::swap;
            swap(items[i - 1], items[j]);
        }
    }

    // count distinct indices from [0, n), in draw order.
    std::vector<std::size_t> sample_indices(std::size_t n, std::size_t count) {
        std::vector<std::size_t> idx(n);
        for (std::size_t i = 0; i < n; ++i) idx[i] = i;
        for (std::size_t i = 0; i < count && i < n; ++i) {
            const std::size_t j = i + bounded(n - i);
            std::swap(idx[i], idx[j]);
        }
        idx.resize(count < n ? count : n);
        return idx;
    }

private:
    std::mt19937_64 engine_;
};

// Lowercase hex SHA-256 of bytes.
std::string sha256_hex(std::string_view bytes);

}  // namespace plandistill
