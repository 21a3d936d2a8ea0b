#pragma once

#include <array>
#include <cstdint>

namespace sparsenorm {

// Coordinates of one replicate inside an experiment. Draws are a pure
// function of (seed, replicate, stream), so results do not depend on which
// thread evaluates a replicate or in which order.
struct SeedPath {
    std::uint64_t seed = 0;
    std::uint64_t replicate = 0;

    friend bool operator==(const SeedPath&, const SeedPath&) = default;
};

// Stream identifiers separating independent uses of one SeedPath.
enum class Stream : std::uint32_t {
    Noise = 0,
    Signal = 1,
    Auxiliary = 2,
};

// Philox4x32-10 counter-based generator.
class Philox4x32 {
public:
    using Block = std::array<std::uint32_t, 4>;

    explicit Philox4x32(std::uint64_t key) noexcept
        : key_{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)} {}

    Block operator()(Block counter) const noexcept {
        std::array<std::uint32_t, 2> k = key_;
        for (int round = 0; round < 10; ++round) {
            const std::uint64_t p0 = std::uint64_t{kM0} * counter[0];
            const std::uint64_t p1 = std::uint64_t{kM1} * counter[2];
            counter = {static_cast<std::uint32_t>(p1 >> 32) ^ counter[1] ^ k[0],
                       static_cast<std::uint32_t>(p1),
                       static_cast<std::uint32_t>(p0 >> 32) ^ counter[3] ^ k[1],
                       static_cast<std::uint32_t>(p0)};
            k[0] += kW0;
            k[1] += kW1;
        }
        return counter;
    }

private:
    static constexpr std::uint32_t kM0 = 0xD2511F53u;
    static constexpr std::uint32_t kM1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kW0 = 0x9E3779B9u;
    static constexpr std::uint32_t kW1 = 0xBB67AE85u;

    std::array<std::uint32_t, 2> key_;
};

// SplitMix64 finalizer; used to derive child seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Seed for a child experiment (grid cell, configuration) of a parent seed.
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t child) noexcept {
    return mix64(parent ^ mix64(child + 0x632BE59BD9B4E019ull));
}

// Sequential uniform/normal draws from one (seed, replicate, stream) cell.
class RandomStream {
public:
    RandomStream(SeedPath path, Stream stream) noexcept
        : philox_(path.seed),
          replicate_(path.replicate),
          stream_(static_cast<std::uint32_t>(stream)) {}

    std::uint64_t next_u64() noexcept {
        if (cursor_ == 2) {
            refill();
        }
        return buffer_[cursor_++];
    }

    // Uniform on the open interval (0, 1).
    double uniform() noexcept {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    // Uniform integer in [0, n), n > 0, by rejection.
    std::uint64_t below(std::uint64_t n) noexcept {
        const std::uint64_t limit = (~std::uint64_t{0}) - ((~std::uint64_t{0}) % n);
        std::uint64_t x = next_u64();
        while (x >= limit) {
            x = next_u64();
        }
        return x % n;
    }

    // Standard normal draw (Box-Muller, pairs cached).
    double normal() noexcept;

private:
    void refill() noexcept {
        const auto out = philox_({static_cast<std::uint32_t>(replicate_),
                                  static_cast<std::uint32_t>(replicate_ >> 32), stream_,
                                  block_++});
        buffer_[0] = (std::uint64_t{out[0]} << 32) | out[1];
        buffer_[1] = (std::uint64_t{out[2]} << 32) | out[3];
        cursor_ = 0;
    }

    Philox4x32 philox_;
    std::uint64_t replicate_;
    std::uint32_t stream_;
    std::uint32_t block_ = 0;
    std::array<std::uint64_t, 2> buffer_{};
    int cursor_ = 2;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace sparsenorm
