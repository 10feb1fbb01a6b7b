#pragma once

// Reproducible Karhunen-Loeve increments in whitened coordinates.
//
// Every Gaussian is a pure function of (stream key, fine step index, mode
// index), so truncating the number of modes or reordering samples across
// workers never changes the value of any retained increment. Gaussians come
// from Box-Muller on SplitMix64-hashed counters: modes 2p and 2p+1 share one
// uniform pair and take the cosine and sine branches respectively.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace amlmc {

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Uniform on (0, 1].
inline double to_unit_open_left(std::uint64_t x) noexcept {
    return (static_cast<double>(x >> 11) + 1.0) * 0x1.0p-53;
}

// Uniform on [0, 1).
inline double to_unit(std::uint64_t x) noexcept {
    return static_cast<double>(x >> 11) * 0x1.0p-53;
}

}  // namespace detail

enum class StreamRole : std::uint32_t { Coupled = 0 };

struct StreamKey {
    std::uint64_t master_seed = 0;
    std::uint32_t level = 0;
    std::uint64_t sample_index = 0;
    StreamRole role = StreamRole::Coupled;

    friend bool operator==(const StreamKey&, const StreamKey&) = default;
};

/// Counter-based Gaussian stream. The cursor only tracks how many fine steps
/// have been consumed; draws themselves are random-access.
class Stream {
public:
    explicit Stream(std::uint64_t hashed_key) noexcept : key_(hashed_key) {}

    std::uint64_t key() const noexcept { return key_; }
    std::uint64_t cursor() const noexcept { return cursor_; }

    /// Both Box-Muller outputs for modes 2*pair and 2*pair+1 of a fine step.
    void gaussian_pair(std::uint64_t step, std::uint64_t pair, double& even,
                       double& odd) const noexcept {
        const std::uint64_t h =
            detail::splitmix64(key_ ^ detail::splitmix64(step * 0xD1B54A32D192ED03ull + pair));
        const double u1 = detail::to_unit_open_left(detail::splitmix64(h));
        const double u2 = detail::to_unit(detail::splitmix64(h ^ 0x8CB92BA72F3D8DD7ull));
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        even = radius * std::cos(angle);
        odd = radius * std::sin(angle);
    }

    /// Standard normal variate attached to (fine step, mode).
    double gaussian(std::uint64_t step, std::uint64_t mode) const noexcept {
        double even = 0.0;
        double odd = 0.0;
        gaussian_pair(step, mode >> 1, even, odd);
        return (mode & 1u) ? odd : even;
    }

    /// Sequential view used by the determinism tests: draw i is gaussian(0, i).
    double draw(std::uint64_t i) const noexcept { return gaussian(0, i); }

    /// Next fine step index; advances the cursor.
    std::uint64_t take_step() noexcept { return cursor_++; }

private:
    std::uint64_t key_;
    std::uint64_t cursor_ = 0;
};

inline Stream derive_stream(const StreamKey& key) noexcept {
    std::uint64_t h = detail::splitmix64(key.master_seed);
    h = detail::splitmix64(h ^ (0x632BE59BD9B4E019ull + key.level));
    h = detail::splitmix64(h ^ key.sample_index);
    h = detail::splitmix64(h ^ (static_cast<std::uint64_t>(key.role) + 0xA0761D6478BD642Full));
    return Stream(h);
}

/// Whitened increments of one macro step split at its midpoint. Each entry is
/// N(0, dt_half); the sqrt(eta_k) scaling belongs to the diffusion model.
struct IncrementBlock {
    std::vector<double> first_half;
    std::vector<double> second_half;
    double dt_half = 0.0;

    std::size_t modes() const noexcept { return first_half.size(); }

    /// Coarse increment over the whole macro step, truncated to `k` modes.
    std::vector<double> coarse(std::size_t k) const {
        if (k > modes()) throw std::invalid_argument("IncrementBlock::coarse: too many modes");
        std::vector<double> out(k);
        for (std::size_t i = 0; i < k; ++i) out[i] = first_half[i] + second_half[i];
        return out;
    }

    friend bool operator==(const IncrementBlock&, const IncrementBlock&) = default;
};

/// `k` whitened N(0, dt) increments for the next fine step of the stream.
inline void draw_increments(Stream& stream, std::size_t k, double dt, std::vector<double>& out) {
    if (!(dt > 0.0)) throw std::invalid_argument("draw_increments: dt must be positive");
    const std::uint64_t step = stream.take_step();
    const double sd = std::sqrt(dt);
    out.resize(k);
    for (std::size_t i = 0; i < k; i += 2) {
        double even = 0.0;
        double odd = 0.0;
        stream.gaussian_pair(step, i >> 1, even, odd);
        out[i] = sd * even;
        if (i + 1 < k) out[i + 1] = sd * odd;
    }
}

inline std::vector<double> draw_increments(Stream& stream, std::size_t k, double dt) {
    std::vector<double> out;
    draw_increments(stream, k, dt, out);
    return out;
}

/// Increments for the next macro step of length dt. Consumes two fine steps,
/// so a run at 2M steps reading one fine step at a time sees the same values.
inline void sample_block(Stream& stream, std::size_t k, double dt, IncrementBlock& block) {
    if (!(dt > 0.0)) throw std::invalid_argument("sample_block: dt must be positive");
    block.dt_half = 0.5 * dt;
    draw_increments(stream, k, block.dt_half, block.first_half);
    draw_increments(stream, k, block.dt_half, block.second_half);
}

inline IncrementBlock sample_block(Stream& stream, std::size_t k, double dt) {
    IncrementBlock block;
    sample_block(stream, k, dt, block);
    return block;
}

/// Swaps the two halves: the antithetic path sees the second half first.
inline IncrementBlock antithetic_view(const IncrementBlock& block) {
    return IncrementBlock{block.second_half, block.first_half, block.dt_half};
}

/// Milstein bracket dw_k dw_l - delta_kl dt in whitened coordinates.
inline double bracket(std::span<const double> dw, double dt, std::size_t k, std::size_t l) {
    if (k >= dw.size() || l >= dw.size()) {
        throw std::out_of_range("bracket: index (" + std::to_string(k) + ", " +
                                std::to_string(l) + ") outside " + std::to_string(dw.size()) +
                                " increments");
    }
    return dw[k] * dw[l] - (k == l ? dt : 0.0);
}

}  // namespace amlmc
