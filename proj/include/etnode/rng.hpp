#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "etnode/tensor.hpp"

namespace etnode {

/// Deterministic random source. mt19937_64 is fully specified by the
/// standard; the uniform and normal transforms are written out explicitly so
/// draws do not depend on library-specific distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform in [0, 1) with 53 random bits.
    double uniform01() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Standard normal via Box-Muller (one value per pair; the sibling is
    /// cached).
    double normal();

    /// Tensor of i.i.d. standard normals.
    Tensor normal_tensor(std::vector<std::size_t> shape);

    /// Tensor of i.i.d. uniforms in [lo, hi).
    Tensor uniform_tensor(std::vector<std::size_t> shape, double lo, double hi);

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);

    /// In-place Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

    /// Derives an independent sub-stream seed, e.g. per epoch or per run
    /// phase. Splitmix64 of (seed, tag).
    static std::uint64_t derive(std::uint64_t seed, std::uint64_t tag);

private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace etnode
