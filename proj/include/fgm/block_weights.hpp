#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace fgm {

/// Per-constraint weight blocks; their concatenation is the subproblem variable.
struct BlockWeights {
    std::vector<std::vector<double>> blocks;

    std::size_t size() const noexcept { return blocks.size(); }
    std::vector<double>& operator[](std::size_t t) { return blocks[t]; }
    const std::vector<double>& operator[](std::size_t t) const { return blocks[t]; }

    /// Zero blocks with the given dimensions.
    static BlockWeights zeros(const std::vector<std::size_t>& dims) {
        BlockWeights w;
        w.blocks.reserve(dims.size());
        for (auto d : dims) w.blocks.emplace_back(d, 0.0);
        return w;
    }

    BlockWeights zeros_like() const {
        BlockWeights w;
        w.blocks.reserve(blocks.size());
        for (const auto& b : blocks) w.blocks.emplace_back(b.size(), 0.0);
        return w;
    }

    std::vector<std::size_t> dims() const {
        std::vector<std::size_t> d;
        d.reserve(blocks.size());
        for (const auto& b : blocks) d.push_back(b.size());
        return d;
    }

    std::size_t total_dim() const noexcept {
        std::size_t s = 0;
        for (const auto& b : blocks) s += b.size();
        return s;
    }

    double block_norm(std::size_t t) const {
        double s = 0.0;
        for (double v : blocks[t]) s += v * v;
        return std::sqrt(s);
    }

    std::vector<double> block_norms() const {
        std::vector<double> out(blocks.size());
        for (std::size_t t = 0; t < blocks.size(); ++t) out[t] = block_norm(t);
        return out;
    }

    double squared_norm() const {
        double s = 0.0;
        for (const auto& b : blocks)
            for (double v : b) s += v * v;
        return s;
    }
};

/// Squared Euclidean distance between two equally shaped block vectors.
inline double squared_distance(const BlockWeights& a, const BlockWeights& b) {
    double s = 0.0;
    for (std::size_t t = 0; t < a.size(); ++t)
        for (std::size_t j = 0; j < a[t].size(); ++j) {
            const double d = a[t][j] - b[t][j];
            s += d * d;
        }
    return s;
}

}  // namespace fgm
