#pragma once

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "fgm/active_set.hpp"
#include "fgm/block_weights.hpp"
#include "fgm/dataset.hpp"
#include "fgm/rng.hpp"

namespace fgm::test {

/// Dense-valued random dataset with labels drawn independently.
inline SparseDataset random_dataset(std::size_t n, std::size_t m, std::uint64_t seed, double density = 1.0) {
    Rng rng(seed, 77);
    DatasetBuilder b;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<Entry> row;
        for (std::size_t j = 0; j < m; ++j) {
            if (density < 1.0 && rng.uniform() >= density) continue;
            row.push_back({static_cast<index_t>(j), rng.normal()});
        }
        b.add_row(rng.uniform() < 0.5 ? -1.0 : 1.0, std::move(row));
    }
    return std::move(b).build(m);
}

/// Labels sign(sum of the first k features), instances with |sum| < gap rejected.
inline SparseDataset separable_dataset(std::size_t n, std::size_t m, std::size_t k, double gap, std::uint64_t seed) {
    Rng rng(seed, 91);
    DatasetBuilder b;
    for (std::size_t i = 0; i < n;) {
        std::vector<Entry> row;
        double s = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            const double v = rng.normal();
            row.push_back({static_cast<index_t>(j), v});
            if (j < k) s += v;
        }
        if (std::abs(s) < gap) continue;
        b.add_row(s >= 0.0 ? 1.0 : -1.0, std::move(row));
        ++i;
    }
    return std::move(b).build(m);
}

inline std::vector<double> random_alpha(std::size_t n, std::uint64_t seed, double scale = 1.0) {
    Rng rng(seed, 55);
    std::vector<double> a(n);
    for (auto& v : a) v = scale * rng.uniform();
    return a;
}

/// Fresh empty directory under the system temp path, removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("fgm_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

/// Active set whose block t holds dims[t] Gaussian columns; unit ids are
/// consecutive across blocks so the id sets never collide.
inline ActiveSet random_cache(std::size_t n, const std::vector<std::size_t>& dims, std::uint64_t seed,
                              double scale = 1.0) {
    Rng rng(seed, 33);
    ActiveSet cache(n, Mode::plain);
    unit_id next = 0;
    for (auto d : dims) {
        Constraint c;
        c.budget = d;
        std::vector<ColumnSource> sources;
        std::vector<double> values;
        for (std::size_t k = 0; k < d; ++k) {
            c.ids.push_back(next);
            c.scores.push_back(0.0);
            sources.push_back({next, next, 1.0});
            ++next;
            for (std::size_t i = 0; i < n; ++i) values.push_back(scale * rng.normal());
        }
        cache.add(std::move(c), std::move(sources), std::move(values));
    }
    return cache;
}

inline BlockWeights random_blocks(const std::vector<std::size_t>& dims, std::uint64_t seed, double scale = 1.0) {
    Rng rng(seed, 44);
    auto w = BlockWeights::zeros(dims);
    for (auto& b : w.blocks)
        for (auto& v : b) v = scale * rng.normal();
    return w;
}

inline std::vector<double> random_labels(std::size_t n, std::uint64_t seed) {
    Rng rng(seed, 66);
    std::vector<double> y(n);
    for (auto& v : y) v = rng.uniform() < 0.5 ? -1.0 : 1.0;
    return y;
}

/// Decision values sum_t X_t w_t computed element by element.
inline std::vector<double> dense_scores(const ActiveSet& cache, const BlockWeights& w) {
    std::vector<double> z(cache.n(), 0.0);
    for (std::size_t t = 0; t < cache.size(); ++t)
        for (std::size_t c = 0; c < cache.block(t).cols(); ++c) {
            const auto col = cache.block(t).column(c, cache.n());
            for (std::size_t i = 0; i < cache.n(); ++i) z[i] += col[i] * w[t][c];
        }
    return z;
}

/// Random tree over [0, m): a node's set is split into up to four disjoint
/// children (not always covering it), with random lambdas, until `max_nodes`.
inline TreeStructure random_tree(std::size_t m, std::size_t max_nodes, std::uint64_t seed) {
    Rng rng(seed, 88);
    std::vector<TreeStructure::NodeSpec> specs;
    std::vector<index_t> all(m);
    for (std::size_t j = 0; j < m; ++j) all[j] = static_cast<index_t>(j);
    specs.push_back({"n0", all, std::nullopt, 0.2 + rng.uniform()});
    for (std::size_t h = 0; h < specs.size() && specs.size() < max_nodes; ++h) {
        auto pool = specs[h].indices;
        if (pool.size() < 2) continue;
        for (std::size_t j = pool.size(); j > 1; --j) std::swap(pool[j - 1], pool[rng.below(j)]);
        const std::size_t kids = 1 + rng.below(4);
        std::size_t start = 0;
        for (std::size_t c = 0; c < kids && start < pool.size() && specs.size() < max_nodes; ++c) {
            const std::size_t len = 1 + rng.below(std::max<std::size_t>(1, (pool.size() - start) / 2 + 1));
            std::vector<index_t> ids(pool.begin() + static_cast<std::ptrdiff_t>(start),
                                     pool.begin() + static_cast<std::ptrdiff_t>(std::min(pool.size(), start + len)));
            start += len;
            std::sort(ids.begin(), ids.end());
            // occasionally zero lambda to exercise the degenerate scores
            const double lam = rng.uniform() < 0.05 ? 0.0 : 0.2 + 2.0 * rng.uniform();
            specs.push_back({"n" + std::to_string(specs.size()), std::move(ids), h, lam});
        }
    }
    return TreeStructure(std::move(specs), m);
}

}  // namespace fgm::test
