#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fgm/dataset.hpp"
#include "fgm/engine.hpp"
#include "fgm/loss.hpp"

namespace fgm {

/// X restricted to a subset of columns (all columns when none are given).
/// Dense column-major storage above 30% fill, compressed columns otherwise.
/// Products skip zero weights, which keeps sparse iterates cheap.
class DesignMatrix {
public:
    DesignMatrix(const SparseDataset& data, std::span<const index_t> columns = {});

    std::size_t rows() const noexcept { return n_; }
    std::size_t cols() const noexcept { return cols_; }
    bool dense() const noexcept { return !dense_.empty(); }

    /// z = X w
    void multiply(std::span<const double> w, std::span<double> z) const;
    /// g = X' r
    void transpose_multiply(std::span<const double> r, std::span<double> g) const;

private:
    std::size_t n_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> dense_;  // column-major n x cols
    std::vector<std::size_t> col_ptr_;
    std::vector<index_t> row_idx_;
    std::vector<double> values_;
};

struct DenseWeights {
    std::vector<double> w;
    std::vector<double> objectives;  // after each accepted iteration
    std::size_t iterations = 0;

    std::size_t support_size() const;
    std::vector<std::uint64_t> support() const;
};

struct ProxOptions {
    double eps = 1e-4;  // gradient-mapping sup norm, relative to reg
    std::size_t max_iter = 5000;
    double eta = 0.8;
};

/// min reg ||w||_1 + p(w) by accelerated proximal gradient with soft-threshold,
/// stopped once ||tau (v - w)||_inf <= eps reg at an accepted step.
/// Throws UsageError unless reg > 0, NumericalError on a non-finite objective.
DenseWeights l1_prox_train(const SparseDataset& data, const LossKind& kind, double reg, const ProxOptions& options = {},
                           std::span<const double> warm = {});
DenseWeights l1_prox_train(const DesignMatrix& x, std::span<const double> labels, const LossKind& kind, double reg,
                           const ProxOptions& options = {}, std::span<const double> warm = {});

/// Smallest reg whose solution is w = 0: ||grad p(0)||_inf.
double l1_reg_max(const DesignMatrix& x, std::span<const double> labels, const LossKind& kind);

/// min 1/2 ||w||^2 + p(w) over all columns, stopped once
/// ||grad|| <= eps (1 + ||w||).
DenseWeights l2_full_train(const SparseDataset& data, const LossKind& kind, double eps = 1e-6,
                           std::size_t max_iter = 20000);
DenseWeights l2_full_train(const DesignMatrix& x, std::span<const double> labels, const LossKind& kind,
                           double eps = 1e-6, std::size_t max_iter = 20000);

inline constexpr double kDebiasC = 20.0;

/// l2 refit on the given feature ids. Throws UsageError on an empty support
/// or an id outside the data.
Model retrain_unbiased(const SparseDataset& data, std::span<const std::uint64_t> support, LossType loss,
                       double C_large = kDebiasC, double eps = 1e-6);

struct SupportMatch {
    std::size_t target = 0;
    double reg = 0.0;
    DenseWeights weights;
    bool matched = false;  // |support - target| <= tolerance * target
};

struct SweepOptions {
    double tolerance = 0.05;
    std::size_t grid_per_decade = 10;
    std::size_t max_grid = 80;
    std::size_t max_bisect = 30;
    ProxOptions prox;
};

/// Warm-started continuation over a decreasing log grid of reg starting at
/// l1_reg_max, then bisection in log(reg) inside the bracket of each target.
/// When no reg hits the band, the closest support found is returned with
/// matched = false.
std::vector<SupportMatch> l1_match_support(const SparseDataset& data, const LossKind& kind,
                                           std::span<const std::size_t> targets, const SweepOptions& options = {});

}  // namespace fgm
