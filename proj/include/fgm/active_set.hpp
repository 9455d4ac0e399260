#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fgm/block_weights.hpp"
#include "fgm/worstcase.hpp"

namespace fgm {

enum class Mode { plain, group, tree, polynomial };

/// Where a cached column came from: the selected unit, the underlying raw or
/// virtual feature, and the scaling applied to it.
struct ColumnSource {
    unit_id unit = 0;
    std::uint64_t feature = 0;
    double scale = 1.0;

    friend bool operator==(const ColumnSource&, const ColumnSource&) = default;
};

/// Dense n x cols column-major copy of the columns selected by one constraint.
struct CachedBlock {
    Constraint constraint;
    std::vector<ColumnSource> sources;
    std::vector<double> values;

    std::size_t cols() const noexcept { return sources.size(); }
    std::span<const double> column(std::size_t c, std::size_t n) const { return {values.data() + c * n, n}; }
};

/// The cutting-plane working set: generated constraints and their feature cache.
class ActiveSet {
public:
    ActiveSet(std::size_t n, Mode mode) : n_(n), mode_(mode) {}

    std::size_t n() const noexcept { return n_; }
    std::size_t size() const noexcept { return blocks_.size(); }
    Mode mode() const noexcept { return mode_; }
    const CachedBlock& block(std::size_t t) const { return blocks_[t]; }

    /// True when a constraint with the same id set is already present.
    bool contains(const Constraint& c) const;

    /// Appends a constraint with its cached columns. Throws ContractError on a
    /// duplicate id set or when `values` is not n * sources.size() long.
    void add(Constraint constraint, std::vector<ColumnSource> sources, std::vector<double> values);

    std::vector<std::size_t> dims() const;
    std::size_t total_columns() const;

    /// out += X_t w_t
    void multiply_add(std::size_t t, std::span<const double> w_t, std::span<double> out) const;
    /// sum_t X_t w_t. Throws ContractError when the shapes disagree.
    std::vector<double> multiply(const BlockWeights& w) const;
    /// out = X_t' r
    void transpose_multiply(std::size_t t, std::span<const double> r, std::span<double> out) const;
    /// [X_1' r; ...; X_T' r]
    BlockWeights transpose_multiply(std::span<const double> r) const;

    void check_shape(const BlockWeights& w) const;

private:
    std::size_t n_;
    Mode mode_;
    std::vector<CachedBlock> blocks_;
};

}  // namespace fgm
