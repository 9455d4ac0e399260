#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fgm {

using index_t = std::uint32_t;

struct Entry {
    index_t index;
    double value;

    friend bool operator==(const Entry&, const Entry&) = default;
};

/// Instance-major sparse design matrix with labels in {-1, +1}.
///
/// Rows are stored CSR style; within a row the feature indices are strictly
/// increasing and lie in [0, m). Immutable after construction.
class SparseDataset {
public:
    SparseDataset() = default;

    /// Validates every invariant; throws DataError on violation.
    SparseDataset(std::size_t dim, std::vector<std::size_t> row_ptr, std::vector<Entry> entries,
                  std::vector<double> labels);

    std::size_t n() const noexcept { return labels_.size(); }
    std::size_t m() const noexcept { return dim_; }
    std::size_t nnz() const noexcept { return entries_.size(); }

    std::span<const Entry> row(std::size_t i) const {
        return {entries_.data() + row_ptr_[i], row_ptr_[i + 1] - row_ptr_[i]};
    }
    std::span<const double> labels() const noexcept { return labels_; }
    double label(std::size_t i) const { return labels_[i]; }

    /// Value of feature j in row i (0 when absent). Binary search.
    double at(std::size_t i, index_t j) const;

    /// Same rows and labels, reported dimension raised to `dim`.
    SparseDataset with_dim(std::size_t dim) const;

    /// Euclidean norm of every feature column.
    std::vector<double> column_norms() const;

    friend bool operator==(const SparseDataset&, const SparseDataset&) = default;

private:
    std::size_t dim_ = 0;
    std::vector<std::size_t> row_ptr_{0};
    std::vector<Entry> entries_;
    std::vector<double> labels_;
};

/// Incremental construction; rows are sorted on add.
class DatasetBuilder {
public:
    /// Throws DataError on duplicate indices or a label outside {-1, +1}.
    void add_row(double label, std::vector<Entry> row);
    /// `dim == 0` infers the dimension as max index + 1.
    SparseDataset build(std::size_t dim = 0) &&;

private:
    std::vector<std::size_t> row_ptr_{0};
    std::vector<Entry> entries_;
    std::vector<double> labels_;
    std::size_t max_index_plus_one_ = 0;
};

/// Column-major copy of a dataset, used by scorers that walk features.
struct ColumnMajor {
    std::vector<std::size_t> col_ptr;
    std::vector<index_t> rows;
    std::vector<double> values;

    static ColumnMajor from(const SparseDataset& data);
};

// ---------------------------------------------------------------- scaling

enum class ScalingPolicy { ones, inverse_norm };

struct ScalingPrior {
    std::vector<double> lambda;
};

/// ones: all 1. inverse_norm: 1/||f_j||, with 0 for an all-zero column.
ScalingPrior compute_scaling_prior(const SparseDataset& data, ScalingPolicy policy);

// ------------------------------------------------------------- structures

/// Non-overlapping feature groups.
struct GroupStructure {
    std::vector<std::string> names;
    std::vector<std::vector<index_t>> groups;   // each sorted
    std::vector<std::optional<double>> lambda;  // per group, from the file

    std::size_t size() const noexcept { return groups.size(); }

    /// Throws StructureError on overlap, empty group or out-of-range index.
    void validate(std::size_t dim) const;
};

/// Group scaling: file-given lambdas win; the rest follow the policy with the
/// Frobenius norm of the group's columns (0 for an all-zero group).
ScalingPrior group_scaling_prior(const SparseDataset& data, const GroupStructure& groups,
                                 ScalingPolicy policy);

struct TreeNode {
    std::string name;
    std::vector<index_t> indices;  // sorted
    std::optional<std::size_t> parent;
    std::vector<std::size_t> children;
    double lambda = 1.0;
    double subtree_lambda_max = 1.0;  // max lambda over the node and its descendants
};

/// Tree-structured set of groups: any two node sets are either disjoint or
/// nested, each child is contained in its parent, and the sets cover [0, m).
class TreeStructure {
public:
    struct NodeSpec {
        std::string name;
        std::vector<index_t> indices;
        std::optional<std::size_t> parent;
        std::optional<double> lambda;
    };

    TreeStructure() = default;
    /// Throws StructureError when the nesting or coverage rules fail.
    TreeStructure(std::vector<NodeSpec> nodes, std::size_t dim);

    std::size_t size() const noexcept { return nodes_.size(); }
    std::size_t dim() const noexcept { return dim_; }
    const TreeNode& node(std::size_t id) const { return nodes_[id]; }
    std::span<const TreeNode> nodes() const noexcept { return nodes_; }
    std::span<const std::size_t> roots() const noexcept { return roots_; }

    /// Replaces per-node lambdas and recomputes the subtree maxima.
    void set_lambda(std::span<const double> lambda);

private:
    void recompute_lambda_max();

    std::vector<TreeNode> nodes_;
    std::vector<std::size_t> roots_;
    std::size_t dim_ = 0;
};

// ---------------------------------------------------------------- synthetic

enum class Weighting { type1, type2, type3 };

struct GroundTruth {
    std::vector<double> weights;   // dense, length m
    std::vector<index_t> support;  // sorted, { j : weights[j] != 0 }
};

struct SyntheticData {
    SparseDataset train;
    GroundTruth truth;
};

/// Gaussian design, k-sparse ground truth, labels sign(Xw) with sign(0) = +1.
/// Throws UsageError unless 0 < k <= m.
SyntheticData generate_synthetic(std::size_t n, std::size_t m, std::size_t k, Weighting weighting,
                                 std::uint64_t seed);

/// A further split drawn from the same distribution and truth on the test stream.
SparseDataset generate_test_split(std::size_t n, const GroundTruth& truth, std::uint64_t seed);

// ---------------------------------------------------------------------- I/O

struct LibsvmOptions {
    std::size_t dim = 0;  // 0 infers from the file
    /// Receives a note when 0/1 labels were remapped to -1/+1.
    std::vector<std::string>* warnings = nullptr;
};

SparseDataset load_libsvm(const std::filesystem::path& path, const LibsvmOptions& options = {});
void write_libsvm(const std::filesystem::path& path, const SparseDataset& data);

/// `name: i1 i2 ... [| lambda=<float>]`, 0-based indices.
GroupStructure load_groups(const std::filesystem::path& path, std::size_t dim);
/// `name parent|ROOT: i1 i2 ... [| lambda=<float>]`, 0-based indices.
TreeStructure load_tree(const std::filesystem::path& path, std::size_t dim);

/// `index weight` per line, 0-based indices, nonzero weights only.
GroundTruth load_ground_truth(const std::filesystem::path& path, std::size_t dim);
void write_ground_truth(const std::filesystem::path& path, const GroundTruth& truth);

}  // namespace fgm
