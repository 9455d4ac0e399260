#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fgm/dataset.hpp"

namespace fgm {

using unit_id = std::uint64_t;

/// One generated cutting plane: the selected unit ids (features, groups,
/// tree nodes or virtual features) in increasing order, together with the
/// score each unit had when it was selected.
struct Constraint {
    std::vector<unit_id> ids;
    std::vector<double> scores;  // aligned with ids
    std::size_t budget = 0;

    double score_sum() const {
        double s = 0.0;
        for (double v : scores) s += v;
        return s;
    }

    /// Identity of a constraint is its id set.
    bool same_ids(const Constraint& other) const { return ids == other.ids; }
};

/// Bounded selection of the B best (score, id) pairs. Larger score wins;
/// equal scores go to the smaller id. Holds at most B entries with the
/// current worst at the heap root, so each offer costs O(log B).
class TopBSelector {
public:
    explicit TopBSelector(std::size_t budget);

    void offer(unit_id id, double score);

    bool full() const noexcept { return heap_.size() == budget_; }
    /// Smallest retained score; only meaningful when full().
    double min_score() const noexcept { return heap_.front().score; }

    Constraint finish() &&;

private:
    struct Item {
        double score;
        unit_id id;
    };
    // true when a ranks strictly below b
    static bool worse(const Item& a, const Item& b) {
        return a.score < b.score || (a.score == b.score && a.id > b.id);
    }
    struct HeapOrder {
        bool operator()(const Item& a, const Item& b) const { return worse(b, a); }
    };

    std::size_t budget_;
    std::vector<Item> heap_;
};

/// omega = sum_i alpha_i y_i x_i over the raw features. Throws ContractError
/// on a length mismatch or a negative alpha entry.
std::vector<double> compute_omega(std::span<const double> alpha, const SparseDataset& data);

/// c_j = lambda_j^2 omega_j^2.
std::vector<double> score_features(std::span<const double> alpha, const SparseDataset& data,
                                   const ScalingPrior& lambda);

/// Ids of the `budget` largest scores (all ids when fewer), ties to the smaller index.
Constraint select_top_b(std::span<const double> scores, std::size_t budget);

/// c_g = lambda_g^2 ||omega_{G_g}||^2.
std::vector<double> score_groups(std::span<const double> alpha, const SparseDataset& data,
                                 const GroupStructure& groups, const ScalingPrior& lambda);

/// Scores of every tree node, no pruning.
std::vector<double> score_tree_exhaustive(std::span<const double> alpha, const SparseDataset& data,
                                          const TreeStructure& tree);

struct TreeScanStats {
    std::size_t nodes_scored = 0;
    std::size_t nodes_skipped = 0;
};

/// Top-B tree nodes. A subtree is skipped once the selector is full and
/// lambda_max^2 ||omega_G||^2 of its root falls strictly below the current
/// B-th best score; the result equals exhaustive scoring followed by
/// select_top_b.
Constraint score_tree_pruned(std::span<const double> alpha, const SparseDataset& data, const TreeStructure& tree,
                             std::size_t budget, TreeScanStats* stats = nullptr);

// ------------------------------------------------------ polynomial features

struct PolyParams {
    double gamma = 1.0;
    double r = 1.0;
};

/// Coordinate of the explicit degree-2 polynomial feature map
/// [r, sqrt(2 gamma r) x_a, gamma x_a^2, sqrt(2) gamma x_a x_b (a < b)].
/// Flat order: Constant, Linear(0..m-1), Square(0..m-1), Cross pairs in
/// lexicographic order.
struct VirtualFeatureId {
    enum class Kind { constant, linear, square, cross };
    Kind kind = Kind::constant;
    index_t a = 0;
    index_t b = 0;

    friend bool operator==(const VirtualFeatureId&, const VirtualFeatureId&) = default;
};

/// (m + 2)(m + 1) / 2
std::uint64_t virtual_dim(std::size_t m);
std::uint64_t to_flat(const VirtualFeatureId& v, std::size_t m);
VirtualFeatureId from_flat(std::uint64_t flat, std::size_t m);

/// phi_v(x) for one sparse row.
double virtual_value(const VirtualFeatureId& v, std::span<const Entry> row, const PolyParams& params);

/// Top-B virtual features by c_k = omega_k^2, without materializing the map.
/// Cross scores are accumulated for `block` anchor features at a time, so the
/// working memory beyond the data is O(B + block * m).
Constraint score_polynomial_streamed(std::span<const double> alpha, const SparseDataset& data,
                                     const PolyParams& params, std::size_t budget, std::size_t block);

// ---------------------------------------------------------- intersection kernel

/// c_k = sum_i sum_j alpha_i alpha_j y_i y_j min(|x_ik|^beta, |x_jk|^beta),
/// evaluated per feature in O(nnz_k log nnz_k) by sorting the column.
std::vector<double> score_hik(std::span<const double> alpha, const SparseDataset& data, double beta);

}  // namespace fgm
