#include "fgm/worstcase.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "fgm/error.hpp"

namespace fgm {

// ------------------------------------------------------------- TopBSelector

TopBSelector::TopBSelector(std::size_t budget) : budget_(budget) {
    if (budget == 0) throw ContractError("budget must be at least 1");
    heap_.reserve(budget);
}

void TopBSelector::offer(unit_id id, double score) {
    const Item item{score, id};
    if (heap_.size() < budget_) {
        heap_.push_back(item);
        std::push_heap(heap_.begin(), heap_.end(), HeapOrder{});
    } else if (worse(heap_.front(), item)) {
        std::pop_heap(heap_.begin(), heap_.end(), HeapOrder{});
        heap_.back() = item;
        std::push_heap(heap_.begin(), heap_.end(), HeapOrder{});
    }
}

Constraint TopBSelector::finish() && {
    std::sort(heap_.begin(), heap_.end(), [](const Item& a, const Item& b) { return a.id < b.id; });
    Constraint c;
    c.budget = budget_;
    c.ids.reserve(heap_.size());
    c.scores.reserve(heap_.size());
    for (const auto& item : heap_) {
        c.ids.push_back(item.id);
        c.scores.push_back(item.score);
    }
    return c;
}

// ---------------------------------------------------------- plain / groups

namespace {

void check_alpha(std::span<const double> alpha, const SparseDataset& data) {
    if (alpha.size() != data.n()) {
        throw ContractError("alpha has length " + std::to_string(alpha.size()) + ", expected " +
                            std::to_string(data.n()));
    }
    for (std::size_t i = 0; i < alpha.size(); ++i) {
        if (!(alpha[i] >= 0.0)) throw ContractError("alpha[" + std::to_string(i) + "] is negative or NaN");
    }
}

double squared_norm_over(std::span<const double> omega, std::span<const index_t> ids) {
    double s = 0.0;
    for (auto j : ids) s += omega[j] * omega[j];
    return s;
}

}  // namespace

std::vector<double> compute_omega(std::span<const double> alpha, const SparseDataset& data) {
    check_alpha(alpha, data);
    std::vector<double> omega(data.m(), 0.0);
    for (std::size_t i = 0; i < data.n(); ++i) {
        const double coef = alpha[i] * data.label(i);
        if (coef == 0.0) continue;
        for (const auto& e : data.row(i)) omega[e.index] += coef * e.value;
    }
    return omega;
}

std::vector<double> score_features(std::span<const double> alpha, const SparseDataset& data,
                                   const ScalingPrior& lambda) {
    if (lambda.lambda.size() != data.m()) throw ContractError("scaling prior length differs from feature count");
    auto scores = compute_omega(alpha, data);
    for (std::size_t j = 0; j < scores.size(); ++j) {
        const double l = lambda.lambda[j];
        scores[j] = l * l * scores[j] * scores[j];
    }
    return scores;
}

Constraint select_top_b(std::span<const double> scores, std::size_t budget) {
    TopBSelector sel(budget);
    for (std::size_t j = 0; j < scores.size(); ++j) sel.offer(j, scores[j]);
    return std::move(sel).finish();
}

std::vector<double> score_groups(std::span<const double> alpha, const SparseDataset& data,
                                 const GroupStructure& groups, const ScalingPrior& lambda) {
    if (lambda.lambda.size() != groups.size()) throw ContractError("scaling prior length differs from group count");
    const auto omega = compute_omega(alpha, data);
    std::vector<double> scores(groups.size());
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const double l = lambda.lambda[g];
        scores[g] = l * l * squared_norm_over(omega, groups.groups[g]);
    }
    return scores;
}

// --------------------------------------------------------------------- tree

std::vector<double> score_tree_exhaustive(std::span<const double> alpha, const SparseDataset& data,
                                          const TreeStructure& tree) {
    const auto omega = compute_omega(alpha, data);
    std::vector<double> scores(tree.size());
    for (std::size_t h = 0; h < tree.size(); ++h) {
        const auto& node = tree.node(h);
        scores[h] = node.lambda * node.lambda * squared_norm_over(omega, node.indices);
    }
    return scores;
}

Constraint score_tree_pruned(std::span<const double> alpha, const SparseDataset& data, const TreeStructure& tree,
                             std::size_t budget, TreeScanStats* stats) {
    const auto omega = compute_omega(alpha, data);
    TopBSelector sel(budget);
    TreeScanStats local;
    std::vector<std::size_t> stack(tree.roots().rbegin(), tree.roots().rend());
    while (!stack.empty()) {
        const auto h = stack.back();
        stack.pop_back();
        const auto& node = tree.node(h);
        const double sq = squared_norm_over(omega, node.indices);
        const double bound = node.subtree_lambda_max * node.subtree_lambda_max * sq;
        if (sel.full() && bound < sel.min_score()) {
            // every descendant scores <= bound < current B-th best
            ++local.nodes_skipped;
            continue;
        }
        ++local.nodes_scored;
        sel.offer(h, node.lambda * node.lambda * sq);
        for (auto it = node.children.rbegin(); it != node.children.rend(); ++it) stack.push_back(*it);
    }
    if (stats) *stats = local;
    return std::move(sel).finish();
}

// --------------------------------------------------------------- polynomial

std::uint64_t virtual_dim(std::size_t m) {
    const std::uint64_t mm = m;
    return (mm + 2) * (mm + 1) / 2;
}

namespace {

// number of cross pairs whose first index is below a
std::uint64_t cross_offset(std::uint64_t a, std::uint64_t m) { return a * m - a * (a + 1) / 2; }

}  // namespace

std::uint64_t to_flat(const VirtualFeatureId& v, std::size_t m) {
    const std::uint64_t mm = m;
    switch (v.kind) {
        case VirtualFeatureId::Kind::constant:
            return 0;
        case VirtualFeatureId::Kind::linear:
            return 1 + v.a;
        case VirtualFeatureId::Kind::square:
            return 1 + mm + v.a;
        case VirtualFeatureId::Kind::cross:
            return 1 + 2 * mm + cross_offset(v.a, mm) + (v.b - v.a - 1);
    }
    return 0;
}

VirtualFeatureId from_flat(std::uint64_t flat, std::size_t m) {
    const std::uint64_t mm = m;
    if (flat >= virtual_dim(m)) throw ContractError("virtual feature id out of range");
    using K = VirtualFeatureId::Kind;
    if (flat == 0) return {K::constant, 0, 0};
    if (flat <= mm) return {K::linear, static_cast<index_t>(flat - 1), 0};
    if (flat <= 2 * mm) return {K::square, static_cast<index_t>(flat - 1 - mm), 0};
    const std::uint64_t q = flat - 1 - 2 * mm;
    // largest a with cross_offset(a) <= q
    std::uint64_t lo = 0, hi = mm - 1;
    while (lo < hi) {
        const std::uint64_t mid = (lo + hi + 1) / 2;
        if (cross_offset(mid, mm) <= q) lo = mid;
        else hi = mid - 1;
    }
    const std::uint64_t b = lo + 1 + (q - cross_offset(lo, mm));
    return {K::cross, static_cast<index_t>(lo), static_cast<index_t>(b)};
}

double virtual_value(const VirtualFeatureId& v, std::span<const Entry> row, const PolyParams& params) {
    auto lookup = [&](index_t j) {
        auto it = std::lower_bound(row.begin(), row.end(), j, [](const Entry& e, index_t x) { return e.index < x; });
        return (it != row.end() && it->index == j) ? it->value : 0.0;
    };
    using K = VirtualFeatureId::Kind;
    switch (v.kind) {
        case K::constant:
            return params.r;
        case K::linear:
            return std::sqrt(2.0 * params.gamma * params.r) * lookup(v.a);
        case K::square: {
            const double x = lookup(v.a);
            return params.gamma * x * x;
        }
        case K::cross:
            return std::sqrt(2.0) * params.gamma * lookup(v.a) * lookup(v.b);
    }
    return 0.0;
}

Constraint score_polynomial_streamed(std::span<const double> alpha, const SparseDataset& data,
                                     const PolyParams& params, std::size_t budget, std::size_t block) {
    if (!(params.gamma > 0.0) || !(params.r >= 0.0)) throw ContractError("polynomial map needs gamma > 0, r >= 0");
    if (block == 0) throw ContractError("block size must be at least 1");
    check_alpha(alpha, data);
    const std::size_t n = data.n();
    const std::size_t m = data.m();
    using K = VirtualFeatureId::Kind;

    std::vector<double> coef(n);
    double bias_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        coef[i] = alpha[i] * data.label(i);
        bias_sum += coef[i];
    }
    // first- and second-order sums in one pass, O(m) memory
    std::vector<double> lin(m, 0.0), sq(m, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (coef[i] == 0.0) continue;
        for (const auto& e : data.row(i)) {
            lin[e.index] += coef[i] * e.value;
            sq[e.index] += coef[i] * (e.value * e.value);
        }
    }
    TopBSelector sel(budget);
    const double c0 = params.r * bias_sum;
    sel.offer(0, c0 * c0);
    const double lin_scale = std::sqrt(2.0 * params.gamma * params.r);
    for (std::size_t a = 0; a < m; ++a) {
        const double w = lin_scale * lin[a];
        sel.offer(to_flat({K::linear, static_cast<index_t>(a), 0}, m), w * w);
    }
    for (std::size_t a = 0; a < m; ++a) {
        const double w = params.gamma * sq[a];
        sel.offer(to_flat({K::square, static_cast<index_t>(a), 0}, m), w * w);
    }

    const double cross_scale = std::sqrt(2.0) * params.gamma;
    std::vector<double> acc;
    for (std::size_t a0 = 0; a0 + 1 < m; a0 += block) {
        const std::size_t a1 = std::min(m - 1, a0 + block);  // anchors [a0, a1)
        acc.assign((a1 - a0) * m, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            if (coef[i] == 0.0) continue;
            const auto row = data.row(i);
            auto it = std::lower_bound(row.begin(), row.end(), static_cast<index_t>(a0),
                                       [](const Entry& e, index_t x) { return e.index < x; });
            for (; it != row.end() && it->index < a1; ++it) {
                const double ca = coef[i] * it->value;
                double* dst = acc.data() + (it->index - a0) * m;
                for (auto jt = it + 1; jt != row.end(); ++jt) dst[jt->index] += ca * jt->value;
            }
        }
        for (std::size_t a = a0; a < a1; ++a) {
            const double* src = acc.data() + (a - a0) * m;
            const std::uint64_t base = to_flat({K::cross, static_cast<index_t>(a), static_cast<index_t>(a + 1)}, m);
            for (std::size_t b = a + 1; b < m; ++b) {
                const double w = cross_scale * src[b];
                sel.offer(base + (b - a - 1), w * w);
            }
        }
    }
    return std::move(sel).finish();
}

// --------------------------------------------------------------------- HIK

std::vector<double> score_hik(std::span<const double> alpha, const SparseDataset& data, double beta) {
    if (!(beta > 0.0)) throw ContractError("intersection kernel exponent must be positive");
    check_alpha(alpha, data);
    const auto cols = ColumnMajor::from(data);
    std::vector<double> scores(data.m(), 0.0);
    std::vector<std::pair<double, double>> items;  // (|x|^beta, alpha y)
    for (std::size_t k = 0; k < data.m(); ++k) {
        items.clear();
        for (auto p = cols.col_ptr[k]; p < cols.col_ptr[k + 1]; ++p) {
            const auto i = cols.rows[p];
            items.emplace_back(std::pow(std::abs(cols.values[p]), beta), alpha[i] * data.label(i));
        }
        std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        // sum_i sum_j s_i s_j min(v_i, v_j) = sum_i v_i s_i (s_i + 2 * sum_{j after i} s_j)
        double tail = 0.0, total = 0.0;
        for (auto it = items.rbegin(); it != items.rend(); ++it) {
            total += it->first * it->second * (it->second + 2.0 * tail);
            tail += it->second;
        }
        scores[k] = std::max(total, 0.0);
    }
    return scores;
}

}  // namespace fgm
