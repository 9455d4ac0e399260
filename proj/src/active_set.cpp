#include "fgm/active_set.hpp"

#include <string>

#include "fgm/error.hpp"

namespace fgm {

bool ActiveSet::contains(const Constraint& c) const {
    for (const auto& b : blocks_) {
        if (b.constraint.same_ids(c)) return true;
    }
    return false;
}

void ActiveSet::add(Constraint constraint, std::vector<ColumnSource> sources, std::vector<double> values) {
    if (contains(constraint)) throw ContractError("constraint already present in the active set");
    if (values.size() != n_ * sources.size()) throw ContractError("cached block has the wrong number of values");
    blocks_.push_back({std::move(constraint), std::move(sources), std::move(values)});
}

std::vector<std::size_t> ActiveSet::dims() const {
    std::vector<std::size_t> d;
    d.reserve(blocks_.size());
    for (const auto& b : blocks_) d.push_back(b.cols());
    return d;
}

std::size_t ActiveSet::total_columns() const {
    std::size_t s = 0;
    for (const auto& b : blocks_) s += b.cols();
    return s;
}

void ActiveSet::check_shape(const BlockWeights& w) const {
    if (w.size() != blocks_.size()) {
        throw ContractError("weights have " + std::to_string(w.size()) + " blocks, active set has " +
                            std::to_string(blocks_.size()));
    }
    for (std::size_t t = 0; t < blocks_.size(); ++t) {
        if (w[t].size() != blocks_[t].cols()) {
            throw ContractError("block " + std::to_string(t) + " has dimension " + std::to_string(w[t].size()) +
                                ", cache has " + std::to_string(blocks_[t].cols()));
        }
    }
}

void ActiveSet::multiply_add(std::size_t t, std::span<const double> w_t, std::span<double> out) const {
    const auto& b = blocks_[t];
    for (std::size_t c = 0; c < b.cols(); ++c) {
        const double wc = w_t[c];
        if (wc == 0.0) continue;
        const double* col = b.values.data() + c * n_;
        for (std::size_t i = 0; i < n_; ++i) out[i] += wc * col[i];
    }
}

std::vector<double> ActiveSet::multiply(const BlockWeights& w) const {
    check_shape(w);
    std::vector<double> z(n_, 0.0);
    for (std::size_t t = 0; t < blocks_.size(); ++t) multiply_add(t, w[t], z);
    return z;
}

void ActiveSet::transpose_multiply(std::size_t t, std::span<const double> r, std::span<double> out) const {
    const auto& b = blocks_[t];
    for (std::size_t c = 0; c < b.cols(); ++c) {
        const double* col = b.values.data() + c * n_;
        double s = 0.0;
        for (std::size_t i = 0; i < n_; ++i) s += col[i] * r[i];
        out[c] = s;
    }
}

BlockWeights ActiveSet::transpose_multiply(std::span<const double> r) const {
    if (r.size() != n_) throw ContractError("residual length differs from instance count");
    auto g = BlockWeights::zeros(dims());
    for (std::size_t t = 0; t < blocks_.size(); ++t) transpose_multiply(t, r, g[t]);
    return g;
}

}  // namespace fgm
