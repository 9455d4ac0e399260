#include "fgm/loss.hpp"

#include <cmath>

#include "fgm/error.hpp"

namespace fgm {

void LossKind::validate() const {
    if (!(C > 0.0) || !std::isfinite(C)) throw ContractError("loss trade-off C must be positive and finite");
}

std::string to_string(LossType type) {
    return type == LossType::squared_hinge ? "squared-hinge" : "logistic";
}

LossType parse_loss_type(const std::string& name) {
    if (name == "squared-hinge") return LossType::squared_hinge;
    if (name == "logistic") return LossType::logistic;
    throw UsageError("unknown loss '" + name + "' (expected squared-hinge or logistic)");
}

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double log1p_exp(double z) {
    if (z > 0.0) return z + std::log1p(std::exp(-z));
    return std::log1p(std::exp(z));
}

Margins margins_from_scores(std::span<const double> scores, std::span<const double> labels, const LossKind& kind) {
    if (scores.size() != labels.size()) throw ContractError("scores and labels differ in length");
    Margins m;
    m.xi.resize(scores.size());
    if (kind.type == LossType::squared_hinge) {
        for (std::size_t i = 0; i < scores.size(); ++i) m.xi[i] = std::max(1.0 - labels[i] * scores[i], 0.0);
    } else {
        for (std::size_t i = 0; i < scores.size(); ++i) m.xi[i] = -labels[i] * scores[i];
    }
    return m;
}

double loss_from_margins(const Margins& margins, const LossKind& kind) {
    double s = 0.0;
    if (kind.type == LossType::squared_hinge) {
        for (double x : margins.xi) s += x * x;
        return 0.5 * kind.C * s;
    }
    for (double x : margins.xi) s += log1p_exp(x);
    return kind.C * s;
}

std::vector<double> loss_residual(const Margins& margins, std::span<const double> labels, const LossKind& kind) {
    std::vector<double> r(margins.xi.size());
    if (kind.type == LossType::squared_hinge) {
        for (std::size_t i = 0; i < r.size(); ++i) {
            r[i] = margins.xi[i] > 0.0 ? -kind.C * margins.xi[i] * labels[i] : 0.0;
        }
    } else {
        for (std::size_t i = 0; i < r.size(); ++i) r[i] = -kind.C * sigmoid(margins.xi[i]) * labels[i];
    }
    return r;
}

LossValue eval_loss(const BlockWeights& w, const ActiveSet& cache, std::span<const double> labels,
                    const LossKind& kind) {
    if (labels.size() != cache.n()) throw ContractError("labels differ in length from the cache");
    const auto z = cache.multiply(w);
    LossValue out;
    out.margins = margins_from_scores(z, labels, kind);
    out.value = loss_from_margins(out.margins, kind);
    return out;
}

BlockWeights eval_gradient(const BlockWeights& w, const ActiveSet& cache, std::span<const double> labels,
                           const LossKind& kind) {
    const auto lv = eval_loss(w, cache, labels, kind);
    return cache.transpose_multiply(loss_residual(lv.margins, labels, kind));
}

std::vector<double> recover_duals(const Margins& margins, const LossKind& kind) {
    std::vector<double> alpha(margins.xi.size());
    if (kind.type == LossType::squared_hinge) {
        for (std::size_t i = 0; i < alpha.size(); ++i) alpha[i] = kind.C * margins.xi[i];
    } else {
        for (std::size_t i = 0; i < alpha.size(); ++i) alpha[i] = kind.C * sigmoid(margins.xi[i]);
    }
    return alpha;
}

double conjugate_term(std::span<const double> alpha, const LossKind& kind) {
    double s = 0.0;
    if (kind.type == LossType::squared_hinge) {
        for (double a : alpha) s += a * a / (2.0 * kind.C) - a;
        return s;
    }
    auto xlogx = [](double x) { return x > 0.0 ? x * std::log(x) : 0.0; };
    for (double a : alpha) {
        const double q = a / kind.C;
        s += xlogx(q) + xlogx(1.0 - q);
    }
    return kind.C * s;
}

}  // namespace fgm
