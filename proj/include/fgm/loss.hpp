#pragma once

#include <span>
#include <string>
#include <vector>

#include "fgm/active_set.hpp"
#include "fgm/block_weights.hpp"

namespace fgm {

enum class LossType { squared_hinge, logistic };

struct LossKind {
    LossType type = LossType::squared_hinge;
    double C = 1.0;

    /// Throws ContractError unless C > 0 and finite.
    void validate() const;
};

std::string to_string(LossType type);
/// Accepts "squared-hinge" and "logistic"; throws UsageError otherwise.
LossType parse_loss_type(const std::string& name);

/// Per-instance loss arguments: max(1 - y z, 0) for the squared hinge,
/// -y z for the logistic loss, where z is the decision value.
struct Margins {
    std::vector<double> xi;
};

struct LossValue {
    double value = 0.0;
    Margins margins;
};

double sigmoid(double z);
/// log(1 + exp(z)) without overflow.
double log1p_exp(double z);

Margins margins_from_scores(std::span<const double> scores, std::span<const double> labels, const LossKind& kind);
double loss_from_margins(const Margins& margins, const LossKind& kind);
/// d p / d z_i; the gradient of p over any design is X' times this vector.
std::vector<double> loss_residual(const Margins& margins, std::span<const double> labels, const LossKind& kind);

/// p(w) over the cached blocks.
LossValue eval_loss(const BlockWeights& w, const ActiveSet& cache, std::span<const double> labels,
                    const LossKind& kind);
BlockWeights eval_gradient(const BlockWeights& w, const ActiveSet& cache, std::span<const double> labels,
                           const LossKind& kind);

/// alpha_i = C xi_i (squared hinge) or C sigmoid(xi_i) (logistic).
std::vector<double> recover_duals(const Margins& margins, const LossKind& kind);

/// sum_i l*(-alpha_i), the conjugate part of the dual objective:
/// sum (alpha^2 / 2C - alpha) for the squared hinge and
/// -C sum H(alpha / C) (binary entropy, nats) for the logistic loss.
double conjugate_term(std::span<const double> alpha, const LossKind& kind);

}  // namespace fgm
