#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fgm/active_set.hpp"
#include "fgm/block_weights.hpp"
#include "fgm/loss.hpp"

namespace fgm {

/// Omega(w) = 1/2 (sum_t ||w_t||)^2
double regularizer(const BlockWeights& w);

/// Shrink factors of the closed-form minimizer of
///   (1/2s) ||w - g||^2 + Omega(w)
/// given only the block norms u_t = ||g_t||: the minimizer is c_t g_t.
/// Sorting u in decreasing order, rho is the largest j with
/// u_(j) - s/(1 + j s) sum_{i<=j} u_(i) > 0, the threshold is
/// s/(1 + rho s) sum_{i<=rho} u_(i), and c_t = max(u_t - threshold, 0) / u_t.
std::vector<double> moreau_coefficients(std::span<const double> norms, double s);

/// S(g) for step s = 1/tau. Each output block is zero or a positive multiple of g_t.
BlockWeights moreau_projection(const BlockWeights& g, double s);

/// One proximal-gradient candidate family around a point v. Per-instance
/// products v_t'x_it and grad_t'x_it are cached once, so every step size
/// tried by the line search costs O(n T) plus the block arithmetic instead of
/// a pass over the cached columns.
class ProximalStep {
public:
    ProximalStep(const ActiveSet& cache, std::span<const double> labels, const LossKind& kind, BlockWeights v);

    struct Candidate {
        BlockWeights w;      // S_tau(v - grad / tau)
        double loss = 0.0;   // p(w)
        double reg = 0.0;    // Omega(w)
        double objective = 0.0;  // F(w) = p(w) + Omega(w)
        double model = 0.0;  // Q_tau(w, v)
        Margins margins;
    };

    Candidate evaluate(double tau) const;

    const BlockWeights& point() const noexcept { return v_; }
    const BlockWeights& gradient() const noexcept { return grad_; }
    double loss_at_point() const noexcept { return loss_v_; }

private:
    const ActiveSet& cache_;
    std::span<const double> labels_;
    LossKind kind_;
    BlockWeights v_;
    BlockWeights grad_;
    double loss_v_ = 0.0;
    std::vector<std::vector<double>> xv_;     // X_t v_t per block
    std::vector<std::vector<double>> xgrad_;  // X_t grad_t per block
};

struct ApgOptions {
    double L_init = 1.0;    // initial Lipschitz guess, the first trial step is eta * L_init
    double eta = 0.8;       // line-search factor in (0, 1)
    double eps = 1e-4;      // relative objective change for stopping
    std::size_t max_inner = 1000;

    void validate() const;
};

struct ApgResult {
    BlockWeights w;
    double objective = 0.0;
    double tau_final = 0.0;  // last accepted tau, used to warm-start the next solve
    double tau_max = 0.0;    // largest accepted tau
    std::size_t iterations = 0;
    std::vector<double> objectives;  // F after each iteration, non-increasing
    Margins margins;                 // at w
};

/// Accelerated proximal gradient on F(w) = p(w) + Omega(w) over the cached
/// blocks, with backtracking on the quadratic model Q_tau. Iterates are kept
/// monotone: a candidate that raises F moves the momentum point but not the
/// reported iterate. Throws NumericalError when the objective at the
/// extrapolated point is not finite.
ApgResult apg_solve(const ActiveSet& cache, std::span<const double> labels, const LossKind& kind,
                    BlockWeights warm, const ApgOptions& options);

}  // namespace fgm
