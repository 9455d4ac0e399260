#include "fgm/subsolver.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fgm/error.hpp"

namespace fgm {

double regularizer(const BlockWeights& w) {
    double s = 0.0;
    for (std::size_t t = 0; t < w.size(); ++t) s += w.block_norm(t);
    return 0.5 * s * s;
}

std::vector<double> moreau_coefficients(std::span<const double> norms, double s) {
    if (!(s > 0.0)) throw ContractError("Moreau step must be positive");
    const std::size_t T = norms.size();
    std::vector<double> sorted(norms.begin(), norms.end());
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    std::size_t rho = 0;
    double prefix = 0.0, prefix_at_rho = 0.0;
    for (std::size_t j = 1; j <= T; ++j) {
        prefix += sorted[j - 1];
        const double jd = static_cast<double>(j);
        if (sorted[j - 1] - s / (1.0 + jd * s) * prefix > 0.0) {
            rho = j;
            prefix_at_rho = prefix;
        }
    }
    const double threshold = s / (1.0 + static_cast<double>(rho) * s) * prefix_at_rho;
    std::vector<double> c(T, 0.0);
    for (std::size_t t = 0; t < T; ++t) {
        if (norms[t] > threshold) c[t] = (norms[t] - threshold) / norms[t];
    }
    return c;
}

BlockWeights moreau_projection(const BlockWeights& g, double s) {
    const auto c = moreau_coefficients(g.block_norms(), s);
    BlockWeights out = g;
    for (std::size_t t = 0; t < out.size(); ++t)
        for (auto& v : out[t]) v *= c[t];
    return out;
}

// ------------------------------------------------------------- ProximalStep

ProximalStep::ProximalStep(const ActiveSet& cache, std::span<const double> labels, const LossKind& kind,
                           BlockWeights v)
    : cache_(cache), labels_(labels), kind_(kind), v_(std::move(v)) {
    cache_.check_shape(v_);
    const std::size_t n = cache_.n();
    const std::size_t T = v_.size();
    xv_.assign(T, std::vector<double>(n, 0.0));
    std::vector<double> z(n, 0.0);
    for (std::size_t t = 0; t < T; ++t) {
        cache_.multiply_add(t, v_[t], xv_[t]);
        for (std::size_t i = 0; i < n; ++i) z[i] += xv_[t][i];
    }
    const auto margins = margins_from_scores(z, labels_, kind_);
    loss_v_ = loss_from_margins(margins, kind_);
    grad_ = cache_.transpose_multiply(loss_residual(margins, labels_, kind_));
    xgrad_.assign(T, std::vector<double>(n, 0.0));
    for (std::size_t t = 0; t < T; ++t) cache_.multiply_add(t, grad_[t], xgrad_[t]);
}

ProximalStep::Candidate ProximalStep::evaluate(double tau) const {
    const std::size_t n = cache_.n();
    const std::size_t T = v_.size();
    Candidate out;
    BlockWeights g = v_;
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t j = 0; j < g[t].size(); ++j) g[t][j] -= grad_[t][j] / tau;
    const auto norms = g.block_norms();
    const auto c = moreau_coefficients(norms, 1.0 / tau);

    std::vector<double> z(n, 0.0);
    double norm_sum = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
        if (c[t] == 0.0) continue;
        const double ct = c[t];
        const double* a = xv_[t].data();
        const double* b = xgrad_[t].data();
        for (std::size_t i = 0; i < n; ++i) z[i] += ct * (a[i] - b[i] / tau);
        norm_sum += ct * norms[t];
    }
    out.margins = margins_from_scores(z, labels_, kind_);
    out.loss = loss_from_margins(out.margins, kind_);
    out.reg = 0.5 * norm_sum * norm_sum;
    out.objective = out.loss + out.reg;

    out.w = std::move(g);
    double inner = 0.0, dist = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t j = 0; j < out.w[t].size(); ++j) {
            double& wj = out.w[t][j];
            wj *= c[t];
            const double d = wj - v_[t][j];
            inner += grad_[t][j] * d;
            dist += d * d;
        }
    }
    out.model = loss_v_ + inner + out.reg + 0.5 * tau * dist;
    return out;
}

// --------------------------------------------------------------------- APG

void ApgOptions::validate() const {
    if (!(L_init > 0.0) || !std::isfinite(L_init)) throw ContractError("initial Lipschitz estimate must be positive");
    if (!(eta > 0.0 && eta < 1.0)) throw ContractError("eta must lie in (0, 1)");
    if (!(eps > 0.0)) throw ContractError("APG tolerance must be positive");
    if (max_inner == 0) throw ContractError("max_inner must be at least 1");
}

namespace {

constexpr double kModelSlack = 1e-12;  // relative
constexpr std::size_t kMaxLineSearchTrials = 2000;

// a + coef_b * (b - a) + coef_c * (a - c), blockwise
BlockWeights extrapolate(const BlockWeights& a, const BlockWeights& b, double coef_b, const BlockWeights& c,
                         double coef_c) {
    BlockWeights out = a;
    for (std::size_t t = 0; t < out.size(); ++t)
        for (std::size_t j = 0; j < out[t].size(); ++j)
            out[t][j] += coef_b * (b[t][j] - a[t][j]) + coef_c * (a[t][j] - c[t][j]);
    return out;
}

}  // namespace

ApgResult apg_solve(const ActiveSet& cache, std::span<const double> labels, const LossKind& kind,
                    BlockWeights warm, const ApgOptions& options) {
    options.validate();
    kind.validate();
    cache.check_shape(warm);

    ApgResult res;
    auto start = eval_loss(warm, cache, labels, kind);
    double f_curr = start.value + regularizer(warm);
    if (!std::isfinite(f_curr)) throw NumericalError("non-finite objective at the warm start", 0);

    BlockWeights x = std::move(warm);  // monotone iterate w^k
    BlockWeights x_prev = x;           // w^{k-1}
    BlockWeights z = x;                // last proximal point
    Margins x_margins = std::move(start.margins);
    double rho_prev = 1.0, rho = 1.0;
    double tau_k = options.L_init;
    double cap = std::max(options.L_init, 1e3 * options.L_init);

    for (std::size_t k = 0; k < options.max_inner; ++k) {
        const auto v = extrapolate(x, z, rho_prev / rho, x_prev, (rho_prev - 1.0) / rho);
        ProximalStep step(cache, labels, kind, v);
        if (!std::isfinite(step.loss_at_point())) {
            throw NumericalError("non-finite loss at the extrapolated point", static_cast<long>(k));
        }

        double tau = options.eta * tau_k;
        int hits_at_cap = 0;
        ProximalStep::Candidate cand;
        for (std::size_t trial = 0;; ++trial) {
            if (trial == kMaxLineSearchTrials) {
                throw NumericalError("line search did not find an acceptable step", static_cast<long>(k));
            }
            cand = step.evaluate(tau);
            if (std::isfinite(cand.objective) && cand.objective <= cand.model + kModelSlack * std::max(1.0, std::abs(cand.model))) break;
            if (tau >= cap) {
                if (++hits_at_cap >= 2) {
                    cap *= 2.0;
                    hits_at_cap = 0;
                }
            } else {
                hits_at_cap = 0;
            }
            tau = std::min(tau / options.eta, cap);
        }
        tau_k = tau;
        res.tau_max = std::max(res.tau_max, tau);

        const double f_prev = f_curr;
        const double f_cand = cand.objective;
        x_prev = x;
        if (f_cand <= f_curr) {
            x = cand.w;
            x_margins = cand.margins;
            f_curr = f_cand;
        }
        z = std::move(cand.w);
        rho_prev = rho;
        rho = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * rho * rho));
        res.objectives.push_back(f_curr);
        res.iterations = k + 1;

        const double change = std::abs(f_prev - f_cand) / std::max(std::abs(f_prev), 1e-12);
        if (change <= options.eps) break;
    }

    res.w = std::move(x);
    res.objective = f_curr;
    res.tau_final = tau_k;
    res.margins = std::move(x_margins);
    return res;
}

}  // namespace fgm
