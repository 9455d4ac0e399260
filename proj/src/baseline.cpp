#include "fgm/baseline.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fgm/error.hpp"

namespace fgm {

// ------------------------------------------------------------ DesignMatrix

DesignMatrix::DesignMatrix(const SparseDataset& data, std::span<const index_t> columns) : n_(data.n()) {
    std::vector<index_t> cols;
    if (columns.empty()) {
        cols.resize(data.m());
        std::iota(cols.begin(), cols.end(), index_t{0});
    } else {
        cols.assign(columns.begin(), columns.end());
        for (auto j : cols) {
            if (j >= data.m()) throw UsageError("column " + std::to_string(j) + " is outside the data");
        }
    }
    cols_ = cols.size();
    const auto full = ColumnMajor::from(data);
    std::size_t nnz = 0;
    for (auto j : cols) nnz += full.col_ptr[j + 1] - full.col_ptr[j];
    const double fill = n_ * cols_ == 0 ? 0.0 : static_cast<double>(nnz) / static_cast<double>(n_ * cols_);
    if (fill >= 0.3) {
        dense_.assign(n_ * cols_, 0.0);
        for (std::size_t c = 0; c < cols_; ++c) {
            for (auto p = full.col_ptr[cols[c]]; p < full.col_ptr[cols[c] + 1]; ++p) {
                dense_[c * n_ + full.rows[p]] = full.values[p];
            }
        }
        return;
    }
    col_ptr_.assign(1, 0);
    for (auto j : cols) {
        for (auto p = full.col_ptr[j]; p < full.col_ptr[j + 1]; ++p) {
            row_idx_.push_back(full.rows[p]);
            values_.push_back(full.values[p]);
        }
        col_ptr_.push_back(row_idx_.size());
    }
}

void DesignMatrix::multiply(std::span<const double> w, std::span<double> z) const {
    std::fill(z.begin(), z.end(), 0.0);
    if (dense()) {
        Eigen::Map<Eigen::VectorXd> out(z.data(), static_cast<Eigen::Index>(n_));
        for (std::size_t c = 0; c < cols_; ++c) {
            if (w[c] == 0.0) continue;
            out += w[c] * Eigen::Map<const Eigen::VectorXd>(dense_.data() + c * n_, static_cast<Eigen::Index>(n_));
        }
        return;
    }
    for (std::size_t c = 0; c < cols_; ++c) {
        if (w[c] == 0.0) continue;
        for (auto p = col_ptr_[c]; p < col_ptr_[c + 1]; ++p) z[row_idx_[p]] += w[c] * values_[p];
    }
}

void DesignMatrix::transpose_multiply(std::span<const double> r, std::span<double> g) const {
    if (dense()) {
        Eigen::Map<const Eigen::VectorXd> rv(r.data(), static_cast<Eigen::Index>(n_));
        for (std::size_t c = 0; c < cols_; ++c) {
            g[c] = Eigen::Map<const Eigen::VectorXd>(dense_.data() + c * n_, static_cast<Eigen::Index>(n_)).dot(rv);
        }
        return;
    }
    for (std::size_t c = 0; c < cols_; ++c) {
        double s = 0.0;
        for (auto p = col_ptr_[c]; p < col_ptr_[c + 1]; ++p) s += values_[p] * r[row_idx_[p]];
        g[c] = s;
    }
}

// ------------------------------------------------------------ DenseWeights

std::size_t DenseWeights::support_size() const {
    return static_cast<std::size_t>(std::count_if(w.begin(), w.end(), [](double v) { return v != 0.0; }));
}

std::vector<std::uint64_t> DenseWeights::support() const {
    std::vector<std::uint64_t> out;
    for (std::size_t j = 0; j < w.size(); ++j)
        if (w[j] != 0.0) out.push_back(j);
    return out;
}

// ------------------------------------------------------------ dense APG

namespace {

constexpr std::size_t kMaxTrials = 2000;
constexpr std::size_t kNewtonMaxCols = 1024;

double initial_lipschitz(const DesignMatrix& x, const LossKind& kind) {
    // C times the largest squared column norm: a lower bound on C ||X||^2.
    std::vector<double> e(x.cols(), 0.0), col(x.rows());
    double best = 0.0;
    for (std::size_t c = 0; c < x.cols(); ++c) {
        e[c] = 1.0;
        x.multiply(e, col);
        e[c] = 0.0;
        double s = 0.0;
        for (double v : col) s += v * v;
        best = std::max(best, s);
    }
    const double scale = kind.type == LossType::squared_hinge ? 1.0 : 0.25;
    return std::max(scale * kind.C * best, 1e-6);
}

struct Point {
    std::vector<double> w;
    std::vector<double> z;  // X w
};

// prox(u, tau) writes argmin_w pen(w) + tau/2 ||w - u||^2 into u.
// stop(x, z_x, f_prev, f_cand, mapping) decides termination after each accepted
// iteration; mapping is the sup norm of the gradient mapping tau (v - u).
template <class Prox, class Penalty, class Stop>
DenseWeights dense_apg(const DesignMatrix& x, std::span<const double> labels, const LossKind& kind,
                       std::span<const double> warm, std::size_t max_iter, double eta, Prox prox, Penalty pen,
                       Stop stop) {
    const std::size_t n = x.rows(), m = x.cols();
    if (labels.size() != n) throw ContractError("labels differ in length from the design matrix");
    if (!warm.empty() && warm.size() != m) throw ContractError("warm start has the wrong length");

    auto objective_at = [&](const std::vector<double>& w, const std::vector<double>& z, Margins* out) {
        auto mg = margins_from_scores(z, labels, kind);
        const double f = loss_from_margins(mg, kind) + pen(w);
        if (out) *out = std::move(mg);
        return f;
    };

    Point cur;
    cur.w = warm.empty() ? std::vector<double>(m, 0.0) : std::vector<double>(warm.begin(), warm.end());
    cur.z.assign(n, 0.0);
    x.multiply(cur.w, cur.z);
    double f_curr = objective_at(cur.w, cur.z, nullptr);
    if (!std::isfinite(f_curr)) throw NumericalError("non-finite objective at the starting point", 0);

    DenseWeights res;
    Point prev = cur, mom = cur;
    double rho_prev = 1.0, rho = 1.0;
    const double L0 = initial_lipschitz(x, kind);
    double tau_k = L0 / eta;
    double cap = 1e3 * L0;
    bool restarted = false;
    std::vector<double> v(m), zv(n), g(m), u(m), zw(n);

    for (std::size_t k = 0; k < max_iter; ++k) {
        const double cb = rho_prev / rho, cc = (rho_prev - 1.0) / rho;
        for (std::size_t j = 0; j < m; ++j) v[j] = cur.w[j] + cb * (mom.w[j] - cur.w[j]) + cc * (cur.w[j] - prev.w[j]);
        for (std::size_t i = 0; i < n; ++i) zv[i] = cur.z[i] + cb * (mom.z[i] - cur.z[i]) + cc * (cur.z[i] - prev.z[i]);
        const auto mv = margins_from_scores(zv, labels, kind);
        const double loss_v = loss_from_margins(mv, kind);
        if (!std::isfinite(loss_v)) throw NumericalError("non-finite loss at the extrapolated point", static_cast<long>(k));
        x.transpose_multiply(loss_residual(mv, labels, kind), g);

        double tau = eta * tau_k, f_cand = 0.0, mapping = 0.0;
        int hits_at_cap = 0;
        for (std::size_t trial = 0;; ++trial) {
            if (trial == kMaxTrials) {
                throw NumericalError("line search did not find an acceptable step", static_cast<long>(k));
            }
            for (std::size_t j = 0; j < m; ++j) u[j] = v[j] - g[j] / tau;
            prox(u, tau);
            x.multiply(u, zw);
            f_cand = objective_at(u, zw, nullptr);
            double inner = 0.0, dist = 0.0;
            for (std::size_t j = 0; j < m; ++j) {
                const double d = u[j] - v[j];
                inner += g[j] * d;
                dist += d * d;
            }
            const double model = loss_v + inner + 0.5 * tau * dist + pen(u);
            if (std::isfinite(f_cand) && f_cand <= model + 1e-12 * std::max(1.0, std::abs(model))) {
                for (std::size_t j = 0; j < m; ++j) mapping = std::max(mapping, tau * std::abs(u[j] - v[j]));
                break;
            }
            if (tau >= cap) {
                if (++hits_at_cap >= 2) {
                    cap *= 2.0;
                    hits_at_cap = 0;
                }
            } else {
                hits_at_cap = 0;
            }
            tau = std::min(tau / eta, cap);
        }
        tau_k = tau;

        const double f_prev = f_curr;
        const bool accepted = f_cand <= f_curr;
        if (accepted) {
            prev = cur;
            cur.w = u;
            cur.z = zw;
            mom = cur;
            f_curr = f_cand;
            rho_prev = rho;
            rho = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * rho * rho));
        } else {
            // momentum restart; a rejection right after a restart means only the
            // model slack let the step through, so the next search starts stiffer
            if (restarted) tau_k = tau / (eta * eta);
            prev = cur;
            mom = cur;
            rho_prev = rho = 1.0;
        }
        restarted = !accepted;
        res.objectives.push_back(f_curr);
        res.iterations = k + 1;
        if (accepted && stop(cur.w, cur.z, f_prev, f_cand, mapping)) break;
    }
    res.w = std::move(cur.w);
    for (double wj : res.w) {
        if (!std::isfinite(wj)) throw NumericalError("non-finite weight", static_cast<long>(res.iterations));
    }
    return res;
}

}  // namespace

DenseWeights l1_prox_train(const DesignMatrix& x, std::span<const double> labels, const LossKind& kind, double reg,
                           const ProxOptions& options, std::span<const double> warm) {
    if (!(reg > 0.0) || !std::isfinite(reg)) throw UsageError("l1 weight must be positive");
    kind.validate();
    auto prox = [reg](std::vector<double>& u, double tau) {
        const double t = reg / tau;
        for (double& v : u) v = v > t ? v - t : (v < -t ? v + t : 0.0);
    };
    auto pen = [reg](const std::vector<double>& w) {
        double s = 0.0;
        for (double v : w) s += std::abs(v);
        return reg * s;
    };
    auto stop = [&](const std::vector<double>&, const std::vector<double>&, double, double, double mapping) {
        return mapping <= options.eps * reg;
    };
    return dense_apg(x, labels, kind, warm, options.max_iter, options.eta, prox, pen, stop);
}

DenseWeights l1_prox_train(const SparseDataset& data, const LossKind& kind, double reg, const ProxOptions& options,
                           std::span<const double> warm) {
    return l1_prox_train(DesignMatrix(data), data.labels(), kind, reg, options, warm);
}

double l1_reg_max(const DesignMatrix& x, std::span<const double> labels, const LossKind& kind) {
    const std::vector<double> zero(x.rows(), 0.0);
    const auto r = loss_residual(margins_from_scores(zero, labels, kind), labels, kind);
    std::vector<double> g(x.cols());
    x.transpose_multiply(r, g);
    double best = 0.0;
    for (double v : g) best = std::max(best, std::abs(v));
    return best;
}

namespace {

// Damped Newton on 1/2 ||w||^2 + p(Xw). The squared hinge uses its
// generalized Hessian C X_A' X_A over the instances with positive slack.
DenseWeights l2_newton(const DesignMatrix& x, std::span<const double> labels, const LossKind& kind, double eps,
                       std::size_t max_iter) {
    const std::size_t n = x.rows(), d = x.cols();
    Eigen::MatrixXd A(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    {
        std::vector<double> e(d, 0.0), col(n);
        for (std::size_t c = 0; c < d; ++c) {
            e[c] = 1.0;
            x.multiply(e, col);
            e[c] = 0.0;
            for (std::size_t i = 0; i < n; ++i) A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = col[i];
        }
    }
    Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
    Eigen::VectorXd z = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));

    auto objective = [&](const Eigen::VectorXd& wv, const Eigen::VectorXd& zv) {
        const auto mg = margins_from_scores(std::span<const double>(zv.data(), n), labels, kind);
        return loss_from_margins(mg, kind) + 0.5 * wv.squaredNorm();
    };

    DenseWeights res;
    double f = objective(w, z);
    for (std::size_t k = 0; k < max_iter; ++k) {
        const auto mg = margins_from_scores(std::span<const double>(z.data(), n), labels, kind);
        const auto r = loss_residual(mg, labels, kind);
        const Eigen::VectorXd grad = w + A.transpose() * Eigen::Map<const Eigen::VectorXd>(r.data(), static_cast<Eigen::Index>(n));
        if (grad.norm() <= eps * (1.0 + w.norm())) break;

        Eigen::VectorXd curv(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i) {
            const double xi = mg.xi[i];
            if (kind.type == LossType::squared_hinge) {
                curv[static_cast<Eigen::Index>(i)] = xi > 0.0 ? kind.C : 0.0;
            } else {
                const double s = sigmoid(xi);
                curv[static_cast<Eigen::Index>(i)] = kind.C * s * (1.0 - s);
            }
        }
        Eigen::MatrixXd H = A.transpose() * curv.asDiagonal() * A;
        H.diagonal().array() += 1.0;
        const Eigen::VectorXd step = -H.ldlt().solve(grad);
        const Eigen::VectorXd zstep = A * step;
        const double slope = grad.dot(step);

        double t = 1.0, f_new = f;
        Eigen::VectorXd w_new, z_new;
        for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
            w_new = w + t * step;
            z_new = z + t * zstep;
            f_new = objective(w_new, z_new);
            if (f_new <= f + 1e-4 * t * slope) break;
        }
        if (!std::isfinite(f_new)) throw NumericalError("non-finite objective in the Newton step", static_cast<long>(k));
        if (!(f_new < f)) break;  // no further decrease representable
        w = std::move(w_new);
        z = std::move(z_new);
        f = f_new;
        res.objectives.push_back(f);
        res.iterations = k + 1;
    }
    res.w.assign(w.data(), w.data() + d);
    return res;
}

}  // namespace

DenseWeights l2_full_train(const DesignMatrix& x, std::span<const double> labels, const LossKind& kind, double eps,
                           std::size_t max_iter) {
    kind.validate();
    if (!(eps > 0.0)) throw UsageError("tolerance must be positive");
    auto prox = [](std::vector<double>& u, double tau) {
        const double f = tau / (1.0 + tau);
        for (double& v : u) v *= f;
    };
    auto pen = [](const std::vector<double>& w) {
        double s = 0.0;
        for (double v : w) s += v * v;
        return 0.5 * s;
    };
    std::vector<double> grad(x.cols());
    auto stop = [&](const std::vector<double>& w, const std::vector<double>& z, double, double, double) {
        const auto mg = margins_from_scores(z, labels, kind);
        x.transpose_multiply(loss_residual(mg, labels, kind), grad);
        double gn = 0.0, wn = 0.0;
        for (std::size_t j = 0; j < w.size(); ++j) {
            const double gj = grad[j] + w[j];
            gn += gj * gj;
            wn += w[j] * w[j];
        }
        return std::sqrt(gn) <= eps * (1.0 + std::sqrt(wn));
    };
    if (x.cols() <= kNewtonMaxCols) return l2_newton(x, labels, kind, eps, max_iter);
    return dense_apg(x, labels, kind, {}, max_iter, 0.8, prox, pen, stop);
}

DenseWeights l2_full_train(const SparseDataset& data, const LossKind& kind, double eps, std::size_t max_iter) {
    return l2_full_train(DesignMatrix(data), data.labels(), kind, eps, max_iter);
}

Model retrain_unbiased(const SparseDataset& data, std::span<const std::uint64_t> support, LossType loss,
                       double C_large, double eps) {
    if (support.empty()) throw UsageError("de-bias retraining needs a non-empty support");
    std::vector<index_t> cols;
    for (auto j : support) {
        if (j >= data.m()) throw UsageError("support feature " + std::to_string(j) + " is outside the data");
        cols.push_back(static_cast<index_t>(j));
    }
    std::sort(cols.begin(), cols.end());
    cols.erase(std::unique(cols.begin(), cols.end()), cols.end());
    const LossKind kind{loss, C_large};
    const auto fit = l2_full_train(DesignMatrix(data, cols), data.labels(), kind, eps);
    std::vector<std::pair<std::uint64_t, double>> weights;
    for (std::size_t c = 0; c < cols.size(); ++c) weights.emplace_back(cols[c], fit.w[c]);
    auto model = make_plain_model(data.m(), weights);
    model.config.C = C_large;
    model.config.loss = loss;
    return model;
}

// ------------------------------------------------------------ support sweep

std::vector<SupportMatch> l1_match_support(const SparseDataset& data, const LossKind& kind,
                                           std::span<const std::size_t> targets, const SweepOptions& options) {
    kind.validate();
    const DesignMatrix x(data);
    const auto labels = data.labels();
    const double reg_max = l1_reg_max(x, labels, kind);
    if (!(reg_max > 0.0)) throw DataError("all-zero gradient at w = 0; the l1 path is empty");

    struct PathPoint {
        double reg;
        DenseWeights fit;
    };
    std::vector<PathPoint> path;
    auto in_band = [&](std::size_t s, std::size_t t) {
        return std::abs(static_cast<double>(s) - static_cast<double>(t)) <= options.tolerance * static_cast<double>(t);
    };
    const std::size_t top = targets.empty() ? 0 : *std::max_element(targets.begin(), targets.end());
    const double top_hi = static_cast<double>(top) * (1.0 + options.tolerance);

    std::vector<double> warm(x.cols(), 0.0);
    for (std::size_t g = 1; g <= options.max_grid; ++g) {
        const double reg = reg_max * std::pow(10.0, -static_cast<double>(g) / static_cast<double>(options.grid_per_decade));
        auto fit = l1_prox_train(x, labels, kind, reg, options.prox, warm);
        warm = fit.w;
        const auto s = fit.support_size();
        path.push_back({reg, std::move(fit)});
        if (static_cast<double>(s) > top_hi) break;
    }

    std::vector<SupportMatch> out;
    for (auto target : targets) {
        SupportMatch best;
        best.target = target;
        auto consider = [&](const PathPoint& p) {
            const auto s = p.fit.support_size();
            const auto ds = std::abs(static_cast<double>(s) - static_cast<double>(target));
            const auto db = std::abs(static_cast<double>(best.weights.support_size()) - static_cast<double>(target));
            if (best.weights.w.empty() || ds < db) {
                best.reg = p.reg;
                best.weights = p.fit;
                best.matched = in_band(s, target);
            }
        };
        for (const auto& p : path) consider(p);
        if (!best.matched) {
            // bracket: first point above the band and the last point below it before that
            const double lo_band = static_cast<double>(target) * (1.0 - options.tolerance);
            const double hi_band = static_cast<double>(target) * (1.0 + options.tolerance);
            std::ptrdiff_t lo = -1, hi = -1;
            for (std::size_t i = 0; i < path.size() && hi < 0; ++i) {
                const double s = static_cast<double>(path[i].fit.support_size());
                if (s < lo_band) lo = static_cast<std::ptrdiff_t>(i);
                if (s > hi_band) hi = static_cast<std::ptrdiff_t>(i);
            }
            if (lo >= 0 && hi > lo) {
                PathPoint a = path[static_cast<std::size_t>(lo)];
                PathPoint b = path[static_cast<std::size_t>(hi)];
                for (std::size_t it = 0; it < options.max_bisect && !best.matched; ++it) {
                    const double reg = std::sqrt(a.reg * b.reg);
                    PathPoint mid{reg, l1_prox_train(x, labels, kind, reg, options.prox, a.fit.w)};
                    consider(mid);
                    if (static_cast<double>(mid.fit.support_size()) < static_cast<double>(target)) {
                        a = std::move(mid);
                    } else {
                        b = std::move(mid);
                    }
                }
            }
        }
        out.push_back(std::move(best));
    }
    return out;
}

}  // namespace fgm
