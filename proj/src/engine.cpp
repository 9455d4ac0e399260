#include "fgm/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "fgm/error.hpp"

namespace fgm {

std::string to_string(Mode mode) {
    switch (mode) {
        case Mode::plain: return "plain";
        case Mode::group: return "group";
        case Mode::tree: return "tree";
        case Mode::polynomial: return "polynomial";
    }
    return "plain";
}

Mode parse_mode(const std::string& name) {
    if (name == "plain") return Mode::plain;
    if (name == "group") return Mode::group;
    if (name == "tree") return Mode::tree;
    if (name == "polynomial") return Mode::polynomial;
    throw UsageError("unknown mode '" + name + "'");
}

std::string to_string(StopReason reason) {
    switch (reason) {
        case StopReason::duplicate_constraint: return "duplicate_constraint";
        case StopReason::objective_converged: return "objective_converged";
        case StopReason::max_outer: return "max_outer";
    }
    return "max_outer";
}

void SolverConfig::validate() const {
    if (budget == 0) throw UsageError("budget must be at least 1");
    if (!(C > 0.0) || !std::isfinite(C)) throw UsageError("C must be positive");
    if (!(eps_apg > 0.0) || !(eps_outer > 0.0)) throw UsageError("tolerances must be positive");
    if (max_outer == 0) throw UsageError("max outer iterations must be at least 1");
    if (max_inner == 0) throw UsageError("max inner iterations must be at least 1");
    if (!(eta > 0.0 && eta < 1.0)) throw UsageError("eta must lie in (0, 1)");
    if (L0_policy == LipschitzPolicy::fixed && !(L0_value > 0.0)) throw UsageError("L0 must be positive");
    if (mode == Mode::polynomial) {
        if (!(poly.gamma > 0.0) || !(poly.r >= 0.0)) throw UsageError("polynomial mode needs gamma > 0 and r >= 0");
        if (poly_block == 0) throw UsageError("polynomial block size must be at least 1");
    }
}

std::vector<std::uint64_t> Model::support_features() const {
    std::vector<std::uint64_t> out;
    out.reserve(entries.size());
    for (const auto& e : entries) out.push_back(e.feature);
    return out;
}

// ------------------------------------------------------------ FeatureSpace

FeatureSpace::FeatureSpace(const SparseDataset& data, const SolverConfig& config, const TrainStructure& structure)
    : data_(data), mode_(config.mode), poly_(config.poly), poly_block_(config.poly_block) {
    switch (mode_) {
        case Mode::plain:
            lambda_ = compute_scaling_prior(data, config.scaling).lambda;
            break;
        case Mode::group:
            if (!structure.groups) throw UsageError("group mode requires a group structure");
            groups_ = structure.groups;
            groups_->validate(data.m());
            lambda_ = group_scaling_prior(data, *groups_, config.scaling).lambda;
            break;
        case Mode::tree: {
            if (!structure.tree) throw UsageError("tree mode requires a tree structure");
            tree_ = structure.tree;
            if (tree_->dim() != data.m()) throw UsageError("tree dimension differs from the data dimension");
            lambda_.resize(tree_->size());
            for (std::size_t h = 0; h < tree_->size(); ++h) lambda_[h] = tree_->node(h).lambda;
            break;
        }
        case Mode::polynomial:
            break;
    }
    if (mode_ != Mode::polynomial) columns_ = ColumnMajor::from(data);
}

Constraint FeatureSpace::generate(std::span<const double> alpha, std::size_t budget) const {
    switch (mode_) {
        case Mode::plain:
            return select_top_b(score_features(alpha, data_, ScalingPrior{lambda_}), budget);
        case Mode::group:
            return select_top_b(score_groups(alpha, data_, *groups_, ScalingPrior{lambda_}), budget);
        case Mode::tree:
            return score_tree_pruned(alpha, data_, *tree_, budget);
        case Mode::polynomial:
            return score_polynomial_streamed(alpha, data_, poly_, budget, poly_block_);
    }
    return {};
}

FeatureSpace::Columns FeatureSpace::extract(const Constraint& constraint) const {
    const std::size_t n = data_.n();
    Columns out;
    auto push_raw = [&](unit_id unit, index_t feature, double scale) {
        out.sources.push_back({unit, feature, scale});
        const auto base = out.values.size();
        out.values.resize(base + n, 0.0);
        for (auto p = columns_.col_ptr[feature]; p < columns_.col_ptr[feature + 1]; ++p) {
            out.values[base + columns_.rows[p]] = columns_.values[p] * scale;
        }
    };
    for (auto id : constraint.ids) {
        switch (mode_) {
            case Mode::plain:
                push_raw(id, static_cast<index_t>(id), lambda_[id]);
                break;
            case Mode::group:
                for (auto j : groups_->groups[id]) push_raw(id, j, lambda_[id]);
                break;
            case Mode::tree:
                for (auto j : tree_->node(id).indices) push_raw(id, j, lambda_[id]);
                break;
            case Mode::polynomial: {
                const auto v = from_flat(id, data_.m());
                out.sources.push_back({id, id, 1.0});
                const auto base = out.values.size();
                out.values.resize(base + n);
                for (std::size_t i = 0; i < n; ++i) out.values[base + i] = virtual_value(v, data_.row(i), poly_);
                break;
            }
        }
    }
    return out;
}

// ------------------------------------------------------------------ bounds

namespace {

std::vector<double> signed_duals(std::span<const double> alpha, std::span<const double> labels) {
    std::vector<double> s(alpha.size());
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = alpha[i] * labels[i];
    return s;
}

double half_squared_projection(std::span<const double> ay, const ActiveSet& active, std::size_t t) {
    std::vector<double> zeta(active.block(t).cols());
    active.transpose_multiply(t, ay, zeta);
    double s = 0.0;
    for (double v : zeta) s += v * v;
    return 0.5 * s;
}

}  // namespace

double constraint_value(std::span<const double> alpha, const ActiveSet& active, std::size_t t,
                        std::span<const double> labels, const LossKind& kind) {
    const auto ay = signed_duals(alpha, labels);
    return half_squared_projection(ay, active, t) + conjugate_term(alpha, kind);
}

BoundsUpdate eval_bounds(std::span<const double> alpha, const ActiveSet& active, std::span<const double> labels,
                         const LossKind& kind, const Constraint* generated) {
    if (alpha.size() != active.n() || labels.size() != active.n()) {
        throw ContractError("alpha/labels length differs from the active set");
    }
    const auto ay = signed_duals(alpha, labels);
    const double conj = conjugate_term(alpha, kind);
    BoundsUpdate out;
    out.beta = -std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < active.size(); ++t) {
        out.beta = std::max(out.beta, half_squared_projection(ay, active, t) + conj);
    }
    if (active.size() == 0) out.beta = conj;
    out.phi_candidate = generated ? 0.5 * generated->score_sum() + conj : std::numeric_limits<double>::infinity();
    return out;
}

// ------------------------------------------------------------------ trainer

FgmTrainer::FgmTrainer(const SparseDataset& data, const SolverConfig& config, const TrainStructure& structure)
    : data_(data),
      config_((config.validate(), config)),
      space_(data, config_, structure),
      active_(data.n(), config.mode),
      alpha_(data.n(), 1.0) {}

Model FgmTrainer::run() {
    using clock = std::chrono::steady_clock;
    const auto kind = config_.loss_kind();
    const auto labels = data_.labels();
    double phi = std::numeric_limits<double>::infinity();
    double tau_prev = 0.0;
    std::size_t T = active_.size();
    StopReason stop = StopReason::max_outer;

    for (;;) {
        const auto t0 = clock::now();
        auto d = space_.generate(alpha_, config_.budget);
        if (T >= 1) {
            const auto b = eval_bounds(alpha_, active_, labels, kind, &d);
            phi = std::min(phi, b.phi_candidate);
            trace_.back().phi = phi;
            trace_.back().seconds += std::chrono::duration<double>(clock::now() - t0).count();
        }
        if (active_.contains(d)) {
            stop = StopReason::duplicate_constraint;
            break;
        }
        if (T >= config_.max_outer) {
            stop = StopReason::max_outer;
            break;
        }
        if (T >= 2) {
            const double f_prev = trace_[T - 2].objective;
            const double f_curr = trace_[T - 1].objective;
            if (std::abs(f_prev - f_curr) / std::max(std::abs(f_prev), 1e-12) <= config_.eps_outer) {
                stop = StopReason::objective_converged;
                break;
            }
        }

        auto cols = space_.extract(d);
        TraceRecord rec;
        rec.iteration = T + 1;
        rec.selected = d.ids;
        w_.blocks.emplace_back(cols.sources.size(), 0.0);
        active_.add(std::move(d), std::move(cols.sources), std::move(cols.values));

        ApgOptions opts;
        opts.eta = config_.eta;
        opts.eps = config_.eps_apg;
        opts.max_inner = config_.max_inner;
        if (T == 0) {
            opts.L_init = config_.L0_policy == LipschitzPolicy::scaled_n_c
                              ? 0.1 * static_cast<double>(data_.n()) * config_.C
                              : config_.L0_value;
        } else {
            opts.L_init = config_.eta * config_.eta * tau_prev;
        }
        ApgResult res;
        try {
            res = apg_solve(active_, labels, kind, std::move(w_), opts);
        } catch (const NumericalError& e) {
            throw NumericalError("outer iteration " + std::to_string(T + 1) + ": " + e.what(), e.iteration());
        }
        w_ = std::move(res.w);
        tau_prev = res.tau_final;
        alpha_ = recover_duals(res.margins, kind);
        inner_.push_back(std::move(res.objectives));

        rec.objective = res.objective;
        rec.beta = eval_bounds(alpha_, active_, labels, kind, nullptr).beta;
        rec.phi = std::numeric_limits<double>::infinity();
        rec.inner_iterations = res.iterations;
        rec.tau = res.tau_final;
        rec.seconds = std::chrono::duration<double>(clock::now() - t0).count();
        trace_.push_back(std::move(rec));
        ++T;
    }
    return assemble(stop);
}

Model FgmTrainer::assemble(StopReason stop) const {
    Model model;
    model.mode = config_.mode;
    model.config = config_;
    model.feature_dim = data_.m();
    model.trace = trace_;
    model.stop = stop;

    std::map<std::uint64_t, std::pair<double, double>> agg;
    std::set<unit_id> units;
    double norm_sum = 0.0;
    std::vector<double> norms(active_.size());
    for (std::size_t t = 0; t < active_.size(); ++t) {
        const auto& block = active_.block(t);
        model.constraints.push_back(block.constraint.ids);
        units.insert(block.constraint.ids.begin(), block.constraint.ids.end());
        for (std::size_t c = 0; c < block.cols(); ++c) {
            auto& slot = agg[block.sources[c].feature];
            slot.first += w_[t][c];
            slot.second += w_[t][c] * block.sources[c].scale;
        }
        norms[t] = w_.block_norm(t);
        norm_sum += norms[t];
    }
    for (const auto& [feature, wc] : agg) model.entries.push_back({feature, wc.first, wc.second});
    model.support_units.assign(units.begin(), units.end());
    model.kernel_weights.resize(norms.size(), 0.0);
    if (norm_sum > 0.0) {
        for (std::size_t t = 0; t < norms.size(); ++t) model.kernel_weights[t] = norms[t] / norm_sum;
    }
    return model;
}

Model fgm_train(const SparseDataset& data, const SolverConfig& config, const TrainStructure& structure) {
    FgmTrainer trainer(data, config, structure);
    return trainer.run();
}

// --------------------------------------------------------------- inference

Prediction predict(const Model& model, const SparseDataset& data) {
    if (data.m() > model.feature_dim) {
        throw ContractError("data has " + std::to_string(data.m()) + " features, model was trained on " +
                            std::to_string(model.feature_dim));
    }
    Prediction out;
    out.scores.assign(data.n(), 0.0);
    if (model.mode == Mode::polynomial) {
        std::vector<std::pair<VirtualFeatureId, double>> terms;
        for (const auto& e : model.entries) terms.emplace_back(from_flat(e.feature, model.feature_dim), e.coef);
        for (std::size_t i = 0; i < data.n(); ++i) {
            double s = 0.0;
            for (const auto& [v, coef] : terms) s += coef * virtual_value(v, data.row(i), model.config.poly);
            out.scores[i] = s;
        }
    } else {
        std::vector<double> coef(data.m(), 0.0);
        for (const auto& e : model.entries) {
            if (e.feature < data.m()) coef[e.feature] = e.coef;
        }
        for (std::size_t i = 0; i < data.n(); ++i) {
            double s = 0.0;
            for (const auto& x : data.row(i)) s += coef[x.index] * x.value;
            out.scores[i] = s;
        }
    }
    out.labels.resize(data.n());
    std::size_t correct = 0;
    for (std::size_t i = 0; i < data.n(); ++i) {
        out.labels[i] = out.scores[i] >= 0.0 ? 1.0 : -1.0;
        if (out.labels[i] == data.label(i)) ++correct;
    }
    if (data.n() > 0) out.accuracy = static_cast<double>(correct) / static_cast<double>(data.n());
    return out;
}

std::size_t evaluate_recovery(const Model& model, const GroundTruth& truth) {
    if (model.mode != Mode::plain) throw UsageError("feature recovery is defined for plain-feature models only");
    std::size_t hits = 0;
    for (const auto& e : model.entries) {
        if (std::binary_search(truth.support.begin(), truth.support.end(), static_cast<index_t>(e.feature))) ++hits;
    }
    return hits;
}

Model make_plain_model(std::size_t dim, const std::vector<std::pair<std::uint64_t, double>>& weights,
                       std::span<const double> lambda) {
    Model model;
    model.mode = Mode::plain;
    model.feature_dim = dim;
    for (const auto& [j, w] : weights) {
        const double scale = lambda.empty() ? 1.0 : lambda[j];
        model.entries.push_back({j, w, w * scale});
        model.support_units.push_back(j);
    }
    std::sort(model.entries.begin(), model.entries.end(),
              [](const ModelEntry& a, const ModelEntry& b) { return a.feature < b.feature; });
    std::sort(model.support_units.begin(), model.support_units.end());
    return model;
}

}  // namespace fgm
