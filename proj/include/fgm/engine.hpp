#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fgm/active_set.hpp"
#include "fgm/dataset.hpp"
#include "fgm/loss.hpp"
#include "fgm/subsolver.hpp"
#include "fgm/worstcase.hpp"

namespace fgm {

std::string to_string(Mode mode);
Mode parse_mode(const std::string& name);

enum class LipschitzPolicy {
    scaled_n_c,  // L_0 = 0.1 n C
    fixed,       // L_0 = SolverConfig::L0_value
};

struct SolverConfig {
    std::size_t budget = 10;
    double C = 10.0;
    LossType loss = LossType::squared_hinge;
    double eps_apg = 1e-4;
    double eps_outer = 1e-2;
    std::size_t max_outer = 15;
    std::size_t max_inner = 1000;
    double eta = 0.8;
    LipschitzPolicy L0_policy = LipschitzPolicy::scaled_n_c;
    double L0_value = 1.0;
    Mode mode = Mode::plain;
    ScalingPolicy scaling = ScalingPolicy::ones;
    PolyParams poly;
    std::size_t poly_block = 64;
    std::uint64_t seed = 0;

    LossKind loss_kind() const { return {loss, C}; }
    /// Throws UsageError on an invalid setting.
    void validate() const;
};

/// Structure backing the selection mode; exactly the member matching
/// SolverConfig::mode is used (plain and polynomial need none).
struct TrainStructure {
    std::optional<GroupStructure> groups;
    std::optional<TreeStructure> tree;
};

struct TraceRecord {
    std::size_t iteration = 0;
    double objective = 0.0;  // F(w*) of the subproblem
    double beta = 0.0;       // lower bound
    double phi = 0.0;        // upper bound
    std::size_t inner_iterations = 0;
    double tau = 0.0;
    std::vector<unit_id> selected;
    double seconds = 0.0;
};

enum class StopReason { duplicate_constraint, objective_converged, max_outer };
std::string to_string(StopReason reason);

struct ModelEntry {
    std::uint64_t feature = 0;  // raw feature id, or virtual flat id in polynomial mode
    double weight = 0.0;        // summed block weights (scaled space)
    double coef = 0.0;          // coefficient applied to the raw (or virtual) feature value

    friend bool operator==(const ModelEntry&, const ModelEntry&) = default;
};

struct Model {
    Mode mode = Mode::plain;
    SolverConfig config;
    std::size_t feature_dim = 0;
    std::vector<ModelEntry> entries;           // sorted by feature, one per selected feature
    std::vector<unit_id> support_units;        // union of all constraint ids
    std::vector<std::vector<unit_id>> constraints;
    std::vector<double> kernel_weights;        // mu_t = ||w_t|| / sum_s ||w_s||
    std::vector<TraceRecord> trace;
    StopReason stop = StopReason::max_outer;

    std::vector<std::uint64_t> support_features() const;
};

/// Column extraction and worst-case analysis for one selection mode.
class FeatureSpace {
public:
    FeatureSpace(const SparseDataset& data, const SolverConfig& config, const TrainStructure& structure);

    Mode mode() const noexcept { return mode_; }
    const SparseDataset& data() const noexcept { return data_; }

    /// Most violated constraint under alpha.
    Constraint generate(std::span<const double> alpha, std::size_t budget) const;

    struct Columns {
        std::vector<ColumnSource> sources;
        std::vector<double> values;  // column-major n x sources.size()
    };
    /// Scaled columns of every unit in the constraint, in id order.
    Columns extract(const Constraint& constraint) const;

    /// Per-unit scaling (features, groups or tree nodes); empty in polynomial mode.
    std::span<const double> unit_lambda() const noexcept { return lambda_; }

private:
    const SparseDataset& data_;
    Mode mode_;
    std::vector<double> lambda_;
    std::optional<GroupStructure> groups_;
    std::optional<TreeStructure> tree_;
    PolyParams poly_;
    std::size_t poly_block_;
    ColumnMajor columns_;
};

struct BoundsUpdate {
    double beta = 0.0;
    double phi_candidate = 0.0;
};

/// Value of the cutting-plane function for one cached constraint:
/// 1/2 ||X_t'(alpha o y)||^2 + sum_i l*(-alpha_i).
double constraint_value(std::span<const double> alpha, const ActiveSet& active, std::size_t t,
                        std::span<const double> labels, const LossKind& kind);

/// beta = max over cached constraints of constraint_value; phi_candidate is
/// the same function on `generated` (the most violated constraint under
/// alpha), taken from its recorded scores.
BoundsUpdate eval_bounds(std::span<const double> alpha, const ActiveSet& active, std::span<const double> labels,
                         const LossKind& kind, const Constraint* generated);

/// The cutting-plane driver. Holds the active set and current duals so that
/// callers can inspect the state after run().
class FgmTrainer {
public:
    FgmTrainer(const SparseDataset& data, const SolverConfig& config, const TrainStructure& structure = {});

    /// Runs to termination and returns the assembled model.
    Model run();

    const ActiveSet& active_set() const noexcept { return active_; }
    const std::vector<double>& alpha() const noexcept { return alpha_; }
    const BlockWeights& weights() const noexcept { return w_; }
    const FeatureSpace& space() const noexcept { return space_; }
    /// Inner objective values of every APG call, in order.
    const std::vector<std::vector<double>>& inner_objectives() const noexcept { return inner_; }

private:
    Model assemble(StopReason stop) const;

    const SparseDataset& data_;
    SolverConfig config_;
    FeatureSpace space_;
    ActiveSet active_;
    BlockWeights w_;
    std::vector<double> alpha_;
    std::vector<TraceRecord> trace_;
    std::vector<std::vector<double>> inner_;
};

Model fgm_train(const SparseDataset& data, const SolverConfig& config, const TrainStructure& structure = {});

struct Prediction {
    std::vector<double> labels;
    std::optional<double> accuracy;  // against data labels
    std::vector<double> scores;
};

/// sign(sum over entries of coef * phi(x)), sign(0) = +1. Throws
/// ContractError when the data has more features than the model was trained on.
Prediction predict(const Model& model, const SparseDataset& data);

/// |support(model) intersect support(truth)|; plain mode only.
std::size_t evaluate_recovery(const Model& model, const GroundTruth& truth);

/// Builds a model carrying exactly the given feature weights (plain mode),
/// coefficient = weight * lambda. Used for baselines and tests.
Model make_plain_model(std::size_t dim, const std::vector<std::pair<std::uint64_t, double>>& weights,
                       std::span<const double> lambda = {});

}  // namespace fgm
