#include "fgm/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "fgm/error.hpp"
#include "fgm/rng.hpp"

namespace fgm {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_ws(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (pos < s.size()) {
        while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
        if (pos >= s.size()) break;
        std::size_t end = pos;
        while (end < s.size() && s[end] != ' ' && s[end] != '\t') ++end;
        out.push_back(s.substr(pos, end - pos));
        pos = end;
    }
    return out;
}

template <class T>
bool parse_number(std::string_view s, T& out) {
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, out);
    return ec == std::errc{} && ptr == end;
}

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    return out;
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Splits "head: body | lambda=x". Returns false for blank/comment lines.
struct StructureLine {
    std::string_view head;
    std::string_view body;
    std::optional<double> lambda;
};

bool parse_structure_line(const std::string& path, std::size_t line_no, std::string_view line,
                          StructureLine& out) {
    line = trim(line);
    if (line.empty() || line.front() == '#') return false;
    out.lambda.reset();
    if (const auto bar = line.find('|'); bar != std::string_view::npos) {
        auto suffix = trim(line.substr(bar + 1));
        line = trim(line.substr(0, bar));
        constexpr std::string_view key = "lambda=";
        double value = 0.0;
        if (!suffix.starts_with(key) || !parse_number(trim(suffix.substr(key.size())), value) ||
            !std::isfinite(value) || value < 0.0) {
            throw ParseError(path, line_no, "expected '| lambda=<non-negative float>'");
        }
        out.lambda = value;
    }
    const auto colon = line.find(':');
    if (colon == std::string_view::npos) throw ParseError(path, line_no, "missing ':'");
    out.head = trim(line.substr(0, colon));
    out.body = trim(line.substr(colon + 1));
    if (out.head.empty()) throw ParseError(path, line_no, "missing group name");
    return true;
}

std::vector<index_t> parse_index_list(const std::string& path, std::size_t line_no,
                                      std::string_view body, std::size_t dim) {
    std::vector<index_t> ids;
    for (auto tok : split_ws(body)) {
        index_t id = 0;
        if (!parse_number(tok, id)) throw ParseError(path, line_no, "bad index '" + std::string(tok) + "'");
        if (id >= dim) {
            throw ParseError(path, line_no,
                             "index " + std::to_string(id) + " out of range for dimension " + std::to_string(dim));
        }
        ids.push_back(id);
    }
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
        throw ParseError(path, line_no, "duplicate index within a group");
    }
    if (ids.empty()) throw ParseError(path, line_no, "empty group");
    return ids;
}

}  // namespace

// ------------------------------------------------------------ SparseDataset

SparseDataset::SparseDataset(std::size_t dim, std::vector<std::size_t> row_ptr, std::vector<Entry> entries,
                             std::vector<double> labels)
    : dim_(dim), row_ptr_(std::move(row_ptr)), entries_(std::move(entries)), labels_(std::move(labels)) {
    if (row_ptr_.size() != labels_.size() + 1 || row_ptr_.front() != 0 || row_ptr_.back() != entries_.size()) {
        throw DataError("inconsistent CSR layout");
    }
    for (std::size_t i = 0; i < labels_.size(); ++i) {
        if (labels_[i] != 1.0 && labels_[i] != -1.0) {
            throw DataError("label of row " + std::to_string(i) + " is not -1 or +1");
        }
        if (row_ptr_[i] > row_ptr_[i + 1]) throw DataError("inconsistent CSR layout");
        for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
            if (entries_[k].index >= dim_) throw DataError("feature index out of range in row " + std::to_string(i));
            if (k > row_ptr_[i] && entries_[k].index <= entries_[k - 1].index) {
                throw DataError("row " + std::to_string(i) + " indices not strictly increasing");
            }
        }
    }
}

double SparseDataset::at(std::size_t i, index_t j) const {
    const auto r = row(i);
    auto it = std::lower_bound(r.begin(), r.end(), j, [](const Entry& e, index_t v) { return e.index < v; });
    return (it != r.end() && it->index == j) ? it->value : 0.0;
}

SparseDataset SparseDataset::with_dim(std::size_t dim) const {
    return SparseDataset(dim, row_ptr_, entries_, labels_);
}

std::vector<double> SparseDataset::column_norms() const {
    std::vector<double> sq(dim_, 0.0);
    for (const auto& e : entries_) sq[e.index] += e.value * e.value;
    for (auto& v : sq) v = std::sqrt(v);
    return sq;
}

void DatasetBuilder::add_row(double label, std::vector<Entry> row) {
    if (label != 1.0 && label != -1.0) throw DataError("label must be -1 or +1");
    std::sort(row.begin(), row.end(), [](const Entry& a, const Entry& b) { return a.index < b.index; });
    for (std::size_t k = 1; k < row.size(); ++k) {
        if (row[k].index == row[k - 1].index) {
            throw DataError("duplicate feature index " + std::to_string(row[k].index));
        }
    }
    if (!row.empty()) {
        max_index_plus_one_ = std::max<std::size_t>(max_index_plus_one_, row.back().index + std::size_t{1});
    }
    entries_.insert(entries_.end(), row.begin(), row.end());
    row_ptr_.push_back(entries_.size());
    labels_.push_back(label);
}

SparseDataset DatasetBuilder::build(std::size_t dim) && {
    if (dim == 0) dim = max_index_plus_one_;
    if (dim < max_index_plus_one_) {
        throw DataError("feature index " + std::to_string(max_index_plus_one_) + " exceeds dimension " +
                        std::to_string(dim));
    }
    return SparseDataset(dim, std::move(row_ptr_), std::move(entries_), std::move(labels_));
}

ColumnMajor ColumnMajor::from(const SparseDataset& data) {
    ColumnMajor out;
    out.col_ptr.assign(data.m() + 1, 0);
    for (std::size_t i = 0; i < data.n(); ++i) {
        for (const auto& e : data.row(i)) ++out.col_ptr[e.index + 1];
    }
    std::partial_sum(out.col_ptr.begin(), out.col_ptr.end(), out.col_ptr.begin());
    out.rows.resize(data.nnz());
    out.values.resize(data.nnz());
    auto next = out.col_ptr;
    for (std::size_t i = 0; i < data.n(); ++i) {
        for (const auto& e : data.row(i)) {
            const auto slot = next[e.index]++;
            out.rows[slot] = static_cast<index_t>(i);
            out.values[slot] = e.value;
        }
    }
    return out;
}

// ------------------------------------------------------------------ scaling

ScalingPrior compute_scaling_prior(const SparseDataset& data, ScalingPolicy policy) {
    ScalingPrior prior;
    if (policy == ScalingPolicy::ones) {
        prior.lambda.assign(data.m(), 1.0);
        return prior;
    }
    prior.lambda = data.column_norms();
    for (auto& v : prior.lambda) v = v > 0.0 ? 1.0 / v : 0.0;
    return prior;
}

ScalingPrior group_scaling_prior(const SparseDataset& data, const GroupStructure& groups, ScalingPolicy policy) {
    ScalingPrior prior;
    prior.lambda.resize(groups.size());
    std::vector<double> sq;
    if (policy == ScalingPolicy::inverse_norm) {
        sq = data.column_norms();
        for (auto& v : sq) v *= v;
    }
    for (std::size_t g = 0; g < groups.size(); ++g) {
        if (g < groups.lambda.size() && groups.lambda[g]) {
            prior.lambda[g] = *groups.lambda[g];
        } else if (policy == ScalingPolicy::ones) {
            prior.lambda[g] = 1.0;
        } else {
            double s = 0.0;
            for (auto j : groups.groups[g]) s += sq[j];
            prior.lambda[g] = s > 0.0 ? 1.0 / std::sqrt(s) : 0.0;
        }
    }
    return prior;
}

// --------------------------------------------------------------- structures

void GroupStructure::validate(std::size_t dim) const {
    if (names.size() != groups.size()) throw StructureError("group names and index sets differ in count");
    std::vector<std::int64_t> owner(dim, -1);
    for (std::size_t g = 0; g < groups.size(); ++g) {
        if (groups[g].empty()) throw StructureError("group '" + names[g] + "' is empty");
        for (auto j : groups[g]) {
            if (j >= dim) throw StructureError("group '" + names[g] + "' has index out of range");
            if (owner[j] >= 0) {
                throw StructureError("groups '" + names[static_cast<std::size_t>(owner[j])] + "' and '" + names[g] +
                                     "' overlap at index " + std::to_string(j));
            }
            owner[j] = static_cast<std::int64_t>(g);
        }
    }
}

TreeStructure::TreeStructure(std::vector<NodeSpec> specs, std::size_t dim) : dim_(dim) {
    const std::size_t p = specs.size();
    nodes_.resize(p);
    for (std::size_t h = 0; h < p; ++h) {
        auto& node = nodes_[h];
        node.name = std::move(specs[h].name);
        node.indices = std::move(specs[h].indices);
        std::sort(node.indices.begin(), node.indices.end());
        if (node.indices.empty()) throw StructureError("tree node '" + node.name + "' is empty");
        if (std::adjacent_find(node.indices.begin(), node.indices.end()) != node.indices.end()) {
            throw StructureError("tree node '" + node.name + "' repeats an index");
        }
        if (node.indices.back() >= dim) throw StructureError("tree node '" + node.name + "' has index out of range");
        node.parent = specs[h].parent;
        node.lambda = specs[h].lambda.value_or(1.0);
        if (node.parent) {
            if (*node.parent >= p || *node.parent == h) {
                throw StructureError("tree node '" + node.name + "' has an invalid parent");
            }
        } else {
            roots_.push_back(h);
        }
    }
    for (std::size_t h = 0; h < p; ++h) {
        if (nodes_[h].parent) nodes_[*nodes_[h].parent].children.push_back(h);
    }
    // every node must reach a root without revisiting
    for (std::size_t h = 0; h < p; ++h) {
        std::size_t steps = 0;
        auto cur = nodes_[h].parent;
        while (cur) {
            if (++steps > p) throw StructureError("tree has a parent cycle through '" + nodes_[h].name + "'");
            cur = nodes_[*cur].parent;
        }
    }
    // children inside their parent; siblings (and roots) pairwise disjoint
    std::vector<std::int64_t> mark(dim, -1);
    auto check_disjoint = [&](std::span<const std::size_t> siblings, const std::string& where) {
        for (auto c : siblings) {
            for (auto j : nodes_[c].indices) {
                if (mark[j] >= 0) {
                    throw StructureError("tree nodes '" + nodes_[static_cast<std::size_t>(mark[j])].name + "' and '" +
                                         nodes_[c].name + "' are neither nested nor disjoint (" + where + ")");
                }
                mark[j] = static_cast<std::int64_t>(c);
            }
        }
        for (auto c : siblings) {
            for (auto j : nodes_[c].indices) mark[j] = -1;
        }
    };
    check_disjoint(roots_, "roots");
    for (std::size_t h = 0; h < p; ++h) {
        const auto& parent = nodes_[h].indices;
        for (auto c : nodes_[h].children) {
            if (!std::includes(parent.begin(), parent.end(), nodes_[c].indices.begin(), nodes_[c].indices.end())) {
                throw StructureError("tree node '" + nodes_[c].name + "' is not contained in its parent '" +
                                     nodes_[h].name + "'");
            }
        }
        check_disjoint(nodes_[h].children, "children of '" + nodes_[h].name + "'");
    }
    std::size_t covered = 0;
    for (auto r : roots_) covered += nodes_[r].indices.size();
    if (covered != dim) throw StructureError("tree nodes do not cover every feature");
    recompute_lambda_max();
}

void TreeStructure::set_lambda(std::span<const double> lambda) {
    if (lambda.size() != nodes_.size()) throw ContractError("tree lambda has wrong length");
    for (std::size_t h = 0; h < nodes_.size(); ++h) nodes_[h].lambda = lambda[h];
    recompute_lambda_max();
}

void TreeStructure::recompute_lambda_max() {
    // post-order via explicit stack
    std::vector<std::pair<std::size_t, bool>> stack;
    for (auto r : roots_) stack.emplace_back(r, false);
    while (!stack.empty()) {
        auto [h, expanded] = stack.back();
        stack.pop_back();
        if (!expanded) {
            stack.emplace_back(h, true);
            for (auto c : nodes_[h].children) stack.emplace_back(c, false);
            continue;
        }
        double best = nodes_[h].lambda;
        for (auto c : nodes_[h].children) best = std::max(best, nodes_[c].subtree_lambda_max);
        nodes_[h].subtree_lambda_max = best;
    }
}

// ---------------------------------------------------------------- synthetic

namespace {

SparseDataset sample_split(std::size_t n, const GroundTruth& truth, Rng& rng) {
    const std::size_t m = truth.weights.size();
    std::vector<std::size_t> row_ptr(n + 1, 0);
    std::vector<Entry> entries(n * m);
    std::vector<double> labels(n);
    std::size_t k = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) entries[k++] = {static_cast<index_t>(j), rng.normal()};
        row_ptr[i + 1] = k;
        double score = 0.0;
        const Entry* row = entries.data() + i * m;
        for (auto j : truth.support) score += row[j].value * truth.weights[j];
        labels[i] = score >= 0.0 ? 1.0 : -1.0;
    }
    return SparseDataset(m, std::move(row_ptr), std::move(entries), std::move(labels));
}

}  // namespace

SyntheticData generate_synthetic(std::size_t n, std::size_t m, std::size_t k, Weighting weighting,
                                 std::uint64_t seed) {
    if (k == 0 || k > m) {
        throw UsageError("informative count must satisfy 0 < k <= m (k=" + std::to_string(k) +
                         ", m=" + std::to_string(m) + ")");
    }
    Rng truth_rng(seed, streams::truth);
    std::vector<index_t> perm(m);
    std::iota(perm.begin(), perm.end(), index_t{0});
    for (std::size_t j = 0; j < k; ++j) {
        const auto pick = j + truth_rng.below(m - j);
        std::swap(perm[j], perm[pick]);
    }
    GroundTruth truth;
    truth.weights.assign(m, 0.0);
    for (std::size_t j = 0; j < k; ++j) {
        double w = truth_rng.uniform_open();
        if (weighting == Weighting::type2) w = std::pow(w, 0.3);
        if (weighting == Weighting::type3) w = std::pow(w, 3.0);
        // u^3 can underflow only for u < 1e-103, which uniform_open never yields
        truth.weights[perm[j]] = w;
    }
    truth.support.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(k));
    std::sort(truth.support.begin(), truth.support.end());

    Rng data_rng(seed, streams::train);
    auto train = sample_split(n, truth, data_rng);
    return {std::move(train), std::move(truth)};
}

SparseDataset generate_test_split(std::size_t n, const GroundTruth& truth, std::uint64_t seed) {
    Rng rng(seed, streams::test);
    return sample_split(n, truth, rng);
}

// ---------------------------------------------------------------------- I/O

SparseDataset load_libsvm(const std::filesystem::path& path, const LibsvmOptions& options) {
    auto in = open_input(path);
    const std::string name = path.string();
    std::vector<double> raw_labels;
    std::vector<std::vector<Entry>> rows;
    std::vector<std::size_t> line_of_row;
    std::string line;
    std::size_t line_no = 0;
    bool saw_zero = false;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view body = line;
        if (const auto hash = body.find('#'); hash != std::string_view::npos) body = body.substr(0, hash);
        const auto tokens = split_ws(trim(body));
        if (tokens.empty()) continue;
        double label = 0.0;
        if (!parse_number(tokens[0], label)) throw ParseError(name, line_no, "bad label '" + std::string(tokens[0]) + "'");
        if (label != 1.0 && label != -1.0 && label != 0.0) {
            throw ParseError(name, line_no, "label " + std::string(tokens[0]) + " is not in {-1,+1} or {0,1}");
        }
        saw_zero = saw_zero || label == 0.0;
        std::vector<Entry> row;
        row.reserve(tokens.size() - 1);
        for (std::size_t t = 1; t < tokens.size(); ++t) {
            const auto tok = tokens[t];
            const auto colon = tok.find(':');
            std::uint64_t idx = 0;
            double value = 0.0;
            if (colon == std::string_view::npos || !parse_number(tok.substr(0, colon), idx) ||
                !parse_number(tok.substr(colon + 1), value)) {
                throw ParseError(name, line_no, "malformed feature '" + std::string(tok) + "'");
            }
            if (idx == 0) throw ParseError(name, line_no, "feature indices are 1-based");
            if (idx > std::numeric_limits<index_t>::max()) throw ParseError(name, line_no, "feature index too large");
            if (!std::isfinite(value)) throw ParseError(name, line_no, "non-finite feature value");
            if (options.dim != 0 && idx > options.dim) {
                throw ParseError(name, line_no,
                                 "feature index " + std::to_string(idx) + " exceeds --dim " + std::to_string(options.dim));
            }
            row.push_back({static_cast<index_t>(idx - 1), value});
        }
        std::sort(row.begin(), row.end(), [](const Entry& a, const Entry& b) { return a.index < b.index; });
        for (std::size_t k = 1; k < row.size(); ++k) {
            if (row[k].index == row[k - 1].index) throw ParseError(name, line_no, "duplicate feature index");
        }
        raw_labels.push_back(label);
        rows.push_back(std::move(row));
        line_of_row.push_back(line_no);
    }
    if (saw_zero) {
        for (std::size_t i = 0; i < raw_labels.size(); ++i) {
            if (raw_labels[i] == -1.0) {
                throw ParseError(name, line_of_row[i], "mixes -1 labels with the 0/1 convention");
            }
            raw_labels[i] = raw_labels[i] == 0.0 ? -1.0 : 1.0;
        }
        if (options.warnings) options.warnings->push_back(name + ": 0/1 labels remapped to -1/+1");
    }
    DatasetBuilder builder;
    for (std::size_t i = 0; i < rows.size(); ++i) builder.add_row(raw_labels[i], std::move(rows[i]));
    return std::move(builder).build(options.dim);
}

void write_libsvm(const std::filesystem::path& path, const SparseDataset& data) {
    auto out = open_output(path);
    std::string line;
    for (std::size_t i = 0; i < data.n(); ++i) {
        line = data.label(i) > 0 ? "+1" : "-1";
        for (const auto& e : data.row(i)) {
            line += ' ';
            line += std::to_string(e.index + 1);
            line += ':';
            line += format_double(e.value);
        }
        line += '\n';
        out << line;
    }
    if (!out) throw DataError("write failed for " + path.string());
}

GroupStructure load_groups(const std::filesystem::path& path, std::size_t dim) {
    auto in = open_input(path);
    const std::string name = path.string();
    GroupStructure gs;
    std::map<std::string, std::size_t, std::less<>> seen;
    std::string line;
    std::size_t line_no = 0;
    StructureLine parsed;
    while (std::getline(in, line)) {
        ++line_no;
        if (!parse_structure_line(name, line_no, line, parsed)) continue;
        if (split_ws(parsed.head).size() != 1) throw ParseError(name, line_no, "group name must be one token");
        std::string group_name(parsed.head);
        if (!seen.emplace(group_name, gs.size()).second) throw ParseError(name, line_no, "duplicate group name");
        gs.names.push_back(std::move(group_name));
        gs.groups.push_back(parse_index_list(name, line_no, parsed.body, dim));
        gs.lambda.push_back(parsed.lambda);
    }
    gs.validate(dim);
    return gs;
}

TreeStructure load_tree(const std::filesystem::path& path, std::size_t dim) {
    auto in = open_input(path);
    const std::string name = path.string();
    std::vector<TreeStructure::NodeSpec> specs;
    std::vector<std::string> parent_names;
    std::vector<std::size_t> line_nos;
    std::map<std::string, std::size_t, std::less<>> ids;
    std::string line;
    std::size_t line_no = 0;
    StructureLine parsed;
    while (std::getline(in, line)) {
        ++line_no;
        if (!parse_structure_line(name, line_no, line, parsed)) continue;
        const auto head = split_ws(parsed.head);
        if (head.size() != 2) throw ParseError(name, line_no, "expected 'name parent|ROOT:'");
        std::string node_name(head[0]);
        if (!ids.emplace(node_name, specs.size()).second) throw ParseError(name, line_no, "duplicate node name");
        TreeStructure::NodeSpec spec;
        spec.name = std::move(node_name);
        spec.indices = parse_index_list(name, line_no, parsed.body, dim);
        spec.lambda = parsed.lambda;
        specs.push_back(std::move(spec));
        parent_names.emplace_back(head[1]);
        line_nos.push_back(line_no);
    }
    for (std::size_t h = 0; h < specs.size(); ++h) {
        if (parent_names[h] == "ROOT") continue;
        auto it = ids.find(parent_names[h]);
        if (it == ids.end()) throw ParseError(name, line_nos[h], "unknown parent '" + parent_names[h] + "'");
        specs[h].parent = it->second;
    }
    return TreeStructure(std::move(specs), dim);
}

GroundTruth load_ground_truth(const std::filesystem::path& path, std::size_t dim) {
    auto in = open_input(path);
    const std::string name = path.string();
    GroundTruth truth;
    truth.weights.assign(dim, 0.0);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto tokens = split_ws(trim(line));
        if (tokens.empty() || tokens[0].front() == '#') continue;
        index_t idx = 0;
        double w = 0.0;
        if (tokens.size() != 2 || !parse_number(tokens[0], idx) || !parse_number(tokens[1], w)) {
            throw ParseError(name, line_no, "expected 'index weight'");
        }
        if (idx >= dim) throw ParseError(name, line_no, "index out of range");
        truth.weights[idx] = w;
    }
    for (std::size_t j = 0; j < dim; ++j) {
        if (truth.weights[j] != 0.0) truth.support.push_back(static_cast<index_t>(j));
    }
    return truth;
}

void write_ground_truth(const std::filesystem::path& path, const GroundTruth& truth) {
    auto out = open_output(path);
    for (auto j : truth.support) out << j << ' ' << format_double(truth.weights[j]) << '\n';
    if (!out) throw DataError("write failed for " + path.string());
}

}  // namespace fgm
