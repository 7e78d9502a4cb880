#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sunny/errors.hpp"
#include "sunny/problem.hpp"

namespace sunny {

struct FeatureVector {
    std::vector<double> values;
    std::string schema;

    std::size_t dimension() const { return values.size(); }
};

/// Per-feature (min, max) learned from a knowledge base; the scaling applied
/// before Euclidean distance.
struct NormalizationBounds {
    std::vector<std::pair<double, double>> bounds;

    std::size_t dimension() const { return bounds.size(); }
};

/// Schema id of the built-in 16-feature extractor below. A knowledge base
/// records the schema of the vectors it stores so that a differently trained
/// extractor is never silently mixed in.
inline constexpr const char* kBuiltinFeatureSchema = "mpd16-v1";
inline constexpr std::size_t kBuiltinFeatureCount = 16;

/// Product of domain sizes is capped at 10^6 before taking the log.
inline constexpr double kDomainProductCap = 1e6;

namespace detail {

inline std::vector<std::string> constraint_variables(const Constraint& c) {
    std::vector<std::string> out;
    if (const auto* lin = std::get_if<LinearConstraint>(&c)) {
        for (const auto& t : lin->expr.terms) out.push_back(t.var);
    } else {
        out = std::get<AllDifferentConstraint>(c).vars;
    }
    return out;
}

}  // namespace detail

/// Deterministic 16-entry characterization of a problem: counts and simple
/// statistics over variables, domains, constraints and the objective.
///
///   1 variable count                 9 ALLDIFFERENT count
///   2 constraint count              10 equality fraction among LINEAR
///   3 constraint/variable ratio     11 mean constraint arity
///   4 min domain size               12 max variable degree
///   5 max domain size               13 mean variable degree
///   6 mean domain size              14 objective flag (0 sat / 1 min / 2 max)
///   7 log2 domain product (capped)  15 objective arity
///   8 LINEAR count                  16 objective |coefficient| sum
inline FeatureVector extract_features(const ProblemDescriptor& p) {
    const double nv = static_cast<double>(p.variables.size());
    const double nc = static_cast<double>(p.constraints.size());

    double min_dom = 0, max_dom = 0, sum_dom = 0, log_prod = 0;
    for (std::size_t i = 0; i < p.variables.size(); ++i) {
        const double size = static_cast<double>(p.variables[i].ub) -
                            static_cast<double>(p.variables[i].lb) + 1.0;
        min_dom = i == 0 ? size : std::min(min_dom, size);
        max_dom = std::max(max_dom, size);
        sum_dom += size;
        log_prod += std::log2(size);
    }
    log_prod = std::min(log_prod, std::log2(kDomainProductCap));

    double n_lin = 0, n_alldiff = 0, n_eq = 0, sum_arity = 0;
    std::map<std::string, double> degree;  // constraints a variable occurs in
    for (const auto& c : p.constraints) {
        auto vars = detail::constraint_variables(c);
        sum_arity += static_cast<double>(vars.size());
        std::sort(vars.begin(), vars.end());
        vars.erase(std::unique(vars.begin(), vars.end()), vars.end());
        for (const auto& v : vars) degree[v] += 1.0;
        if (const auto* lin = std::get_if<LinearConstraint>(&c)) {
            n_lin += 1.0;
            if (lin->rel == Relation::Equal) n_eq += 1.0;
        } else {
            n_alldiff += 1.0;
        }
    }

    double max_degree = 0, sum_degree = 0;
    for (const auto& [id, d] : degree) {
        max_degree = std::max(max_degree, d);
        sum_degree += d;
    }

    double obj_flag = 0, obj_arity = 0, obj_coeff_sum = 0;
    if (p.objective.kind != ObjectiveKind::Satisfaction) {
        obj_flag = p.objective.kind == ObjectiveKind::Minimize ? 1 : 2;
        obj_arity = static_cast<double>(p.objective.expr.terms.size());
        for (const auto& t : p.objective.expr.terms)
            obj_coeff_sum += std::abs(static_cast<double>(t.coeff));
    }

    FeatureVector fv;
    fv.schema = kBuiltinFeatureSchema;
    fv.values = {
        nv,
        nc,
        nv > 0 ? nc / nv : 0.0,
        min_dom,
        max_dom,
        nv > 0 ? sum_dom / nv : 0.0,
        log_prod,
        n_lin,
        n_alldiff,
        n_lin > 0 ? n_eq / n_lin : 0.0,
        nc > 0 ? sum_arity / nc : 0.0,
        max_degree,
        nv > 0 ? sum_degree / nv : 0.0,
        obj_flag,
        obj_arity,
        obj_coeff_sum,
    };
    return fv;
}

inline NormalizationBounds fit_normalization(const std::vector<FeatureVector>& vectors) {
    if (vectors.empty()) throw Error("fit_normalization: empty vector list");
    const std::size_t d = vectors.front().dimension();
    NormalizationBounds nb;
    nb.bounds.assign(d, {0.0, 0.0});
    for (std::size_t j = 0; j < d; ++j)
        nb.bounds[j] = {vectors.front().values[j], vectors.front().values[j]};
    for (const auto& v : vectors) {
        if (v.dimension() != d)
            throw Error("fit_normalization: mixed dimensions (" + std::to_string(v.dimension()) +
                        " vs " + std::to_string(d) + ")");
        for (std::size_t j = 0; j < d; ++j) {
            nb.bounds[j].first = std::min(nb.bounds[j].first, v.values[j]);
            nb.bounds[j].second = std::max(nb.bounds[j].second, v.values[j]);
        }
    }
    return nb;
}

/// Affine map of each entry to [-1, 1]. A feature that is constant over the
/// training set maps to 0, and unseen query values clamp to the range.
inline FeatureVector normalize(const FeatureVector& v, const NormalizationBounds& b) {
    if (v.dimension() != b.dimension())
        throw Error("normalize: dimension mismatch (" + std::to_string(v.dimension()) + " vs " +
                    std::to_string(b.dimension()) + ")");
    FeatureVector out;
    out.schema = v.schema;
    out.values.reserve(v.dimension());
    for (std::size_t j = 0; j < v.dimension(); ++j) {
        const auto [lo, hi] = b.bounds[j];
        double x = 0.0;
        if (hi > lo) x = std::clamp(2.0 * (v.values[j] - lo) / (hi - lo) - 1.0, -1.0, 1.0);
        out.values.push_back(x);
    }
    return out;
}

inline double distance(const FeatureVector& a, const FeatureVector& b) {
    if (a.dimension() != b.dimension())
        throw Error("distance: dimension mismatch (" + std::to_string(a.dimension()) + " vs " +
                    std::to_string(b.dimension()) + ")");
    double sum = 0.0;
    for (std::size_t j = 0; j < a.dimension(); ++j) {
        const double d = a.values[j] - b.values[j];
        sum += d * d;
    }
    return std::sqrt(sum);
}

}  // namespace sunny
