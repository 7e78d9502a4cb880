#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "sunny/errors.hpp"
#include "sunny/io.hpp"

namespace sunny {

// ---------------------------------------------------------------------------
// Problem descriptor (MPD v1)
// ---------------------------------------------------------------------------

struct Variable {
    std::string id;
    std::int64_t lb = 0;
    std::int64_t ub = 0;

    std::int64_t domain_size() const { return ub - lb + 1; }
};

enum class Relation { LessEqual, GreaterEqual, Equal, NotEqual };

inline std::string relation_token(Relation r) {
    switch (r) {
        case Relation::LessEqual: return "<=";
        case Relation::GreaterEqual: return ">=";
        case Relation::Equal: return "=";
        case Relation::NotEqual: return "!=";
    }
    return "?";
}

inline std::optional<Relation> relation_from_token(std::string_view t) {
    if (t == "<=") return Relation::LessEqual;
    if (t == ">=") return Relation::GreaterEqual;
    if (t == "=") return Relation::Equal;
    if (t == "!=") return Relation::NotEqual;
    return std::nullopt;
}

struct LinearTerm {
    std::int64_t coeff = 0;
    std::string var;
};

struct LinearExpr {
    std::vector<LinearTerm> terms;
};

struct LinearConstraint {
    LinearExpr expr;
    Relation rel = Relation::LessEqual;
    std::int64_t rhs = 0;
};

struct AllDifferentConstraint {
    std::vector<std::string> vars;  // >= 2 distinct ids
};

using Constraint = std::variant<LinearConstraint, AllDifferentConstraint>;

enum class ObjectiveKind { Satisfaction, Minimize, Maximize };

struct Objective {
    ObjectiveKind kind = ObjectiveKind::Satisfaction;
    LinearExpr expr;  // empty for satisfaction
};

struct ProblemDescriptor {
    std::string name;
    std::vector<Variable> variables;
    std::vector<Constraint> constraints;
    Objective objective;

    bool is_optimization() const { return objective.kind != ObjectiveKind::Satisfaction; }

    const Variable* find_variable(std::string_view id) const {
        for (const auto& v : variables)
            if (v.id == id) return &v;
        return nullptr;
    }
};

/// Total map from variable id to value; extra keys are tolerated and ignored
/// by the checker (solvers may print auxiliary variables).
using Assignment = std::map<std::string, std::int64_t>;

// ---------------------------------------------------------------------------
// Solution checking
// ---------------------------------------------------------------------------

struct CheckResult {
    enum class Verdict { Valid, Violates, OutOfDomain, Incomplete };

    Verdict verdict = Verdict::Valid;
    std::size_t constraint_index = 0;  // Violates only
    std::string variable_id;           // OutOfDomain / Incomplete only

    bool valid() const { return verdict == Verdict::Valid; }

    static CheckResult ok() { return {}; }
    static CheckResult violates(std::size_t idx) {
        return {Verdict::Violates, idx, {}};
    }
    static CheckResult out_of_domain(std::string id) {
        return {Verdict::OutOfDomain, 0, std::move(id)};
    }
    static CheckResult incomplete(std::string id) {
        return {Verdict::Incomplete, 0, std::move(id)};
    }

    std::string describe() const {
        switch (verdict) {
            case Verdict::Valid: return "valid";
            case Verdict::Violates: return "violates:" + std::to_string(constraint_index);
            case Verdict::OutOfDomain: return "domain:" + variable_id;
            case Verdict::Incomplete: return "incomplete:" + variable_id;
        }
        return "?";
    }
};

inline std::int64_t evaluate_expr(const LinearExpr& expr, const Assignment& a) {
    std::int64_t sum = 0;
    for (const auto& t : expr.terms) sum += t.coeff * a.at(t.var);
    return sum;
}

inline bool relation_holds(std::int64_t lhs, Relation rel, std::int64_t rhs) {
    switch (rel) {
        case Relation::LessEqual: return lhs <= rhs;
        case Relation::GreaterEqual: return lhs >= rhs;
        case Relation::Equal: return lhs == rhs;
        case Relation::NotEqual: return lhs != rhs;
    }
    return false;
}

inline bool constraint_holds(const Constraint& c, const Assignment& a) {
    if (const auto* lin = std::get_if<LinearConstraint>(&c))
        return relation_holds(evaluate_expr(lin->expr, a), lin->rel, lin->rhs);
    const auto& ad = std::get<AllDifferentConstraint>(c);
    std::set<std::int64_t> seen;
    for (const auto& v : ad.vars)
        if (!seen.insert(a.at(v)).second) return false;
    return true;
}

/// First failing reason in declaration order: variables are examined in
/// declaration order (missing value, then domain), constraints afterwards.
inline CheckResult check_solution(const ProblemDescriptor& p, const Assignment& a) {
    for (const auto& v : p.variables) {
        auto it = a.find(v.id);
        if (it == a.end()) return CheckResult::incomplete(v.id);
        if (it->second < v.lb || it->second > v.ub) return CheckResult::out_of_domain(v.id);
    }
    for (std::size_t i = 0; i < p.constraints.size(); ++i)
        if (!constraint_holds(p.constraints[i], a)) return CheckResult::violates(i);
    return CheckResult::ok();
}

/// Objective value under a total assignment. The orchestrator always computes
/// this itself; solver-reported objective values are never used.
inline std::int64_t evaluate_objective(const ProblemDescriptor& p, const Assignment& a) {
    if (!p.is_optimization())
        throw Error("evaluate_objective: problem '" + p.name + "' has no objective");
    for (const auto& v : p.variables)
        if (!a.count(v.id))
            throw Error("evaluate_objective: assignment is missing variable '" + v.id + "'");
    return evaluate_expr(p.objective.expr, a);
}

/// Copy of the problem with one added constraint forcing a strict improvement
/// over `bound`: objective <= bound-1 for minimize, >= bound+1 for maximize.
inline ProblemDescriptor tighten_bound(const ProblemDescriptor& p, std::int64_t bound) {
    if (!p.is_optimization())
        throw Error("tighten_bound: problem '" + p.name + "' has no objective");
    ProblemDescriptor out = p;
    LinearConstraint cut;
    cut.expr = p.objective.expr;
    if (p.objective.kind == ObjectiveKind::Minimize) {
        cut.rel = Relation::LessEqual;
        cut.rhs = bound - 1;
    } else {
        cut.rel = Relation::GreaterEqual;
        cut.rhs = bound + 1;
    }
    out.constraints.emplace_back(std::move(cut));
    return out;
}

/// The objective value a restarted solver must reach or beat, i.e. the
/// right-hand side of the cut added by tighten_bound.
inline std::int64_t improvement_cap(const ProblemDescriptor& p, std::int64_t bound) {
    return p.objective.kind == ObjectiveKind::Minimize ? bound - 1 : bound + 1;
}

/// True when `candidate` is a strict improvement on `incumbent` for the
/// problem's objective direction. An empty incumbent is always improved on.
inline bool improves(const ProblemDescriptor& p, std::int64_t candidate,
                     std::optional<std::int64_t> incumbent) {
    if (!incumbent) return true;
    return p.objective.kind == ObjectiveKind::Minimize ? candidate < *incumbent
                                                       : candidate > *incumbent;
}

// ---------------------------------------------------------------------------
// MPD v1 text format
// ---------------------------------------------------------------------------
//
//   PROBLEM <name>
//   VAR <id> INT <lb> <ub>
//   CON LIN <c>*<v> [+ <c>*<v>]... <rel> <rhs>      rel in {<=, >=, =, !=}
//   CON ALLDIFF <v1> <v2> ...
//   OBJ SAT | OBJ MIN <expr> | OBJ MAX <expr>
//
// Line oriented, UTF-8, '#' starts a comment. Exactly one PROBLEM line and
// exactly one OBJ line.

namespace detail {

inline LinearTerm parse_term(std::string_view tok, std::size_t line) {
    auto star = tok.find('*');
    if (star == std::string_view::npos)
        throw ParseError("expected <coeff>*<var>, got '" + std::string(tok) + "'", line);
    LinearTerm t;
    t.coeff = parse_int(tok.substr(0, star), line);
    t.var = std::string(tok.substr(star + 1));
    if (!is_identifier(t.var))
        throw ParseError("bad variable name '" + t.var + "'", line);
    return t;
}

// Terms are <coeff>*<var> tokens joined by standalone '+' tokens.
inline LinearExpr parse_expr(const std::vector<std::string>& toks, std::size_t begin,
                             std::size_t end, std::size_t line) {
    LinearExpr expr;
    bool expect_term = true;
    for (std::size_t i = begin; i < end; ++i) {
        if (expect_term) {
            expr.terms.push_back(parse_term(toks[i], line));
        } else if (toks[i] != "+") {
            throw ParseError("expected '+', got '" + toks[i] + "'", line);
        }
        expect_term = !expect_term;
    }
    if (expect_term || expr.terms.empty())
        throw ParseError("malformed linear expression", line);
    return expr;
}

}  // namespace detail

inline ProblemDescriptor parse_problem(const std::string& text) {
    ProblemDescriptor p;
    bool have_name = false;
    bool have_objective = false;
    std::set<std::string> declared;

    auto require_declared = [&](const std::string& id, std::size_t line) {
        if (!declared.count(id))
            throw ParseError("reference to undeclared variable '" + id + "'", line);
    };

    const auto lines = to_lines(text);
    for (std::size_t n = 0; n < lines.size(); ++n) {
        const std::size_t lineno = n + 1;
        std::string_view raw = lines[n];
        if (auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
        auto toks = split_ws(raw);
        if (toks.empty()) continue;
        const std::string& kw = toks[0];

        if (kw == "PROBLEM") {
            if (have_name) throw ParseError("duplicate PROBLEM line", lineno);
            if (toks.size() != 2 || !is_identifier(toks[1]))
                throw ParseError("expected: PROBLEM <name>", lineno);
            p.name = toks[1];
            have_name = true;
        } else if (kw == "VAR") {
            if (!have_name) throw ParseError("VAR before PROBLEM", lineno);
            if (toks.size() != 5 || toks[2] != "INT")
                throw ParseError("expected: VAR <id> INT <lb> <ub>", lineno);
            Variable v;
            v.id = toks[1];
            if (!is_identifier(v.id)) throw ParseError("bad variable name '" + v.id + "'", lineno);
            v.lb = parse_int(toks[3], lineno);
            v.ub = parse_int(toks[4], lineno);
            if (v.lb > v.ub)
                throw ParseError("empty domain for '" + v.id + "' (lb > ub)", lineno);
            if (!declared.insert(v.id).second)
                throw ParseError("duplicate variable id '" + v.id + "'", lineno);
            p.variables.push_back(std::move(v));
        } else if (kw == "CON") {
            if (!have_name) throw ParseError("CON before PROBLEM", lineno);
            if (toks.size() < 2) throw ParseError("expected: CON LIN ... | CON ALLDIFF ...", lineno);
            if (toks[1] == "LIN") {
                if (toks.size() < 5) throw ParseError("truncated CON LIN", lineno);
                LinearConstraint c;
                auto rel = relation_from_token(toks[toks.size() - 2]);
                if (!rel) throw ParseError("bad relation '" + toks[toks.size() - 2] + "'", lineno);
                c.rel = *rel;
                c.rhs = parse_int(toks.back(), lineno);
                c.expr = detail::parse_expr(toks, 2, toks.size() - 2, lineno);
                for (const auto& t : c.expr.terms) require_declared(t.var, lineno);
                p.constraints.emplace_back(std::move(c));
            } else if (toks[1] == "ALLDIFF") {
                AllDifferentConstraint c;
                std::set<std::string> seen;
                for (std::size_t i = 2; i < toks.size(); ++i) {
                    require_declared(toks[i], lineno);
                    if (!seen.insert(toks[i]).second)
                        throw ParseError("repeated variable '" + toks[i] + "' in ALLDIFF", lineno);
                    c.vars.push_back(toks[i]);
                }
                if (c.vars.size() < 2)
                    throw ParseError("ALLDIFF needs at least 2 variables", lineno);
                p.constraints.emplace_back(std::move(c));
            } else {
                throw ParseError("unknown constraint kind '" + toks[1] + "'", lineno);
            }
        } else if (kw == "OBJ") {
            if (!have_name) throw ParseError("OBJ before PROBLEM", lineno);
            if (have_objective) throw ParseError("duplicate OBJ line", lineno);
            if (toks.size() < 2) throw ParseError("expected: OBJ SAT|MIN|MAX ...", lineno);
            if (toks[1] == "SAT") {
                if (toks.size() != 2) throw ParseError("OBJ SAT takes no expression", lineno);
                p.objective.kind = ObjectiveKind::Satisfaction;
            } else if (toks[1] == "MIN" || toks[1] == "MAX") {
                p.objective.kind =
                    toks[1] == "MIN" ? ObjectiveKind::Minimize : ObjectiveKind::Maximize;
                p.objective.expr = detail::parse_expr(toks, 2, toks.size(), lineno);
                for (const auto& t : p.objective.expr.terms) require_declared(t.var, lineno);
            } else {
                throw ParseError("unknown objective '" + toks[1] + "'", lineno);
            }
            have_objective = true;
        } else {
            throw ParseError("unknown directive '" + kw + "'", lineno);
        }
    }

    if (!have_name || p.variables.empty()) throw ParseError("empty problem");
    if (!have_objective) throw ParseError("missing OBJ line");
    return p;
}

inline std::string format_expr(const LinearExpr& expr) {
    std::ostringstream os;
    for (std::size_t i = 0; i < expr.terms.size(); ++i) {
        if (i) os << " + ";
        os << expr.terms[i].coeff << '*' << expr.terms[i].var;
    }
    return os.str();
}

inline std::string serialize_problem(const ProblemDescriptor& p) {
    std::ostringstream os;
    os << "PROBLEM " << p.name << '\n';
    for (const auto& v : p.variables)
        os << "VAR " << v.id << " INT " << v.lb << ' ' << v.ub << '\n';
    for (const auto& c : p.constraints) {
        if (const auto* lin = std::get_if<LinearConstraint>(&c)) {
            os << "CON LIN " << format_expr(lin->expr) << ' ' << relation_token(lin->rel) << ' '
               << lin->rhs << '\n';
        } else {
            os << "CON ALLDIFF";
            for (const auto& v : std::get<AllDifferentConstraint>(c).vars) os << ' ' << v;
            os << '\n';
        }
    }
    switch (p.objective.kind) {
        case ObjectiveKind::Satisfaction: os << "OBJ SAT\n"; break;
        case ObjectiveKind::Minimize: os << "OBJ MIN " << format_expr(p.objective.expr) << '\n'; break;
        case ObjectiveKind::Maximize: os << "OBJ MAX " << format_expr(p.objective.expr) << '\n'; break;
    }
    return os.str();
}

inline ProblemDescriptor load_problem(const std::string& path) {
    try {
        return parse_problem(read_file(path));
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what());
    }
}

}  // namespace sunny
