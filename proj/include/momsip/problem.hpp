#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "momsip/measure.hpp"
#include "momsip/polynomial.hpp"

namespace momsip {

/// One piece Q_i of the quantifier set, with the measure nu_i carried on it.
/// `membership` and `enclosure` power the y-side searches (feasibility gaps,
/// atom verification); when absent they are derived from the measure kind
/// where possible, else searches fall back to the sample cloud.
struct QuantifierPiece {
    std::string name;
    MeasureSpec measure = MeasureSpec::box({{0.0, 1.0}});
    std::function<bool(const Eigen::VectorXd&)> membership;
    std::vector<std::pair<double, double>> enclosure;
};

/// Semi-infinite problem data: minimize f(x) over x in X with
/// g_j(x, y) >= 0 for all y in Q = union of the pieces.
struct SipProblem {
    int n = 0;
    int m = 0;
    Polynomial f;                    // objective, x-only (ny = 0)
    std::vector<Polynomial> g;       // quantified constraints over (x, y)
    std::vector<Polynomial> c_eq;    // X equalities, x-only
    std::vector<Polynomial> c_in;    // X inequalities, x-only
    std::vector<QuantifierPiece> pieces;

    void validate() const {
        if (n < 1) throw std::invalid_argument("SipProblem: n >= 1 required");
        if (f.nx() != n || f.deg_y() > 0)
            throw std::invalid_argument("SipProblem: objective must be x-only with arity n");
        for (const auto& gj : g)
            if (gj.nx() != n || gj.ny() != m)
                throw std::invalid_argument("SipProblem: constraint arity mismatch");
        for (const auto& c : c_eq)
            if (c.nx() != n || c.deg_y() > 0)
                throw std::invalid_argument("SipProblem: c_eq must be x-only");
        for (const auto& c : c_in)
            if (c.nx() != n || c.deg_y() > 0)
                throw std::invalid_argument("SipProblem: c_in must be x-only");
        if (pieces.empty()) throw std::invalid_argument("SipProblem: at least one measure piece");
        for (const auto& p : pieces)
            if (p.measure.arity() != m)
                throw std::invalid_argument("SipProblem: measure arity mismatch");
        if (!g.empty() && m < 1)
            throw std::invalid_argument("SipProblem: quantified constraints need m >= 1");
    }

    /// d_g = max{1, deg_x(g)} over the constraint tuple.
    int flatness_gap() const {
        int d = 1;
        for (const auto& gj : g) d = std::max(d, gj.deg_x());
        return d;
    }
};

}  // namespace momsip
