#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "momsip/moment_matrices.hpp"
#include "momsip/problem.hpp"

namespace momsip {

class ExtractionFailure : public std::runtime_error {
  public:
    explicit ExtractionFailure(const std::string& msg) : std::runtime_error(msg) {}
};

/// Outcome of the rank-stabilization test on a truncated sequence.
struct FlatnessVerdict {
    int d = 0;           // half-degree of w
    int d_g = 1;         // rank gap used
    double tol = 1e-6;   // singular values below tol * sigma_max count as zero
    bool flat = false;
    int k_star = -1;     // smallest admissible k achieving the rank match
    int rank_k = 0;      // rank H^(k_star)
    int rank_d = 0;      // rank H^(d)
    int r = 0;           // common rank when flat
    std::vector<int> ranks;  // rank H^(j) for j = 0..d
};

inline int numerical_rank(const Eigen::MatrixXd& M, double tol) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0 || sv(0) <= 0.0) return 0;
    int r = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > tol * sv(0)) ++r;
    return r;
}

/// Check rank H^(k)[w] = rank H^(d)[w] for some positive k <= d - d_g.
inline FlatnessVerdict flatness_check(const TruncatedSequence& w, int d_g, double tol = 1e-6) {
    FlatnessVerdict v;
    v.d = w.degree() / 2;
    v.d_g = d_g;
    v.tol = tol;
    for (int j = 0; j <= v.d; ++j) v.ranks.push_back(numerical_rank(moment_matrix(w, j), tol));
    v.rank_d = v.ranks.back();
    for (int k = 1; k <= v.d - d_g; ++k) {
        if (v.ranks[static_cast<std::size_t>(k)] == v.rank_d) {
            v.flat = true;
            v.k_star = k;
            v.rank_k = v.ranks[static_cast<std::size_t>(k)];
            v.r = v.rank_d;
            break;
        }
    }
    return v;
}

/// Finite weighted sum of Dirac measures recovered from a flat sequence.
struct AtomicMeasure {
    std::vector<Eigen::VectorXd> atoms;
    std::vector<double> weights;
    double residual = 0.0;   // max |reconstructed - w| / (1 + |w|_inf)
    std::uint64_t seed = 0;  // seed of the random operator combination
};

/// Atom extraction from a flat truncated sequence: column-space basis of
/// H^(d)[w], coordinate multiplication operators, simultaneous
/// diagonalization through a seeded random convex combination, weights by
/// least squares against the full truncated moment vector.
inline AtomicMeasure extract_atoms(const TruncatedSequence& w, int r, std::uint64_t seed = 12345) {
    const int n = w.n();
    const int d = w.degree() / 2;
    if (r < 1) throw ExtractionFailure("extract_atoms: rank must be positive");

    Eigen::MatrixXd H = moment_matrix(w, d);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
    const Eigen::Index nd = H.rows();
    if (es.eigenvalues()(nd - 1) <= 0.0)
        throw ExtractionFailure("extract_atoms: moment matrix has no positive spectrum");

    // top-r spectral factor V with H ~ V V^T
    Eigen::MatrixXd V(nd, r);
    for (int i = 0; i < r; ++i) {
        const double lam = es.eigenvalues()(nd - 1 - i);
        if (lam <= 1e-14 * es.eigenvalues()(nd - 1))
            throw ExtractionFailure("extract_atoms: requested rank exceeds numerical rank");
        V.col(i) = std::sqrt(lam) * es.eigenvectors().col(nd - 1 - i);
    }

    const auto basis = monomials_up_to(n, d);
    const Eigen::Index low = static_cast<Eigen::Index>(monomial_count(n, d - 1));
    Eigen::MatrixXd B0 = V.topRows(low);
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(B0);
    if (cod.rank() < r)
        throw ExtractionFailure("extract_atoms: degree-(d-1) rows do not span (not flat enough)");

    std::vector<Eigen::MatrixXd> mult;
    for (int i = 0; i < n; ++i) {
        Eigen::MatrixXd Bi(low, r);
        for (Eigen::Index a = 0; a < low; ++a) {
            const auto shifted = basis[static_cast<std::size_t>(a)].plus(
                ExponentVector::unit(n, i));
            Bi.row(a) = V.row(static_cast<Eigen::Index>(mono_index(shifted, n)));
        }
        mult.push_back(cod.solve(Bi));
    }

    // random convex combination, seeded for reproducibility
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.1, 1.0);
    Eigen::VectorXd lam(n);
    for (int i = 0; i < n; ++i) lam(i) = u(rng);
    lam /= lam.sum();
    Eigen::MatrixXd Mrand = Eigen::MatrixXd::Zero(r, r);
    for (int i = 0; i < n; ++i) Mrand += lam(i) * mult[i];

    Eigen::EigenSolver<Eigen::MatrixXd> ges(Mrand);
    if (ges.info() != Eigen::Success)
        throw ExtractionFailure("extract_atoms: eigen decomposition failed");
    Eigen::MatrixXcd P = ges.eigenvectors();
    Eigen::FullPivLU<Eigen::MatrixXcd> plu(P);
    if (!plu.isInvertible())
        throw ExtractionFailure("extract_atoms: ill-conditioned eigenvector basis");
    Eigen::MatrixXcd Pinv = plu.inverse();

    AtomicMeasure out;
    out.seed = seed;
    double imag_max = 0.0;
    for (int j = 0; j < r; ++j) {
        Eigen::VectorXd atom(n);
        for (int i = 0; i < n; ++i) {
            const std::complex<double> val = (Pinv.row(j) * mult[i].cast<std::complex<double>>() *
                                              P.col(j))(0, 0);
            imag_max = std::max(imag_max, std::abs(val.imag()));
            atom(i) = val.real();
        }
        out.atoms.push_back(atom);
    }
    if (imag_max > 1e-5)
        throw ExtractionFailure("extract_atoms: complex leakage in joint diagonalization (" +
                                std::to_string(imag_max) + ")");

    // weights by least squares against the whole truncated vector
    const auto full = monomials_up_to(n, w.degree());
    Eigen::MatrixXd A(static_cast<Eigen::Index>(full.size()), r);
    for (int j = 0; j < r; ++j)
        for (std::size_t a = 0; a < full.size(); ++a) {
            double t = 1.0;
            for (int i = 0; i < n; ++i)
                for (int q = 0; q < full[a][i]; ++q) t *= out.atoms[static_cast<std::size_t>(j)](i);
            A(static_cast<Eigen::Index>(a), j) = t;
        }
    Eigen::VectorXd wt = A.colPivHouseholderQr().solve(w.values());
    for (int j = 0; j < r; ++j) out.weights.push_back(wt(j));
    out.residual = (A * wt - w.values()).lpNorm<Eigen::Infinity>() /
                   (1.0 + w.values().lpNorm<Eigen::Infinity>());
    if (out.residual > 1e-6)
        throw ExtractionFailure("extract_atoms: reconstruction residual " +
                                std::to_string(out.residual) + " too large");
    return out;
}

// ---- searches over the quantifier set --------------------------------------

namespace detail {

inline double golden_1d(const std::function<double(double)>& phi, double a, double b,
                        int iters = 80) {
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - gr * (b - a), d = a + gr * (b - a);
    double fc = phi(c), fd = phi(d);
    for (int i = 0; i < iters; ++i) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = phi(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = phi(d);
        }
    }
    return fc < fd ? c : d;
}

inline std::vector<std::pair<double, double>> piece_enclosure(const QuantifierPiece& piece) {
    if (!piece.enclosure.empty()) return piece.enclosure;
    const auto& ms = piece.measure;
    switch (ms.kind()) {
        case MeasureKind::Box:
            return ms.box_bounds();
        case MeasureKind::Simplex:
            return std::vector<std::pair<double, double>>(static_cast<std::size_t>(ms.arity()),
                                                          {0.0, 1.0});
        case MeasureKind::Diamond:
            return std::vector<std::pair<double, double>>(static_cast<std::size_t>(ms.arity()),
                                                          {-1.0, 1.0});
        default:
            return {};
    }
}

inline std::function<bool(const Eigen::VectorXd&)> piece_membership(const QuantifierPiece& piece) {
    if (piece.membership) return piece.membership;
    const auto& ms = piece.measure;
    switch (ms.kind()) {
        case MeasureKind::Box: {
            auto bounds = ms.box_bounds();
            return [bounds](const Eigen::VectorXd& y) {
                for (Eigen::Index i = 0; i < y.size(); ++i)
                    if (y(i) < bounds[static_cast<std::size_t>(i)].first - 1e-12 ||
                        y(i) > bounds[static_cast<std::size_t>(i)].second + 1e-12)
                        return false;
                return true;
            };
        }
        case MeasureKind::Simplex:
            return [](const Eigen::VectorXd& y) {
                return y.minCoeff() >= -1e-12 && y.sum() <= 1.0 + 1e-12;
            };
        case MeasureKind::Diamond:
            return [](const Eigen::VectorXd& y) { return y.cwiseAbs().sum() <= 1.0 + 1e-12; };
        default:
            return {};
    }
}

/// Candidate y points for searches over one piece: a deterministic cloud of
/// roughly `budget` points (grid for boxes, filtered grid or the measure's
/// own data otherwise).
inline std::vector<Eigen::VectorXd> piece_cloud(const QuantifierPiece& piece, int budget) {
    const auto& ms = piece.measure;
    std::vector<Eigen::VectorXd> pts;
    switch (ms.kind()) {
        case MeasureKind::Samples:
            return ms.sample_points();
        case MeasureKind::Discrete:
        case MeasureKind::Factorial: {
            if (ms.kind() == MeasureKind::Factorial) {
                for (int kk = 1; kk <= 60; ++kk)
                    pts.push_back(Eigen::VectorXd::Constant(1, static_cast<double>(kk)));
            }
            return pts;
        }
        default: {
            auto box = piece_enclosure(piece);
            auto member = piece_membership(piece);
            const int m = static_cast<int>(box.size());
            const int per = std::max(2, static_cast<int>(std::floor(
                                            std::pow(static_cast<double>(budget), 1.0 / m))));
            std::vector<int> idx(static_cast<std::size_t>(m), 0);
            Eigen::VectorXd y(m);
            for (;;) {
                for (int i = 0; i < m; ++i) {
                    const auto& [lo, hi] = box[static_cast<std::size_t>(i)];
                    y(i) = lo + (hi - lo) * idx[static_cast<std::size_t>(i)] / (per - 1.0);
                }
                if (!member || member(y)) pts.push_back(y);
                int c = 0;
                while (c < m && ++idx[static_cast<std::size_t>(c)] == per) {
                    idx[static_cast<std::size_t>(c)] = 0;
                    ++c;
                }
                if (c == m) break;
            }
            return pts;
        }
    }
}

/// Minimize phi over the piece: best cloud point, then coordinatewise
/// golden-section refinement constrained to the membership predicate.
inline double minimize_over_piece(const QuantifierPiece& piece,
                                  const std::function<double(const Eigen::VectorXd&)>& phi,
                                  int budget) {
    auto cloud = piece_cloud(piece, budget);
    if (cloud.empty()) throw std::invalid_argument("minimize_over_piece: empty search cloud");
    double best = std::numeric_limits<double>::infinity();
    Eigen::VectorXd ybest = cloud.front();
    for (const auto& y : cloud) {
        const double v = phi(y);
        if (v < best) {
            best = v;
            ybest = y;
        }
    }
    const auto& ms = piece.measure;
    if (ms.kind() == MeasureKind::Discrete || ms.kind() == MeasureKind::Factorial) return best;
    auto member = piece_membership(piece);
    auto box = piece_enclosure(piece);
    if (box.empty()) return best;  // cloud-only (sample-backed without enclosure)

    const int m = static_cast<int>(box.size());
    Eigen::VectorXd y = ybest;
    for (int pass = 0; pass < 4; ++pass) {
        for (int i = 0; i < m; ++i) {
            const auto& [lo, hi] = box[static_cast<std::size_t>(i)];
            auto slice = [&](double t) {
                Eigen::VectorXd z = y;
                z(i) = t;
                if (member && !member(z)) return std::numeric_limits<double>::infinity();
                return phi(z);
            };
            const double t = golden_1d(slice, lo, hi);
            Eigen::VectorXd z = y;
            z(i) = t;
            if ((!member || member(z)) && phi(z) < best) {
                best = phi(z);
                y = z;
            }
        }
    }
    return best;
}

}  // namespace detail

/// Margins of a candidate atom list against the quantified constraints:
/// margin(atom, j) = min over pieces of min_{y in Q_i} g_j(atom, y).
struct AtomVerification {
    // margins[atom][j]
    std::vector<std::vector<double>> margins;
    std::vector<double> min_margin;  // per atom
    bool all_in_K(double feas_tol) const {
        for (double v : min_margin)
            if (v < -feas_tol) return false;
        return true;
    }
};

inline AtomVerification verify_atoms_in_K(const std::vector<Eigen::VectorXd>& atoms,
                                          const std::vector<Polynomial>& g,
                                          const std::vector<QuantifierPiece>& pieces,
                                          int budget = 20000) {
    AtomVerification out;
    for (const auto& atom : atoms) {
        std::vector<double> row;
        double mn = std::numeric_limits<double>::infinity();
        for (const auto& gj : g) {
            const Polynomial gy = gj.substitute_x(atom);
            double v = std::numeric_limits<double>::infinity();
            for (const auto& piece : pieces) {
                v = std::min(v, detail::minimize_over_piece(
                                    piece,
                                    [&](const Eigen::VectorXd& y) {
                                        return gy.eval(Eigen::VectorXd(0), y);
                                    },
                                    budget));
            }
            row.push_back(v);
            mn = std::min(mn, v);
        }
        out.margins.push_back(std::move(row));
        out.min_margin.push_back(mn);
    }
    return out;
}

/// Feasibility gaps of a candidate x: delta_j = min_{y in Q} g_j(x, y) and
/// delta = min_j delta_j (+infinity when there are no quantified rows).
struct FeasibilityGap {
    std::vector<double> per_constraint;
    double delta = std::numeric_limits<double>::infinity();
};

inline FeasibilityGap feasibility_gap(const Eigen::VectorXd& xhat, const SipProblem& problem,
                                      int budget = 20000) {
    FeasibilityGap out;
    for (const auto& gj : problem.g) {
        const Polynomial gy = gj.substitute_x(xhat);
        double v = std::numeric_limits<double>::infinity();
        for (const auto& piece : problem.pieces) {
            v = std::min(v, detail::minimize_over_piece(
                                piece,
                                [&](const Eigen::VectorXd& y) {
                                    return gy.eval(Eigen::VectorXd(0), y);
                                },
                                budget));
        }
        out.per_constraint.push_back(v);
        out.delta = std::min(out.delta, v);
    }
    return out;
}

}  // namespace momsip
