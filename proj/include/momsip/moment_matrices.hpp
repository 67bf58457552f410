#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <stdexcept>
#include <string>
#include <vector>

#include "momsip/measure.hpp"
#include "momsip/monomial.hpp"
#include "momsip/polynomial.hpp"

namespace momsip {

/// Requested relaxation order cannot accommodate a constraint's degree.
class OrderTooSmall : public std::runtime_error {
  public:
    explicit OrderTooSmall(const std::string& msg) : std::runtime_error(msg) {}
};

/// Truncated moment multisequence w = (w_alpha), |alpha| <= degree, stored
/// in graded-lex order. Riesz evaluation is linear in the polynomial.
class TruncatedSequence {
  public:
    TruncatedSequence(int n, int degree, Eigen::VectorXd values)
        : n_(n), degree_(degree), values_(std::move(values)) {
        if (values_.size() != monomial_count(n, degree))
            throw std::invalid_argument("TruncatedSequence: length != C(n+degree, degree)");
    }

    static TruncatedSequence zero(int n, int degree) {
        return TruncatedSequence(
            n, degree, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(monomial_count(n, degree))));
    }

    /// Moments of the atomic measure sum_i weights[i] * delta_{atoms[i]}.
    static TruncatedSequence from_atoms(int n, int degree,
                                        const std::vector<Eigen::VectorXd>& atoms,
                                        const std::vector<double>& weights) {
        if (atoms.size() != weights.size())
            throw std::invalid_argument("from_atoms: atoms/weights size mismatch");
        auto monos = monomials_up_to(n, degree);
        Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(monos.size()));
        for (std::size_t i = 0; i < atoms.size(); ++i) {
            if (atoms[i].size() != n) throw std::invalid_argument("from_atoms: atom arity");
            for (std::size_t a = 0; a < monos.size(); ++a) {
                double t = 1.0;
                for (int j = 0; j < n; ++j)
                    for (int p = 0; p < monos[a][j]; ++p) t *= atoms[i][j];
                v(static_cast<Eigen::Index>(a)) += weights[i] * t;
            }
        }
        return TruncatedSequence(n, degree, std::move(v));
    }

    int n() const { return n_; }
    int degree() const { return degree_; }
    const Eigen::VectorXd& values() const { return values_; }

    double at(const ExponentVector& alpha) const {
        if (alpha.degree() > degree_)
            throw std::invalid_argument("TruncatedSequence: degree overflow");
        return values_(static_cast<Eigen::Index>(mono_index(alpha, n_)));
    }

    /// R_w(p) for an x-only polynomial p.
    double riesz(const Polynomial& p) const {
        if (p.deg_y() > 0) throw std::invalid_argument("riesz: polynomial depends on y");
        double acc = 0.0;
        for (const auto& [k, c] : p.terms()) acc += c * at(k.first);
        return acc;
    }

  private:
    int n_;
    int degree_;
    Eigen::VectorXd values_;
};

/// H^(k)[w]: entries w_{alpha+beta} over N^n_k x N^n_k.
inline Eigen::MatrixXd moment_matrix(const TruncatedSequence& w, int k) {
    if (2 * k > w.degree()) throw std::invalid_argument("moment_matrix: 2k exceeds degree of w");
    const auto basis = monomials_up_to(w.n(), k);
    const Eigen::Index s = static_cast<Eigen::Index>(basis.size());
    Eigen::MatrixXd H(s, s);
    for (Eigen::Index i = 0; i < s; ++i)
        for (Eigen::Index j = i; j < s; ++j) {
            const double v = w.at(basis[static_cast<std::size_t>(i)].plus(
                basis[static_cast<std::size_t>(j)]));
            H(i, j) = v;
            H(j, i) = v;
        }
    return H;
}

/// Localizing matrix of an x-polynomial c with explicit basis order `side`:
/// entry (a, b) = sum_gamma c_gamma w_{a+b+gamma} over N^n_side.
inline Eigen::MatrixXd localizing_matrix_sided(const TruncatedSequence& w, const Polynomial& c,
                                               int side) {
    if (c.deg_y() > 0) throw std::invalid_argument("localizing_matrix: c depends on y");
    if (side < 0) throw OrderTooSmall("localizing_matrix: negative basis order");
    if (2 * side + c.deg_x() > w.degree())
        throw std::invalid_argument("localizing_matrix: degree overflow");
    const auto basis = monomials_up_to(w.n(), side);
    const Eigen::Index s = static_cast<Eigen::Index>(basis.size());
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(s, s);
    for (Eigen::Index i = 0; i < s; ++i)
        for (Eigen::Index j = i; j < s; ++j) {
            const auto ab =
                basis[static_cast<std::size_t>(i)].plus(basis[static_cast<std::size_t>(j)]);
            double v = 0.0;
            for (const auto& [key, coef] : c.terms()) v += coef * w.at(ab.plus(key.first));
            L(i, j) = v;
            L(j, i) = v;
        }
    return L;
}

/// Classical localizing matrix at order k (basis order k - ceil(deg c / 2)).
inline Eigen::MatrixXd localizing_matrix(const TruncatedSequence& w, const Polynomial& c, int k) {
    const int side = k - (c.deg_x() + 1) / 2;
    return localizing_matrix_sided(w, c, side);
}

/// Localizing vector: entry at alpha is sum_gamma c_gamma w_{alpha+gamma},
/// for |alpha| <= 2k - deg(c).
inline Eigen::VectorXd localizing_vector(const TruncatedSequence& w, const Polynomial& c,
                                         int two_k) {
    if (c.deg_y() > 0) throw std::invalid_argument("localizing_vector: c depends on y");
    if (c.deg_x() > two_k) throw std::invalid_argument("localizing_vector: degree overflow");
    if (two_k > w.degree()) throw std::invalid_argument("localizing_vector: degree overflow");
    const auto basis = monomials_up_to(w.n(), two_k - c.deg_x());
    Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(basis.size()));
    for (std::size_t a = 0; a < basis.size(); ++a) {
        double acc = 0.0;
        for (const auto& [key, coef] : c.terms()) acc += coef * w.at(basis[a].plus(key.first));
        v(static_cast<Eigen::Index>(a)) = acc;
    }
    return v;
}

/// Y_{nu,h}^{(l')} = int h(y) [y]_{l'} [y]_{l'}^T dnu: the measure-side
/// factor of the Kronecker assembly.
inline Eigen::MatrixXd y_matrix(const MeasureSpec& spec, const Polynomial& h, int l_prime) {
    if (h.deg_x() > 0) throw std::invalid_argument("y_matrix: h depends on x");
    if (l_prime < 0) throw OrderTooSmall("y_matrix: negative basis order");
    const auto basis = monomials_up_to(spec.arity(), l_prime);
    const Eigen::Index s = static_cast<Eigen::Index>(basis.size());
    Eigen::MatrixXd Y = Eigen::MatrixXd::Zero(s, s);
    for (Eigen::Index i = 0; i < s; ++i)
        for (Eigen::Index j = i; j < s; ++j) {
            const auto ab =
                basis[static_cast<std::size_t>(i)].plus(basis[static_cast<std::size_t>(j)]);
            double v = 0.0;
            for (const auto& [key, coef] : h.terms()) v += coef * spec.moment(ab.plus(key.second));
            Y(i, j) = v;
            Y(j, i) = v;
        }
    return Y;
}

/// Degree offsets k' = k - ceil(deg_x(g)/2), l' = l - ceil(deg_y(g)/2).
/// Negative values signal that the order is too small for g.
inline std::pair<int, int> degree_offsets(const Polynomial& g, int k, int l) {
    return {k - (g.deg_x() + 1) / 2, l - (g.deg_y() + 1) / 2};
}

/// The quantified localizing matrix L_{nu,g}^{(k,l)}[w], assembled as
/// sum_i Y_{nu,h_i}^{(l')} (x) L_{g_i}^{(k')}[w] over the separable
/// decomposition g = sum_i g_i(x) h_i(y). Rows are indexed (c, a) with the
/// y-index c outer: row = c * |[x]_{k'}| + a.
struct QuantifiedLocalizer {
    Polynomial g;
    int k = 0, l = 0;
    int k_prime = 0, l_prime = 0;
    // (Y matrix, x-side localizing matrix) per separable summand
    std::vector<std::pair<Eigen::MatrixXd, Eigen::MatrixXd>> summands;
    Eigen::MatrixXd assembled;
};

inline QuantifiedLocalizer quantified_localizing_matrix(const TruncatedSequence& w,
                                                        const Polynomial& g,
                                                        const MeasureSpec& spec, int k, int l) {
    QuantifiedLocalizer out;
    out.g = g;
    out.k = k;
    out.l = l;
    auto [kp, lp] = degree_offsets(g, k, l);
    if (kp < 0 || lp < 0)
        throw OrderTooSmall("quantified_localizing_matrix: order (" + std::to_string(k) + "," +
                            std::to_string(l) + ") too small for deg(g) = (" +
                            std::to_string(g.deg_x()) + "," + std::to_string(g.deg_y()) + ")");
    out.k_prime = kp;
    out.l_prime = lp;
    if (2 * k > w.degree())
        throw std::invalid_argument("quantified_localizing_matrix: w degree too low");

    const auto form = separable_decomposition(g);
    const Eigen::Index nxs = static_cast<Eigen::Index>(monomial_count(w.n(), kp));
    const Eigen::Index nys = static_cast<Eigen::Index>(monomial_count(spec.arity(), lp));
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(nys * nxs, nys * nxs);
    for (const auto& [gx, hy] : form.pairs) {
        Eigen::MatrixXd Y = y_matrix(spec, hy, lp);
        Eigen::MatrixXd L = localizing_matrix_sided(w, gx, kp);
        for (Eigen::Index c = 0; c < nys; ++c)
            for (Eigen::Index d = 0; d < nys; ++d)
                M.block(c * nxs, d * nxs, nxs, nxs) += Y(c, d) * L;
        out.summands.emplace_back(std::move(Y), std::move(L));
    }
    out.assembled = 0.5 * (M + M.transpose());
    return out;
}

// ---- affine block builders (coefficient matrices in w) ---------------------

/// A symmetric PSD block that is an affine function of the moment vector w:
/// block(w) = F0 + sum_alpha w_alpha * F[alpha]. The `kron_*` fields mark
/// blocks of the special form Y (x) H^(k')[w] (used for a fast Schur path).
struct AffineBlock {
    int side = 0;
    Eigen::SparseMatrix<double> F0;               // constant part (usually empty)
    std::vector<Eigen::SparseMatrix<double>> F;   // one (possibly empty) matrix per w index
    std::string label;

    bool kron_structured = false;
    Eigen::MatrixXd kron_Y;   // y-side factor
    int kron_nx = 0;          // x-side dimension |[x]_{k'}|
    // for each w index, the (a, b) pairs with a + b = alpha in the x basis
    std::vector<std::vector<std::pair<int, int>>> kron_pairs;
};

/// Affine form of the quantified localizing matrix over w in R^{C(n+2k,2k)}.
inline AffineBlock quantified_block_affine(int n, int two_k, const Polynomial& g,
                                           const MeasureSpec& spec, int k, int l) {
    auto [kp, lp] = degree_offsets(g, k, l);
    if (kp < 0 || lp < 0)
        throw OrderTooSmall("quantified block: order too small for g");
    const auto xbasis = monomials_up_to(n, kp);
    const Eigen::Index nxs = static_cast<Eigen::Index>(xbasis.size());
    const Eigen::Index nys = static_cast<Eigen::Index>(monomial_count(spec.arity(), lp));
    const std::int64_t nvars = monomial_count(n, two_k);

    AffineBlock blk;
    blk.side = static_cast<int>(nys * nxs);
    blk.F0.resize(blk.side, blk.side);
    blk.F.assign(static_cast<std::size_t>(nvars), Eigen::SparseMatrix<double>());

    const auto form = separable_decomposition(g);
    std::vector<std::vector<Eigen::Triplet<double>>> trips(static_cast<std::size_t>(nvars));
    std::vector<Eigen::MatrixXd> ymats;
    for (const auto& [gx, hy] : form.pairs) ymats.push_back(y_matrix(spec, hy, lp));

    for (Eigen::Index a = 0; a < nxs; ++a) {
        for (Eigen::Index b = 0; b < nxs; ++b) {
            const auto ab = xbasis[static_cast<std::size_t>(a)].plus(
                xbasis[static_cast<std::size_t>(b)]);
            for (std::size_t i = 0; i < form.pairs.size(); ++i) {
                for (const auto& [key, coef] : form.pairs[i].first.terms()) {
                    const auto alpha = ab.plus(key.first);
                    const auto ai = static_cast<std::size_t>(mono_index(alpha, n));
                    const Eigen::MatrixXd& Y = ymats[i];
                    for (Eigen::Index c = 0; c < nys; ++c)
                        for (Eigen::Index d = 0; d < nys; ++d) {
                            if (Y(c, d) == 0.0) continue;
                            trips[ai].emplace_back(static_cast<int>(c * nxs + a),
                                                   static_cast<int>(d * nxs + b),
                                                   coef * Y(c, d));
                        }
                }
            }
        }
    }
    for (std::size_t ai = 0; ai < trips.size(); ++ai) {
        if (trips[ai].empty()) continue;
        Eigen::SparseMatrix<double> m(blk.side, blk.side);
        m.setFromTriplets(trips[ai].begin(), trips[ai].end());
        blk.F[ai] = std::move(m);
    }

    // Mark the Kronecker fast path for single-summand decompositions whose
    // x factor is the constant 1 (the g_0 = 1 blocks, Y (x) H^(k)).
    if (form.pairs.size() == 1 && form.pairs.front().first.deg_x() == 0 &&
        std::abs(form.pairs.front().first.coefficient(ExponentVector::zero(n),
                                                      ExponentVector()) - 1.0) < 1e-15) {
        blk.kron_structured = true;
        blk.kron_Y = ymats.front();
        blk.kron_nx = static_cast<int>(nxs);
        blk.kron_pairs.assign(static_cast<std::size_t>(nvars), {});
        for (Eigen::Index a = 0; a < nxs; ++a)
            for (Eigen::Index b = 0; b < nxs; ++b) {
                const auto idx = static_cast<std::size_t>(mono_index(
                    xbasis[static_cast<std::size_t>(a)].plus(xbasis[static_cast<std::size_t>(b)]),
                    n));
                blk.kron_pairs[idx].emplace_back(static_cast<int>(a), static_cast<int>(b));
            }
    }
    return blk;
}

/// Affine form of the classical localizing matrix block L_c^{(k)}[w].
inline AffineBlock localizing_block_affine(int n, int two_k, const Polynomial& c, int k) {
    const int side_order = k - (c.deg_x() + 1) / 2;
    if (side_order < 0) throw OrderTooSmall("localizing block: order too small for c");
    const auto basis = monomials_up_to(n, side_order);
    const Eigen::Index s = static_cast<Eigen::Index>(basis.size());
    const std::int64_t nvars = monomial_count(n, two_k);

    AffineBlock blk;
    blk.side = static_cast<int>(s);
    blk.F0.resize(blk.side, blk.side);
    blk.F.assign(static_cast<std::size_t>(nvars), Eigen::SparseMatrix<double>());
    std::vector<std::vector<Eigen::Triplet<double>>> trips(static_cast<std::size_t>(nvars));
    for (Eigen::Index a = 0; a < s; ++a)
        for (Eigen::Index b = 0; b < s; ++b) {
            const auto ab =
                basis[static_cast<std::size_t>(a)].plus(basis[static_cast<std::size_t>(b)]);
            for (const auto& [key, coef] : c.terms()) {
                const auto ai = static_cast<std::size_t>(mono_index(ab.plus(key.first), n));
                trips[ai].emplace_back(static_cast<int>(a), static_cast<int>(b), coef);
            }
        }
    for (std::size_t ai = 0; ai < trips.size(); ++ai) {
        if (trips[ai].empty()) continue;
        Eigen::SparseMatrix<double> m(blk.side, blk.side);
        m.setFromTriplets(trips[ai].begin(), trips[ai].end());
        blk.F[ai] = std::move(m);
    }
    return blk;
}

}  // namespace momsip
