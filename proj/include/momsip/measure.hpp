#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "momsip/monomial.hpp"
#include "momsip/polynomial.hpp"

namespace momsip {

/// A moment was requested beyond what the measure description can supply.
class CapabilityError : public std::runtime_error {
  public:
    explicit CapabilityError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bell numbers B_0..B_30. B_25 onward exceeds 2^53, so the tail carries
// ordinary double rounding; fine for the floating pipeline here.
inline double bell_number(int j) {
    static constexpr std::array<double, 31> kBell = {
        1.0, 1.0, 2.0, 5.0, 15.0,
        52.0, 203.0, 877.0, 4140.0, 21147.0,
        115975.0, 678570.0, 4213597.0, 27644437.0, 190899322.0,
        1382958545.0, 10480142147.0, 82864869804.0, 682076806159.0, 5832742205057.0,
        51724158235372.0, 474869816156751.0, 4506715738447323.0, 44152005855084346.0,
        445958869294805289.0, 4638590332229999353.0, 49631246523618756274.0,
        545717047936059989389.0, 6160539404599934652455.0, 71339801938860275191172.0,
        846749014511809332450147.0};
    if (j < 0 || j > 30)
        throw CapabilityError("bell_number: only B_0..B_30 are tabulated (degree cap)");
    return kBell[static_cast<std::size_t>(j)];
}

enum class MeasureKind { Box, Simplex, Diamond, Discrete, Samples, Factorial, Product };

inline const char* measure_kind_name(MeasureKind k) {
    switch (k) {
        case MeasureKind::Box: return "box";
        case MeasureKind::Simplex: return "simplex";
        case MeasureKind::Diamond: return "diamond";
        case MeasureKind::Discrete: return "discrete";
        case MeasureKind::Samples: return "samples";
        case MeasureKind::Factorial: return "factorial";
        case MeasureKind::Product: return "product";
    }
    return "?";
}

/// Description of the quantifier measure nu with supp nu = Q, exposing the
/// moments  int y^alpha dnu.  All closed forms are normalized to mass 1;
/// the factorial measure optionally keeps its raw mass 1 - 1/e.
class MeasureSpec {
  public:
    static MeasureSpec box(std::vector<std::pair<double, double>> bounds) {
        MeasureSpec s;
        s.kind_ = MeasureKind::Box;
        s.ny_ = static_cast<int>(bounds.size());
        for (auto& [a, b] : bounds)
            if (!(a < b)) throw std::invalid_argument("box: need lower < upper");
        s.bounds_ = std::move(bounds);
        return s;
    }

    static MeasureSpec simplex(int m) {
        if (m < 1) throw std::invalid_argument("simplex: m >= 1");
        MeasureSpec s;
        s.kind_ = MeasureKind::Simplex;
        s.ny_ = m;
        return s;
    }

    /// Uniform measure on the cross-polytope {|y_1| + ... + |y_m| <= 1}.
    static MeasureSpec diamond(int m) {
        if (m < 1) throw std::invalid_argument("diamond: m >= 1");
        MeasureSpec s;
        s.kind_ = MeasureKind::Diamond;
        s.ny_ = m;
        return s;
    }

    static MeasureSpec discrete(std::vector<std::pair<Eigen::VectorXd, double>> atoms,
                                bool normalize = true) {
        if (atoms.empty()) throw std::invalid_argument("discrete: no atoms");
        MeasureSpec s;
        s.kind_ = MeasureKind::Discrete;
        s.ny_ = static_cast<int>(atoms.front().first.size());
        double mass = 0.0;
        for (auto& [pt, wgt] : atoms) {
            if (pt.size() != s.ny_) throw std::invalid_argument("discrete: point arity mismatch");
            if (!(wgt > 0)) throw std::invalid_argument("discrete: weights must be positive");
            mass += wgt;
        }
        if (normalize)
            for (auto& [pt, wgt] : atoms) wgt /= mass;
        s.atoms_ = std::move(atoms);
        return s;
    }

    static MeasureSpec samples(std::vector<Eigen::VectorXd> pts, int max_degree = 30) {
        if (pts.empty()) throw std::invalid_argument("samples: empty point list");
        MeasureSpec s;
        s.kind_ = MeasureKind::Samples;
        s.ny_ = static_cast<int>(pts.front().size());
        for (const auto& p : pts)
            if (p.size() != s.ny_) throw std::invalid_argument("samples: point arity mismatch");
        s.points_ = std::make_shared<std::vector<Eigen::VectorXd>>(std::move(pts));
        s.max_degree_ = max_degree;
        return s;
    }

    /// nu({k}) = 1/(e k!) on Q = {1, 2, ...}; moments are Bell numbers.
    /// Raw mass at degree 0 is 1 - 1/e; `normalized` divides that out.
    static MeasureSpec factorial(bool normalized = false) {
        MeasureSpec s;
        s.kind_ = MeasureKind::Factorial;
        s.ny_ = 1;
        s.normalized_ = normalized;
        s.max_degree_ = 30;
        return s;
    }

    static MeasureSpec product(std::vector<MeasureSpec> factors) {
        if (factors.empty()) throw std::invalid_argument("product: empty factor list");
        MeasureSpec s;
        s.kind_ = MeasureKind::Product;
        s.ny_ = 0;
        int cap = 1000;
        for (const auto& f : factors) {
            if (f.arity() != 1) throw std::invalid_argument("product: factors must be 1-D");
            s.ny_ += 1;
            cap = std::min(cap, f.max_degree());
        }
        s.factors_ = std::make_shared<std::vector<MeasureSpec>>(std::move(factors));
        s.max_degree_ = cap;
        return s;
    }

    MeasureKind kind() const { return kind_; }
    int arity() const { return ny_; }
    int max_degree() const { return max_degree_; }

    const std::vector<Eigen::VectorXd>& sample_points() const {
        if (kind_ != MeasureKind::Samples)
            throw std::invalid_argument("sample_points: not a sample-backed measure");
        return *points_;
    }

    const std::vector<std::pair<double, double>>& box_bounds() const { return bounds_; }

    double moment(const ExponentVector& alpha) const {
        if (alpha.arity() != ny_) throw std::invalid_argument("moment: alpha arity mismatch");
        if (alpha.degree() > max_degree_)
            throw CapabilityError("moment: degree " + std::to_string(alpha.degree()) +
                                  " above cap " + std::to_string(max_degree_) + " for " +
                                  measure_kind_name(kind_) + " measure");
        switch (kind_) {
            case MeasureKind::Box: {
                double r = 1.0;
                for (int i = 0; i < ny_; ++i) {
                    const auto& [a, b] = bounds_[static_cast<std::size_t>(i)];
                    const int p = alpha[i];
                    r *= (std::pow(b, p + 1) - std::pow(a, p + 1)) / ((p + 1) * (b - a));
                }
                return r;
            }
            case MeasureKind::Simplex:
                return simplex_moment(alpha);
            case MeasureKind::Diamond: {
                for (int i = 0; i < ny_; ++i)
                    if (alpha[i] % 2 != 0) return 0.0;
                return simplex_moment(alpha);
            }
            case MeasureKind::Discrete: {
                double r = 0.0;
                for (const auto& [pt, wgt] : atoms_) r += wgt * power(pt, alpha);
                return r;
            }
            case MeasureKind::Samples: {
                if (alpha.degree() == 0) return 1.0;
                double r = 0.0;
                for (const auto& pt : *points_) r += power(pt, alpha);
                return r / static_cast<double>(points_->size());
            }
            case MeasureKind::Factorial: {
                const int j = alpha[0];
                const double mass = 1.0 - 1.0 / std::exp(1.0);
                if (j == 0) return normalized_ ? 1.0 : mass;
                return normalized_ ? bell_number(j) / mass : bell_number(j);
            }
            case MeasureKind::Product: {
                double r = 1.0;
                for (int i = 0; i < ny_; ++i)
                    r *= (*factors_)[static_cast<std::size_t>(i)].moment(
                        ExponentVector::unit(1, 0, alpha[i]));
                return r;
            }
        }
        throw std::logic_error("moment: unreachable");
    }

    /// Mass-1 check value at alpha = 0 (1 - 1/e for the raw factorial form).
    double mass() const { return moment(ExponentVector::zero(ny_)); }

  private:
    // Normalized uniform measure on the standard simplex:
    //   m! * alpha_1! ... alpha_m! / (|alpha| + m)!
    // evaluated as exp(lgamma ...) to stay in range at high degree.
    double simplex_moment(const ExponentVector& alpha) const {
        double lg = std::lgamma(static_cast<double>(ny_) + 1.0);
        for (int i = 0; i < ny_; ++i) lg += std::lgamma(static_cast<double>(alpha[i]) + 1.0);
        lg -= std::lgamma(static_cast<double>(alpha.degree() + ny_) + 1.0);
        return std::exp(lg);
    }

    static double power(const Eigen::VectorXd& pt, const ExponentVector& alpha) {
        double t = 1.0;
        for (int i = 0; i < alpha.arity(); ++i)
            for (int p = 0; p < alpha[i]; ++p) t *= pt[i];
        return t;
    }

    MeasureKind kind_ = MeasureKind::Box;
    int ny_ = 0;
    int max_degree_ = 60;
    bool normalized_ = false;
    std::vector<std::pair<double, double>> bounds_;
    std::vector<std::pair<Eigen::VectorXd, double>> atoms_;
    std::shared_ptr<std::vector<Eigen::VectorXd>> points_;
    std::shared_ptr<std::vector<MeasureSpec>> factors_;
};

/// Moment values of one measure up to a degree, keyed by y-exponent.
struct MomentTable {
    int ny = 0;
    int max_degree = 0;
    std::map<ExponentVector, double, GrlexLess> values;

    double at(const ExponentVector& alpha) const {
        auto it = values.find(alpha);
        if (it == values.end()) throw CapabilityError("MomentTable: degree above table");
        return it->second;
    }
};

inline MomentTable build_moment_table(const MeasureSpec& spec, int degree) {
    MomentTable t;
    t.ny = spec.arity();
    t.max_degree = degree;
    for (const auto& a : monomials_up_to(spec.arity(), degree)) t.values[a] = spec.moment(a);
    return t;
}

/// Sample-average moment table; the alpha = 0 entry is exactly 1.
inline MomentTable sample_moment_table(const std::vector<Eigen::VectorXd>& points, int degree) {
    if (points.empty()) throw std::invalid_argument("sample_moment_table: empty point list");
    MomentTable t;
    t.ny = static_cast<int>(points.front().size());
    t.max_degree = degree;
    for (const auto& a : monomials_up_to(t.ny, degree)) {
        if (a.degree() == 0) {
            t.values[a] = 1.0;
            continue;
        }
        double acc = 0.0;
        for (const auto& p : points) {
            double v = 1.0;
            for (int i = 0; i < t.ny; ++i)
                for (int q = 0; q < a[i]; ++q) v *= p[i];
            acc += v;
        }
        t.values[a] = acc / static_cast<double>(points.size());
    }
    return t;
}

struct SpanCheck {
    bool ok = false;
    int achieved = 0;
    int reference = 0;
};

/// Rank of the matrix of lifted samples [u_i]_d against a reference
/// dimension (the sampling gate for moment substitution).
inline SpanCheck span_dimension_check(const std::vector<Eigen::VectorXd>& points, int d,
                                      int reference_dim, double tol = 1e-9) {
    SpanCheck out;
    out.reference = reference_dim;
    if (points.empty()) return out;
    const int m = static_cast<int>(points.front().size());
    const auto monos = monomials_up_to(m, d);
    Eigen::MatrixXd L(static_cast<Eigen::Index>(points.size()),
                      static_cast<Eigen::Index>(monos.size()));
    for (std::size_t r = 0; r < points.size(); ++r) {
        for (std::size_t c = 0; c < monos.size(); ++c) {
            double v = 1.0;
            for (int i = 0; i < m; ++i)
                for (int q = 0; q < monos[c][i]; ++q) v *= points[r][i];
            L(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
        }
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(L);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0 || sv(0) == 0.0) return out;
    int rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > tol * sv(0)) ++rank;
    out.achieved = rank;
    out.ok = (rank == reference_dim);
    return out;
}

/// Estimate dim P_d for a sampler by growing the cloud until the achieved
/// span dimension stabilizes.
inline int estimate_span_dimension(const std::function<Eigen::VectorXd(std::mt19937_64&)>& draw,
                                   int m, int d, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const int full = static_cast<int>(monomial_count(m, d));
    std::vector<Eigen::VectorXd> cloud;
    int prev = -1;
    for (int round = 0; round < 8; ++round) {
        const int target = std::max(2 * full, static_cast<int>(cloud.size()) * 2);
        while (static_cast<int>(cloud.size()) < target) cloud.push_back(draw(rng));
        const int dim = span_dimension_check(cloud, d, full).achieved;
        if (dim == full || dim == prev) return dim;
        prev = dim;
    }
    return prev;
}

// ---- samplers -------------------------------------------------------------

inline std::vector<Eigen::VectorXd> sample_box(
    const std::vector<std::pair<double, double>>& bounds, int count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<Eigen::VectorXd> pts;
    pts.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        Eigen::VectorXd p(static_cast<Eigen::Index>(bounds.size()));
        for (std::size_t j = 0; j < bounds.size(); ++j) {
            std::uniform_real_distribution<double> u(bounds[j].first, bounds[j].second);
            p(static_cast<Eigen::Index>(j)) = u(rng);
        }
        pts.push_back(std::move(p));
    }
    return pts;
}

/// Rejection sampler for a full-dimensional Q described by a membership
/// predicate inside an enclosing box.
inline std::vector<Eigen::VectorXd> rejection_sample(
    const std::vector<std::pair<double, double>>& bounds,
    const std::function<bool(const Eigen::VectorXd&)>& member, int count, std::uint64_t seed,
    int max_tries = 100000000) {
    std::mt19937_64 rng(seed);
    std::vector<Eigen::VectorXd> pts;
    pts.reserve(static_cast<std::size_t>(count));
    Eigen::VectorXd p(static_cast<Eigen::Index>(bounds.size()));
    for (int tries = 0; static_cast<int>(pts.size()) < count; ++tries) {
        if (tries > max_tries)
            throw std::runtime_error("rejection_sample: acceptance rate too low");
        for (std::size_t j = 0; j < bounds.size(); ++j) {
            std::uniform_real_distribution<double> u(bounds[j].first, bounds[j].second);
            p(static_cast<Eigen::Index>(j)) = u(rng);
        }
        if (member(p)) pts.push_back(p);
    }
    return pts;
}

/// Points on the quartic curve y1^4 + y2^4 = 1, parameterized by angle.
inline std::vector<Eigen::VectorXd> sample_quartic_curve(int count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 2.0 * M_PI);
    std::vector<Eigen::VectorXd> pts;
    pts.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        const double t = u(rng);
        const double c = std::cos(t), s = std::sin(t);
        Eigen::VectorXd p(2);
        p << std::copysign(std::sqrt(std::abs(c)), c), std::copysign(std::sqrt(std::abs(s)), s);
        pts.push_back(std::move(p));
    }
    return pts;
}

/// Points on the nonnegative part of the unit sphere in R^m.
inline std::vector<Eigen::VectorXd> sample_sphere_nonneg(int m, int count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<Eigen::VectorXd> pts;
    pts.reserve(static_cast<std::size_t>(count));
    while (static_cast<int>(pts.size()) < count) {
        Eigen::VectorXd p(m);
        for (int i = 0; i < m; ++i) p(i) = std::abs(gauss(rng));
        const double nrm = p.norm();
        if (nrm < 1e-12) continue;
        pts.push_back(p / nrm);
    }
    return pts;
}

}  // namespace momsip
