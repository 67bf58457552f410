#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdlib>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "momsip/monomial.hpp"

namespace momsip {

// Coefficients smaller than this are dropped after arithmetic.
inline constexpr double kCoeffDropTol = 1e-14;

/// Sparse polynomial in two variable blocks x (arity nx) and y (arity ny).
/// Values are immutable in spirit: all operations return new polynomials.
class Polynomial {
  public:
    struct KeyLess {
        bool operator()(const std::pair<ExponentVector, ExponentVector>& a,
                        const std::pair<ExponentVector, ExponentVector>& b) const {
            if (a.first != b.first) return grlex_before(a.first, b.first);
            return grlex_before(a.second, b.second);
        }
    };
    using TermMap = std::map<std::pair<ExponentVector, ExponentVector>, double, KeyLess>;

    Polynomial() : nx_(0), ny_(0) {}
    Polynomial(int nx, int ny) : nx_(nx), ny_(ny) {}

    static Polynomial constant(int nx, int ny, double c) {
        Polynomial p(nx, ny);
        p.add_term(ExponentVector::zero(nx), ExponentVector::zero(ny), c);
        return p;
    }

    static Polynomial x_var(int nx, int ny, int i, int power = 1) {
        Polynomial p(nx, ny);
        p.add_term(ExponentVector::unit(nx, i, power), ExponentVector::zero(ny), 1.0);
        return p;
    }

    static Polynomial y_var(int nx, int ny, int j, int power = 1) {
        Polynomial p(nx, ny);
        p.add_term(ExponentVector::zero(nx), ExponentVector::unit(ny, j, power), 1.0);
        return p;
    }

    static Polynomial monomial(int nx, int ny, const ExponentVector& xe,
                               const ExponentVector& ye, double c) {
        Polynomial p(nx, ny);
        p.add_term(xe, ye, c);
        return p;
    }

    int nx() const { return nx_; }
    int ny() const { return ny_; }
    const TermMap& terms() const { return terms_; }
    bool is_zero() const { return terms_.empty(); }

    void add_term(const ExponentVector& xe, const ExponentVector& ye, double c) {
        if (xe.arity() != nx_ || ye.arity() != ny_)
            throw std::invalid_argument("Polynomial::add_term: arity mismatch");
        auto key = std::make_pair(xe, ye);
        double& v = terms_[key];
        v += c;
        if (std::abs(v) < kCoeffDropTol) terms_.erase(key);
    }

    double coefficient(const ExponentVector& xe, const ExponentVector& ye) const {
        auto it = terms_.find(std::make_pair(xe, ye));
        return it == terms_.end() ? 0.0 : it->second;
    }

    int deg_x() const {
        int d = 0;
        for (const auto& [k, c] : terms_) d = std::max(d, k.first.degree());
        return d;
    }

    int deg_y() const {
        int d = 0;
        for (const auto& [k, c] : terms_) d = std::max(d, k.second.degree());
        return d;
    }

    int degree() const {
        int d = 0;
        for (const auto& [k, c] : terms_) d = std::max(d, k.first.degree() + k.second.degree());
        return d;
    }

    bool depends_on_y() const {
        for (const auto& [k, c] : terms_)
            if (k.second.degree() > 0) return true;
        return false;
    }

    Polynomial operator+(const Polynomial& o) const {
        check_same_ring(o);
        Polynomial r(*this);
        for (const auto& [k, c] : o.terms_) r.add_term(k.first, k.second, c);
        return r;
    }

    Polynomial operator-(const Polynomial& o) const {
        check_same_ring(o);
        Polynomial r(*this);
        for (const auto& [k, c] : o.terms_) r.add_term(k.first, k.second, -c);
        return r;
    }

    Polynomial operator-() const { return *this * -1.0; }

    Polynomial operator*(double s) const {
        Polynomial r(nx_, ny_);
        for (const auto& [k, c] : terms_) {
            double v = c * s;
            if (std::abs(v) >= kCoeffDropTol) r.terms_[k] = v;
        }
        return r;
    }

    Polynomial operator*(const Polynomial& o) const {
        check_same_ring(o);
        Polynomial r(nx_, ny_);
        for (const auto& [ka, ca] : terms_) {
            for (const auto& [kb, cb] : o.terms_) {
                r.add_term(ka.first.plus(kb.first), ka.second.plus(kb.second), ca * cb);
            }
        }
        return r;
    }

    Polynomial pow(int e) const {
        if (e < 0) throw std::invalid_argument("Polynomial::pow: negative exponent");
        Polynomial r = constant(nx_, ny_, 1.0);
        for (int i = 0; i < e; ++i) r = r * (*this);
        return r;
    }

    double eval(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const {
        if (x.size() != nx_ || y.size() != ny_)
            throw std::invalid_argument("Polynomial::eval: point arity mismatch");
        double acc = 0.0;
        for (const auto& [k, c] : terms_) {
            double t = c;
            for (int i = 0; i < nx_; ++i)
                for (int p = 0; p < k.first[i]; ++p) t *= x[i];
            for (int j = 0; j < ny_; ++j)
                for (int p = 0; p < k.second[j]; ++p) t *= y[j];
            acc += t;
        }
        return acc;
    }

    double eval_x(const Eigen::VectorXd& x) const { return eval(x, Eigen::VectorXd(ny_)); }

    /// Substitute a concrete x point, leaving a polynomial in y alone.
    Polynomial substitute_x(const Eigen::VectorXd& x) const {
        if (x.size() != nx_) throw std::invalid_argument("substitute_x: arity mismatch");
        Polynomial r(0, ny_);
        for (const auto& [k, c] : terms_) {
            double t = c;
            for (int i = 0; i < nx_; ++i)
                for (int p = 0; p < k.first[i]; ++p) t *= x[i];
            r.add_term(ExponentVector(), k.second, t);
        }
        return r;
    }

    /// Drop the (empty) y block of an x-only polynomial, or re-embed into a
    /// ring with different arities. Nonzero exponents must fit.
    Polynomial reshaped(int nx, int ny) const {
        Polynomial r(nx, ny);
        for (const auto& [k, c] : terms_) {
            r.add_term(resize_exps(k.first, nx, "x"), resize_exps(k.second, ny, "y"), c);
        }
        return r;
    }

    double max_abs_coeff() const {
        double m = 0.0;
        for (const auto& [k, c] : terms_) m = std::max(m, std::abs(c));
        return m;
    }

    std::string to_string() const;

  private:
    void check_same_ring(const Polynomial& o) const {
        if (o.nx_ != nx_ || o.ny_ != ny_)
            throw std::invalid_argument("Polynomial: mixed rings");
    }

    static ExponentVector resize_exps(const ExponentVector& e, int arity, const char* which) {
        std::vector<int> v(static_cast<std::size_t>(arity), 0);
        for (int i = 0; i < e.arity(); ++i) {
            if (e[i] == 0) continue;
            if (i >= arity)
                throw std::invalid_argument(std::string("reshaped: ") + which +
                                            " exponent does not fit target arity");
            v[static_cast<std::size_t>(i)] = e[i];
        }
        return ExponentVector(std::move(v));
    }

    int nx_, ny_;
    TermMap terms_;
};

inline Polynomial operator*(double s, const Polynomial& p) { return p * s; }

/// Decomposition g = sum_i g_i(x) * h_i(y) where the h_i are pairwise
/// distinct monic y-monomials (grouping the terms of g by y-monomial).
struct SeparableForm {
    // (x-only polynomial, monic y-monomial) pairs
    std::vector<std::pair<Polynomial, Polynomial>> pairs;

    Polynomial reconstruct() const {
        if (pairs.empty()) return Polynomial(0, 0);
        const int nx = pairs.front().first.nx();
        const int ny = pairs.front().second.ny();
        Polynomial acc(nx, ny);
        for (const auto& [gx, hy] : pairs) acc = acc + gx.reshaped(nx, ny) * hy.reshaped(nx, ny);
        return acc;
    }
};

inline SeparableForm separable_decomposition(const Polynomial& g) {
    std::map<ExponentVector, Polynomial, GrlexLess> groups;
    for (const auto& [k, c] : g.terms()) {
        auto it = groups.find(k.second);
        if (it == groups.end()) it = groups.emplace(k.second, Polynomial(g.nx(), 0)).first;
        it->second.add_term(k.first, ExponentVector(), c);
    }
    SeparableForm out;
    for (const auto& [ye, gx] : groups) {
        out.pairs.emplace_back(gx, Polynomial::monomial(0, g.ny(), ExponentVector(), ye, 1.0));
    }
    return out;
}

/// The perturbation polynomial sum_{j<=n} sum_{k<=r} x_j^{2k} / k!.
inline Polynomial omega_r(int n, int r) {
    if (n < 1 || r < 0) throw std::invalid_argument("omega_r: need n >= 1, r >= 0");
    Polynomial p(n, 0);
    for (int j = 0; j < n; ++j) {
        double fact = 1.0;
        for (int k = 0; k <= r; ++k) {
            if (k > 0) fact *= k;
            p.add_term(ExponentVector::unit(n, j, 2 * k), ExponentVector(), 1.0 / fact);
        }
    }
    return p;
}

inline std::string Polynomial::to_string() const {
    if (terms_.empty()) return "0";
    std::ostringstream os;
    bool first = true;
    for (const auto& [k, c] : terms_) {
        double coef = c;
        if (first) {
            if (coef < 0) {
                os << "-";
                coef = -coef;
            }
        } else {
            os << (coef < 0 ? " - " : " + ");
            coef = std::abs(coef);
        }
        first = false;
        bool has_vars = k.first.degree() + k.second.degree() > 0;
        bool coef_one = std::abs(coef - 1.0) < 1e-15;
        std::vector<std::string> factors;
        if (!coef_one || !has_vars) {
            std::ostringstream cs;
            cs.precision(17);
            cs << coef;
            factors.push_back(cs.str());
        }
        auto emit = [&factors](const char* base, const ExponentVector& e) {
            for (int i = 0; i < e.arity(); ++i) {
                if (e[i] == 0) continue;
                std::ostringstream vs;
                vs << base << (i + 1);
                if (e[i] > 1) vs << "^" << e[i];
                factors.push_back(vs.str());
            }
        };
        emit("x", k.first);
        emit("y", k.second);
        for (std::size_t i = 0; i < factors.size(); ++i) {
            if (i) os << "*";
            os << factors[i];
        }
    }
    return os.str();
}

/// Error raised by the polynomial text parser, carrying a position.
class ParseError : public std::runtime_error {
  public:
    ParseError(const std::string& msg, std::size_t pos)
        : std::runtime_error(msg), position(pos) {}
    std::size_t position;
};

namespace detail {

class PolyParser {
  public:
    PolyParser(const std::string& s, int nx, int ny) : s_(s), nx_(nx), ny_(ny) {}

    Polynomial parse() {
        Polynomial p = parse_expr();
        skip_ws();
        if (pos_ != s_.size()) fail("unexpected trailing input");
        return p;
    }

  private:
    Polynomial parse_expr() {
        Polynomial acc(nx_, ny_);
        int sign = 1;
        skip_ws();
        if (peek() == '+' || peek() == '-') {
            sign = (get() == '-') ? -1 : 1;
        }
        acc = acc + parse_term() * static_cast<double>(sign);
        for (;;) {
            skip_ws();
            char c = peek();
            if (c == '+' || c == '-') {
                get();
                acc = acc + parse_term() * (c == '-' ? -1.0 : 1.0);
            } else {
                break;
            }
        }
        return acc;
    }

    Polynomial parse_term() {
        Polynomial acc = parse_factor();
        for (;;) {
            skip_ws();
            char c = peek();
            if (c == '*') {
                get();
                acc = acc * parse_factor();
            } else if (c == '/') {
                get();
                Polynomial d = parse_factor();
                if (d.terms().size() != 1 || d.deg_x() + d.deg_y() != 0)
                    fail("division only by a numeric constant");
                double v = d.terms().begin()->second;
                if (v == 0.0) fail("division by zero");
                acc = acc * (1.0 / v);
            } else if (c == 'x' || c == 'y' || std::isdigit(static_cast<unsigned char>(c)) ||
                       c == '.' || c == '(') {
                // implicit product, e.g. "2x1" or "3(...)"
                acc = acc * parse_factor();
            } else {
                break;
            }
        }
        return acc;
    }

    Polynomial parse_factor() {
        skip_ws();
        char c = peek();
        Polynomial base(nx_, ny_);
        if (c == '(') {
            get();
            base = parse_expr();
            skip_ws();
            if (peek() != ')') fail("expected ')'");
            get();
        } else if (c == 'x' || c == 'y') {
            get();
            int idx = parse_int("variable index");
            if (c == 'x') {
                if (idx < 1 || idx > nx_) fail("x index out of range");
                base = Polynomial::x_var(nx_, ny_, idx - 1);
            } else {
                if (idx < 1 || idx > ny_) fail("y index out of range");
                base = Polynomial::y_var(nx_, ny_, idx - 1);
            }
        } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            base = Polynomial::constant(nx_, ny_, parse_number());
        } else {
            fail("expected a term");
        }
        skip_ws();
        if (peek() == '^') {
            get();
            skip_ws();
            int e = parse_int("exponent");
            base = base.pow(e);
        }
        return base;
    }

    double parse_number() {
        skip_ws();
        std::size_t start = pos_;
        while (pos_ < s_.size() &&
               (std::isdigit(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.'))
            ++pos_;
        // exponent suffix like 1e-3
        if (pos_ < s_.size() && (s_[pos_] == 'e' || s_[pos_] == 'E')) {
            std::size_t epos = pos_ + 1;
            if (epos < s_.size() && (s_[epos] == '+' || s_[epos] == '-')) ++epos;
            if (epos < s_.size() && std::isdigit(static_cast<unsigned char>(s_[epos]))) {
                ++epos;
                while (epos < s_.size() && std::isdigit(static_cast<unsigned char>(s_[epos])))
                    ++epos;
                pos_ = epos;
            }
        }
        if (start == pos_) fail("expected a number");
        return std::strtod(s_.substr(start, pos_ - start).c_str(), nullptr);
    }

    int parse_int(const char* what) {
        skip_ws();
        std::size_t start = pos_;
        while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
        if (start == pos_) fail(std::string("expected ") + what);
        return std::atoi(s_.substr(start, pos_ - start).c_str());
    }

    void skip_ws() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }
    char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }
    char get() { return s_[pos_++]; }
    [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, pos_); }

    const std::string& s_;
    int nx_, ny_;
    std::size_t pos_ = 0;
};

}  // namespace detail

/// Parse text like "3.5*x1^2*y2 - x2 + 1" into a polynomial over
/// (x1..xnx, y1..yny). Whitespace-insensitive.
inline Polynomial parse_polynomial(const std::string& text, int nx, int ny) {
    return detail::PolyParser(text, nx, ny).parse();
}

}  // namespace momsip
