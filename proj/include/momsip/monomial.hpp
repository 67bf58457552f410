#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace momsip {

// Binomial coefficient as a 64-bit integer. Sizes used here stay far below
// overflow (moment vector lengths, basis sizes).
inline std::int64_t binomial(int n, int k) {
    if (k < 0 || n < 0 || k > n) return 0;
    if (k > n - k) k = n - k;
    std::int64_t r = 1;
    for (int i = 1; i <= k; ++i) {
        r = r * (n - k + i) / i;
    }
    return r;
}

// Number of monomials in n variables of degree <= d, i.e. |N^n_d|.
inline std::int64_t monomial_count(int n, int d) {
    if (d < 0) return 0;
    return binomial(n + d, d);
}

// Number of monomials in n variables of exact degree d.
inline std::int64_t monomial_count_exact(int n, int d) {
    if (d < 0) return 0;
    if (n == 0) return d == 0 ? 1 : 0;
    return binomial(n + d - 1, n - 1);
}

/// Exponent vector of a monomial in one variable block, with cached degree.
class ExponentVector {
  public:
    ExponentVector() = default;

    explicit ExponentVector(std::vector<int> e) : exps_(std::move(e)) {
        for (int v : exps_) {
            if (v < 0) throw std::invalid_argument("ExponentVector: negative exponent");
            degree_ += v;
        }
    }

    static ExponentVector zero(int arity) {
        return ExponentVector(std::vector<int>(static_cast<std::size_t>(arity), 0));
    }

    static ExponentVector unit(int arity, int i, int power = 1) {
        std::vector<int> e(static_cast<std::size_t>(arity), 0);
        e.at(static_cast<std::size_t>(i)) = power;
        return ExponentVector(std::move(e));
    }

    int arity() const { return static_cast<int>(exps_.size()); }
    int degree() const { return degree_; }
    int operator[](int i) const { return exps_[static_cast<std::size_t>(i)]; }
    const std::vector<int>& exponents() const { return exps_; }

    ExponentVector plus(const ExponentVector& o) const {
        if (o.arity() != arity()) throw std::invalid_argument("ExponentVector: arity mismatch");
        std::vector<int> e(exps_);
        for (std::size_t i = 0; i < e.size(); ++i) e[i] += o.exps_[i];
        return ExponentVector(std::move(e));
    }

    bool operator==(const ExponentVector& o) const { return exps_ == o.exps_; }
    bool operator!=(const ExponentVector& o) const { return !(*this == o); }

  private:
    std::vector<int> exps_;
    int degree_ = 0;
};

// Graded lexicographic order: lower total degree first; within a degree,
// x1-heavy monomials first (the listing 1, x1, ..., xn, x1^2, x1*x2, ...).
inline bool grlex_before(const ExponentVector& a, const ExponentVector& b) {
    if (a.degree() != b.degree()) return a.degree() < b.degree();
    for (int i = 0; i < a.arity(); ++i) {
        if (a[i] != b[i]) return a[i] > b[i];
    }
    return false;
}

struct GrlexLess {
    bool operator()(const ExponentVector& a, const ExponentVector& b) const {
        return grlex_before(a, b);
    }
};

// 0-based position of a monomial in the graded-lex listing [x]_d, for any
// d >= |alpha|. Bijective from N^n_d onto {0, ..., C(n+d,d)-1}.
inline std::int64_t mono_index(const ExponentVector& alpha, int arity) {
    if (alpha.arity() != arity) throw std::invalid_argument("mono_index: arity mismatch");
    const int n = arity;
    const int d = alpha.degree();
    std::int64_t idx = monomial_count(n, d - 1);
    int rem = d;
    for (int i = 0; i + 1 < n; ++i) {
        // monomials of the same total degree whose i-th exponent is larger
        // come earlier
        for (int t = rem; t > alpha[i]; --t) {
            idx += monomial_count_exact(n - i - 1, rem - t);
        }
        rem -= alpha[i];
    }
    return idx;
}

namespace detail {
inline void enumerate_exact(int n, int d, std::vector<int>& cur,
                            std::vector<ExponentVector>& out) {
    const int pos = static_cast<int>(cur.size());
    if (pos + 1 == n) {
        cur.push_back(d);
        out.emplace_back(cur);
        cur.pop_back();
        return;
    }
    if (n == 0) {
        if (d == 0) out.emplace_back(cur);
        return;
    }
    for (int t = d; t >= 0; --t) {
        cur.push_back(t);
        enumerate_exact(n, d - t, cur, out);
        cur.pop_back();
    }
}
}  // namespace detail

// All monomials of exact degree d in grlex order.
inline std::vector<ExponentVector> monomials_exact(int n, int d) {
    std::vector<ExponentVector> out;
    if (n == 0) {
        if (d == 0) out.push_back(ExponentVector());
        return out;
    }
    std::vector<int> cur;
    detail::enumerate_exact(n, d, cur, out);
    return out;
}

// All monomials of degree <= d in grlex order; out[mono_index(a,n)] == a.
inline std::vector<ExponentVector> monomials_up_to(int n, int d) {
    std::vector<ExponentVector> out;
    out.reserve(static_cast<std::size_t>(monomial_count(n, d)));
    for (int deg = 0; deg <= d; ++deg) {
        auto ex = monomials_exact(n, deg);
        out.insert(out.end(), ex.begin(), ex.end());
    }
    return out;
}

}  // namespace momsip
