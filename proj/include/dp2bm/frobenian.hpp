#pragma once

#include <cmath>
#include <optional>
#include <sstream>
#include <vector>

#include "arith.hpp"

namespace dp2bm::frobenian {



// lambda ignores every prime below this
inline constexpr u64 kLambdaPrimeFloor = 98;
inline constexpr u64 kSieveCap = 100000000;

enum class Function { Alpha, Beta, Lambda };

inline const char* to_string(Function f) {
    switch (f) {
        case Function::Alpha: return "alpha";
        case Function::Beta: return "beta";
        default: return "lambda";
    }
}

inline void require_nonsquare(i64 x) {
    if (x == 0 || arith::is_square(x)) throw std::invalid_argument("x must be a nonzero non-square, got " + std::to_string(x));
}

inline bool square_at(i64 x, u64 p) { return dp2bm::is_padic_square(i128(x), Place::finite(p)); }

// raw p-adic conditions, so p | 2x is allowed
inline Rational alpha(u64 p, i64 x) {
    if (p % 4 != 3) return 0;
    return square_at(x, p) ? Rational(0) : Rational(1, 2);
}

inline Rational beta(u64 p, i64 x) { return square_at(x, p) ? Rational(1, 2) : Rational(0); }

inline std::vector<std::pair<u64, int>> factor_small(u64 n) {
    std::vector<std::pair<u64, int>> out;
    for (auto& pe : dp2bm::factorize(i128(n)).factors) out.emplace_back(u64(pe.prime), pe.exponent);
    return out;
}

inline bool squarefree(u64 n) {
    for (auto& [p, e] : factor_small(n))
        if (e > 1) return false;
    return true;
}

// multiplicative extension of a prime function; 0 off the squarefree integers
template <class F>
Rational extend(u64 n, F&& on_prime) {
    Rational r = 1;
    for (auto& [p, e] : factor_small(n)) {
        if (e > 1) return 0;
        r *= on_prime(p);
        if (r.numerator() == 0) return 0;
    }
    return r;
}

inline std::vector<u64> divisors(u64 n) {
    std::vector<u64> d{1};
    for (auto& [p, e] : factor_small(n)) {
        std::size_t k = d.size();
        u64 pk = 1;
        for (int i = 0; i < e; ++i) {
            pk *= p;
            for (std::size_t j = 0; j < k; ++j) d.push_back(d[j] * pk);
        }
    }
    return d;
}

inline int gamma_indicator(u64 w, i64 x, i64 y) {
    if (w == 0) throw std::invalid_argument("w must be positive");
    for (auto& [p, e] : factor_small(w))
        if (e > 1 || p % 4 != 3 || square_at(x, p) || square_at(y, p)) return 0;
    return 1;
}

inline int omega_indicator(u64 v, i64 x, i64 y) {
    if (v == 0) throw std::invalid_argument("v must be positive");
    for (auto& [p, e] : factor_small(v))
        if (e > 1 || !square_at(x, p) || !square_at(y, p)) return 0;
    return 1;
}

// mu(w)^2 sum_{hf=w} alpha(h;y) alpha(f;y) (-x/f)
inline Rational gamma_convolution(u64 w, i64 x, i64 y) {
    if (!squarefree(w)) return 0;
    Rational s = 0;
    for (u64 f : divisors(w)) {
        Rational t = extend(w / f, [&](u64 p) { return alpha(p, y); }) * extend(f, [&](u64 p) { return alpha(p, y); });
        if (t.numerator() != 0) s += t * dp2bm::kronecker(-i128(x), i128(f));
    }
    return s;
}

// mu(v)^2 sum_{de=v} beta(d;y) beta(e;y) (x/e)
inline Rational omega_convolution(u64 v, i64 x, i64 y) {
    if (!squarefree(v)) return 0;
    Rational s = 0;
    for (u64 e : divisors(v)) {
        Rational t = extend(v / e, [&](u64 p) { return beta(p, y); }) * extend(e, [&](u64 p) { return beta(p, y); });
        if (t.numerator() != 0) s += t * dp2bm::kronecker(i128(x), i128(e));
    }
    return s;
}

inline Rational lambda_at_prime(u64 p, i64 x) {
    if (p < kLambdaPrimeFloor || x % i64(p) == 0) return 0;
    return alpha(p, x) + beta(p, x);
}

inline Rational lambda(u64 t, i64 x) {
    if (t == 0) throw std::invalid_argument("t must be positive");
    return extend(t, [&](u64 p) { return lambda_at_prime(p, x); });
}

struct FrobenianSpec {
    Function fn;
    i64 x;
    Rational claimed_mean;
    std::vector<u64> excluded_primes;  // primes of 2x; for lambda also everything below 98

    static FrobenianSpec make(Function fn, i64 x) {
        require_nonsquare(x);
        FrobenianSpec s{fn, x, 0, {}};
        const bool minus_square = arith::is_square(-i128(x));
        switch (fn) {
            case Function::Alpha: s.claimed_mean = minus_square ? Rational(1, 4) : Rational(1, 8); break;
            case Function::Beta: s.claimed_mean = Rational(1, 4); break;
            case Function::Lambda: s.claimed_mean = minus_square ? Rational(1, 2) : Rational(3, 8); break;
        }
        std::vector<u64> ex{2};
        for (auto& pe : dp2bm::factorize(x).factors)
            if (pe.prime != 2) ex.push_back(u64(pe.prime));
        if (fn == Function::Lambda)
            for (u64 p = 3; p < kLambdaPrimeFloor; p += 2)
                if (arith::is_prime(p)) ex.push_back(p);
        std::sort(ex.begin(), ex.end());
        ex.erase(std::unique(ex.begin(), ex.end()), ex.end());
        s.excluded_primes = ex;
        return s;
    }
};

// smallest prime factor for every n <= N
inline std::vector<std::uint32_t> spf_table(u64 N) {
    if (N > kSieveCap) throw std::invalid_argument("sieve limit above " + std::to_string(kSieveCap));
    std::vector<std::uint32_t> spf(N + 1, 0);
    std::vector<std::uint32_t> primes;
    for (u64 i = 2; i <= N; ++i) {
        if (!spf[i]) {
            spf[i] = std::uint32_t(i);
            primes.push_back(std::uint32_t(i));
        }
        for (std::uint32_t p : primes) {
            if (p > spf[i] || i * p > N) break;
            spf[i * p] = p;
        }
    }
    return spf;
}

inline std::vector<std::uint32_t> primes_upto(u64 N) {
    std::vector<char> comp(N + 1, 0);
    std::vector<std::uint32_t> out;
    for (u64 i = 2; i <= N; ++i) {
        if (comp[i]) continue;
        out.push_back(std::uint32_t(i));
        for (u64 j = i * i; j <= N; j += i) comp[j] = 1;
    }
    return out;
}

struct MeanPoint {
    u64 X;
    Rational estimate;
};

// (sum over p <= X, p not dividing 2x, of fn(p;x)) / pi(X), at each X in the grid
inline std::vector<MeanPoint> mean_estimates(Function fn, i64 x, const std::vector<u64>& grid) {
    if (fn == Function::Lambda) throw std::invalid_argument("mean_estimate covers alpha and beta");
    require_nonsquare(x);
    if (grid.empty()) return {};
    auto primes = primes_upto(*std::max_element(grid.begin(), grid.end()));
    std::vector<MeanPoint> out;
    for (u64 X : grid) {
        i64 halves = 0, pi = 0;
        for (u64 p : primes) {
            if (p > X) break;
            ++pi;
            if (p == 2 || x % i64(p) == 0) continue;
            // p odd and coprime to x: both conditions read off the Legendre symbol
            bool sq = legendre(x, p) == 1;
            if (fn == Function::Alpha ? (p % 4 == 3 && !sq) : sq) ++halves;
        }
        out.push_back({X, Rational(halves, 2 * pi)});
    }
    return out;
}

inline Rational mean_estimate(Function fn, i64 x, u64 X) { return mean_estimates(fn, x, {X}).front().estimate; }

struct LambdaSum {
    u64 T = 0;
    double sum = 0;
    std::vector<std::pair<u64, double>> grid;  // (T', sum up to T')
    std::optional<double> M, K;                 // sum ~ K (log T)^M over the top two decades
    Rational claimed;
};

// ten points per decade, plus T itself
inline std::vector<u64> log_grid(u64 T) {
    std::vector<u64> g;
    for (int k = 0;; ++k) {
        u64 t = u64(std::llround(std::pow(10.0, k / 10.0)));
        if (t >= T) break;
        if (g.empty() || t > g.back()) g.push_back(t);
    }
    g.push_back(T);
    return g;
}

// least squares for log S = log K + M log log t over grid points with lo <= t <= hi; returns (M, K)
inline std::pair<double, double> fit_log_power(const std::vector<std::pair<u64, double>>& grid, u64 lo, u64 hi) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (auto& [t, v] : grid) {
        if (t < lo || t > hi || t < 3) continue;
        double X = std::log(std::log(double(t))), Y = std::log(v);
        sx += X, sy += Y, sxx += X * X, sxy += X * Y, ++n;
    }
    if (n < 2) throw std::invalid_argument("need two grid points to fit");
    double M = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    return {M, std::exp((sy - M * sx) / n)};
}

inline LambdaSum partial_sum_lambda(u64 T, i64 x) {
    if (T < 1) throw std::invalid_argument("T must be positive");
    auto spec = FrobenianSpec::make(Function::Lambda, x);
    LambdaSum out;
    out.T = T;
    out.claimed = spec.claimed_mean;
    auto spf = spf_table(T);
    // lambda(n) = 2^-k[n], or 0 when k[n] < 0
    std::vector<std::int8_t> k(T + 1, -1);
    k[1] = 0;
    auto grid = log_grid(T);
    std::size_t gi = 0;
    long double s = 0;
    for (u64 n = 1; n <= T; ++n) {
        if (n > 1) {
            u64 p = spf[n], m = n / p;
            if (m % p == 0 || k[m] < 0) {
                k[n] = -1;
            } else if (m == 1) {
                k[n] = lambda_at_prime(p, x).numerator() == 0 ? -1 : 1;  // lambda(p) is 0 or 1/2
            } else {
                k[n] = k[p] < 0 ? -1 : std::int8_t(k[m] + 1);
            }
        }
        if (k[n] >= 0) s += std::ldexp(1.0L, -k[n]) / (long double)n;
        if (gi < grid.size() && grid[gi] == n) out.grid.emplace_back(n, double(s)), ++gi;
    }
    out.sum = double(s);
    if (T >= 1000) {
        auto [M, K] = fit_log_power(out.grid, T / 100, T);
        out.M = M;
        out.K = K;
    }
    return out;
}

inline double to_double(const Rational& r) { return double(r.numerator()) / double(r.denominator()); }

inline const char* kCsvHeader = "X_or_T,estimate,claimed,abs_error";

inline std::string csv_row(u64 X, double estimate, const Rational& claimed) {
    std::ostringstream s;
    s.precision(10);
    s << X << ',' << estimate << ',' << claimed.numerator() << '/' << claimed.denominator() << ','
      << std::abs(estimate - to_double(claimed));
    return s.str();
}

}  // namespace dp2bm::frobenian
