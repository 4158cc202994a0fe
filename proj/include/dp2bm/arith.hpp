#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <mutex>
#include <numeric>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include <boost/rational.hpp>

#include "errors.hpp"

namespace dp2bm {

using i64 = std::int64_t;
using u64 = std::uint64_t;
using i128 = __int128;
using u128 = unsigned __int128;
using Rational = boost::rational<i64>;

namespace arith {

inline u128 uabs(i128 n) { return n < 0 ? u128(-(n + 1)) + 1 : u128(n); }

inline u64 mulmod(u64 a, u64 b, u64 m) { return u64(u128(a) * b % m); }

inline u64 powmod(u64 b, u64 e, u64 m) {
    u64 r = 1 % m;
    b %= m;
    while (e) {
        if (e & 1) r = mulmod(r, b, m);
        b = mulmod(b, b, m);
        e >>= 1;
    }
    return r;
}

// a*b mod m for m up to 2^127 by doubling
inline u128 mulmod128(u128 a, u128 b, u128 m) {
    if (m <= u128(UINT64_MAX)) return u128(u64(a % m)) * u64(b % m) % m;
    a %= m;
    b %= m;
    u128 r = 0;
    while (b) {
        if (b & 1) r = (r >= m - a) ? r - (m - a) : r + a;
        a = (a >= m - a) ? a - (m - a) : a + a;
        b >>= 1;
    }
    return r;
}

inline u128 powmod128(u128 b, u128 e, u128 m) {
    u128 r = 1 % m;
    b %= m;
    while (e) {
        if (e & 1) r = mulmod128(r, b, m);
        b = mulmod128(b, b, m);
        e >>= 1;
    }
    return r;
}

inline u128 gcd128(u128 a, u128 b) {
    while (b) {
        u128 t = a % b;
        a = b;
        b = t;
    }
    return a;
}

inline u64 isqrt(u128 n) {
    if (n == 0) return 0;
    u64 r = u64(__builtin_sqrtl((long double)n));
    while (u128(r) * r > n) --r;
    while (u128(r + 1) * (r + 1) <= n) ++r;
    return r;
}

inline bool is_square(i128 n) {
    if (n < 0) return false;
    // squares mod 64
    if (!((0x0202021202030213ULL >> (u64(n) & 63)) & 1)) return false;
    u64 r = isqrt(u128(n));
    return u128(r) * r == u128(n);
}

inline constexpr u64 kTrialBound = 1000000;

inline const std::vector<std::uint32_t>& small_primes() {
    static const std::vector<std::uint32_t> primes = [] {
        std::vector<char> comp(kTrialBound + 1, 0);
        std::vector<std::uint32_t> out;
        for (u64 i = 2; i <= kTrialBound; ++i) {
            if (comp[i]) continue;
            out.push_back(std::uint32_t(i));
            for (u64 j = i * i; j <= kTrialBound; j += i) comp[j] = 1;
        }
        return out;
    }();
    return primes;
}

inline bool is_prime(u128 n) {
    if (n < 2) return false;
    for (u64 p : {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37}) {
        if (n % p == 0) return n == p;
    }
    u128 d = n - 1;
    int s = 0;
    while ((d & 1) == 0) {
        d >>= 1;
        ++s;
    }
    // these bases are deterministic below 3.3e24; above that the test is probabilistic
    for (u64 a : {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41}) {
        if (a % n == 0) continue;
        u128 x = powmod128(a, d, n);
        if (x == 1 || x == n - 1) continue;
        bool composite = true;
        for (int r = 1; r < s; ++r) {
            x = mulmod128(x, x, n);
            if (x == n - 1) {
                composite = false;
                break;
            }
        }
        if (composite) return false;
    }
    return true;
}

// Brent's variant of Pollard rho; n odd composite
inline u128 pollard_brent(u128 n) {
    for (u128 c = 1;; ++c) {
        auto f = [&](u128 x) {
            u128 y = mulmod128(x, x, n) + c;
            return y >= n ? y - n : y;
        };
        u128 y = 2, x = 2, g = 1, q = 1, ys = 2;
        u64 r = 1;
        const u64 m = 128;
        do {
            x = y;
            for (u64 i = 0; i < r; ++i) y = f(y);
            u64 k = 0;
            do {
                ys = y;
                for (u64 i = 0; i < std::min(m, r - k); ++i) {
                    y = f(y);
                    q = mulmod128(q, x > y ? x - y : y - x, n);
                }
                g = gcd128(q, n);
                k += m;
            } while (k < r && g == 1);
            r <<= 1;
        } while (g == 1);
        if (g == n) {
            do {
                ys = f(ys);
                g = gcd128(x > ys ? x - ys : ys - x, n);
            } while (g == 1);
        }
        if (g != n) return g;
    }
}

}  // namespace arith

struct PrimePower {
    u128 prime;
    int exponent;
    friend bool operator==(const PrimePower&, const PrimePower&) = default;
};

struct Factorization {
    int sign = 1;
    std::vector<PrimePower> factors;

    i128 value() const {
        i128 v = sign;
        for (auto& f : factors)
            for (int e = 0; e < f.exponent; ++e) v *= i128(f.prime);
        return v;
    }
    int valuation(u64 p) const {
        for (auto& f : factors)
            if (f.prime == p) return f.exponent;
        return 0;
    }
    friend bool operator==(const Factorization&, const Factorization&) = default;
};

namespace arith {

inline void factor_into(u128 n, std::vector<u128>& out) {
    if (n == 1) return;
    if (n < u128(kTrialBound) * kTrialBound || is_prime(n)) {
        out.push_back(n);
        return;
    }
    u128 d = pollard_brent(n);
    factor_into(d, out);
    factor_into(n / d, out);
}

inline Factorization factorize_uncached(u128 m, int sign) {
    Factorization f;
    f.sign = sign;
    for (u64 p : small_primes()) {
        if (u128(p) * p > m) break;
        if (m % p) continue;
        int e = 0;
        while (m % p == 0) {
            m /= p;
            ++e;
        }
        f.factors.push_back({p, e});
    }
    if (m > 1) {
        std::vector<u128> rest;
        factor_into(m, rest);
        std::sort(rest.begin(), rest.end());
        for (u128 q : rest) {
            if (!f.factors.empty() && f.factors.back().prime == q)
                ++f.factors.back().exponent;
            else
                f.factors.push_back({q, 1});
        }
    }
    return f;
}

struct U128Hash {
    std::size_t operator()(u128 v) const noexcept {
        u64 lo = u64(v), hi = u64(v >> 64);
        return std::hash<u64>()(lo ^ (hi * 0x9e3779b97f4a7c15ULL));
    }
};

}  // namespace arith

// Process-wide memo of factorizations keyed by |n|.
class FactorCache {
public:
    static FactorCache& instance() {
        static FactorCache c;
        return c;
    }

    std::optional<std::vector<PrimePower>> find(u128 m) const {
        std::shared_lock lock(mu_);
        auto it = map_.find(m);
        if (it == map_.end()) return std::nullopt;
        return it->second;
    }

    void insert(u128 m, const std::vector<PrimePower>& f) {
        std::unique_lock lock(mu_);
        if (map_.size() < max_entries_) map_.emplace(m, f);
    }

    std::size_t size() const {
        std::shared_lock lock(mu_);
        return map_.size();
    }

    void set_max_entries(std::size_t n) {
        std::unique_lock lock(mu_);
        max_entries_ = n;
    }

    // Text format: one line per entry, "n p1 e1 p2 e2 ...", decimal u64 only.
    void save(const std::string& path) const {
        std::shared_lock lock(mu_);
        std::vector<u128> keys;
        for (auto& [k, v] : map_)
            if (k <= UINT64_MAX) keys.push_back(k);
        std::sort(keys.begin(), keys.end());
        std::ofstream out(path + ".tmp");
        for (u128 k : keys) {
            out << u64(k);
            for (auto& pp : map_.at(k)) out << ' ' << u64(pp.prime) << ' ' << pp.exponent;
            out << '\n';
        }
        out.close();
        std::rename((path + ".tmp").c_str(), path.c_str());
    }

    std::size_t load(const std::string& path) {
        std::ifstream in(path);
        std::size_t n = 0;
        std::string line;
        while (std::getline(in, line)) {
            std::vector<u64> nums;
            std::size_t pos = 0;
            while (pos < line.size()) {
                std::size_t used = 0;
                try {
                    nums.push_back(std::stoull(line.substr(pos), &used));
                } catch (...) {
                    nums.clear();
                    break;
                }
                pos += used;
            }
            if (nums.empty() || nums.size() % 2 == 0) continue;
            std::vector<PrimePower> f;
            u128 check = 1;
            for (std::size_t i = 1; i + 1 < nums.size(); i += 2) {
                f.push_back({nums[i], int(nums[i + 1])});
                for (u64 e = 0; e < nums[i + 1]; ++e) check *= nums[i];
            }
            if (check != nums[0]) continue;
            insert(nums[0], f);
            ++n;
        }
        return n;
    }

private:
    mutable std::shared_mutex mu_;
    std::unordered_map<u128, std::vector<PrimePower>, arith::U128Hash> map_;
    std::size_t max_entries_ = std::size_t(1) << 22;
};

inline constexpr u128 kFactorCap = u128(1) << 127;

inline Factorization factorize(i128 n, u128 cap = kFactorCap) {
    if (n == 0) throw ZeroInput();
    u128 m = arith::uabs(n);
    if (m > cap) throw FactorizationOverflow();
    int sign = n < 0 ? -1 : 1;
    auto& cache = FactorCache::instance();
    if (auto hit = cache.find(m)) return Factorization{sign, *hit};
    Factorization f = arith::factorize_uncached(m, sign);
    cache.insert(m, f.factors);
    return f;
}

// Kronecker symbol (a/n), Cohen's binary algorithm.
inline int kronecker(i128 a, i128 n) {
    static constexpr int tab2[8] = {0, 1, 0, -1, 0, -1, 0, 1};
    auto mod8 = [](i128 x) { return int(((x % 8) + 8) % 8); };
    if (n == 0) return (a == 1 || a == -1) ? 1 : 0;
    if ((a % 2 == 0) && (n % 2 == 0)) return 0;
    int v = 0;
    while (n % 2 == 0) {
        n /= 2;
        ++v;
    }
    int k = (v % 2 == 0) ? 1 : tab2[mod8(a)];
    if (n < 0) {
        n = -n;
        if (a < 0) k = -k;
    }
    while (true) {
        if (a == 0) return n > 1 ? 0 : k;
        v = 0;
        while (a % 2 == 0) {
            a /= 2;
            ++v;
        }
        if (v % 2) k *= tab2[mod8(n)];
        if ((mod8(a) & 2) && (mod8(n) & 2)) k = -k;
        i128 r = a < 0 ? -a : a;
        a = n % r;
        n = r;
    }
}

inline int legendre(i128 a, u64 p) { return kronecker(a, i128(p)); }

class Place {
public:
    static Place real() { return Place(0); }
    static Place finite(u64 p) {
        if (!arith::is_prime(p)) throw std::invalid_argument("place needs a prime, got " + std::to_string(p));
        return Place(p);
    }
    bool is_real() const { return p_ == 0; }
    u64 prime() const {
        if (p_ == 0) throw std::logic_error("real place has no prime");
        return p_;
    }
    std::string to_string() const { return p_ == 0 ? "inf" : std::to_string(p_); }
    // Real first, then primes ascending
    friend auto operator<=>(const Place&, const Place&) = default;

private:
    explicit Place(u64 p) : p_(p) {}
    u64 p_;
};

class InvariantValue {
public:
    constexpr InvariantValue() = default;
    static constexpr InvariantValue zero() { return InvariantValue(0); }
    static constexpr InvariantValue half() { return InvariantValue(1); }
    static constexpr InvariantValue from_halves(int h) { return InvariantValue(((h % 2) + 2) % 2); }
    int halves() const { return h_; }
    bool is_zero() const { return h_ == 0; }
    InvariantValue operator+(InvariantValue o) const { return InvariantValue(h_ ^ o.h_); }
    InvariantValue operator-(InvariantValue o) const { return InvariantValue(h_ ^ o.h_); }
    InvariantValue& operator+=(InvariantValue o) { return *this = *this + o; }
    std::string to_string() const { return h_ ? "1/2" : "0"; }
    friend bool operator==(InvariantValue, InvariantValue) = default;

private:
    constexpr explicit InvariantValue(int h) : h_(h) {}
    int h_ = 0;
};

inline InvariantValue invariant_from_symbol(int s) {
    if (s != 1 && s != -1) throw std::invalid_argument("symbol must be +1 or -1");
    return s == 1 ? InvariantValue::zero() : InvariantValue::half();
}

inline int valuation(i128 n, u64 p) {
    if (n == 0) throw ZeroInput();
    u128 m = arith::uabs(n);
    int v = 0;
    while (m % p == 0) {
        m /= p;
        ++v;
    }
    return v;
}

struct UnitPart {
    int valuation;
    Rational unit;
};

inline UnitPart padic_unit_part(const Rational& x, u64 p) {
    if (x.numerator() == 0) throw ZeroInput();
    i64 n = x.numerator(), d = x.denominator();
    int v = 0;
    while (n % i64(p) == 0) {
        n /= i64(p);
        ++v;
    }
    while (d % i64(p) == 0) {
        d /= i64(p);
        --v;
    }
    return {v, Rational(n, d)};
}

// Local class of a nonzero p-adic number: x = p^valuation * u with u a unit.
// unit is u mod p for odd p, u mod 16 at p = 2.
struct LocalClass {
    int valuation;
    u64 unit;
};

inline u64 class_modulus(u64 p) { return p == 2 ? 16 : p; }

inline u64 reduce_mod(i128 n, u64 m) {
    i128 r = n % i128(m);
    return u64(r < 0 ? r + m : r);
}

inline u64 inverse_mod(u64 a, u64 m) {
    i128 t = 0, nt = 1, r = m, nr = a % m;
    while (nr) {
        i128 q = r / nr;
        std::tie(t, nt) = std::make_pair(nt, t - q * nt);
        std::tie(r, nr) = std::make_pair(nr, r - q * nr);
    }
    if (r != 1) throw std::invalid_argument("not invertible");
    return u64(t < 0 ? t + m : t);
}

inline LocalClass local_class(i128 n, u64 p) {
    if (n == 0) throw ZeroInput();
    int v = 0;
    while (n % i128(p) == 0) {
        n /= i128(p);
        ++v;
    }
    return {v, reduce_mod(n, class_modulus(p))};
}

inline LocalClass local_class(const Rational& x, u64 p) {
    auto up = padic_unit_part(x, p);
    u64 m = class_modulus(p);
    u64 num = reduce_mod(up.unit.numerator(), m);
    u64 den = reduce_mod(up.unit.denominator(), m);
    return {up.valuation, arith::mulmod(num, inverse_mod(den, m), m)};
}

inline bool is_square_class(const LocalClass& c, u64 p) {
    if (c.valuation % 2 != 0) return false;
    if (p == 2) return c.unit % 8 == 1;
    return legendre(i128(c.unit), p) == 1;
}

inline bool is_fourth_power_class(const LocalClass& c, u64 p) {
    if (((c.valuation % 4) + 4) % 4 != 0) return false;
    if (p == 2) return c.unit % 16 == 1;
    u64 g = std::gcd(u64(4), p - 1);
    return arith::powmod(c.unit, (p - 1) / g, p) == 1;
}

inline bool is_padic_square(const Rational& x, const Place& pl) {
    if (x.numerator() == 0) throw ZeroInput();
    if (pl.is_real()) return x.numerator() > 0;
    return is_square_class(local_class(x, pl.prime()), pl.prime());
}

inline bool is_padic_square(i128 x, const Place& pl) {
    if (x == 0) throw ZeroInput();
    if (pl.is_real()) return x > 0;
    return is_square_class(local_class(x, pl.prime()), pl.prime());
}

inline bool is_padic_fourth_power(const Rational& x, const Place& pl) {
    if (x.numerator() == 0) throw ZeroInput();
    if (pl.is_real()) return x.numerator() > 0;
    return is_fourth_power_class(local_class(x, pl.prime()), pl.prime());
}

inline bool is_padic_fourth_power(i128 x, const Place& pl) {
    if (x == 0) throw ZeroInput();
    if (pl.is_real()) return x > 0;
    return is_fourth_power_class(local_class(x, pl.prime()), pl.prime());
}

// Hilbert symbol from local classes at a finite prime.
inline int hilbert_symbol(const LocalClass& a, const LocalClass& b, u64 p) {
    int al = ((a.valuation % 2) + 2) % 2, be = ((b.valuation % 2) + 2) % 2;
    if (p != 2) {
        int s = 1;
        if (al && be && (p % 4 == 3)) s = -s;
        if (be) s *= legendre(i128(a.unit), p);
        if (al) s *= legendre(i128(b.unit), p);
        return s;
    }
    u64 u = a.unit % 8, v = b.unit % 8;
    int eu = int(((u - 1) / 2) % 2), ev = int(((v - 1) / 2) % 2);
    int wu = int(((u * u - 1) / 8) % 2), wv = int(((v * v - 1) / 8) % 2);
    int e = eu * ev + al * wv + be * wu;
    return (e % 2) ? -1 : 1;
}

inline int hilbert_symbol(const Rational& a, const Rational& b, const Place& pl) {
    if (a.numerator() == 0 || b.numerator() == 0) throw ZeroInput();
    if (pl.is_real()) return (a.numerator() < 0 && b.numerator() < 0) ? -1 : 1;
    u64 p = pl.prime();
    return hilbert_symbol(local_class(a, p), local_class(b, p), p);
}

inline int hilbert_symbol(i128 a, i128 b, const Place& pl) {
    if (a == 0 || b == 0) throw ZeroInput();
    if (pl.is_real()) return (a < 0 && b < 0) ? -1 : 1;
    u64 p = pl.prime();
    return hilbert_symbol(local_class(a, p), local_class(b, p), p);
}

enum class ThetaClass { PlusSquare, MinusSquare, NonSquare };

inline const char* to_string(ThetaClass c) {
    switch (c) {
        case ThetaClass::PlusSquare: return "PlusSquare";
        case ThetaClass::MinusSquare: return "MinusSquare";
        default: return "NonSquare";
    }
}

inline ThetaClass square_class(i128 theta) {
    if (theta == 0) throw ZeroInput();
    if (!arith::is_square(theta < 0 ? -theta : theta)) return ThetaClass::NonSquare;
    return theta > 0 ? ThetaClass::PlusSquare : ThetaClass::MinusSquare;
}

// signed squarefree kernel: n = sqfree * m^2
inline i64 squarefree_part(i64 n) {
    Factorization f = factorize(n);
    i64 s = f.sign;
    for (auto& pp : f.factors)
        if (pp.exponent % 2) s *= i64(pp.prime);
    return s;
}

}  // namespace dp2bm
