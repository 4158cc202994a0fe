#pragma once

#include <atomic>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <variant>

#include "arith.hpp"

namespace dp2bm {

// a0 x0^4 + a1 x1^4 + a2 x2^4 = w^2
struct CoefficientTriple {
    std::array<i64, 3> a{};
    i64 theta = 0;
    ThetaClass theta_class = ThetaClass::NonSquare;
    Factorization factored_theta;

    static CoefficientTriple make(i64 a0, i64 a1, i64 a2) {
        if (a0 == 0 || a1 == 0 || a2 == 0) throw ZeroInput();
        i128 t = -i128(a0) * a1 * a2;
        if (t > INT64_MAX || t < -INT64_MAX) throw std::out_of_range("theta does not fit in 64 bits");
        CoefficientTriple c;
        c.a = {a0, a1, a2};
        c.theta = i64(t);
        c.theta_class = square_class(t);
        std::map<u128, int> merged;
        for (i64 ai : c.a)
            for (auto& pp : factorize(ai).factors) merged[pp.prime] += pp.exponent;
        c.factored_theta.sign = t < 0 ? -1 : 1;
        for (auto& [p, e] : merged) c.factored_theta.factors.push_back({p, e});
        return c;
    }
    static CoefficientTriple make(const std::array<i64, 3>& a) { return make(a[0], a[1], a[2]); }

    std::vector<u64> primes_of_theta() const {
        std::vector<u64> out;
        for (auto& pp : factored_theta.factors) out.push_back(u64(pp.prime));
        return out;
    }
    std::array<int, 3> valuations(u64 p) const {
        return {valuation(a[0], p), valuation(a[1], p), valuation(a[2], p)};
    }
};

// Residues mod p^k; w is only known mod p^w_precision.
struct PadicPoint {
    u64 p = 0;
    int k = 0;
    std::array<u64, 3> x{};
    u64 w = 0;
    int w_precision = 0;
    int unit_index = 0;
    bool smooth = false;
};

// w^2 is exact; w itself is exact when w_squared is a perfect square.
struct RealPoint {
    std::array<i64, 3> x{};
    i128 w_squared = 0;
    int w_sign = 1;
    std::optional<i64> w_exact;
};

using LocalPoint = std::variant<PadicPoint, RealPoint>;

inline Place place_of(const LocalPoint& q) {
    if (auto* pp = std::get_if<PadicPoint>(&q)) return Place::finite(pp->p);
    return Place::real();
}

namespace local {

inline constexpr u64 kSearchPrimeBound = 33;
inline constexpr int kDefaultPrecisionCap = 64;

// largest k with p^k < 2^62, so sums of two residues and 128-bit products stay exact
inline int representable_precision(u64 p) {
    int k = 0;
    u128 v = 1;
    while (v * p < (u128(1) << 62)) {
        v *= p;
        ++k;
    }
    return k;
}

namespace detail {

struct Ring {
    u64 p = 0;
    int cap = 0;
    std::vector<u64> pw;

    Ring(u64 prime, int requested_cap) : p(prime) {
        cap = std::min(requested_cap, representable_precision(prime));
        pw.resize(cap + 2);
        pw[0] = 1;
        for (int i = 1; i <= cap + 1; ++i) pw[i] = u64(u128(pw[i - 1]) * p);
    }
    u64 mod(i128 x, int k) const { return reduce_mod(x, pw[k]); }
    int val(u64 r, int k) const {
        if (r == 0) return k;
        int v = 0;
        while (v < k && r % p == 0) {
            r /= p;
            ++v;
        }
        return v;
    }
};

inline u64 sqrt_mod_p(u64 u, u64 p) {
    u %= p;
    if (u == 0) return 0;
    if (p % 4 == 3) return arith::powmod(u, (p + 1) / 4, p);
    u64 q = p - 1;
    int s = 0;
    while (q % 2 == 0) {
        q /= 2;
        ++s;
    }
    u64 z = 2;
    while (arith::powmod(z, (p - 1) / 2, p) != p - 1) ++z;
    u64 m = s, c = arith::powmod(z, q, p), t = arith::powmod(u, q, p), r = arith::powmod(u, (q + 1) / 2, p);
    while (t != 1) {
        u64 i = 0, tt = t;
        while (tt != 1) {
            tt = arith::mulmod(tt, tt, p);
            ++i;
        }
        u64 b = c;
        for (u64 j = 0; j + 1 < m - i; ++j) b = arith::mulmod(b, b, p);
        m = i;
        c = arith::mulmod(b, b, p);
        t = arith::mulmod(t, c, p);
        r = arith::mulmod(r, b, p);
    }
    return r;
}

// s with s^2 = u mod p^m; u a square unit. At p = 2 (u = 1 mod 8) s is right mod 2^(m-1).
inline u64 sqrt_mod_pk(u64 u, const Ring& R, int m) {
    const u64 p = R.p;
    const u64 M = R.pw[m];
    if (p == 2) {
        u64 s = 1;
        for (int i = 3; i < m; ++i) {
            u64 mi = R.pw[i + 1];
            if (u64(u128(s) * s % mi) != u % mi) s += R.pw[i - 1];
        }
        return s % M;
    }
    u64 s = sqrt_mod_p(u % p, p);
    int e = 1;
    while (e < m) {
        e = std::min(2 * e, m);
        u64 Me = R.pw[e];
        u64 s2 = arith::mulmod(s, s, Me);
        u64 diff = (s2 + Me - u % Me) % Me;
        u64 inv2s = inverse_mod(arith::mulmod(2, s, Me), Me);
        s = (s + Me - arith::mulmod(diff, inv2s, Me)) % Me;
    }
    return s;
}

// A cell fixes x_chart = 1 and each free coordinate j modulo p^k[j]
// (k = 0: unconstrained). Free coordinates with index below chart are divisible by p.
struct Cell {
    std::uint8_t chart;
    std::array<std::uint8_t, 2> k;
    std::array<u64, 2> r;
};

inline constexpr int kFree[3][2] = {{1, 2}, {0, 2}, {0, 1}};
inline constexpr int kInf = 1 << 20;

struct CellEval {
    enum Kind { Empty, Regular, NearZero, NeedsPrecision, Exhausted } kind = Empty;
    int B = 0;         // F is known mod p^B on the cell
    int v = 0;         // valuation of F (B when NearZero)
    u64 w = 0;         // Regular: a square root of F mod p^w_prec
    int w_prec = 0;
    std::array<u64, 3> x{};
    std::array<int, 2> bound{};  // per free coordinate contribution to B
};

inline int nu_small(u64 n, u64 p) {
    int v = 0;
    while (n % p == 0) {
        n /= p;
        ++v;
    }
    return v;
}

class Surface {
public:
    Surface(const std::array<i64, 3>& a, u64 p, int cap) : a_(a), R(p, cap) {
        for (int i = 0; i < 3; ++i) nu_a_[i] = valuation(a[i], p);
        nu2_ = nu_small(2, p);
        nu4_ = nu_small(4, p);
        nu6_ = nu_small(6, p);
    }

    const Ring& ring() const { return R; }
    u64 p() const { return R.p; }
    int cap() const { return R.cap; }

    std::vector<Cell> roots() const {
        std::vector<Cell> out;
        for (int c = 0; c < 3; ++c) {
            Cell cell{std::uint8_t(c), {0, 0}, {0, 0}};
            for (int s = 0; s < 2; ++s)
                if (kFree[c][s] < c) cell.k[s] = 1;
            out.push_back(cell);
        }
        return out;
    }

    template <class F>
    void split(const Cell& c, int s, F&& f) const {
        const u64 step = R.pw[c.k[s]];
        for (u64 d = 0; d < R.p; ++d) {
            Cell ch = c;
            ch.k[s] = std::uint8_t(c.k[s] + 1);
            ch.r[s] = c.r[s] + d * step;
            f(ch);
        }
    }

    // lower bound for nu(x^e - r^e) + nu(coef) over x = r mod p^k
    int power_bound(u64 r, int k, int nu_coef, int e) const {
        if (nu_coef >= kInf) return kInf;
        if (k == 0) return nu_coef;
        if (r == 0) return nu_coef + e * k;
        int vr = R.val(r, k);
        if (e == 2) return nu_coef + std::min(nu2_ + vr + k, 2 * k);
        return nu_coef + std::min({nu4_ + 3 * vr + k, nu6_ + 2 * vr + 2 * k, nu4_ + vr + 3 * k, 4 * k});
    }

    // free slot that limits the F bound, or -1 if nothing can be refined
    int limiting_slot(const Cell& c, const CellEval& e) const {
        int best = -1;
        for (int s = 0; s < 2; ++s) {
            if (c.k[s] >= R.cap) continue;
            if (best < 0 || e.bound[s] < e.bound[best]) best = s;
        }
        return best;
    }

    CellEval eval(const Cell& c) const {
        CellEval e;
        int B = kInf;
        for (int s = 0; s < 2; ++s) {
            int j = kFree[c.chart][s];
            e.bound[s] = power_bound(c.r[s], c.k[s], nu_a_[j], 4);
            B = std::min(B, e.bound[s]);
        }
        const int Bc = std::min(B, R.cap);
        e.B = Bc;
        const u64 m = R.pw[Bc];
        e.x[c.chart] = 1 % m;
        e.x[kFree[c.chart][0]] = c.r[0] % m;
        e.x[kFree[c.chart][1]] = c.r[1] % m;
        if (Bc == 0) {
            e.kind = CellEval::NeedsPrecision;
            return e;
        }
        u64 F = 0;
        for (int i = 0; i < 3; ++i) {
            u64 x2 = arith::mulmod(e.x[i], e.x[i], m);
            u64 x4 = arith::mulmod(x2, x2, m);
            F = (F + arith::mulmod(R.mod(a_[i], Bc), x4, m)) % m;
        }
        if (F == 0) {
            e.kind = CellEval::NearZero;
            e.v = Bc;
            return e;
        }
        int v = R.val(F, Bc);
        e.v = v;
        if (v % 2) return e;
        const int rest = Bc - v;
        if (rest < (R.p == 2 ? 3 : 1)) {
            e.kind = CellEval::NeedsPrecision;
            return e;
        }
        u64 u = F / R.pw[v];
        bool sq = R.p == 2 ? (u % 8 == 1) : legendre(i128(u % R.p), R.p) == 1;
        if (!sq) return e;
        u64 s = sqrt_mod_pk(u, R, rest);
        e.kind = CellEval::Regular;
        e.w_prec = Bc - v / 2 - (R.p == 2 ? 1 : 0);
        e.w = arith::mulmod(R.pw[v / 2], s, m) % R.pw[e.w_prec];
        return e;
    }

private:
    std::array<i64, 3> a_;
    std::array<int, 3> nu_a_{};
    int nu2_ = 0, nu4_ = 0, nu6_ = 0;
    Ring R;
};
// Remove fourth powers of p from each coefficient, then a common p^2 (w -> w/p).
inline std::array<i64, 3> reduce_at(std::array<i64, 3> a, u64 p) {
    const i128 p2 = i128(p) * i128(p);
    const i128 p4 = p2 * p2;
    for (auto& ai : a)
        while (ai % p4 == 0) ai = i64(ai / p4);
    if (a[0] % p2 == 0 && a[1] % p2 == 0 && a[2] % p2 == 0)
        for (auto& ai : a) ai = i64(ai / p2);
    return a;
}

inline u64 primitive_root(u64 p) {
    if (p == 2) return 1;
    std::vector<u64> qs;
    u64 n = p - 1;
    for (u64 q = 2; q * q <= n; ++q)
        if (n % q == 0) {
            qs.push_back(q);
            while (n % q == 0) n /= q;
        }
    if (n > 1) qs.push_back(n);
    for (u64 g = 2;; ++g) {
        bool ok = true;
        for (u64 q : qs)
            if (arith::powmod(g, (p - 1) / q, p) == 1) ok = false;
        if (ok) return g;
    }
}

}  // namespace detail

inline constexpr std::size_t kCellBudget = 20000000;

inline bool is_locally_soluble_search(const std::array<i64, 3>& coeffs, u64 p, int k_max = kDefaultPrecisionCap) {
    auto a = detail::reduce_at(coeffs, p);
    detail::Surface S(a, p, k_max);
    std::vector<detail::Cell> cur = S.roots(), next;
    std::size_t seen = 0;
    while (!cur.empty()) {
        next.clear();
        for (auto& c : cur) {
            auto e = S.eval(c);
            if (e.kind == detail::CellEval::Regular) return true;
            if (e.kind == detail::CellEval::Empty) continue;
            int slot = S.limiting_slot(c, e);
            if (slot < 0 || ++seen > kCellBudget) throw PrecisionExhausted(S.cap());
            S.split(c, slot, [&](const detail::Cell& ch) { next.push_back(ch); });
        }
        cur.swap(next);
    }
    return false;
}

inline bool is_locally_soluble_search(const CoefficientTriple& a, u64 p, int k_max = kDefaultPrecisionCap) {
    return is_locally_soluble_search(a.a, p, k_max);
}

inline bool is_locally_soluble_generic(const std::array<i64, 3>& a, u64 p) {
    if (p <= kSearchPrimeBound) throw PrimeTooSmall();
    const Place P = Place::finite(p);
    for (i64 ai : a)
        if (is_padic_square(i128(ai), P)) return true;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            if (i != j && is_padic_fourth_power(Rational(-a[i], a[j]), P)) return true;
    std::array<int, 3> v{valuation(a[0], p) % 4, valuation(a[1], p) % 4, valuation(a[2], p) % 4};
    for (int i = 0; i < 3; ++i)
        for (int j = i + 1; j < 3; ++j)
            if (v[i] == v[j] && (v[i] == 0 || v[i] == 2)) return true;
    return v[0] == v[1] && v[1] == v[2];
}

inline bool is_locally_soluble_generic(const CoefficientTriple& a, u64 p) {
    return is_locally_soluble_generic(a.a, p);
}

inline bool is_really_soluble(const std::array<i64, 3>& a) {
    return std::max({a[0], a[1], a[2]}) > 0;
}
inline bool is_really_soluble(const CoefficientTriple& a) { return is_really_soluble(a.a); }

// Solubility at p <= 33 depends only on each a_i modulo fourth powers; verdicts are
// memoised per class triple.
class SmallPrimeSolubility {
public:
    static SmallPrimeSolubility& instance() {
        static SmallPrimeSolubility s;
        return s;
    }

    static const std::vector<u64>& primes() {
        static const std::vector<u64> ps{2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31};
        return ps;
    }

    int class_count(u64 p) const { return table(p).classes; }

    int class_id(i64 a, u64 p) const {
        const auto& t = table(p);
        auto lc = local_class(i128(a), p);
        int v4 = lc.valuation % 4;
        if (p == 2) return v4 * 8 + int((lc.unit % 16) / 2);
        u64 e = arith::powmod(lc.unit, (p - 1) / t.g, p);
        int idx = 0;
        for (u64 z = 1; z != e; z = arith::mulmod(z, t.zeta, p)) ++idx;
        return v4 * int(t.g) + idx;
    }

    bool soluble(int c0, int c1, int c2, u64 p) {
        auto& t = table(p);
        std::array<int, 3> c{c0, c1, c2};
        std::sort(c.begin(), c.end());
        std::size_t key = (std::size_t(c[0]) * t.classes + c[1]) * t.classes + c[2];
        int8_t hit = t.memo[key].load(std::memory_order_relaxed);
        if (hit >= 0) return hit == 1;
        bool r = is_locally_soluble_search(std::array<i64, 3>{t.rep[c[0]], t.rep[c[1]], t.rep[c[2]]}, p);
        t.memo[key].store(r ? 1 : 0, std::memory_order_relaxed);
        return r;
    }

    bool soluble(const std::array<i64, 3>& a, u64 p) {
        return soluble(class_id(a[0], p), class_id(a[1], p), class_id(a[2], p), p);
    }

private:
    struct Table {
        u64 g = 0, zeta = 1;
        int classes = 0;
        std::vector<i64> rep;
        std::unique_ptr<std::atomic<int8_t>[]> memo;
    };

    SmallPrimeSolubility() {
        for (u64 p : primes()) {
            auto& t = tables_[p];
            if (p == 2) {
                t.classes = 32;
                for (int v = 0; v < 4; ++v)
                    for (int u = 1; u < 16; u += 2) t.rep.push_back((i64(1) << v) * u);
            } else {
                t.g = std::gcd(u64(4), p - 1);
                u64 r = detail::primitive_root(p);
                t.zeta = arith::powmod(r, (p - 1) / t.g, p);
                t.classes = int(4 * t.g);
                for (int v = 0; v < 4; ++v) {
                    i64 pv = 1;
                    for (int i = 0; i < v; ++i) pv *= i64(p);
                    for (u64 idx = 0; idx < t.g; ++idx) t.rep.push_back(pv * i64(arith::powmod(r, idx, p)));
                }
            }
            std::size_t n = std::size_t(t.classes) * t.classes * t.classes;
            t.memo = std::make_unique<std::atomic<int8_t>[]>(n);
            for (std::size_t i = 0; i < n; ++i) t.memo[i].store(-1);
        }
    }

    Table& table(u64 p) { return tables_.at(p); }
    const Table& table(u64 p) const { return tables_.at(p); }

    std::map<u64, Table> tables_;
};

inline bool is_locally_soluble(const CoefficientTriple& a, u64 p) {
    if (p <= kSearchPrimeBound) return SmallPrimeSolubility::instance().soluble(a.a, p);
    if (a.factored_theta.valuation(p) == 0) return true;
    return is_locally_soluble_generic(a, p);
}

inline bool is_everywhere_locally_soluble(const CoefficientTriple& a) {
    if (!is_really_soluble(a)) return false;
    auto& small = SmallPrimeSolubility::instance();
    for (u64 p : SmallPrimeSolubility::primes())
        if (!small.soluble(a.a, p)) return false;
    for (auto& pp : a.factored_theta.factors) {
        u64 p = u64(pp.prime);
        if (p > kSearchPrimeBound && !is_locally_soluble_generic(a, p)) return false;
    }
    return true;
}

// Up to n smooth classes mod p^k (both signs of w), in depth-first residue order.
inline std::vector<LocalPoint> sample_padic_points(const CoefficientTriple& a, u64 p, int k, std::size_t n) {
    detail::Surface S(a.a, p, kDefaultPrecisionCap);
    if (k < 1 || k > S.cap()) throw std::invalid_argument("precision out of range");
    std::vector<LocalPoint> out;
    std::function<void(const detail::Cell&)> walk = [&](const detail::Cell& c) {
        if (out.size() >= n) return;
        auto e = S.eval(c);
        if (e.kind == detail::CellEval::Empty) return;
        for (int s = 0; s < 2; ++s)
            if (c.k[s] < k) {
                S.split(c, s, walk);
                return;
            }
        // the Hensel witness 2w must have valuation below k/2
        if (e.kind != detail::CellEval::Regular || e.v + (p == 2 ? 2 : 0) >= k) return;
        const int wp = std::min(e.w_prec, k);
        const u64 wm = S.ring().pw[wp], m = S.ring().pw[k];
        std::array<u64, 3> x{};
        for (int i = 0; i < 3; ++i) x[i] = e.x[i] % m;
        const u64 w0 = e.w % wm, w1 = (wm - w0) % wm;
        for (u64 w : {w0, w1}) {
            if (out.size() >= n || (w == w1 && w1 == w0)) break;
            out.push_back(PadicPoint{p, k, x, w, wp, c.chart, true});
        }
    };
    for (auto& c : S.roots()) walk(c);
    if (out.empty()) throw NoSmoothPoints();
    return out;
}

// Real points on an integer grid, ordered by height, one representative per +-x.
inline std::vector<LocalPoint> sample_real_points(const CoefficientTriple& a, int grid, std::size_t n) {
    if (!is_really_soluble(a)) throw NoSmoothPoints();
    std::vector<LocalPoint> out;
    for (int h = 1; h <= grid && out.size() < n; ++h) {
        for (int x0 = -h; x0 <= h; ++x0)
            for (int x1 = -h; x1 <= h; ++x1)
                for (int x2 = -h; x2 <= h; ++x2) {
                    if (std::max({std::abs(x0), std::abs(x1), std::abs(x2)}) != h) continue;
                    int first = x0 ? x0 : (x1 ? x1 : x2);
                    if (first < 0) continue;
                    if (std::gcd(std::gcd(x0, x1), x2) != 1) continue;
                    i128 F = i128(a.a[0]) * x0 * x0 * x0 * x0 + i128(a.a[1]) * x1 * x1 * x1 * x1 +
                             i128(a.a[2]) * x2 * x2 * x2 * x2;
                    if (F < 0) continue;
                    std::optional<i64> we;
                    if (arith::is_square(F)) we = i64(arith::isqrt(u128(F)));
                    for (int s : {1, -1}) {
                        if (out.size() >= n) break;
                        if (F == 0 && s < 0) continue;
                        out.push_back(RealPoint{{x0, x1, x2}, F, s, we ? std::optional<i64>(s * *we) : std::nullopt});
                    }
                }
    }
    if (out.empty()) throw NoSmoothPoints();
    return out;
}

inline std::vector<LocalPoint> sample_local_points(const CoefficientTriple& a, const Place& pl, int k, std::size_t n) {
    if (pl.is_real()) return sample_real_points(a, std::max(k, 1), n);
    return sample_padic_points(a, pl.prime(), k, n);
}

}  // namespace local
}  // namespace dp2bm
