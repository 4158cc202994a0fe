#pragma once

#include <bit>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "local.hpp"

namespace dp2bm {

// a0 y0^2 + a1 y1^2 + a2 y2^2 = y3^2, primitive
struct QuadricPoint {
    std::array<i64, 4> y{};

    i64 height() const {
        return std::max({std::abs(y[0]), std::abs(y[1]), std::abs(y[2]), std::abs(y[3])});
    }
    std::string to_string() const {
        return "[" + std::to_string(y[0]) + ":" + std::to_string(y[1]) + ":" + std::to_string(y[2]) + ":" +
               std::to_string(y[3]) + "]";
    }
    friend bool operator==(const QuadricPoint&, const QuadricPoint&) = default;
};

inline bool on_quadric(const std::array<i64, 3>& a, const std::array<i64, 4>& y) {
    return i128(a[0]) * y[0] * y[0] + i128(a[1]) * y[1] * y[1] + i128(a[2]) * y[2] * y[2] == i128(y[3]) * y[3];
}

// P scaled by p^-shift so that min nu(a_n y_n) = 0 (a_3 = -1)
struct NormalisedPoint {
    std::array<Rational, 4> y;
    int shift = 0;
};

struct QuaternionAlgebra {
    i64 theta = 0;
    std::array<i64, 3> a{};
    QuadricPoint P;
    std::array<i128, 4> tangent{};  // a0y0, a1y1, a2y2, -y3

    static QuaternionAlgebra make(const CoefficientTriple& c, const QuadricPoint& P) {
        if (!on_quadric(c.a, P.y)) throw std::invalid_argument("point " + P.to_string() + " is not on the quadric");
        QuaternionAlgebra A;
        A.theta = c.theta;
        A.a = c.a;
        A.P = P;
        for (int i = 0; i < 3; ++i) A.tangent[i] = i128(c.a[i]) * P.y[i];
        A.tangent[3] = -i128(P.y[3]);
        return A;
    }
};

// f at a local point. Finite: residue mod p^precision with certified valuation.
// Real: exact sign; value when w is rational.
struct FValue {
    Place place = Place::real();
    u64 residue = 0;
    int precision = 0;
    int valuation = 0;
    int sign = 0;
    std::optional<i128> exact;
};

enum class Verdict { Constant, Surjective, Undecided };

inline const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::Constant: return "Constant";
        case Verdict::Surjective: return "Surjective";
        default: return "Undecided";
    }
}

struct Provenance {
    enum Kind { ClosedForm, Sampling } kind = ClosedForm;
    std::string rule;
    int precision = 0;
    std::size_t classes = 0;

    std::string to_string() const {
        if (kind == ClosedForm) return "ClosedForm(" + rule + ")";
        std::string s = "Sampling(k=" + std::to_string(precision) + ", classes=" + std::to_string(classes);
        if (!rule.empty()) s += ", " + rule;
        return s + ")";
    }
};

struct InvariantClassification {
    Place place = Place::real();
    Verdict verdict = Verdict::Undecided;
    InvariantValue value;  // meaningful for Constant
    Provenance provenance;
};

enum class Status { NotEverywhereLocallySoluble, NoObstructionFromA, ObstructionFromA, UndecidedByA };

inline const char* to_string(Status s) {
    switch (s) {
        case Status::NotEverywhereLocallySoluble: return "NotEverywhereLocallySoluble";
        case Status::NoObstructionFromA: return "NoObstructionFromA";
        case Status::ObstructionFromA: return "ObstructionFromA";
        default: return "UndecidedByA";
    }
}

struct ObstructionDecision {
    CoefficientTriple a;
    Status status = Status::UndecidedByA;
    std::string reason;
    std::optional<QuadricPoint> point;
    std::vector<InvariantClassification> per_place;
    std::optional<InvariantValue> total;
    bool limit_hit = false;  // undecided because a height, precision or budget cap was reached
};

struct DecisionOptions {
    bool force_past_prefilter = false;
    bool exceptional_guard = true;
    i64 height_cap = 2048;
    int precision_cap = 48;
    std::size_t cell_budget = 2000000;
    i64 guard_point_height = 20;
    std::optional<QuadricPoint> point;  // overrides the search
};

namespace brauer {

inline constexpr i64 kDirectHeight = 48;
inline constexpr i64 kMaxSearchHeight = 2048;

namespace detail {

// (height, y3, y2, y1, y0) on nonnegative coordinates
inline bool precedes(const std::array<i64, 4>& u, const std::array<i64, 4>& v) {
    i64 hu = std::max({u[0], u[1], u[2], u[3]}), hv = std::max({v[0], v[1], v[2], v[3]});
    if (hu != hv) return hu < hv;
    return std::tie(u[3], u[2], u[1], u[0]) < std::tie(v[3], v[2], v[1], v[0]);
}

inline bool primitive(const std::array<i64, 4>& y) {
    return std::gcd(std::gcd(y[0], y[1]), std::gcd(y[2], y[3])) == 1;
}

// points of height <= H by growing m = max(y0, y1, y2); y3 is read off. Once every m' <= m
// has been scanned, all points of height <= m are known.
inline void direct(const std::array<i64, 3>& a, i64 H, std::size_t count, std::vector<QuadricPoint>& out) {
    std::vector<std::array<i64, 4>> pending;
    for (i64 m = 0; m <= H; ++m) {
        for (i64 y2 = 0; y2 <= m; ++y2)
            for (i64 y1 = 0; y1 <= m; ++y1)
                for (i64 y0 = 0; y0 <= m; ++y0) {
                    if (y0 != m && y1 != m && y2 != m) {
                        if (y0 == 0) y0 = m - 1;  // jump to y0 = m
                        continue;
                    }
                    i128 t = i128(a[0]) * y0 * y0 + i128(a[1]) * y1 * y1 + i128(a[2]) * y2 * y2;
                    if (t < 0 || !arith::is_square(t)) continue;
                    i64 y3 = i64(arith::isqrt(u128(t)));
                    std::array<i64, 4> y{y0, y1, y2, y3};
                    if (y3 <= H && primitive(y)) pending.push_back(y);
                }
        std::sort(pending.begin(), pending.end(), precedes);
        std::size_t done = 0;
        while (done < pending.size() && pending[done][3] <= m) {
            out.push_back({pending[done++]});
            if (out.size() >= count) return;
        }
        pending.erase(pending.begin(), pending.begin() + std::ptrdiff_t(done));
    }
}

// all primitive points with lo < height <= hi, sorted
inline std::vector<QuadricPoint> window(const std::array<i64, 3>& a, i64 lo, i64 hi) {
    struct Entry {
        i128 v;
        std::int32_t y0, y1;
    };
    std::vector<Entry> tab;
    tab.reserve(std::size_t(hi + 1) * std::size_t(hi + 1));
    for (i64 y0 = 0; y0 <= hi; ++y0)
        for (i64 y1 = 0; y1 <= hi; ++y1)
            tab.push_back({i128(a[0]) * y0 * y0 + i128(a[1]) * y1 * y1, std::int32_t(y0), std::int32_t(y1)});
    std::sort(tab.begin(), tab.end(), [](const Entry& x, const Entry& y) { return x.v < y.v; });
    std::vector<std::array<i64, 4>> hits;
    for (i64 y3 = 0; y3 <= hi; ++y3)
        for (i64 y2 = 0; y2 <= hi; ++y2) {
            i128 t = i128(y3) * y3 - i128(a[2]) * y2 * y2;
            auto it = std::lower_bound(tab.begin(), tab.end(), t, [](const Entry& e, i128 v) { return e.v < v; });
            for (; it != tab.end() && it->v == t; ++it) {
                std::array<i64, 4> y{it->y0, it->y1, y2, y3};
                if (std::max({y[0], y[1], y2, y3}) <= lo || !primitive(y)) continue;
                hits.push_back(y);
            }
        }
    std::sort(hits.begin(), hits.end(), precedes);
    std::vector<QuadricPoint> out;
    for (auto& y : hits) out.push_back({y});
    return out;
}

}  // namespace detail

// First `count` primitive points with nonnegative coordinates, ordered by height, then by
// (y3, y2, y1, y0).
inline std::vector<QuadricPoint> find_quadric_points(const CoefficientTriple& c, i64 H, std::size_t count) {
    std::vector<QuadricPoint> out;
    const i64 cap = std::min(H, kMaxSearchHeight);
    detail::direct(c.a, std::min(cap, kDirectHeight), count, out);
    for (i64 lo = kDirectHeight; lo < cap && out.size() < count; lo *= 2) {
        i64 hi = std::min(cap, 2 * lo);
        for (auto& q : detail::window(c.a, lo, hi)) {
            if (out.size() >= count) break;
            out.push_back(q);
        }
    }
    return out;
}

inline QuadricPoint find_quadric_point(const CoefficientTriple& c, i64 H = 2048) {
    auto pts = find_quadric_points(c, H, 1);
    if (pts.empty()) throw HeightExhausted(std::min(H, kMaxSearchHeight));
    return pts[0];
}

inline NormalisedPoint normalise_at_p(const QuadricPoint& P, const std::array<i64, 3>& a, u64 p) {
    const std::array<i64, 4> coef{a[0], a[1], a[2], -1};
    int m = INT32_MAX;
    for (int n = 0; n < 4; ++n)
        if (P.y[n] != 0) m = std::min(m, valuation(i128(coef[n]) * P.y[n], p));
    if (m == INT32_MAX) throw ZeroInput();
    NormalisedPoint out;
    out.shift = m;
    i64 pm = 1;
    for (int i = 0; i < m; ++i) pm *= i64(p);
    for (int n = 0; n < 4; ++n) out.y[n] = Rational(P.y[n], pm);
    return out;
}

inline NormalisedPoint normalise_at_p(const QuadricPoint& P, const CoefficientTriple& a, u64 p) {
    return normalise_at_p(P, a.a, p);
}

namespace detail {

// sign of A - B*sqrt(F), F >= 0
inline int sign_minus_root(i128 A, i128 B, i128 F) {
    auto sgn = [](i128 v) { return v > 0 ? 1 : (v < 0 ? -1 : 0); };
    if (B == 0 || F == 0) return sgn(A);
    int sb = sgn(B);
    if (sgn(A) != sb) return sgn(A) == 0 ? -sb : sgn(A);
    // same sign: compare A^2 with B^2 F
    u128 lhs = u128(A < 0 ? -A : A) * u128(A < 0 ? -A : A);
    u128 rhs = u128(B < 0 ? -B : B) * u128(B < 0 ? -B : B) * u128(F);
    if (lhs == rhs) return 0;
    return (lhs > rhs) ? sgn(A) : -sgn(A);
}

inline i128 quad_part(const QuaternionAlgebra& A, const std::array<i64, 3>& x) {
    return A.tangent[0] * x[0] * x[0] + A.tangent[1] * x[1] * x[1] + A.tangent[2] * x[2] * x[2];
}

}  // namespace detail

inline FValue evaluate_f(const QuaternionAlgebra& A, const LocalPoint& Q) {
    FValue out;
    if (auto* r = std::get_if<RealPoint>(&Q)) {
        i128 L = detail::quad_part(A, r->x);
        // f = L + tangent[3] * w
        i128 B = -A.tangent[3] * r->w_sign;
        out.sign = detail::sign_minus_root(L, B, r->w_squared);
        if (r->w_exact) out.exact = L + A.tangent[3] * *r->w_exact;
        if (out.sign == 0) throw PrecisionLoss();
        return out;
    }
    const auto& q = std::get<PadicPoint>(Q);
    const u64 p = q.p;
    out.place = Place::finite(p);
    local::detail::Ring R(p, q.k + 8);
    int kf = q.k;
    for (int j = 0; j < 3; ++j)
        if (A.tangent[j] != 0) kf = std::min(kf, q.k + valuation(A.tangent[j], p));
    if (A.tangent[3] != 0) kf = std::min(kf, q.w_precision + valuation(A.tangent[3], p));
    kf = std::min(kf, R.cap);
    const u64 M = R.pw[kf];
    u64 f = 0;
    for (int j = 0; j < 3; ++j) {
        u64 x2 = arith::mulmod(q.x[j] % M, q.x[j] % M, M);
        f = (f + arith::mulmod(R.mod(A.tangent[j], kf), x2, M)) % M;
    }
    f = (f + arith::mulmod(R.mod(A.tangent[3], kf), q.w % M, M)) % M;
    out.residue = f;
    out.precision = kf;
    const int e = p == 2 ? 3 : 1;
    if (f == 0) throw PrecisionLoss();
    out.valuation = R.val(f, kf);
    if (out.valuation + e > kf) throw PrecisionLoss();
    return out;
}

inline InvariantValue local_invariant(const QuaternionAlgebra& A, const LocalPoint& Q) {
    FValue f = evaluate_f(A, Q);
    if (f.place.is_real()) return invariant_from_symbol(hilbert_symbol(i128(A.theta), i128(f.sign), Place::real()));
    const u64 p = f.place.prime();
    local::detail::Ring R(p, f.precision);
    LocalClass fc{f.valuation, (f.residue / R.pw[f.valuation]) % (p == 2 ? 8 : p)};
    return invariant_from_symbol(hilbert_symbol(local_class(i128(A.theta), p), fc, p));
}

struct SamplingOptions {
    int precision_cap = 48;
    std::size_t cell_budget = 2000000;
    bool first_value_only = false;
};

struct SamplingResult {
    std::array<bool, 2> seen{};
    bool incomplete = false;
    bool budget_exhausted = false;
    int precision = 0;
    std::size_t classes = 0;
    std::size_t cells = 0;
};

namespace detail {

using local::detail::Cell;
using local::detail::CellEval;
using local::detail::kFree;
using local::detail::kInf;

// f = c0 x0^2 + c1 x1^2 + c2 x2^2 - d w on the reduced surface
struct Form {
    std::array<i128, 3> c{};
    i128 d = 0;
    std::array<int, 3> nc{};
    int nd = 0;
};

class InvariantSampler {
public:
    InvariantSampler(const CoefficientTriple& t, const std::vector<QuadricPoint>& points, u64 p,
                     const SamplingOptions& opt)
        : p_(p), opt_(opt), reduced_(t.a), S_(init(t, points, p), p, opt.precision_cap) {
        theta_ = local_class(i128(t.theta), p);
        ecert_ = p == 2 ? 3 : 1;
    }

    SamplingResult run() {
        SamplingResult res;
        const std::size_t nf = forms_.size();
        std::vector<int> c(nf, -1), vals(nf, -1);
        c[0] = 0;
        // deferred cells are revisited breadth-first once the main stack is empty
        std::vector<Cell> main = S_.roots();
        std::deque<Cell> deferred;
        std::reverse(main.begin(), main.end());
        int seen = 0;
        auto done = [&] { return seen == 3 || (opt_.first_value_only && seen != 0); };
        while (!done()) {
            Cell cell;
            bool from_deferred = false;
            if (!main.empty()) {
                cell = main.back();
                main.pop_back();
            } else if (!deferred.empty()) {
                cell = deferred.front();
                deferred.pop_front();
                from_deferred = true;
            } else {
                break;
            }
            if (++res.cells > opt_.cell_budget) {
                res.budget_exhausted = true;
                break;
            }
            auto e = S_.eval(cell);
            if (e.kind == CellEval::Empty) continue;
            const bool regular = e.kind == CellEval::Regular;
            if (!regular && !from_deferred) {
                deferred.push_back(cell);
                continue;
            }
            const int wv = regular ? 0 : (e.v + 1) / 2;
            bool refine = false, waiting = false;
            for (int sigma : {1, -1}) {
                if (!regular && sigma < 0) break;
                // c[t]: inv_P - inv_{P_t}, learned where two forms are both certified on a
                // cell known to contain points
                int val = -1;
                for (std::size_t t = 0; t < nf; ++t) vals[t] = branch(forms_[t], cell, e, sigma, wv);
                for (bool grew = regular; grew;) {
                    grew = false;
                    for (std::size_t s = 0; s < nf; ++s) {
                        if (vals[s] < 0 || c[s] < 0) continue;
                        for (std::size_t t = 0; t < nf; ++t) {
                            if (vals[t] < 0) continue;
                            int ct = c[s] ^ vals[s] ^ vals[t];
                            if (c[t] < 0) {
                                c[t] = ct;
                                grew = true;
                            } else if (c[t] != ct) {
                                throw std::logic_error("backup algebra is not a constant twist");
                            }
                        }
                    }
                }
                for (std::size_t t = 0; t < nf && val < 0; ++t)
                    if (vals[t] >= 0 && c[t] >= 0) val = vals[t] ^ c[t];
                if (val < 0)
                    for (std::size_t t = 0; t < nf; ++t) waiting = waiting || vals[t] >= 0;
                if (regular) {
                    if (val >= 0) {
                        seen |= 1 << val;
                        ++res.classes;
                        res.precision = std::max({res.precision, int(cell.k[0]), int(cell.k[1])});
                    } else {
                        refine = true;
                    }
                } else if (val < 0 || !(seen & (1 << val))) {
                    refine = true;
                }
            }
            if (!refine) continue;
            if (waiting && !from_deferred) {
                // some backup is certified here but its constant is not known yet
                deferred.push_back(cell);
                continue;
            }
            int slot = pick_slot(cell, e);
            if (slot < 0) {
                res.incomplete = true;
                continue;
            }
            S_.split(cell, slot, [&](const Cell& ch) { main.push_back(ch); });
        }
        res.seen = {bool(seen & 1), bool(seen & 2)};
        return res;
    }

private:
    std::array<i64, 3> init(const CoefficientTriple& t, const std::vector<QuadricPoint>& points, u64 p) {
        const i128 p2 = i128(p) * i128(p), p4 = p2 * p2;
        std::array<i64, 3> a = t.a;
        for (auto& P : points) {
            Form f;
            for (int j = 0; j < 3; ++j) f.c[j] = i128(t.a[j]) * P.y[j];
            f.d = P.y[3];
            forms_.push_back(f);
        }
        for (int j = 0; j < 3; ++j)
            while (a[j] % p4 == 0) {
                a[j] = i64(a[j] / p4);
                for (auto& f : forms_) f.c[j] /= p2;
            }
        if (a[0] % p2 == 0 && a[1] % p2 == 0 && a[2] % p2 == 0) {
            for (auto& aj : a) aj = i64(aj / p2);
            for (auto& f : forms_) f.d *= i128(p);
        }
        for (auto& f : forms_) {
            for (int j = 0; j < 3; ++j) f.nc[j] = f.c[j] == 0 ? kInf : valuation(f.c[j], p);
            f.nd = f.d == 0 ? kInf : valuation(f.d, p);
        }
        reduced_ = a;
        return a;
    }

    int lbound(const Form& f, const Cell& cell, int s) const {
        return S_.power_bound(cell.r[s], cell.k[s], f.nc[kFree[cell.chart][s]], 2);
    }

    // halves of inv at the branch, or -1 if f is not certified on the cell
    int branch(const Form& f, const Cell& cell, const CellEval& e, int sigma, int wv) const {
        const auto& R = S_.ring();
        int kf = S_.cap();
        for (int s = 0; s < 2; ++s) kf = std::min(kf, lbound(f, cell, s));
        if (f.nd < kInf) kf = std::min(kf, (e.kind == CellEval::Regular ? e.w_prec : wv) + f.nd);
        if (kf <= 0) return -1;
        const u64 M = R.pw[kf];
        std::array<u64, 3> x{};
        x[cell.chart] = 1 % M;
        x[kFree[cell.chart][0]] = cell.r[0] % M;
        x[kFree[cell.chart][1]] = cell.r[1] % M;
        u64 v = 0;
        for (int j = 0; j < 3; ++j) {
            if (f.nc[j] >= kInf) continue;
            u64 x2 = arith::mulmod(x[j], x[j], M);
            v = (v + arith::mulmod(R.mod(f.c[j], kf), x2, M)) % M;
        }
        if (e.kind == CellEval::Regular && f.nd < kInf) {
            u64 dw = arith::mulmod(R.mod(f.d, kf), e.w % M, M);
            v = sigma > 0 ? (v + M - dw) % M : (v + dw) % M;
        }
        if (v == 0) return -1;
        int nu = R.val(v, kf);
        if (nu + ecert_ > kf) return -1;
        LocalClass fc{nu, (v / R.pw[nu]) % (p_ == 2 ? 8 : p_)};
        return hilbert_symbol(theta_, fc, p_) == 1 ? 0 : 1;
    }

    int pick_slot(const Cell& cell, const CellEval& e) const {
        int best = -1, score = 0;
        for (int s = 0; s < 2; ++s) {
            if (cell.k[s] >= S_.cap()) continue;
            int sc = std::min(e.bound[s], lbound(forms_[0], cell, s));
            if (best < 0 || sc < score) {
                best = s;
                score = sc;
            }
        }
        return best;
    }

    u64 p_;
    SamplingOptions opt_;
    std::vector<Form> forms_;
    std::array<i64, 3> reduced_;
    local::detail::Surface S_;
    LocalClass theta_{};
    int ecert_ = 1;
};

// sign flips of P, each a valid second choice of quadric point
inline std::vector<QuadricPoint> with_flips(const std::vector<QuadricPoint>& base) {
    std::vector<QuadricPoint> out;
    for (auto& P : base) {
        auto push = [&](QuadricPoint Q) {
            if (std::find(out.begin(), out.end(), Q) == out.end()) out.push_back(Q);
        };
        push(P);
        for (int n : {3, 0, 1, 2}) {
            if (P.y[n] == 0) continue;
            QuadricPoint Q = P;
            Q.y[n] = -Q.y[n];
            push(Q);
        }
    }
    return out;
}

}  // namespace detail

// Flips of P share zeros of f along x_j = 0 (y_j != 0), w = 0. Further quadric points are
// added until those loci cannot meet S.
inline std::vector<QuadricPoint> backup_points(const CoefficientTriple& a, const QuadricPoint& P, i64 H = 256) {
    auto covered = [](const std::vector<QuadricPoint>& pts) {
        int supp = 0;
        bool y3 = false;
        for (auto& q : pts) {
            for (int j = 0; j < 3; ++j)
                if (q.y[j] != 0) supp |= 1 << j;
            y3 = y3 || q.y[3] != 0;
        }
        return supp == 7 || (y3 && std::popcount(unsigned(supp)) >= 2);
    };
    std::vector<QuadricPoint> pts{P};
    if (covered(pts)) return {};
    for (auto& q : find_quadric_points(a, H, 8)) {
        if (q == P) continue;
        pts.push_back(q);
        if (covered(pts)) break;
    }
    // second intersection of the quadric with the line through P in direction d
    const std::array<i64, 4> c{a.a[0], a.a[1], a.a[2], -1};
    for (int i = 0; i < 4 && !covered(pts); ++i)
        for (int j = i + 1; j < 4 && !covered(pts); ++j)
            for (int s : {1, -1}) {
                std::array<i128, 4> d{}, y{};
                d[i] = 1;
                d[j] = s;
                i128 q = 0, b = 0;
                for (int n = 0; n < 4; ++n) {
                    q += c[n] * d[n] * d[n];
                    b += c[n] * P.y[n] * d[n];
                }
                u128 g = 0;
                bool fits = true;
                for (int n = 0; n < 4; ++n) {
                    y[n] = q * P.y[n] - 2 * b * d[n];
                    g = arith::gcd128(g, u128(y[n] < 0 ? -y[n] : y[n]));
                }
                if (g == 0) continue;
                QuadricPoint r;
                for (int n = 0; n < 4; ++n) {
                    i128 v = y[n] / i128(g);
                    if (v < 0) v = -v;
                    if (v > i128(std::numeric_limits<i64>::max() / 4)) fits = false;
                    r.y[n] = i64(v);
                }
                if (!fits || r == P || !on_quadric(a.a, r.y)) continue;
                pts.push_back(r);
                break;
            }
    return {pts.begin() + 1, pts.end()};
}

// Invariants of the algebra built from points[0]; further points are only used where
// points[0] leaves f uncertified.
inline SamplingResult sample_invariants(const CoefficientTriple& a, const std::vector<QuadricPoint>& points, u64 p,
                                        const SamplingOptions& opt = {}) {
    detail::InvariantSampler s(a, points, p, opt);
    return s.run();
}

inline InvariantClassification classify_by_sampling(const CoefficientTriple& a, const QuaternionAlgebra& A, u64 p,
                                                    const SamplingOptions& opt = {},
                                                    const std::vector<QuadricPoint>& extra = {}) {
    std::vector<QuadricPoint> base{A.P};
    if (extra.empty()) {
        auto b = backup_points(a, A.P);
        base.insert(base.end(), b.begin(), b.end());
    }
    base.insert(base.end(), extra.begin(), extra.end());
    auto r = sample_invariants(a, detail::with_flips(base), p, opt);
    InvariantClassification out;
    out.place = Place::finite(p);
    out.provenance.kind = Provenance::Sampling;
    out.provenance.precision = r.precision;
    out.provenance.classes = r.classes;
    if (r.seen[0] && r.seen[1]) {
        out.verdict = Verdict::Surjective;
    } else if (r.budget_exhausted || (r.incomplete && !opt.first_value_only) || (!r.seen[0] && !r.seen[1] && r.incomplete)) {
        out.verdict = Verdict::Undecided;
        out.provenance.rule = r.budget_exhausted ? "cell-budget" : "precision-cap";
    } else if (r.seen[0] || r.seen[1]) {
        out.verdict = Verdict::Constant;
        out.value = InvariantValue::from_halves(r.seen[1] ? 1 : 0);
    } else {
        throw NoSmoothPoints();
    }
    return out;
}

inline InvariantClassification classify_real(const CoefficientTriple& a, const QuaternionAlgebra& A) {
    InvariantClassification out;
    out.place = Place::real();
    out.verdict = Verdict::Constant;
    if (a.theta > 0) {
        out.provenance.rule = "real-theta-positive";
        return out;
    }
    if (!local::is_really_soluble(a)) throw NoSmoothPoints();
    const bool two_sheets = a.a[0] > 0 && a.a[1] > 0 && a.a[2] > 0;
    // sign of f on the sheet w = sigma*sqrt(F), at the first grid point where it is nonzero
    auto sheet_value = [&](int sigma) {
        for (int h = 1; h <= 64; ++h)
            for (int x0 = 0; x0 <= h; ++x0)
                for (int x1 = -h; x1 <= h; ++x1)
                    for (int x2 = -h; x2 <= h; ++x2) {
                        if (std::max({x0, std::abs(x1), std::abs(x2)}) != h) continue;
                        std::array<i64, 3> x{x0, x1, x2};
                        i128 F = i128(a.a[0]) * x0 * x0 * x0 * x0 + i128(a.a[1]) * x1 * x1 * x1 * x1 +
                                 i128(a.a[2]) * x2 * x2 * x2 * x2;
                        if (F <= 0) continue;
                        int s = detail::sign_minus_root(detail::quad_part(A, x), -A.tangent[3] * sigma, F);
                        if (s != 0) return InvariantValue::from_halves(s < 0 ? 1 : 0);
                    }
        throw PrecisionLoss();
    };
    InvariantValue plus = sheet_value(1);
    if (!two_sheets) {
        out.value = plus;
        out.provenance.rule = "real-connected";
        return out;
    }
    InvariantValue minus = sheet_value(-1);
    out.provenance.rule = "real-two-sheets";
    if (plus == minus) {
        out.value = plus;
    } else {
        out.verdict = Verdict::Surjective;
    }
    return out;
}

// Closed forms at odd p. Returns nothing when no rule applies. Some constants need one
// sampled point for their value.
inline std::optional<InvariantClassification> classify_closed_form(const CoefficientTriple& a,
                                                                   const QuaternionAlgebra& A, u64 p,
                                                                   const SamplingOptions& opt = {}) {
    if (p == 2) return std::nullopt;
    InvariantClassification out;
    out.place = Place::finite(p);
    out.verdict = Verdict::Constant;
    const auto v = a.valuations(p);
    const Place P = Place::finite(p);
    auto positive = [&] {
        int n = 0;
        for (int x : v) n += x > 0;
        return n;
    }();
    if (positive == 0) {
        out.provenance.rule = "good-prime";
        return out;
    }
    if (positive == 1) {
        int i = v[0] > 0 ? 0 : (v[1] > 0 ? 1 : 2);
        if (v[i] % 2 != 0) return std::nullopt;
        // nu = 2 mod 4 can be surjective: (-68, 360, 106) at 3 takes both values
        int j = (i + 1) % 3, k = (i + 2) % 3;
        if (v[i] % 4 == 2 && !is_padic_square(i128(a.theta), P) && legendre(-i128(a.a[j]) * a.a[k], p) == -1)
            return std::nullopt;
        int m = normalise_at_p(A.P, a, p).shift;
        int sym = hilbert_symbol(i128(a.theta), i128(p), P);
        out.value = InvariantValue::from_halves((m % 2 != 0 && sym == -1) ? 1 : 0);
        out.provenance.rule = "even-valuation";
        return out;
    }
    if (positive != 2) return std::nullopt;
    int k = v[0] == 0 ? 0 : (v[1] == 0 ? 1 : 2);
    int i = (k + 1) % 3, j = (k + 2) % 3;
    if (v[i] % 2 == 0 || v[j] % 2 == 0) return std::nullopt;
    const int nt = v[i] + v[j];
    i128 theta_unit = i128(a.theta);
    for (int t = 0; t < nt; ++t) theta_unit /= i128(p);
    if (legendre(theta_unit, p) == 1) {
        out.provenance.rule = "odd-pair-theta-square";
        return out;
    }
    if (legendre(i128(a.a[k]), p) == 1) {
        out.verdict = Verdict::Surjective;
        out.provenance.rule = "odd-pair-surjective";
        return out;
    }
    if (v[i] != v[j]) return std::nullopt;
    if (p % 4 == 1) {
        out.verdict = Verdict::Surjective;
        out.provenance.rule = "odd-pair-p1mod4";
        return out;
    }
    i128 w = -i128(a.a[i]) * a.a[j];
    for (int t = 0; t < nt; ++t) w /= i128(p);
    if (legendre(w, p) == -1) {
        out.verdict = Verdict::Surjective;
        out.provenance.rule = "odd-pair-p3mod4";
        return out;
    }
    SamplingOptions one = opt;
    one.first_value_only = true;
    auto s = classify_by_sampling(a, A, p, one);
    if (s.verdict != Verdict::Constant) return s;
    out.value = s.value;
    out.provenance.rule = "odd-pair-p3mod4";
    out.provenance.classes = s.provenance.classes;
    out.provenance.precision = s.provenance.precision;
    return out;
}

inline InvariantClassification classify_invariant_map(const CoefficientTriple& a, const QuaternionAlgebra& A,
                                                      const Place& place, const SamplingOptions& opt = {},
                                                      const std::vector<QuadricPoint>& extra = {}) {
    if (place.is_real()) return classify_real(a, A);
    const u64 p = place.prime();
    if (auto cf = classify_closed_form(a, A, p, opt)) return *cf;
    if (is_padic_square(i128(a.theta), place)) {
        InvariantClassification out;
        out.place = place;
        out.verdict = Verdict::Constant;
        out.provenance.rule = "theta-local-square";
        return out;
    }
    return classify_by_sampling(a, A, p, opt, extra);
}

// odd prime dividing exactly one coefficient, exactly once
inline std::optional<u64> prefilter_prime(const CoefficientTriple& a) {
    for (auto& pp : a.factored_theta.factors) {
        u64 p = u64(pp.prime);
        if (p == 2 || pp.exponent != 1) continue;
        return p;
    }
    return std::nullopt;
}

inline bool exceptional_class(const CoefficientTriple& a) {
    auto special = [](i128 n) {
        i64 s = squarefree_part(i64(n));
        return s == 1 || s == -1 || s == 2 || s == -2;
    };
    for (int i = 0; i < 3; ++i) {
        if (special(a.a[i])) return true;
        for (int j = i + 1; j < 3; ++j)
            if (special(i128(a.a[i]) * a.a[j])) return true;
    }
    return false;
}

// isomorphic triple: fourth powers removed from each coefficient, then common squares
inline CoefficientTriple reduced_model(const CoefficientTriple& c) {
    auto a = c.a;
    for (auto& pp : c.factored_theta.factors) {
        const i64 p = i64(pp.prime), p2 = p * p, p4 = p2 * p2;
        for (bool changed = true; changed;) {
            changed = false;
            for (auto& x : a)
                while (x % p4 == 0) {
                    x /= p4;
                    changed = true;
                }
            if (a[0] % p2 == 0 && a[1] % p2 == 0 && a[2] % p2 == 0) {
                for (auto& x : a) x /= p2;
                changed = true;
            }
        }
    }
    return a == c.a ? c : CoefficientTriple::make(a);
}

// first point of F(x) = w^2, primitive x >= 0 with max x_i <= H, ordered by height then
// (x2, x1, x0); w >= 0
inline std::optional<std::array<i64, 4>> find_rational_point(const CoefficientTriple& c, i64 H) {
    const auto& a = c.a;
    for (i64 h = 0; h <= H; ++h)
        for (i64 x2 = 0; x2 <= h; ++x2)
            for (i64 x1 = 0; x1 <= h; ++x1)
                for (i64 x0 = 0; x0 <= h; ++x0) {
                    if (std::max({x0, x1, x2}) != h) continue;
                    if (std::gcd(std::gcd(x0, x1), x2) != 1) continue;
                    i128 F = i128(a[0]) * x0 * x0 * x0 * x0 + i128(a[1]) * x1 * x1 * x1 * x1 +
                             i128(a[2]) * x2 * x2 * x2 * x2;
                    if (F < 0 || !arith::is_square(F)) continue;
                    return std::array<i64, 4>{x0, x1, x2, i64(arith::isqrt(u128(F)))};
                }
    return std::nullopt;
}

namespace detail {

inline void sort_places(std::vector<InvariantClassification>& v) {
    std::sort(v.begin(), v.end(), [](const auto& x, const auto& y) { return x.place < y.place; });
}

inline ObstructionDecision decide(ObstructionDecision d, const CoefficientTriple& a, const DecisionOptions& opt) {
    SamplingOptions so;
    so.precision_cap = opt.precision_cap;
    so.cell_budget = opt.cell_budget;
    QuadricPoint P;
    try {
        P = opt.point ? *opt.point : find_quadric_point(a, opt.height_cap);
    } catch (const HeightExhausted& e) {
        d.status = Status::UndecidedByA;
        d.reason = e.what();
        d.limit_hit = true;
        return d;
    }
    d.point = P;
    const auto A = QuaternionAlgebra::make(a, P);
    std::vector<u64> sampled;
    auto surjective = [&](const InvariantClassification& c) {
        d.per_place.push_back(c);
        if (c.verdict != Verdict::Surjective) return false;
        d.status = Status::NoObstructionFromA;
        d.reason = "surjective at " + c.place.to_string();
        sort_places(d.per_place);
        return true;
    };
    for (u64 p : a.primes_of_theta()) {
        if (p == 2) continue;
        auto cf = classify_closed_form(a, A, p, so);
        if (!cf) {
            sampled.push_back(p);
            continue;
        }
        if (surjective(*cf)) return d;
    }
    if (surjective(classify_real(a, A))) return d;
    for (u64 p : [&] {
             std::vector<u64> ps{2};
             ps.insert(ps.end(), sampled.begin(), sampled.end());
             return ps;
         }()) {
        auto c = classify_invariant_map(a, A, Place::finite(p), so);
        if (surjective(c)) return d;
    }
    sort_places(d.per_place);
    InvariantValue total;
    for (auto& c : d.per_place) {
        if (c.verdict == Verdict::Undecided) {
            d.status = Status::UndecidedByA;
            d.reason = "undecided at " + c.place.to_string() + " (" + c.provenance.rule + ")";
            d.limit_hit = true;
            return d;
        }
        total += c.value;
    }
    d.total = total;
    if (total == InvariantValue::half()) {
        d.status = Status::ObstructionFromA;
    } else {
        d.status = Status::NoObstructionFromA;
        d.reason = "adelic point survives";
    }
    return d;
}

}  // namespace detail

inline ObstructionDecision has_bm_obstruction(const CoefficientTriple& a, const DecisionOptions& opt = {}) {
    ObstructionDecision d;
    d.a = a;
    try {
        if (!local::is_everywhere_locally_soluble(a)) {
            d.status = Status::NotEverywhereLocallySoluble;
            return d;
        }
    } catch (const PrecisionExhausted& e) {
        d.status = Status::UndecidedByA;
        d.reason = e.what();
        d.limit_hit = true;
        return d;
    }
    auto pre = prefilter_prime(a);
    if (pre && !opt.force_past_prefilter) {
        d.status = Status::NoObstructionFromA;
        d.reason = "odd-prime-exact-once at " + std::to_string(*pre);
        return d;
    }
    if (a.theta_class == ThetaClass::PlusSquare) {
        d.status = Status::UndecidedByA;
        d.reason = "theta-square: algebra trivial, other algebras not implemented";
        return d;
    }
    try {
        d = detail::decide(d, a, opt);
    } catch (const PrecisionExhausted& e) {
        d.status = Status::UndecidedByA;
        d.reason = e.what();
        d.limit_hit = true;
        return d;
    }
    if (opt.exceptional_guard && exceptional_class(a)) {
        if (d.status == Status::ObstructionFromA) {
            d.reason = "ObstructionFromA-only: possible extra Brauer classes";
        } else if (d.status == Status::NoObstructionFromA && !pre) {
            if (find_rational_point(reduced_model(a), opt.guard_point_height)) {
                d.reason += "; rational point found";
            } else {
                d.status = Status::UndecidedByA;
                d.reason = "possible extra Brauer classes (" + d.reason + ")";
            }
        }
    }
    return d;
}

inline ObstructionDecision has_bm_obstruction(i64 a0, i64 a1, i64 a2, const DecisionOptions& opt = {}) {
    return has_bm_obstruction(CoefficientTriple::make(a0, a1, a2), opt);
}

// Classified constants of A_a and of A_{a u^2} (built from the transported point) at p.
struct TwistOutcome {
    InvariantClassification base, twisted;
    InvariantValue expected_shift;
    bool holds = false;
};

inline TwistOutcome twist_invariant_shift(const CoefficientTriple& a, const std::array<i64, 3>& u, u64 p,
                                          const SamplingOptions& opt = {}) {
    const Place P = Place::finite(p);
    if (p % 4 != 3) throw HypothesisViolated("p must be 3 mod 4");
    for (i64 x : u)
        if (x == 0 || x % i64(p) == 0) throw HypothesisViolated("u must be p-adic units");
    if (is_padic_square(i128(a.theta), P)) throw HypothesisViolated("theta is a p-adic square");
    auto v = a.valuations(p);
    int k = -1;
    for (int t = 0; t < 3; ++t)
        if (v[t] == 0) k = t;
    if (k < 0) throw HypothesisViolated("p divides every coefficient");
    int i = (k + 1) % 3, j = (k + 2) % 3;
    if (v[i] != v[j] || v[i] % 2 == 0) throw HypothesisViolated("need equal odd valuations");
    if (!is_padic_fourth_power(Rational(-a.a[i], a.a[j]), P)) throw HypothesisViolated("-a_i/a_j not a fourth power");
    auto b = CoefficientTriple::make(a.a[0] * u[0] * u[0], a.a[1] * u[1] * u[1], a.a[2] * u[2] * u[2]);
    auto Pa = find_quadric_point(a);
    const std::array<i64, 4> y = Pa.y;
    std::array<i64, 4> yu{y[0] * u[1] * u[2], y[1] * u[0] * u[2], y[2] * u[0] * u[1], y[3] * u[0] * u[1] * u[2]};
    i64 g = std::gcd(std::gcd(yu[0], yu[1]), std::gcd(yu[2], yu[3]));
    for (auto& t : yu) t /= g;
    TwistOutcome out;
    out.base = classify_by_sampling(a, QuaternionAlgebra::make(a, Pa), p, opt);
    out.twisted = classify_by_sampling(b, QuaternionAlgebra::make(b, QuadricPoint{yu}), p, opt);
    out.expected_shift = InvariantValue::from_halves(legendre(i128(u[i]) * u[j], p) == -1 ? 1 : 0);
    out.holds = out.base.verdict == Verdict::Constant && out.twisted.verdict == Verdict::Constant &&
                out.twisted.value - out.base.value == out.expected_shift;
    return out;
}

inline bool twist_invariant_shift_check(const CoefficientTriple& a, const std::array<i64, 3>& u, u64 p,
                                        const SamplingOptions& opt = {}) {
    return twist_invariant_shift(a, u, p, opt).holds;
}

}  // namespace brauer
}  // namespace dp2bm
