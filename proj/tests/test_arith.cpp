#include <gtest/gtest.h>

#include <random>
#include <thread>

#include <dp2bm/arith.hpp>

#include "oracles.hpp"

using namespace dp2bm;

namespace {

Factorization fz(std::initializer_list<std::pair<u64, int>> l, int sign = 1) {
    Factorization f;
    f.sign = sign;
    for (auto [p, e] : l) f.factors.push_back({p, e});
    return f;
}

const std::vector<u64> kSmallPlaces{0, 2, 3, 5, 7, 11, 13};

Place place(u64 p) { return p ? Place::finite(p) : Place::real(); }

}  // namespace

TEST(Factorize, Examples) {
    EXPECT_EQ(factorize(1), fz({}));
    EXPECT_EQ(factorize(-12), fz({{2, 2}, {3, 1}}, -1));
    // trial division gives 894348 = 2^2 3^3 7^2 13^2
    auto ref = oracle::trial_factor(894348);
    Factorization expect;
    for (auto [p, e] : ref) expect.factors.push_back({p, e});
    EXPECT_EQ(factorize(894348), expect);
    EXPECT_EQ(factorize(894348), fz({{2, 2}, {3, 3}, {7, 2}, {13, 2}}));
    EXPECT_THROW(factorize(0), ZeroInput);
}

TEST(Factorize, AgreesWithTrialDivision) {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 2000; ++i) {
        u64 n = rng() % 10000000000ULL + 1;
        auto ref = oracle::trial_factor(n);
        auto f = factorize(i128(n));
        ASSERT_EQ(f.factors.size(), ref.size()) << u64(n);
        for (std::size_t j = 0; j < ref.size(); ++j) {
            EXPECT_EQ(f.factors[j].prime, ref[j].first);
            EXPECT_EQ(f.factors[j].exponent, ref[j].second);
        }
    }
}

TEST(Factorize, LargeCofactors) {
    const u64 m61 = (u64(1) << 61) - 1;
    std::vector<i128> cases{i128(1000000007) * 1000000009, i128(m61) * 3, -i128(m61) * 1000003,
                            i128(999999000001ULL) * 1000003, i128(4294967311ULL) * 4294967357ULL * 7};
    for (i128 n : cases) {
        auto f = factorize(n);
        EXPECT_TRUE(f.value() == n);
        for (std::size_t i = 0; i < f.factors.size(); ++i) {
            EXPECT_TRUE(arith::is_prime(f.factors[i].prime));
            if (i) {
                EXPECT_TRUE(f.factors[i - 1].prime < f.factors[i].prime);
            }
        }
    }
    EXPECT_THROW(factorize(i128(1) << 70, u128(1) << 64), FactorizationOverflow);
}

TEST(Factorize, ConcurrentCacheIsConsistent) {
    std::vector<std::thread> ts;
    std::vector<int> bad(4, 0);
    for (int t = 0; t < 4; ++t)
        ts.emplace_back([t, &bad] {
            for (i64 n = 1; n < 20000; ++n)
                if (factorize(n * (t % 2 ? -1 : 1)).value() != n * (t % 2 ? -1 : 1)) ++bad[t];
        });
    for (auto& th : ts) th.join();
    for (int b : bad) EXPECT_EQ(b, 0);
}

TEST(Factorize, CacheSpillRoundTrip) {
    factorize(894348);
    auto path = std::string(::testing::TempDir()) + "/dp2bm_factor_cache.txt";
    FactorCache::instance().save(path);
    EXPECT_GT(FactorCache::instance().load(path), 0u);
    EXPECT_EQ(factorize(894348), fz({{2, 2}, {3, 3}, {7, 2}, {13, 2}}));
}

TEST(Kronecker, Examples) {
    for (u64 p : {2, 3, 5, 7, 101}) EXPECT_EQ(kronecker(1, i128(p)), 1);
    EXPECT_EQ(kronecker(2, 7), 1);
    EXPECT_EQ(kronecker(3, 7), -1);
}

TEST(Kronecker, LegendreByEnumeration) {
    for (u64 p = 3; p < 300; ++p) {
        if (!oracle::trial_prime(p)) continue;
        std::vector<bool> sq(p, false);
        for (u64 y = 1; y < p; ++y) sq[y * y % p] = true;
        for (i64 a = -400; a <= 400; ++a) {
            u64 r = oracle::md(a, p);
            int expect = r == 0 ? 0 : (sq[r] ? 1 : -1);
            ASSERT_EQ(kronecker(a, i128(p)), expect) << a << " " << p;
        }
    }
}

TEST(Kronecker, Multiplicative) {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 3000; ++i) {
        i64 a = i64(rng() % 2001) - 1000, b = i64(rng() % 2001) - 1000;
        i64 n = i64(rng() % 999) + 1;
        if (rng() % 2) n = -n;
        EXPECT_EQ(kronecker(a * b, n), kronecker(a, n) * kronecker(b, n));
        i64 m = i64(rng() % 999) + 1;
        EXPECT_EQ(kronecker(a, n * m), kronecker(a, n) * kronecker(a, m)) << a << " " << n << " " << m;
    }
}

TEST(UnitPart, Examples) {
    auto u = padic_unit_part(Rational(50), 5);
    EXPECT_EQ(u.valuation, 2);
    EXPECT_EQ(u.unit, Rational(2));
    u = padic_unit_part(Rational(-126), 3);
    EXPECT_EQ(u.valuation, 2);
    EXPECT_EQ(u.unit, Rational(-14));
    u = padic_unit_part(Rational(7, 9), 3);
    EXPECT_EQ(u.valuation, -2);
    EXPECT_EQ(u.unit, Rational(7));
}

TEST(PadicSquare, Examples) {
    EXPECT_TRUE(is_padic_square(Rational(4), Place::real()));
    EXPECT_FALSE(is_padic_square(Rational(-1), Place::finite(2)));
    EXPECT_TRUE(is_padic_square(Rational(2), Place::finite(7)));
    EXPECT_TRUE(is_padic_square(Rational(9, 49), Place::finite(3)));
    EXPECT_FALSE(is_padic_square(Rational(3, 2), Place::finite(2)));
}

TEST(PadicFourthPower, Examples) {
    EXPECT_TRUE(is_padic_fourth_power(Rational(16), Place::real()));
    // 16 = 2^4; the enumeration of y^4 mod 2^k confirms it
    EXPECT_TRUE(oracle::padic_fourth(16, 2));
    EXPECT_TRUE(is_padic_fourth_power(Rational(16), Place::finite(2)));
    // fourth powers mod 11 are {1,3,4,5,9}; 5 = 2^4 mod 11
    EXPECT_TRUE(oracle::padic_fourth(5, 11));
    EXPECT_TRUE(is_padic_fourth_power(Rational(5), Place::finite(11)));
    EXPECT_FALSE(is_padic_fourth_power(Rational(2), Place::finite(11)));
    EXPECT_FALSE(is_padic_fourth_power(Rational(-1), Place::finite(5)));
    EXPECT_TRUE(is_padic_fourth_power(Rational(-1), Place::finite(17)));
}

TEST(PadicSquare, AgreesWithEnumeration) {
    std::mt19937_64 rng(5);
    for (u64 p : {2, 3, 5, 7, 11, 101, 103}) {
        for (int i = 0; i < 1000; ++i) {
            i64 x = i64(rng() % 2000001) - 1000000;
            if (x == 0) continue;
            if (i % 3 == 0) x *= i64(p);
            if (i % 5 == 0) x *= i64(p * p);
            ASSERT_EQ(is_padic_square(i128(x), Place::finite(p)), oracle::padic_square(x, p)) << x << " " << p;
            ASSERT_EQ(is_padic_fourth_power(i128(x), Place::finite(p)), oracle::padic_fourth(x, p)) << x << " " << p;
            if (is_padic_fourth_power(i128(x), Place::finite(p))) {
                EXPECT_TRUE(is_padic_square(i128(x), Place::finite(p)));
            }
        }
    }
}

TEST(Hilbert, Examples) {
    for (u64 p : kSmallPlaces)
        for (i64 b : {-7, -1, 2, 15}) EXPECT_EQ(hilbert_symbol(1, b, place(p)), 1);
    EXPECT_EQ(hilbert_symbol(-1, -1, Place::real()), -1);
    EXPECT_EQ(hilbert_symbol(-1, -1, Place::finite(2)), -1);
    EXPECT_EQ(oracle::hilbert(-1, -1, 2), -1);
    EXPECT_EQ(invariant_from_symbol(1), InvariantValue::zero());
    EXPECT_EQ(invariant_from_symbol(-1), InvariantValue::half());
    EXPECT_EQ(invariant_from_symbol(hilbert_symbol(1, 5, Place::finite(5))), InvariantValue::zero());
}

TEST(Hilbert, OracleSmallRange) {
    for (u64 p : kSmallPlaces)
        for (i64 a = -12; a <= 12; ++a)
            for (i64 b = -12; b <= 12; ++b) {
                if (!a || !b) continue;
                ASSERT_EQ(hilbert_symbol(a, b, place(p)), oracle::hilbert(a, b, p)) << a << " " << b << " @" << p;
            }
}

TEST(Hilbert, Bimultiplicative) {
    std::mt19937_64 rng(7);
    auto r = [&] {
        i64 v = i64(rng() % 2000) + 1;
        return rng() % 2 ? v : -v;
    };
    for (u64 p : kSmallPlaces)
        for (int i = 0; i < 500; ++i) {
            i64 a = r(), a2 = r(), b = r(), c = r();
            EXPECT_EQ(hilbert_symbol(i128(a) * a2, b, place(p)),
                      hilbert_symbol(a, b, place(p)) * hilbert_symbol(a2, b, place(p)));
            EXPECT_EQ(hilbert_symbol(i128(a) * c * c, b, place(p)), hilbert_symbol(a, b, place(p)));
            EXPECT_EQ(hilbert_symbol(a, b, place(p)), hilbert_symbol(b, a, place(p)));
            EXPECT_EQ(hilbert_symbol(a, -a, place(p)), 1);
            EXPECT_EQ(hilbert_symbol(Rational(a, c < 0 ? -c : c), Rational(b), place(p)),
                      hilbert_symbol(i128(a) * (c < 0 ? -c : c), b, place(p)));
        }
}

TEST(Hilbert, ProductFormula) {
    std::mt19937_64 rng(13);
    for (int i = 0; i < 200; ++i) {
        i64 a = 0, b = 0;
        while (!a) a = i64(rng() % 101) - 50;
        while (!b) b = i64(rng() % 101) - 50;
        int prod = hilbert_symbol(a, b, Place::real());
        for (auto& pp : factorize(2 * a * b).factors) prod *= hilbert_symbol(a, b, Place::finite(u64(pp.prime)));
        EXPECT_EQ(prod, 1) << a << " " << b;
    }
}

TEST(SquareClass, Examples) {
    EXPECT_EQ(square_class(9), ThetaClass::PlusSquare);
    EXPECT_EQ(square_class(-4), ThetaClass::MinusSquare);
    EXPECT_EQ(square_class(-894348), ThetaClass::NonSquare);
    EXPECT_EQ(squarefree_part(-126), -14);
    EXPECT_EQ(squarefree_part(50), 2);
}

TEST(PlaceType, RejectsComposite) {
    EXPECT_THROW(Place::finite(9), std::invalid_argument);
    EXPECT_LT(Place::real(), Place::finite(2));
    EXPECT_LT(Place::finite(3), Place::finite(5));
}

TEST(Primality, AgreesWithTrialDivision) {
    for (u64 n = 0; n < 200000; ++n) ASSERT_EQ(arith::is_prime(n), oracle::trial_prime(n)) << n;
}
