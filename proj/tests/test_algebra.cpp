#include <gtest/gtest.h>

#include "gpcentaur/algebra.hpp"
#include "gpcentaur/units.hpp"

using namespace gpc;

namespace {

Monomial var(const std::string& k, const std::string& u = "") { return Monomial::variable(k, parse_units(u)); }

}  // namespace

TEST(Units, ParseCompound) {
  const Units u = parse_units("kg*m/s^2");
  EXPECT_EQ(u.dim, parse_units("N").dim);
  EXPECT_DOUBLE_EQ(u.scale, 1.0);
  EXPECT_DOUBLE_EQ(parse_units("km/hr").scale, 1000.0 / 3600.0);
  EXPECT_DOUBLE_EQ(parse_units("ft^2").scale, 0.3048 * 0.3048);
  EXPECT_EQ(to_string(parse_units("N").dim), "m*kg*s^-2");
  EXPECT_EQ(to_string(parse_units("").dim), "1");
}

TEST(Units, FractionalExponents) {
  const Units u = parse_units("m^0.5");
  EXPECT_EQ(to_string(u.dim), "m^1/2");
}

TEST(Units, RejectUnknown) {
  EXPECT_THROW(parse_units("furlong"), Error);
  EXPECT_THROW(parse_units("m^"), Error);
  EXPECT_THROW(parse_units("m*/s"), Error);
}

TEST(Monomial, CoefficientMustBePositive) {
  EXPECT_THROW(Monomial(0.0), Error);
  EXPECT_THROW(Monomial(-1.0), Error);
  EXPECT_THROW(Monomial(std::numeric_limits<double>::infinity()), Error);
  try {
    Monomial(-2.0);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ZeroOrNegativeCoefficient);
  }
}

TEST(Monomial, MultiplyDividePower) {
  const Monomial x = var("x"), y = var("y");
  const Monomial m = Monomial(3.0) * x * mono_pow(y, 2);
  EXPECT_DOUBLE_EQ(m.coefficient(), 3.0);
  EXPECT_DOUBLE_EQ(m.exponent("x"), 1.0);
  EXPECT_DOUBLE_EQ(m.exponent("y"), 2.0);
  const Monomial q = m / x;
  EXPECT_TRUE(q.exponents().count("x") == 0);  // zero exponents are dropped
  EXPECT_EQ(mono_pow(m, 0.5).exponent("y"), 1.0);
  EXPECT_DOUBLE_EQ(mono_pow(m, 0.5).coefficient(), std::sqrt(3.0));
}

TEST(Monomial, DimensionsCombine) {
  const Monomial L = var("L", "m"), t = var("t", "s");
  EXPECT_EQ((L / t).dimension(), parse_units("m/s").dim);
  EXPECT_EQ(mono_pow(L, 2).dimension(), parse_units("m^2").dim);
  EXPECT_DOUBLE_EQ(var("d", "cm").coefficient(), 0.01);
}

TEST(Posynomial, AddCombinesLikeTerms) {
  const Monomial x = var("x"), y = var("y");
  const Posynomial p = posy_add(posy_add(x, y), Monomial(2.0) * x);
  ASSERT_EQ(p.size(), 2u);
  const Posynomial expected(std::vector<Monomial>{Monomial(3.0) * x, y});
  EXPECT_EQ(p, expected);
}

TEST(Posynomial, AdditionOrderIrrelevant) {
  const Monomial x = var("x"), y = var("y"), z = var("z");
  EXPECT_EQ(posy_add(posy_add(x, y), z), posy_add(z, posy_add(y, x)));
}

TEST(Posynomial, DimensionMismatchOnAdd) {
  try {
    posy_add(var("L", "m"), var("t", "s"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
  }
}

TEST(Posynomial, MultiplyAndIntegerPower) {
  const Monomial x = var("x"), y = var("y");
  const Posynomial s = posy_add(x, y);
  const Posynomial sq = posy_pow(s, 2);
  ASSERT_EQ(sq.size(), 3u);
  EXPECT_EQ(sq, posy_add(posy_add(mono_pow(x, 2), mono_pow(y, 2)), Monomial(2.0) * x * y));
  EXPECT_EQ(posy_pow(s, 0), Posynomial(Monomial(1.0)));
  EXPECT_EQ(posy_mul(s, Posynomial(Monomial(1.0))), s);
}

TEST(Posynomial, DivideByMonomial) {
  const Monomial x = var("x"), y = var("y");
  const Posynomial p = posy_div(posy_add(x, y), x);
  EXPECT_EQ(p, posy_add(Monomial(1.0), y / x));
}

TEST(Normalize, LessEqual) {
  const Monomial x = var("x"), y = var("y");
  const NormalizedConstraint c = normalize(posy_add(x, y), Relation::LessEqual, Monomial(2.0));
  EXPECT_FALSE(c.is_equality());
  EXPECT_EQ(c.body, posy_add(Monomial(0.5) * x, Monomial(0.5) * y));
}

TEST(Normalize, GreaterEqualFlips) {
  const Monomial x = var("x"), y = var("y");
  const NormalizedConstraint c = normalize(x * y, Relation::GreaterEqual, Monomial(1.0));
  EXPECT_EQ(c.body, Posynomial(mono_pow(x * y, -1)));
}

TEST(Normalize, EqualityNeedsMonomials) {
  const Monomial x = var("x"), y = var("y");
  const NormalizedConstraint c = normalize(x, Relation::Equal, Monomial(2.0) * y);
  EXPECT_TRUE(c.is_equality());
  EXPECT_EQ(c.body, Posynomial(Monomial(0.5) * x / y));
  EXPECT_THROW(normalize(posy_add(x, y), Relation::Equal, x), Error);
}

TEST(Normalize, NonConvexRejected) {
  const Monomial x = var("x"), y = var("y");
  try {
    normalize(posy_add(x, y), Relation::GreaterEqual, Monomial(1.0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonConvexRelation);
  }
  EXPECT_THROW(normalize(x, Relation::LessEqual, posy_add(x, y)), Error);
}

TEST(Normalize, DimensionsChecked) {
  EXPECT_THROW(normalize(var("L", "m"), Relation::LessEqual, Monomial(1.0)), Error);
  EXPECT_NO_THROW(normalize(var("L", "m"), Relation::LessEqual, var("M", "km")));
}

TEST(Format, ShortestRoundTrip) {
  for (double v : {1.0, 0.1, 1e-300, 123456.789, 1.0 / 3.0, 4.94065645841247e-324}) {
    EXPECT_EQ(std::strtod(format_number(v).c_str(), nullptr), v);
  }
  EXPECT_EQ(format_number(4.0), "4");
}
