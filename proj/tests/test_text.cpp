#include <gtest/gtest.h>

#include <random>

#include "support.hpp"

using namespace gpc;
using namespace gpc::testing;

TEST(Expr, CorpusLowersToHandBuiltAlgebra) {
  const ExprFixture f;
  const auto corpus = expression_corpus();
  ASSERT_EQ(corpus.size(), 15u);
  for (const auto& c : corpus) {
    const Posynomial got = lower(parse_expr(c.src), f.scope());
    EXPECT_EQ(got, c.expected(f)) << c.src << " lowered to " << to_string(got);
  }
}

TEST(Expr, PrecedenceAndAssociativity) {
  const ExprFixture f;
  EXPECT_EQ(lower(parse_expr("x/y/z"), f.scope()), Posynomial(f.X() / f.Y() / f.Z()));
  EXPECT_EQ(lower(parse_expr("2*x^2"), f.scope()), Posynomial(Monomial(2.0) * mono_pow(f.X(), 2)));
  EXPECT_EQ(lower(parse_expr("x + y*z"), f.scope()), posy_add(f.X(), f.Y() * f.Z()));
}

TEST(Expr, UnitsFoldIntoCoefficient) {
  const ExprFixture f;
  const Posynomial p = lower(parse_expr("L"), f.scope());
  EXPECT_DOUBLE_EQ(p.as_monomial().coefficient(), 0.01);
  EXPECT_EQ(p.dimension(), parse_units("m").dim);
}

TEST(Expr, SyntaxErrorsArePositioned) {
  try {
    parse_expr("x + * y");
    FAIL() << "expected a syntax error";
  } catch (const SyntaxError& e) {
    EXPECT_EQ(e.line(), 1);
    EXPECT_EQ(e.column(), 5);
    EXPECT_FALSE(e.expected().empty());
  }
  EXPECT_THROW(parse_expr("(x + y"), SyntaxError);
  EXPECT_THROW(parse_expr("x^y"), SyntaxError);
  EXPECT_THROW(parse_expr(""), SyntaxError);
}

TEST(Expr, SubtractionRejected) {
  try {
    parse_expr("x - y");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SubtractionNotRepresentable);
  }
}

TEST(Expr, NonGPFormsRejected) {
  const ExprFixture f;
  auto code_of = [&](const std::string& src) {
    try {
      lower_constraint(src, f.scope());
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::InvalidArgument;
  };
  EXPECT_EQ(code_of("x/(y + z) <= 1"), ErrorCode::NotGPRepresentable);
  EXPECT_EQ(code_of("x + y >= z + 1"), ErrorCode::NonConvexRelation);
  EXPECT_EQ(code_of("x + y = z"), ErrorCode::NonConvexRelation);
  EXPECT_EQ(code_of("L <= x"), ErrorCode::DimensionMismatch);
  EXPECT_EQ(code_of("w <= 1"), ErrorCode::UnknownVariable);
  EXPECT_EQ(code_of("v[3] <= 1"), ErrorCode::ShapeMismatch);
}

TEST(Expr, FuzzNeverCrashes) {
  std::mt19937_64 rng(20240601);
  const std::string alphabet = "xyzv[]()+-*/^<>=.,;0123456789eE \t\n_abc\x01\xff";
  std::uniform_int_distribution<std::size_t> len(0, 24), pick(0, alphabet.size() - 1);
  std::uniform_int_distribution<int> byte(0, 255), mode(0, 3);
  int parsed = 0, rejected = 0;
  for (int i = 0; i < 100000; ++i) {
    std::string s;
    const std::size_t n = len(rng);
    const bool raw = mode(rng) == 0;
    for (std::size_t k = 0; k < n; ++k) s += raw ? static_cast<char>(byte(rng)) : alphabet[pick(rng)];
    try {
      parse_expr(s);
      ++parsed;
    } catch (const Error&) {
      ++rejected;
    }
  }
  EXPECT_EQ(parsed + rejected, 100000);
  EXPECT_GT(parsed, 0);
}

TEST(Document, CorpusRoundTrips) {
  const auto docs = document_corpus();
  ASSERT_GE(docs.size(), 20u);
  for (const auto& text : docs) {
    const ModelDocument d = parse_gpm(text);
    EXPECT_EQ(parse_gpm(to_gpm(d)), d) << text;
    EXPECT_EQ(from_json(nlohmann::json::parse(to_json(d).dump())), d) << text;
    EXPECT_EQ(to_gpm(parse_gpm(to_gpm(d))), to_gpm(d));
  }
}

TEST(Document, CorpusLoads) {
  for (const auto& text : document_corpus()) {
    if (text.find("model Empty") != std::string::npos) continue;
    EXPECT_NO_THROW(load_model(text)) << text;
  }
}

TEST(Document, JsonAndLineFormatsLoadIdentically) {
  const std::string text = read_file(demo_path("airplane.gpm"));
  const LoadedModel a = load_model(text);
  const LoadedModel b = load_model(to_json(parse_gpm(text)).dump());
  EXPECT_EQ(a.document, b.document);
  EXPECT_NEAR(analyze(a).objective(), analyze(b).objective(), 0.0);
}

TEST(Document, ValidationCollectsIssues) {
  const std::string bad = "model Bad\n var x\n var x\n objective minimize y\n constraint x - 1 <= 2\nend\n";
  try {
    load_model(bad);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_GE(e.issues().size(), 2u);
  } catch (const Error& e) {
    ADD_FAILURE() << e.what();
  }
}

TEST(Document, LineFormatErrorsCarryLine) {
  try {
    parse_gpm("model A\n var x ; bogus\nend\n");
    FAIL();
  } catch (const SyntaxError& e) {
    EXPECT_EQ(e.line(), 2);
  } catch (const Error& e) {
    SUCCEED() << e.what();
  }
  EXPECT_THROW(parse_gpm("model A\n var x\n"), Error);
  EXPECT_THROW(parse_gpm("var x\n"), Error);
}

TEST(Document, MissingObjectiveRejected) {
  EXPECT_THROW(load_model("model A\n var x\n constraint x >= 1\nend\n"), Error);
}
