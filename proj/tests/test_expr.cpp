#include <cmath>
#include <string>

#include <gtest/gtest.h>

#include "corpus.hpp"
#include "fninv/expr.hpp"

using namespace fninv;
using fninv::testing::vec2;

namespace {

const char* kCubic = "f1 = x1^3 + x1\nf2 = x2^3 + x2";
const char* kSquare = "f1 = x1^2 - x2^2\nf2 = 2*x1*x2";
const char* kExp = "f1 = exp(x1)*cos(x2)\nf2 = exp(x1)*sin(x2)";
const char* kKink = "f1 = abs(x1) + 2*x1\nf2 = x2 - abs(x2 - 1)/4";

template <typename E>
E parse_error(const std::string& src) {
  try {
    expr::parse(src);
  } catch (const E& e) {
    return e;
  }
  ADD_FAILURE() << "expected a parse error for: " << src;
  throw std::logic_error("unreachable");
}

// Random expression text over x1..xn built from the grammar.
std::string random_expr(Rng& rng, std::size_t n, int depth) {
  const double u = rng.uniform();
  if (depth <= 0 || u < 0.25) {
    if (rng.uniform() < 0.6) return "x" + std::to_string(1 + static_cast<std::size_t>(rng.uniform() * n));
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", rng.uniform(-3, 3));
    return buf;
  }
  if (u < 0.45) {
    static const char* fns[] = {"sin", "cos", "tanh", "abs"};
    return std::string(fns[static_cast<int>(rng.uniform() * 4)]) + "(" + random_expr(rng, n, depth - 1) + ")";
  }
  if (u < 0.55) return "-" + random_expr(rng, n, depth - 1);
  if (u < 0.65) return "(" + random_expr(rng, n, depth - 1) + ")^" + std::to_string(static_cast<int>(rng.uniform() * 4));
  static const char ops[] = {'+', '-', '*'};
  return "(" + random_expr(rng, n, depth - 1) + " " + ops[static_cast<int>(rng.uniform() * 3)] + " " +
         random_expr(rng, n, depth - 1) + ")";
}

std::string random_definition(Rng& rng, std::size_t n) {
  std::string s;
  for (std::size_t k = 1; k <= n; ++k) {
    // mention every variable so the definition is square
    s += "f" + std::to_string(k) + " = " + random_expr(rng, n, 4) + " + 0*x" + std::to_string(k) + "\n";
  }
  return s;
}

}  // namespace

TEST(Expr, ParsesCorpusDefinitions) {
  const auto cubic = expr::parse(kCubic);
  EXPECT_EQ(cubic.n, 2u);
  EXPECT_EQ(expr::evaluate(cubic, vec2(1, 1)), vec2(2, 2));
  const auto sq = expr::parse(kSquare);
  EXPECT_EQ(sq.n, 2u);
  EXPECT_EQ(expr::evaluate(sq, vec2(-1, 0)), vec2(1, 0));
}

TEST(Expr, DanglingOperatorPosition) {
  const auto e = parse_error<SyntaxError>("f1 = x1 + ");
  EXPECT_EQ(e.line(), 1u);
  EXPECT_EQ(e.column(), 10u);
  EXPECT_FALSE(e.expected().empty());
}

TEST(Expr, ErrorKinds) {
  EXPECT_EQ(parse_error<UnknownIdentifier>("f1 = y1").name(), "y1");
  EXPECT_EQ(parse_error<UnknownIdentifier>("f1 = x0").column(), 6u);
  parse_error<UnknownIdentifier>("f1 = foo(x1)");
  parse_error<ArityError>("f1 = sin(x1, x1)");
  parse_error<ArityError>("f1 = sin()");
  EXPECT_EQ(parse_error<SyntaxError>("f1 = x1\nf1 = x1").line(), 2u);
  parse_error<SyntaxError>("f1 = x1^x1");
  parse_error<SyntaxError>("# only a comment\n\n");
  parse_error<SyntaxError>("f1 = (x1");
  parse_error<SyntaxError>("f1 = x1 $ 2");
  EXPECT_THROW(expr::parse("f1 = x1 + x2"), NonSquareDefinition);
  EXPECT_THROW(expr::parse("f1 = x1\nf3 = x3\nf4 = x2"), NonSquareDefinition);
  EXPECT_THROW(expr::parse_file("/nonexistent/map.txt"), Error);
}

TEST(Expr, CommentsBlankLinesAndCrlf) {
  const auto d = expr::parse("# header\r\n\r\nf2 = x1  # trailing\r\nf1 = -x2\r\n");
  EXPECT_EQ(d.n, 2u);
  EXPECT_EQ(expr::evaluate(d, vec2(3, 4)), vec2(-4, 3));
}

TEST(Expr, PrecedenceAndAssociativity) {
  const auto v = [](const char* e) { return expr::evaluate(expr::parse(std::string("f1 = ") + e + " + 0*x1"), Vector::Zero(1))[0]; };
  EXPECT_DOUBLE_EQ(v("2 + 3*4"), 14);
  EXPECT_DOUBLE_EQ(v("2 - 3 - 4"), -5);
  EXPECT_DOUBLE_EQ(v("8 / 4 / 2"), 1);
  EXPECT_DOUBLE_EQ(v("2^3^2"), 512);
  EXPECT_DOUBLE_EQ(v("-2^2"), -4);
  EXPECT_DOUBLE_EQ(v("2^-1"), 0.5);
  EXPECT_DOUBLE_EQ(v("(1+2)*3"), 9);
  EXPECT_DOUBLE_EQ(v("1.5e1"), 15);
}

TEST(Expr, AdExamples) {
  const auto c = expr::eval_ad(expr::parse(kCubic), vec2(1, 1));
  EXPECT_EQ(c.value, vec2(2, 2));
  EXPECT_EQ(c.jacobian.entries, (Matrix(2, 2) << 4, 0, 0, 4).finished());
  const auto s = expr::eval_ad(expr::parse(kSquare), vec2(0, 0));
  EXPECT_EQ(s.value, vec2(0, 0));
  EXPECT_EQ(s.jacobian.entries, Matrix::Zero(2, 2));
  const auto e = expr::eval_ad(expr::parse(kExp), vec2(0, 0));
  EXPECT_EQ(e.value, vec2(1, 0));
  EXPECT_EQ(e.jacobian.entries, Matrix::Identity(2, 2));
  // against the hand-written Jacobian of e^z elsewhere
  const Vector x = vec2(0.3, -1.2);
  EXPECT_LE(relative_discrepancy(expr::eval_ad(expr::parse(kExp), x).jacobian.entries,
                                 maps::complex_exp().jacobian(x).entries),
            1e-15);
}

TEST(Expr, AbsKinkFlag) {
  const auto d = expr::parse(kKink);
  EXPECT_TRUE(expr::eval_ad(d, vec2(0, 0.5)).nondifferentiable);
  EXPECT_FALSE(expr::eval_ad(d, vec2(0.1, 0.5)).nondifferentiable);
  EXPECT_EQ(expr::eval_ad(d, vec2(0, 0.5)).jacobian.entries(0, 0), 2.0);
  const auto f = expr::to_vector_map(d, "kink");
  EXPECT_TRUE(f.has_kink_information());
  EXPECT_TRUE(f.nondifferentiable_at(vec2(0.3, 1)));
}

TEST(Expr, DomainErrors) {
  EXPECT_THROW(expr::evaluate(expr::parse("f1 = log(x1)"), Vector::Constant(1, -1)), DomainError);
  EXPECT_THROW(expr::evaluate(expr::parse("f1 = sqrt(x1)"), Vector::Constant(1, -1)), DomainError);
  EXPECT_THROW(expr::evaluate(expr::parse("f1 = x1^0.5"), Vector::Constant(1, -1)), DomainError);
  EXPECT_DOUBLE_EQ(expr::evaluate(expr::parse("f1 = x1^3"), Vector::Constant(1, -2))[0], -8);
  EXPECT_THROW(expr::evaluate(expr::parse("f1 = 1/x1"), Vector::Constant(1, 0)), NonFiniteOutput);
}

TEST(Expr, AdMatchesDifferencesOnCorpusFiles) {
  for (const char* src : {kCubic, kSquare, kExp, kKink}) {
    const auto d = expr::parse(src);
    const auto f = expr::to_vector_map(d, "corpus");
    double worst = 0.0;
    for (const auto& x : fninv::testing::box_points(2, 100, -2, 2, 21)) {
      if (std::abs(x[0]) < 1e-6 || std::abs(x[1] - 1) < 1e-6) continue;
      worst = std::max(worst, relative_discrepancy(f.jacobian(x).entries, f.central_differences(x)));
    }
    EXPECT_LE(worst, 1e-5) << src;
  }
}

TEST(Expr, PrintParseRoundTrip) {
  Rng rng(2024, 1);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + static_cast<std::size_t>(rng.uniform() * 3);
    const auto d = expr::parse(random_definition(rng, n));
    const auto back = expr::parse(expr::print(d));
    ASSERT_EQ(back.n, d.n);
    EXPECT_EQ(expr::print(back), expr::print(d));
    for (const auto& x : fninv::testing::box_points(n, 100, -2, 2, 100 + trial)) {
      const Vector a = expr::evaluate(d, x);
      const Vector b = expr::evaluate(back, x);
      for (Eigen::Index i = 0; i < a.size(); ++i)
        EXPECT_LE(std::abs(a[i] - b[i]), 1e-15 * std::max(1.0, std::abs(a[i])));
    }
  }
}

TEST(Expr, FuzzedInputsNeverCrash) {
  static const char* toks[] = {"f1", "f2", "=", "x1", "x2", "x0", "x99", "+", "-", "*", "/", "^", "(", ")", ",",
                               "sin", "abs", "1", "2.5", "+ x1", "* 2", "1e400", "#", "\n", " ", "@", "f", "=="};
  Rng rng(99, 2);
  std::size_t parsed = 0;
  for (int trial = 0; trial < 5000; ++trial) {
    // half the streams are mutations of a valid definition
    std::string s = trial % 2 ? "f1 = x1 " : "";
    const int len = 1 + static_cast<int>(rng.uniform() * 12);
    for (int i = 0; i < len; ++i) {
      s += toks[static_cast<int>(rng.uniform() * (sizeof toks / sizeof *toks))];
      if (rng.uniform() < 0.5) s += ' ';
    }
    try {
      expr::parse(s);
      ++parsed;
    } catch (const ParseError& e) {
      EXPECT_GE(e.line(), 1u);
      EXPECT_GE(e.column(), 1u);
    } catch (const NonSquareDefinition&) {
    }
  }
  // the point is totality, but some streams should be valid
  EXPECT_GT(parsed, 0u);
}
