#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "involute/catalog.hpp"
#include "involute/poisson.hpp"

using namespace involute;

namespace {

PoissonStructure su2() {
  return PoissonStructure(Chart{"x", "y", "z"}, {},
                          {{"x", "y", parse("z")}, {"y", "z", parse("x")}, {"z", "x", parse("y")}});
}

PoissonStructure deformed(double alpha, double beta, double gamma, double k) {
  return PoissonStructure(Chart{"x", "y", "z"}, {{"alpha", alpha}, {"beta", beta}, {"gamma", gamma}, {"k", k}},
                          {{"z", "x", parse("beta*y")}, {"y", "z", parse("alpha*x")},
                           {"x", "y", parse("gamma*sinh(k*z)/k")}});
}

// {f,g} from central differences of f and g and the evaluated bivector.
double numeric_bracket(const Expression& f, const Expression& g, const PoissonStructure& L, const Point& p) {
  const auto& names = L.chart().names();
  const double h = 1e-5;
  std::vector<double> df(names.size()), dg(names.size());
  for (std::size_t i = 0; i < names.size(); ++i) {
    Point up = p, down = p;
    up[names[i]] += h;
    down[names[i]] -= h;
    df[i] = (evaluate(f, up) - evaluate(f, down)) / (2 * h);
    dg[i] = (evaluate(g, up) - evaluate(g, down)) / (2 * h);
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < names.size(); ++i) {
    for (std::size_t j = 0; j < names.size(); ++j) sum += evaluate(L(i, j), p) * df[i] * dg[j];
  }
  return sum;
}

}  // namespace

TEST(Chart, Validation) {
  EXPECT_THROW(Chart({}), std::invalid_argument);
  EXPECT_THROW((Chart{"x", "x"}), std::invalid_argument);
  EXPECT_THROW((Chart{"1x"}), std::invalid_argument);
  const Chart c{"q", "p"};
  EXPECT_EQ(c.dimension(), 2u);
  EXPECT_EQ(c.index_of("p"), 1u);
  EXPECT_FALSE(c.index_of("z").has_value());
}

TEST(Structure, AntisymmetricStorage) {
  const auto L = su2();
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_TRUE(L(i, i).is_constant(0.0));
    for (std::size_t j = 0; j < 3; ++j) EXPECT_TRUE(simplify(L(i, j) + L(j, i)).is_constant(0.0));
  }
  // {z,x} = y is stored as Λ^{xz} = −y.
  EXPECT_DOUBLE_EQ(evaluate(L(0, 2), {{"y", 2.0}}), -2.0);
}

TEST(Structure, RejectsBadEntries) {
  EXPECT_THROW(PoissonStructure(Chart{"x", "y"}, {}, {{"x", "w", parse("1")}}), std::invalid_argument);
  EXPECT_THROW(PoissonStructure(Chart{"x", "y"}, {}, {{"x", "y", parse("t")}}), std::invalid_argument);
  EXPECT_THROW(PoissonStructure(Chart{"x", "y"}, {}, {{"x", "x", parse("1")}}), std::invalid_argument);
  EXPECT_THROW(PoissonStructure(Chart{"x", "y"}, {{"x", 1.0}}), std::invalid_argument);
}

TEST(Bracket, CoordinateBrackets) {
  const auto L = su2();
  EXPECT_EQ(to_string(bracket(parse("x"), parse("y"), L)), "z");
  EXPECT_EQ(to_string(bracket(parse("y"), parse("z"), L)), "x");
  EXPECT_EQ(to_string(bracket(parse("z"), parse("x"), L)), "y");
}

TEST(Bracket, SelfBracketIsLiteralZero) {
  const std::vector<const char*> fs{"x^2+y^2+z^2", "sin(x)*exp(y*z)", "x*y/(1+z^2)", "sqrt(1+x^2)*cosh(y)"};
  for (const auto* f : fs) EXPECT_TRUE(bracket(parse(f), parse(f), su2()).is_constant(0.0)) << f;
  const auto D = deformed(1, 1, 1, 0.5);
  for (const auto* f : fs) EXPECT_TRUE(bracket(parse(f), parse(f), D).is_constant(0.0)) << f;
}

TEST(Bracket, AntisymmetrySimplifiesToZero) {
  const auto L = deformed(1, -1, 1, 2);
  const Expression f = parse("x*z+sin(y)"), g = parse("y^2*exp(z)");
  EXPECT_TRUE(simplify(bracket(f, g, L) + bracket(g, f, L)).is_constant(0.0));
}

TEST(Bracket, CasimirOfSu2) {
  const auto L = su2();
  const auto points = L.sample();
  const auto r = is_casimir(parse("x^2+y^2+z^2"), L, points);
  EXPECT_EQ(r.points_evaluated, 100u);
  EXPECT_LT(r.max_residual, 1e-12);
}

TEST(Bracket, MatchesFiniteDifferenceOracle) {
  std::mt19937_64 rng(11);
  const auto L = deformed(1, 1, -1, 0.5);
  const std::vector<Expression> fs{parse("x*y*z"), parse("sin(x)+z^2"), parse("exp(y)*x"), parse("cosh(z)*y")};
  for (const auto& p : L.sample({.count = 50})) {
    const auto& f = fs[rng() % fs.size()];
    const auto& g = fs[rng() % fs.size()];
    const double exact = evaluate(bracket(f, g, L), p);
    EXPECT_NEAR(exact, numeric_bracket(f, g, L, p), 1e-6 * (1 + std::fabs(exact)));
  }
}

TEST(Bracket, LeibnizRule) {
  const auto L = deformed(2, 1, 1, 1);
  const Expression f = parse("x^2*z"), g = parse("sin(y)+x"), h = parse("exp(z/2)*y");
  const Expression lhs = bracket(f, g * h, L);
  const Expression rhs = g * bracket(f, h, L) + bracket(f, g, L) * h;
  const std::vector<Expression> diff{lhs - rhs};
  EXPECT_LT(max_abs_residual(diff, L.sample()).max_residual, 1e-9);
}

TEST(Bracket, RejectsForeignSymbols) { EXPECT_THROW((void)bracket(parse("w"), parse("x"), su2()), std::invalid_argument); }

TEST(Jacobi, Su2AndDeformedPass) {
  EXPECT_LT(jacobi_residual(su2(), su2().sample()).max_residual, 1e-9);
  const auto D = deformed(1, 1, 1, 0.5);
  const auto r = jacobi_residual(D, D.sample());
  EXPECT_EQ(r.points_evaluated, 100u);
  EXPECT_LT(r.max_residual, 1e-9);
}

// A 3-d bivector written as Λ^{yz}=v_x, Λ^{zx}=v_y, Λ^{xy}=v_z satisfies
// Jacobi iff v·curl v = 0.
TEST(Jacobi, NonPoissonMatrixDetected) {
  // v = (z, x, y): curl v = (1, 1, 1), v·curl v = x+y+z.
  const PoissonStructure bad(Chart{"x", "y", "z"}, {},
                             {{"y", "z", parse("z")}, {"z", "x", parse("x")}, {"x", "y", parse("y")}});
  const auto points = bad.sample();
  const auto r = jacobi_residual(bad, points);
  EXPECT_GT(r.max_residual, 0.1);
  double oracle = 0.0;
  for (const auto& p : points) oracle = std::max(oracle, std::fabs(p.at("x") + p.at("y") + p.at("z")));
  EXPECT_NEAR(r.max_residual, oracle, 1e-12);
}

TEST(Jacobi, CurlOrthogonalFieldIsPoisson) {
  // v = (y, y, y): curl v = (1, 0, −1), v·curl v = 0, so Jacobi holds.
  const PoissonStructure m(Chart{"x", "y", "z"}, {},
                           {{"x", "y", parse("y")}, {"y", "z", parse("y")}, {"z", "x", parse("y")}});
  EXPECT_LT(jacobi_residual(m, m.sample()).max_residual, 1e-12);
}

TEST(Jacobi, TwoDimensionalStructuresHaveNoTriples) {
  const auto T = canonical_structure({"q"}, {"p"}, CanonicalOrientation::QP);
  const auto r = jacobi_residual(T, T.sample());
  EXPECT_EQ(r.max_residual, 0.0);
  EXPECT_TRUE(r.passes(1e-9));
}

TEST(Casimir, DeformedCasimir) {
  for (double k : {0.5, 1.0, 2.0}) {
    const auto D = deformed(1, 1, 1, k);
    const auto r = is_casimir(parse("alpha*x^2+beta*y^2+4*gamma/k^2*sinh(k*z/2)^2"), D, D.sample());
    EXPECT_LT(r.max_residual, 1e-9) << k;
  }
}

TEST(Casimir, SinVersionOfTheBracketIsNotCompatible) {
  const PoissonStructure S(Chart{"x", "y", "z"}, {{"k", 1.0}},
                           {{"z", "x", parse("y")}, {"y", "z", parse("x")}, {"x", "y", parse("sin(k*z)/k")}});
  EXPECT_GT(is_casimir(parse("x^2+y^2+4/k^2*sinh(k*z/2)^2"), S, S.sample()).max_residual, 1e-3);
}

TEST(Casimir, ConstantsAreExactlyCasimir) {
  EXPECT_EQ(is_casimir(parse("3.5"), su2(), su2().sample()).max_residual, 0.0);
}

TEST(Casimir, NonCasimirDetected) { EXPECT_GT(is_casimir(parse("x+y"), su2(), su2().sample()).max_residual, 0.1); }

TEST(Product, RenamesAndBlocks) {
  const auto P = product(su2(), su2());
  EXPECT_EQ(P.chart().names(), (std::vector<std::string>{"x1", "y1", "z1", "x2", "y2", "z2"}));
  EXPECT_EQ(to_string(bracket(parse("x1"), parse("y1"), P)), "z1");
  EXPECT_TRUE(bracket(parse("x1"), parse("x2"), P).is_constant(0.0));
  EXPECT_TRUE(bracket(parse("x1*y1"), parse("z2^2"), P).is_constant(0.0));
}

TEST(Product, FactorCasimirsExtend) {
  const auto P = product(su2(), su2());
  const auto points = P.sample();
  EXPECT_LT(is_casimir(lift(parse("x^2+y^2+z^2"), su2().chart(), 0), P, points).max_residual, 1e-12);
  EXPECT_LT(is_casimir(lift(parse("x^2+y^2+z^2"), su2().chart(), 1), P, points).max_residual, 1e-12);
}

TEST(Product, ZeroFactorBlock) {
  const PoissonStructure zero(Chart{"u", "v"}, {});
  const auto P = product(su2(), zero);
  EXPECT_TRUE(P(3, 4).is_constant(0.0));
  EXPECT_TRUE(P(0, 3).is_constant(0.0));
  EXPECT_LT(jacobi_residual(P, P.sample()).max_residual, 1e-9);
}

TEST(Product, JacobiBoundedBySumOfFactors) {
  const PoissonStructure bad(Chart{"x", "y", "z"}, {},
                             {{"y", "z", parse("z")}, {"z", "x", parse("x")}, {"x", "y", parse("y")}});
  const auto P = product(su2(), bad);
  const auto points = P.sample();
  std::vector<Point> first, second;
  for (const auto& p : points) {
    first.push_back({{"x", p.at("x1")}, {"y", p.at("y1")}, {"z", p.at("z1")}});
    second.push_back({{"x", p.at("x2")}, {"y", p.at("y2")}, {"z", p.at("z2")}});
  }
  const double lhs = jacobi_residual(P, points).max_residual;
  const double rhs = jacobi_residual(su2(), first).max_residual + jacobi_residual(bad, second).max_residual;
  EXPECT_LE(lhs, rhs + 1e-12);
}

TEST(Product, ConflictingParametersRejected) {
  EXPECT_THROW((void)product(deformed(1, 1, 1, 1), deformed(1, 1, 1, 2)), std::invalid_argument);
  EXPECT_NO_THROW((void)product(deformed(1, 1, 1, 1), deformed(1, 1, 1, 1)));
}

TEST(Canonical, Orientation) {
  const auto qp = canonical_structure({"q"}, {"p"}, CanonicalOrientation::QP);
  const auto pq = canonical_structure({"q"}, {"p"}, CanonicalOrientation::PQ);
  EXPECT_EQ(evaluate(bracket(parse("q"), parse("p"), qp), {}), 1.0);
  EXPECT_EQ(evaluate(bracket(parse("p"), parse("q"), pq), {}), 1.0);
}

TEST(Sampling, DeterministicAndGuarded) {
  const auto L = su2();
  const auto a = L.sample({.count = 10, .seed = 42});
  const auto b = L.sample({.count = 10, .seed = 42});
  EXPECT_EQ(a, b);
  const std::vector<Expression> guards{parse("sqrt(1-x^2)")};
  for (const auto& p : L.sample({.count = 50}, guards)) EXPECT_LE(std::fabs(p.at("x")), 1.0);
  for (const auto& p : L.sample({.count = 10, .seed = 1, .lower = 0.0, .upper = 1.0})) {
    EXPECT_GE(p.at("x"), 0.0);
    EXPECT_LE(p.at("x"), 1.0);
  }
}

TEST(Sampling, GivesUpAfterRetries) {
  const std::vector<Expression> guards{parse("sqrt(-1-x^2)")};
  EXPECT_THROW((void)su2().sample({.count = 1, .max_retries = 10}, guards), std::runtime_error);
}

TEST(Residual, SkippedPointsReported) {
  const std::vector<Expression> e{parse("1/x")};
  const std::vector<Point> pts{{{"x", 0.0}}, {{"x", 2.0}}};
  const auto r = max_abs_residual(e, pts);
  EXPECT_EQ(r.points_evaluated, 1u);
  EXPECT_EQ(r.skipped.size(), 1u);
  EXPECT_DOUBLE_EQ(r.max_residual, 0.5);
  EXPECT_FALSE(max_abs_residual(e, std::vector<Point>{{{"x", 0.0}}}).passes(1.0));
}
