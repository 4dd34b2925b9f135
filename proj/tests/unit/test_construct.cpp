#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "involute/catalog.hpp"
#include "involute/construct.hpp"

using namespace involute;

namespace {

PoissonStructure su2() {
  return PoissonStructure(Chart{"x", "y", "z"}, {},
                          {{"x", "y", parse("z")}, {"y", "z", parse("x")}, {"z", "x", parse("y")}});
}

PoissonMap addition() {
  const auto M = su2();
  return PoissonMap("add", product(M, M), M,
                    std::map<std::string, Expression>{{"x", parse("x1+x2")}, {"y", parse("y1+y2")}, {"z", parse("z1+z2")}});
}

FunctionFamily su2_seed() {
  FunctionFamily seed(su2());
  seed.add({"c", parse("x^2+y^2+z^2"), Provenance::Seed});
  seed.add({"f", parse("z"), Provenance::Seed});
  return seed;
}

ChainSpec su2_chain() {
  ChainSpec spec;
  spec.base = su2();
  spec.phi = addition();
  spec.base_casimirs = {{"c", parse("x^2+y^2+z^2")}};
  return spec;
}

double max_abs_difference(const Expression& a, const Expression& b, std::span<const Point> points) {
  const std::vector<Expression> d{a - b};
  return max_abs_residual(d, points).max_residual;
}

}  // namespace

TEST(PoissonMap, AdditionAccepted) {
  const auto m = addition();
  const auto r = verify_poisson_map(m, m.sample_source());
  EXPECT_EQ(r.points_evaluated, 100u);
  EXPECT_LT(r.max_residual, 1e-9);
}

TEST(PoissonMap, ScaledMapRejected) {
  const auto M = su2();
  const std::vector<Expression> comps{parse("x"), parse("y"), parse("2*z")};
  EXPECT_THROW(PoissonMap("scale", M, M, comps), VerificationError);
  const PoissonMap deferred("scale", M, M, comps, PoissonMap::Check::Defer);
  const auto r = verify_poisson_map(deferred, deferred.sample_source());
  EXPECT_GE(r.max_residual, 1.0);
  // {x,y}∘m − Λ^{xy}∘m = z − 2z, so the residual is max |z| over the sample.
  double oracle = 0.0;
  for (const auto& p : deferred.sample_source()) oracle = std::max(oracle, std::fabs(p.at("z")));
  EXPECT_NEAR(r.max_residual, oracle, 1e-12);
}

TEST(PoissonMap, ComponentValidation) {
  const auto M = su2();
  EXPECT_THROW(PoissonMap("short", M, M, std::vector<Expression>{parse("x")}), std::invalid_argument);
  EXPECT_THROW(PoissonMap("foreign", M, M, std::vector<Expression>{parse("x"), parse("y"), parse("w")}),
               std::invalid_argument);
  EXPECT_THROW(PoissonMap("missing", M, M, std::map<std::string, Expression>{{"x", parse("x")}}),
               std::invalid_argument);
}

TEST(Pullback, CasimirThroughAddition) {
  const Expression pulled = pullback(parse("x^2+y^2+z^2"), addition());
  const Expression expected = parse("(x1+x2)^2+(y1+y2)^2+(z1+z2)^2");
  EXPECT_LT(max_abs_difference(pulled, expected, addition().sample_source()), 1e-12);
}

TEST(Pullback, IdentityMap) {
  EXPECT_EQ(to_string(pullback(parse("x"), identity_map(su2()))), "x");
}

TEST(Pullback, ForeignVariableRejected) {
  EXPECT_THROW((void)pullback(parse("x1"), addition()), std::invalid_argument);
}

TEST(Pullback, IsAnAlgebraMorphism) {
  const auto m = addition();
  const auto points = m.sample_source();
  const Expression f = parse("x*y"), g = parse("sin(z)"), h = parse("exp(x/3)");
  const Expression lhs = pullback(f * g + h, m);
  const Expression rhs = pullback(f, m) * pullback(g, m) + pullback(h, m);
  EXPECT_LT(max_abs_difference(lhs, rhs, points), 1e-12);
}

TEST(Pullback, BracketsPullBack) {
  const auto m = addition();
  const auto points = m.sample_source();
  const std::vector<Expression> fs{parse("x*y"), parse("sin(z)+x"), parse("y^2*z")};
  for (const auto& f : fs) {
    for (const auto& g : fs) {
      const Expression lhs = bracket(pullback(f, m), pullback(g, m), m.source());
      const Expression rhs = pullback(bracket(f, g, m.target()), m);
      EXPECT_LT(max_abs_difference(lhs, rhs, points), 1e-8);
    }
  }
}

TEST(ProductMap, SingleMapIsItself) {
  const std::vector<PoissonMap> one{addition()};
  const auto p = product_map(one);
  EXPECT_EQ(p.name(), "add");
  EXPECT_EQ(p.source().chart(), addition().source().chart());
}

TEST(ProductMap, OfTwoAdditions) {
  const std::vector<PoissonMap> two{addition(), addition()};
  const auto p = product_map(two);
  EXPECT_EQ(p.source().dimension(), 12u);
  EXPECT_EQ(p.target().dimension(), 6u);
  EXPECT_EQ(to_string(p.component("x2")), "x12+x22");
  EXPECT_LT(verify_poisson_map(p, p.sample_source()).max_residual, 1e-9);
}

TEST(Compose, AdditionAfterProduct) {
  const std::vector<PoissonMap> two{addition(), addition()};
  const auto c = compose(addition(), product_map(two));
  EXPECT_EQ(c.name(), "add.addxadd");
  EXPECT_LT(verify_poisson_map(c, c.sample_source()).max_residual, 1e-9);
  EXPECT_THROW((void)compose(addition(), addition()), std::invalid_argument);
}

TEST(Family, DeduplicatesByPrintedForm) {
  FunctionFamily f(su2());
  EXPECT_TRUE(f.add({"a", parse("x^2"), Provenance::Seed}));
  EXPECT_FALSE(f.add({"b", parse("x^2"), Provenance::Seed}));
  EXPECT_TRUE(f.add({"c", parse("x*x"), Provenance::Seed}));
  EXPECT_EQ(f.size(), 2u);
  EXPECT_THROW(f.add({"d", parse("w"), Provenance::Seed}), std::invalid_argument);
}

TEST(Involution, SingleMemberIsZero) {
  FunctionFamily f(su2());
  f.add({"z", parse("z"), Provenance::Seed});
  const auto r = check_involution(f, su2().sample());
  EXPECT_EQ(r.max_residual, 0.0);
  EXPECT_TRUE(r.passes(1e-9));
}

TEST(Involution, NonCommutingDetected) {
  FunctionFamily f(su2());
  f.add({"x", parse("x"), Provenance::Seed});
  f.add({"y", parse("y"), Provenance::Seed});
  EXPECT_GT(check_involution(f, su2().sample()).max_residual, 0.1);
}

TEST(ExtendFamily, Su2DepthTwo) {
  const auto m = addition();
  const std::vector<NamedFunction> casimirs{{"c@1", parse("x1^2+y1^2+z1^2")}, {"c@2", parse("x2^2+y2^2+z2^2")}};
  const auto F2 = extend_family(su2_seed(), m, casimirs);
  ASSERT_EQ(F2.size(), 4u);
  const auto points = m.sample_source();
  EXPECT_LT(max_abs_difference(F2.find("c.add")->body, parse("(x1+x2)^2+(y1+y2)^2+(z1+z2)^2"), points), 1e-12);
  EXPECT_LT(max_abs_difference(F2.find("f.add")->body, parse("z1+z2"), points), 1e-15);
  EXPECT_EQ(F2.find("c@1")->provenance, Provenance::CasimirFactor);
  EXPECT_EQ(F2.find("f.add")->provenance, Provenance::PulledBack);
  EXPECT_LT(check_involution(F2, points).max_residual, 1e-9);
  EXPECT_EQ(F2.path(), std::vector<std::string>{"add"});
}

TEST(ExtendFamily, EmptySeedGivesCasimirsOnly) {
  const std::vector<NamedFunction> casimirs{{"c@1", parse("x1^2+y1^2+z1^2")}};
  const auto F = extend_family(FunctionFamily(su2()), addition(), casimirs);
  ASSERT_EQ(F.size(), 1u);
  EXPECT_EQ(F[0].name, "c@1");
}

TEST(ExtendFamily, RefusesNonCasimir) {
  const std::vector<NamedFunction> casimirs{{"bogus", parse("x1")}};
  try {
    (void)extend_family(su2_seed(), addition(), casimirs);
    FAIL();
  } catch (const VerificationError& e) {
    EXPECT_NE(std::string(e.what()).find("bogus"), std::string::npos);
  }
}

TEST(BuildChain, DepthOneEchoesSeed) {
  const auto F = build_chain(su2_seed(), su2_chain(), 1);
  ASSERT_EQ(F.size(), 2u);
  EXPECT_EQ(to_string(F[0].body), "x^2+y^2+z^2");
}

TEST(BuildChain, DepthThreeInvolutionAndHamiltonian) {
  const auto F = build_chain(su2_seed(), su2_chain(), 3);
  EXPECT_EQ(F.structure().dimension(), 9u);
  EXPECT_EQ(F.path(), (std::vector<std::string>{"Phi_1", "Phi_2"}));
  const auto points = F.structure().sample();
  EXPECT_LT(check_involution(F, points).max_residual, 1e-9);
  const auto* total = F.find("c.Phi_1.Phi_2");
  ASSERT_NE(total, nullptr);
  const Expression h3 = 0.5 * total->body - 0.5 * (parse("x1^2+y1^2+z1^2") + parse("x2^2+y2^2+z2^2") +
                                                   parse("x3^2+y3^2+z3^2"));
  const Expression expected = parse("x1*x2+y1*y2+z1*z2+x1*x3+y1*y3+z1*z3+x2*x3+y2*y3+z2*z3");
  EXPECT_LT(max_abs_difference(h3, expected, points), 1e-10);
  EXPECT_EQ(F.size(), 6u);
  EXPECT_EQ(independence_rank(F, points), 6u);
}

TEST(BuildChain, FailingStageIsNamed) {
  ChainSpec spec = su2_chain();
  spec.base_casimirs = {{"x", parse("x")}};
  try {
    (void)build_chain(su2_seed(), spec, 2);
    FAIL();
  } catch (const VerificationError& e) {
    EXPECT_EQ(e.stage(), "stage 2");
  }
}

TEST(Rank, ProportionalGradients) {
  FunctionFamily f(su2());
  f.add({"c", parse("x^2+y^2+z^2"), Provenance::Seed});
  f.add({"2c", parse("2*(x^2+y^2+z^2)"), Provenance::Seed});
  EXPECT_EQ(independence_rank(f, su2().sample()), 1u);
}

TEST(Rank, CompletePivotingOracle) {
  // Rank-2 3×3 matrix: third row = first + second.
  EXPECT_EQ(numeric_rank({1, 2, 3, 4, 5, 6, 5, 7, 9}, 3, 3, 1e-8), 2u);
  EXPECT_EQ(numeric_rank({1, 0, 0, 1}, 2, 2, 1e-8), 2u);
  EXPECT_EQ(numeric_rank({0, 0, 0, 0}, 2, 2, 1e-8), 0u);
  EXPECT_EQ(numeric_rank({1, 1e-12}, 1, 2, 1e-8), 1u);
  EXPECT_EQ(numeric_rank({1, 0, 0, 1e-10}, 2, 2, 1e-8), 1u);
}

TEST(Rank, RequiresPoints) {
  EXPECT_THROW((void)independence_rank(su2_seed(), std::vector<Point>{}), std::invalid_argument);
}

TEST(LeafEmbedding, FactorCasimirsAreConstantOnLeaves) {
  const auto sys = catalog::get_system("su2");
  const auto& pair = sys.map("leafxleaf");
  const auto points = sys.sample("leafxleaf");
  for (std::size_t f = 0; f < 2; ++f) {
    const Expression pulled = pullback(lift(parse("x^2+y^2+z^2"), su2().chart(), f), pair);
    std::vector<Expression> grad = gradient(pulled, pair.source().chart().names());
    EXPECT_LT(max_abs_residual(grad, points).max_residual, 1e-9);
  }
}
