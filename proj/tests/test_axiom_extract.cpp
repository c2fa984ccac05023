#include <gtest/gtest.h>

#include <algorithm>
#include <numbers>
#include <random>
#include <sstream>

#include "acone/axiom_extract.hpp"

namespace {

using namespace acone;
constexpr double kPi = std::numbers::pi;

RelationEmbeddings uniform(std::vector<std::pair<double, double>> rel, std::size_t dim) {
  RelationEmbeddings e;
  e.dim = dim;
  for (auto [axis, aperture] : rel) {
    e.axis.emplace_back(dim, axis);
    e.aperture.emplace_back(dim, aperture);
  }
  return e;
}

bool has(const std::vector<Axiom>& axioms, AxiomForm f, std::vector<std::size_t> rels) {
  return std::any_of(axioms.begin(), axioms.end(), [&](const Axiom& a) { return a.form == f && a.relations == rels; });
}

const Axiom& get(const std::vector<Axiom>& axioms, AxiomForm f, std::vector<std::size_t> rels) {
  for (const auto& a : axioms) {
    if (a.form == f && a.relations == rels) return a;
  }
  throw std::runtime_error("axiom not found");
}

RelationEmbeddings random_embeddings(std::mt19937_64& rng, std::size_t R, std::size_t dim) {
  std::uniform_real_distribution<double> ang(-kPi, kPi), ap(0.0, 0.6);
  std::uniform_int_distribution<int> snap(0, 3);
  RelationEmbeddings e;
  e.dim = dim;
  for (std::size_t r = 0; r < R; ++r) {
    std::vector<double> a(dim), w(dim);
    for (std::size_t k = 0; k < dim; ++k) {
      // Snap some coordinates onto patterns so every form occurs.
      const int s = snap(rng);
      a[k] = s == 0 ? (ang(rng) > 0 ? kPi - 0.05 : 0.02) : ang(rng);
      w[k] = s == 1 ? 0.0 : ap(rng);
    }
    e.axis.push_back(a);
    e.aperture.push_back(w);
  }
  return e;
}

TEST(Extract, HalfTurnIsSymmetric) {
  ExtractConfig cfg;
  const auto axioms = extract_axioms(uniform({{kPi, 0.0}}, 8), cfg);
  ASSERT_TRUE(has(axioms, AxiomForm::Symmetric, {0}));
  EXPECT_EQ(get(axioms, AxiomForm::Symmetric, {0}).fraction, 1.0);
  EXPECT_FALSE(has(axioms, AxiomForm::Asymmetric, {0}));
  EXPECT_FALSE(has(axioms, AxiomForm::Transitive, {0}));
}

TEST(Extract, QuarterTurnIsAsymmetric) {
  const auto axioms = extract_axioms(uniform({{kPi / 2, 0.1}}, 8), {});
  EXPECT_TRUE(has(axioms, AxiomForm::Asymmetric, {0}));
  EXPECT_FALSE(has(axioms, AxiomForm::Symmetric, {0}));
}

TEST(Extract, TransitivityNeedsNearZeroAperture) {
  // r o r widens the aperture to 2 delta, so the margin is -delta / 2.
  const auto narrow = extract_axioms(uniform({{0.0, 0.1}}, 4), {});
  EXPECT_TRUE(has(narrow, AxiomForm::Transitive, {0}));
  EXPECT_TRUE(has(narrow, AxiomForm::Symmetric, {0}));
  EXPECT_FALSE(has(extract_axioms(uniform({{0.0, 0.4}}, 4), {}), AxiomForm::Transitive, {0}));
}

TEST(Extract, HandBuiltComposition) {
  const auto e = uniform({{0.3, 0.1}, {0.5, 0.1}, {0.8, 0.25}, {-2.0, 0.1}}, 16);
  const auto axioms = extract_axioms(e, {});
  ASSERT_TRUE(has(axioms, AxiomForm::SubRoleChainOf, {0, 1, 2}));
  EXPECT_TRUE(has(axioms, AxiomForm::SubRoleChainOf, {1, 0, 2}));
  EXPECT_FALSE(has(axioms, AxiomForm::SubRoleChainOf, {0, 1, 3}));
  for (const auto& a : axioms) {
    if (a.form == AxiomForm::SubRoleChainOf) EXPECT_EQ(a.relations[2], 2u);
  }
}

TEST(Extract, MinedTriplesAreAlwaysTested) {
  // With top_n = 0 only the mined candidate is considered.
  const auto e = uniform({{0.3, 0.0}, {0.5, 0.0}, {0.8, 0.1}}, 4);
  ExtractConfig cfg;
  cfg.top_n = 0;
  EXPECT_FALSE(has(extract_axioms(e, cfg), AxiomForm::SubRoleChainOf, {0, 1, 2}));
  cfg.mined = {{PatternKind::Composition, {0, 1, 2}, 10, 1.0}};
  EXPECT_TRUE(has(extract_axioms(e, cfg), AxiomForm::SubRoleChainOf, {0, 1, 2}));
  cfg.mined = {{PatternKind::Composition, {0, 1, 9}, 10, 1.0}};
  EXPECT_THROW(extract_axioms(e, cfg), std::out_of_range);
}

TEST(Extract, InverseAndSubRole) {
  const auto e = uniform({{1.1, 0.0}, {-1.1, 0.0}, {1.1, 0.3}}, 8);
  const auto axioms = extract_axioms(e, {});
  EXPECT_TRUE(has(axioms, AxiomForm::InverseOf, {0, 1}));
  EXPECT_FALSE(has(axioms, AxiomForm::InverseOf, {1, 0}));  // unordered, listed once
  EXPECT_TRUE(has(axioms, AxiomForm::SubRoleOf, {0, 2}));
  EXPECT_FALSE(has(axioms, AxiomForm::SubRoleOf, {2, 0}));
}

TEST(Extract, FractionCountsDimensions) {
  RelationEmbeddings e = uniform({{kPi, 0.0}}, 10);
  for (std::size_t k = 0; k < 3; ++k) e.axis[0][k] = 1.0;
  ExtractConfig cfg;
  cfg.frac = 0.7;
  EXPECT_NEAR(get(extract_axioms(e, cfg), AxiomForm::Symmetric, {0}).fraction, 0.7, 1e-12);
  cfg.frac = 0.71;
  EXPECT_FALSE(has(extract_axioms(e, cfg), AxiomForm::Symmetric, {0}));
}

TEST(Extract, SortedByFraction) {
  std::mt19937_64 rng(3);
  const auto axioms = extract_axioms(random_embeddings(rng, 6, 12), {0.2, 0.3, 3, {}});
  ASSERT_GT(axioms.size(), 3u);
  for (std::size_t i = 1; i < axioms.size(); ++i) EXPECT_GE(axioms[i - 1].fraction, axioms[i].fraction);
}

// Raising frac or lowering tol never adds an axiom, except Asymmetric which
// is defined by violations and stands in for a withheld Symmetric.
TEST(Extract, MonotoneInThresholds) {
  std::mt19937_64 rng(4);
  const auto key = [](const Axiom& a) { return std::make_pair(a.form, a.relations); };
  for (int trial = 0; trial < 20; ++trial) {
    const auto e = random_embeddings(rng, 5, 10);
    for (double tol : {0.0, 0.05, 0.15, 0.3}) {
      for (double frac : {0.2, 0.5, 0.8}) {
        const auto loose = extract_axioms(e, {tol + 0.1, frac, 3, {}});
        const auto strict_tol = extract_axioms(e, {tol, frac, 3, {}});
        const auto strict_frac = extract_axioms(e, {tol, frac + 0.15, 3, {}});
        for (const auto& a : strict_tol) {
          if (a.form == AxiomForm::Asymmetric) continue;
          EXPECT_TRUE(std::any_of(loose.begin(), loose.end(), [&](const Axiom& b) { return key(b) == key(a); }));
        }
        for (const auto& a : strict_frac) {
          if (a.form == AxiomForm::Asymmetric) continue;
          EXPECT_TRUE(std::any_of(strict_tol.begin(), strict_tol.end(), [&](const Axiom& b) { return key(b) == key(a); }));
        }
      }
    }
  }
}

TEST(Extract, SymmetricAndAsymmetricExclusive) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const auto e = random_embeddings(rng, 6, 8);
    for (double frac : {0.1, 0.3, 0.5}) {
      const auto axioms = extract_axioms(e, {0.1, frac, 3, {}});
      for (std::size_t r = 0; r < 6; ++r) {
        EXPECT_FALSE(has(axioms, AxiomForm::Symmetric, {r}) && has(axioms, AxiomForm::Asymmetric, {r}));
      }
    }
  }
}

TEST(Extract, ReadsModelParameters) {
  Model m(ModelConfig{5, 2, 4, ApertureMode::Additive});
  m.initialize(1);
  auto ax = m.block(m.layout().relation_axis);
  auto ap = m.block(m.layout().relation_aperture);
  ax[0] = 3 * kPi;  // wraps to -pi
  ap[0] = -0.2;
  const auto e = relation_embeddings(m);
  ASSERT_EQ(e.size(), 2u);
  EXPECT_EQ(e.dim, 4u);
  EXPECT_NEAR(e.axis[0][0], -kPi, 1e-12);
  EXPECT_EQ(e.aperture[0][0], 0.2);
}

TEST(Ontology, RoundTrip) {
  Vocabulary rels;
  for (const char* n : {"a", "b", "c"}) rels.intern(n);
  const std::vector<Axiom> axioms{{AxiomForm::SubRoleChainOf, {0, 1, 2}, 0.875, 0.15},
                                  {AxiomForm::InverseOf, {0, 2}, 0.8, 0.15},
                                  {AxiomForm::Symmetric, {1}, 1.0 / 3, 0.1}};
  std::stringstream ss;
  write_ontology(ss, axioms, rels);
  EXPECT_NE(ss.str().find("SubRoleChainOf(a b c)"), std::string::npos);
  EXPECT_EQ(read_ontology(ss, rels), axioms);
}

TEST(Ontology, EmptyListWritesHeaderOnly) {
  Vocabulary rels;
  std::stringstream ss;
  write_ontology(ss, {}, rels);
  EXPECT_EQ(ss.str(), std::string(kOntologyHeader) + "\n");
  EXPECT_TRUE(read_ontology(ss, rels).empty());
}

TEST(Ontology, RejectsBadInput) {
  Vocabulary rels;
  rels.intern("has space");
  rels.intern("ok");
  const std::vector<Axiom> bad{{AxiomForm::Symmetric, {0}, 1.0, 0.1}};
  std::stringstream out;
  EXPECT_THROW(write_ontology(out, bad, rels), std::invalid_argument);
  std::stringstream no_header("Symmetric(ok)  # fraction=1 tol=0.1\n");
  EXPECT_THROW(read_ontology(no_header, rels), std::runtime_error);
  std::stringstream arity(std::string(kOntologyHeader) + "\nInverseOf(ok)  # fraction=1 tol=0.1\n");
  EXPECT_THROW(read_ontology(arity, rels), std::runtime_error);
  std::stringstream form(std::string(kOntologyHeader) + "\nReflexive(ok)  # fraction=1 tol=0.1\n");
  EXPECT_THROW(read_ontology(form, rels), std::invalid_argument);
}

}  // namespace
