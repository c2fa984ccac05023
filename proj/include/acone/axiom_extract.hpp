#pragma once

// Reads relation-axioms off trained relation embeddings. Each dimension of a
// relation is the aperture-additive rotation R(axis, 1, |aperture|); an axiom
// is emitted when its condition holds in enough dimensions.

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "acone/axiom_conditions.hpp"
#include "acone/graph.hpp"
#include "acone/model.hpp"
#include "acone/pattern_miner.hpp"

namespace acone {

enum class AxiomForm { SubRoleOf, SubRoleChainOf, Transitive, Symmetric, Asymmetric, InverseOf };

inline std::string_view to_string(AxiomForm f) {
  switch (f) {
    case AxiomForm::SubRoleOf: return "SubRoleOf";
    case AxiomForm::SubRoleChainOf: return "SubRoleChainOf";
    case AxiomForm::Transitive: return "Transitive";
    case AxiomForm::Symmetric: return "Symmetric";
    case AxiomForm::Asymmetric: return "Asymmetric";
    case AxiomForm::InverseOf: return "InverseOf";
  }
  return "?";
}

inline std::size_t arity(AxiomForm f) {
  switch (f) {
    case AxiomForm::SubRoleChainOf: return 3;
    case AxiomForm::SubRoleOf:
    case AxiomForm::InverseOf: return 2;
    default: return 1;
  }
}

inline AxiomForm parse_axiom_form(std::string_view s) {
  for (AxiomForm f : {AxiomForm::SubRoleOf, AxiomForm::SubRoleChainOf, AxiomForm::Transitive, AxiomForm::Symmetric,
                      AxiomForm::Asymmetric, AxiomForm::InverseOf}) {
    if (to_string(f) == s) return f;
  }
  throw std::invalid_argument("unknown axiom form '" + std::string(s) + "'");
}

/// SubRoleOf(r s): r ⊑ s. SubRoleChainOf(r1 r2 r3): r1 ∘ r2 ⊑ r3. InverseOf(r s): r ≡ s⁻.
struct Axiom {
  AxiomForm form = AxiomForm::Symmetric;
  std::vector<std::size_t> relations;
  double fraction = 0.0;  // share of dimensions meeting the condition
  double tol = 0.0;

  friend bool operator==(const Axiom&, const Axiom&) = default;
};

struct ExtractConfig {
  double tol = 0.1;
  double frac = 0.9;
  /// Third relations tried per (r1, r2) pair, closest by axis angle.
  std::size_t top_n = 3;
  /// Mined composition labels whose triples are always tested.
  std::vector<PatternLabel> mined;
};

/// Per relation and dimension: axis angle and non-negative aperture.
struct RelationEmbeddings {
  std::size_t dim = 0;
  std::vector<std::vector<double>> axis;
  std::vector<std::vector<double>> aperture;

  std::size_t size() const { return axis.size(); }
  Rotation rotation(std::size_t r, std::size_t k) const { return {axis[r][k], 1.0, aperture[r][k]}; }
};

inline RelationEmbeddings relation_embeddings(const Model& m) {
  RelationEmbeddings out;
  out.dim = m.dim();
  const auto ax = m.block(m.layout().relation_axis);
  const auto ap = m.block(m.layout().relation_aperture);
  for (std::size_t r = 0; r < m.config().relations; ++r) {
    std::vector<double> a(m.dim()), w(m.dim());
    for (std::size_t k = 0; k < m.dim(); ++k) {
      a[k] = wrap_angle(ax[r * m.dim() + k]);
      w[k] = std::abs(ap[r * m.dim() + k]);
    }
    out.axis.push_back(std::move(a));
    out.aperture.push_back(std::move(w));
  }
  return out;
}

namespace detail {

template <class Pred>
double fraction_of_dims(std::size_t dim, Pred holds) {
  std::size_t n = 0;
  for (std::size_t k = 0; k < dim; ++k) n += holds(k);
  return dim ? static_cast<double>(n) / static_cast<double>(dim) : 0.0;
}

}  // namespace detail

/// All axioms whose per-dimension condition holds (margin >= -tol) in at
/// least `frac` of the dimensions. Asymmetric(r) instead counts dimensions
/// where the symmetry window is violated by more than tol, and is withheld
/// when Symmetric(r) is emitted. Sorted by fraction, highest first.
inline std::vector<Axiom> extract_axioms(const RelationEmbeddings& e, const ExtractConfig& cfg) {
  const std::size_t R = e.size(), d = e.dim;
  std::vector<Axiom> out;
  const auto add = [&](AxiomForm f, std::vector<std::size_t> rels, double fraction) {
    if (fraction >= cfg.frac) out.push_back({f, std::move(rels), fraction, cfg.tol});
  };

  for (std::size_t r = 0; r < R; ++r) {
    const double sym = detail::fraction_of_dims(d, [&](std::size_t k) { return symmetry(e.rotation(r, k), cfg.tol).holds; });
    const double asym = detail::fraction_of_dims(d, [&](std::size_t k) {
      return symmetry(e.rotation(r, k), 0.0).margin < -cfg.tol;
    });
    add(AxiomForm::Symmetric, {r}, sym);
    if (sym < cfg.frac) add(AxiomForm::Asymmetric, {r}, asym);
    add(AxiomForm::Transitive, {r},
        detail::fraction_of_dims(d, [&](std::size_t k) { return transitivity(e.rotation(r, k), cfg.tol).holds; }));
  }

  for (std::size_t r = 0; r < R; ++r) {
    const BoundaryAngles br = boundary_angles(e.axis[r], e.aperture[r]);
    for (std::size_t s = 0; s < R; ++s) {
      if (s == r) continue;
      add(AxiomForm::SubRoleOf, {r, s}, detail::fraction_of_dims(d, [&](std::size_t k) {
            return containment_additive(e.rotation(r, k), e.rotation(s, k), cfg.tol).holds;
          }));
      if (s < r) continue;
      const BoundaryAngles bs = boundary_angles(e.axis[s], e.aperture[s]);
      const auto inv = exact_inverse(br.upper, br.lower, bs.upper, bs.lower, cfg.tol);
      add(AxiomForm::InverseOf, {r, s}, detail::fraction_of_dims(d, [&](std::size_t k) { return inv[k]; }));
    }
  }

  std::set<std::vector<std::size_t>> chains;
  for (const PatternLabel& l : cfg.mined) {
    if (l.kind == PatternKind::Composition && l.relations.size() == 3) chains.insert(l.relations);
  }
  for (std::size_t r1 = 0; r1 < R; ++r1) {
    for (std::size_t r2 = 0; r2 < R; ++r2) {
      std::vector<std::pair<double, std::size_t>> near;
      for (std::size_t r3 = 0; r3 < R; ++r3) {
        if (r1 == r2 && r2 == r3) continue;
        double err = 0.0;
        for (std::size_t k = 0; k < d; ++k) err += std::abs(angle_diff(e.axis[r3][k], e.axis[r1][k] + e.axis[r2][k]));
        near.emplace_back(err, r3);
      }
      std::sort(near.begin(), near.end());
      for (std::size_t i = 0; i < std::min(cfg.top_n, near.size()); ++i) chains.insert({r1, r2, near[i].second});
    }
  }
  for (const auto& c : chains) {
    if (c[0] >= R || c[1] >= R || c[2] >= R) throw std::out_of_range("mined label refers to an unknown relation");
    add(AxiomForm::SubRoleChainOf, c, detail::fraction_of_dims(d, [&](std::size_t k) {
          return composition_additive(e.rotation(c[0], k), e.rotation(c[1], k), e.rotation(c[2], k), cfg.tol).holds;
        }));
  }

  std::stable_sort(out.begin(), out.end(), [](const Axiom& a, const Axiom& b) {
    if (a.fraction != b.fraction) return a.fraction > b.fraction;
    if (a.form != b.form) return a.form < b.form;
    return a.relations < b.relations;
  });
  return out;
}

// ---- ontology text ------------------------------------------------------------------

inline constexpr const char* kOntologyHeader = "# acone-ontology v1";

/// Shortest decimal that reads back to the same double.
inline std::string shortest(double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return {buf, res.ptr};
}

inline void write_ontology(std::ostream& os, std::span<const Axiom> axioms, const Vocabulary& relations) {
  os << kOntologyHeader << '\n';
  for (const Axiom& a : axioms) {
    os << to_string(a.form) << '(';
    for (std::size_t i = 0; i < a.relations.size(); ++i) {
      const std::string& name = relations.name(a.relations[i]);
      if (name.find_first_of(" \t()#") != std::string::npos) {
        throw std::invalid_argument("relation name '" + name + "' cannot be written in the ontology syntax");
      }
      os << (i ? " " : "") << name;
    }
    os << ")  # fraction=" << shortest(a.fraction) << " tol=" << shortest(a.tol) << '\n';
  }
}

inline std::vector<Axiom> read_ontology(std::istream& is, const Vocabulary& relations) {
  std::string line;
  if (!std::getline(is, line) || line != kOntologyHeader) throw std::runtime_error("missing ontology header");
  std::vector<Axiom> out;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto open = line.find('('), close = line.find(')');
    const auto hash = line.find('#', close == std::string::npos ? 0 : close);
    if (open == std::string::npos || close == std::string::npos || close < open || hash == std::string::npos) {
      throw std::runtime_error("ontology line " + std::to_string(lineno) + ": malformed axiom");
    }
    Axiom a;
    a.form = parse_axiom_form(line.substr(0, open));
    std::stringstream names(line.substr(open + 1, close - open - 1));
    for (std::string n; names >> n;) a.relations.push_back(relations.id(n));
    if (a.relations.size() != arity(a.form)) {
      throw std::runtime_error("ontology line " + std::to_string(lineno) + ": wrong number of relations");
    }
    if (std::sscanf(line.c_str() + hash, "# fraction=%lf tol=%lf", &a.fraction, &a.tol) != 2) {
      throw std::runtime_error("ontology line " + std::to_string(lineno) + ": missing fraction/tol comment");
    }
    out.push_back(std::move(a));
  }
  return out;
}

}  // namespace acone
