#pragma once

// Finite-difference audit of the full training loss: small random models, one
// batch of every query structure, and a filter that keeps only instances where
// no non-smooth op switches within the difference step.

#include <optional>
#include <random>
#include <vector>

#include "acone/model.hpp"

namespace acone {

/// One group per structure (all fourteen), random ids, `k` negatives each.
inline std::vector<QueryGroup> random_groups(std::mt19937_64& rng, const ModelConfig& cfg, std::size_t rows,
                                             std::size_t k) {
  std::uniform_int_distribution<std::size_t> ent(0, cfg.entities - 1), rel(0, cfg.relations - 1);
  std::vector<QueryGroup> out;
  for (QueryStructure s : kAllStructures) {
    QueryGroup g;
    g.tmpl = structure_template(s);
    const SlotCounts c = slot_counts(s);
    g.slots.anchors.assign(c.anchors, {});
    g.slots.relations.assign(c.relations, {});
    for (auto& col : g.slots.anchors) {
      for (std::size_t i = 0; i < rows; ++i) col.push_back(ent(rng));
    }
    for (auto& col : g.slots.relations) {
      for (std::size_t i = 0; i < rows; ++i) col.push_back(rel(rng));
    }
    for (std::size_t i = 0; i < rows; ++i) g.positives.push_back(ent(rng));
    for (std::size_t i = 0; i < rows * k; ++i) g.negatives.push_back(ent(rng));
    out.push_back(std::move(g));
  }
  return out;
}

inline double total_loss(const Model& m, const std::vector<QueryGroup>& groups, std::span<double> grad, double gamma,
                         double lambda) {
  std::size_t batch = 0;
  for (const auto& g : groups) batch += g.positives.size();
  ad::Tape tape;
  Forward f(tape, m, grad);
  std::optional<ad::Var> loss;
  for (const auto& g : groups) {
    const ad::Var l = group_loss(f, g, gamma, lambda, batch);
    loss = loss ? *loss + l : l;
  }
  if (!grad.empty()) tape.backward(*loss);
  return loss->item();
}

/// Smallest distance from any non-smooth op's argument to its switching point
/// during one evaluation of the loss.
inline double loss_kink_margin(const Model& m, const std::vector<QueryGroup>& groups, double gamma, double lambda) {
  std::size_t batch = 0;
  for (const auto& g : groups) batch += g.positives.size();
  ad::Tape tape;
  tape.track_kinks(true);
  Forward f(tape, m);
  for (const auto& g : groups) group_loss(f, g, gamma, lambda, batch);
  return tape.kink_margin();
}

struct GradCheckInstance {
  Model model;
  std::vector<QueryGroup> groups;
};

/// Small random model and one batch of every structure.
inline GradCheckInstance grad_check_instance(std::uint64_t seed, std::size_t dim) {
  std::mt19937_64 rng(seed);
  ModelConfig cfg;
  cfg.entities = 12;
  cfg.relations = 3;
  cfg.dim = dim;
  Model m(cfg);
  m.initialize(seed);
  // Spread relation apertures so intersections and negations see varied widths.
  std::uniform_real_distribution<double> ap(0.05, 1.2);
  for (double& x : m.block(m.layout().relation_aperture)) x = ap(rng);
  auto groups = random_groups(rng, cfg, 2, 3);
  return {std::move(m), std::move(groups)};
}

inline constexpr double kGradCheckStep = 1e-5;

/// Max relative error between the tape gradient of the full loss and central
/// differences, over every parameter. The attention output bias has an
/// identically zero gradient (the softmax runs across inputs), so the
/// denominator is floored at 1e-6.
inline double full_loss_grad_error(const GradCheckInstance& inst, double gamma = 6.0, double lambda = 0.3) {
  const Model& m = inst.model;
  std::vector<double> analytic(m.params().size(), 0.0);
  total_loss(m, inst.groups, analytic, gamma, lambda);
  Model probe = m;
  const auto value = [&](std::span<const double> p) {
    probe.params().assign(p.begin(), p.end());
    return total_loss(probe, inst.groups, {}, gamma, lambda);
  };
  const auto numeric = ad::central_differences(value, m.params(), kGradCheckStep);
  return ad::max_relative_error(analytic, numeric, 1e-6);
}

/// Central differences are only a valid oracle where no non-smooth op switches
/// within the step, so instances must keep every kink argument this far away.
inline constexpr double kGradCheckKinkMargin = 10 * kGradCheckStep;

struct SmoothDraws {
  std::vector<std::uint64_t> seeds;
  std::size_t rejected = 0;
};

/// First `count` seeds from `first` whose instances clear the kink margin.
inline SmoothDraws smooth_grad_check_seeds(std::size_t count, std::size_t dim, std::uint64_t first = 1,
                                           double gamma = 6.0, double lambda = 0.3) {
  SmoothDraws out;
  for (std::uint64_t seed = first; out.seeds.size() < count; ++seed) {
    const GradCheckInstance inst = grad_check_instance(seed, dim);
    if (loss_kink_margin(inst.model, inst.groups, gamma, lambda) >= kGradCheckKinkMargin) {
      out.seeds.push_back(seed);
    } else {
      ++out.rejected;
    }
  }
  return out;
}

struct GradCheckSummary {
  std::size_t instances = 0;
  std::size_t rejected = 0;
  double max_relative_error = 0.0;
  std::uint64_t worst_seed = 0;
};

/// Checks `samples` smooth instances of dimension `dim`, drawn from seed `first` on.
inline GradCheckSummary run_grad_check(std::size_t samples, std::size_t dim, std::uint64_t first = 1) {
  const SmoothDraws draws = smooth_grad_check_seeds(samples, dim, first);
  GradCheckSummary out;
  out.instances = draws.seeds.size();
  out.rejected = draws.rejected;
  for (std::uint64_t seed : draws.seeds) {
    const double e = full_loss_grad_error(grad_check_instance(seed, dim));
    if (e >= out.max_relative_error) {
      out.max_relative_error = e;
      out.worst_seed = seed;
    }
  }
  return out;
}

}  // namespace acone
