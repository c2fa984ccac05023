#pragma once

// The learned cone embedding: a flat parameter store, the query operators
// (relational rotation, intersection, negation, root-level union), the
// combined inside/outside distance and the margin loss, all on autodiff tapes.
//
// Every embedding is batched: a ConeTensor holds one row per query.

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "acone/angles.hpp"
#include "acone/autodiff.hpp"
#include "acone/queries.hpp"

namespace acone {

/// How a relation changes the aperture: a -> a + |delta| or a -> |gamma| * a.
enum class ApertureMode { Additive, Multiplicative };

inline std::string_view to_string(ApertureMode m) { return m == ApertureMode::Additive ? "additive" : "multiplicative"; }

inline ApertureMode parse_aperture_mode(std::string_view s) {
  if (s == "additive" || s == "add") return ApertureMode::Additive;
  if (s == "multiplicative" || s == "mul") return ApertureMode::Multiplicative;
  throw std::invalid_argument("unknown aperture mode '" + std::string(s) + "'");
}

struct ModelConfig {
  std::size_t entities = 0;
  std::size_t relations = 0;
  std::size_t dim = 32;
  ApertureMode mode = ApertureMode::Additive;
};

/// A row-major block inside the flat parameter vector.
struct ParamBlock {
  std::size_t offset = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t size() const { return rows * cols; }
};

/// Two-layer perceptron: in -> hidden (ReLU) -> out.
struct MlpBlocks {
  ParamBlock w1, b1, w2, b2;
};

struct ParamLayout {
  ParamBlock entity;
  ParamBlock relation_axis;
  ParamBlock relation_aperture;
  MlpBlocks attention;  // 2d -> 2d -> d
  MlpBlocks inner;      // 2d -> d -> d
  MlpBlocks outer;      // d -> d -> d
  std::size_t total = 0;
};

inline ParamLayout make_layout(const ModelConfig& cfg) {
  ParamLayout l;
  std::size_t at = 0;
  const auto block = [&](std::size_t rows, std::size_t cols) {
    ParamBlock b{at, rows, cols};
    at += rows * cols;
    return b;
  };
  const std::size_t d = cfg.dim;
  l.entity = block(cfg.entities, d);
  l.relation_axis = block(cfg.relations, d);
  l.relation_aperture = block(cfg.relations, d);
  const auto mlp = [&](std::size_t in, std::size_t hidden, std::size_t out) {
    MlpBlocks m;
    m.w1 = block(in, hidden);
    m.b1 = block(1, hidden);
    m.w2 = block(hidden, out);
    m.b2 = block(1, out);
    return m;
  };
  l.attention = mlp(2 * d, 2 * d, d);
  l.inner = mlp(2 * d, d, d);
  l.outer = mlp(d, d, d);
  l.total = at;
  return l;
}

struct ParamCount {
  std::uint64_t entities = 0;
  std::uint64_t relations = 0;
  std::uint64_t attention = 0;
  std::uint64_t deepsets = 0;
  std::uint64_t total = 0;
};

/// |E|d + 2|R|d + (11d^2 + 7d) for the intersection networks.
inline ParamCount param_count(std::uint64_t entities, std::uint64_t relations, std::uint64_t d, bool with_net = true) {
  ParamCount c;
  c.entities = entities * d;
  c.relations = 2 * relations * d;
  if (with_net) {
    c.attention = (2 * d * 2 * d + 2 * d) + (2 * d * d + d);
    c.deepsets = (2 * d * d + d) + (d * d + d) + (d * d + d) + (d * d + d);
  }
  c.total = c.entities + c.relations + c.attention + c.deepsets;
  return c;
}

class Model {
 public:
  explicit Model(ModelConfig cfg) : cfg_(cfg), layout_(make_layout(cfg)), params_(layout_.total, 0.0) {
    if (cfg.dim == 0) throw std::invalid_argument("embedding dimension must be positive");
  }

  /// Axes uniform in [-pi, pi); raw apertures uniform in [0, pi/16] (additive)
  /// or [0.5, 1] (multiplicative); Glorot-uniform weights and zero biases.
  void initialize(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> angle(-kPi, kPi);
    for (double& x : block(layout_.entity)) x = angle(rng);
    for (double& x : block(layout_.relation_axis)) x = angle(rng);
    std::uniform_real_distribution<double> ap = cfg_.mode == ApertureMode::Additive
                                                    ? std::uniform_real_distribution<double>(0.0, kPi / 16.0)
                                                    : std::uniform_real_distribution<double>(0.5, 1.0);
    for (double& x : block(layout_.relation_aperture)) x = ap(rng);
    for (const MlpBlocks* m : {&layout_.attention, &layout_.inner, &layout_.outer}) {
      for (const ParamBlock* w : {&m->w1, &m->w2}) {
        const double limit = std::sqrt(6.0 / static_cast<double>(w->rows + w->cols));
        std::uniform_real_distribution<double> u(-limit, limit);
        for (double& x : block(*w)) x = u(rng);
      }
      for (double& x : block(m->b1)) x = 0.0;
      for (double& x : block(m->b2)) x = 0.0;
    }
  }

  const ModelConfig& config() const { return cfg_; }
  const ParamLayout& layout() const { return layout_; }
  std::size_t dim() const { return cfg_.dim; }

  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

  std::span<double> block(const ParamBlock& b) { return std::span<double>(params_).subspan(b.offset, b.size()); }
  std::span<const double> block(const ParamBlock& b) const {
    return std::span<const double>(params_).subspan(b.offset, b.size());
  }

  /// Wrapped angle of entity `e` in dimension `k`.
  double entity_angle(std::size_t e, std::size_t k) const {
    return wrap_angle(params_[layout_.entity.offset + e * cfg_.dim + k]);
  }

 private:
  ModelConfig cfg_;
  ParamLayout layout_;
  std::vector<double> params_;
};

/// Axis and aperture, each [rows x d].
struct ConeTensor {
  ad::Var axis;
  ad::Var aperture;
  std::size_t rows() const { return axis.shape().rows; }
};

/// Ids for every template slot, one column entry per batched query.
struct SlotColumns {
  std::vector<std::vector<std::size_t>> anchors;
  std::vector<std::vector<std::size_t>> relations;
};

namespace detail {

// x -> x + pi folded back into [-pi, pi), gradient 1.
inline ad::Var half_turn(const ad::Var& a) {
  return ad::detail::unary(
      a, [](double x) { return x < 0.0 ? x + kPi : x - kPi; }, [](double, double) { return 1.0; });
}

}  // namespace detail

/// Builds query embeddings on one tape. With an empty `grad` buffer the
/// parameters enter as constants; otherwise their gradients accumulate into
/// `grad`, which must have the size of the parameter vector.
class Forward {
 public:
  Forward(ad::Tape& tape, const Model& model, std::span<double> grad = {}) : tape_(tape), model_(model), grad_(grad) {
    if (!grad.empty() && grad.size() != model.params().size()) throw std::invalid_argument("gradient buffer size mismatch");
  }

  ad::Tape& tape() { return tape_; }

  /// Raw entity angles [n x d].
  ad::Var entities(std::span<const std::size_t> ids) {
    check_ids(ids, model_.config().entities, "entity");
    return gather(model_.layout().entity, ids);
  }

  ConeTensor nominal(std::span<const std::size_t> ids) {
    const ad::Var angles = entities(ids);
    return {ad::wrap_angle(angles), tape_.filled(angles.shape(), 0.0)};
  }

  ConeTensor project(const ConeTensor& q, std::span<const std::size_t> relations) {
    check_ids(relations, model_.config().relations, "relation");
    if (relations.size() != q.rows()) throw std::invalid_argument("project: one relation per query row required");
    const ad::Var axis = gather(model_.layout().relation_axis, relations);
    const ad::Var ap = ad::abs(gather(model_.layout().relation_aperture, relations));
    const ad::Var aperture = model_.config().mode == ApertureMode::Additive ? q.aperture + ap : q.aperture * ap;
    return {ad::wrap_angle(q.axis + axis), ad::clamp(aperture, 0.0, kTwoPi)};
  }

  /// Attention-weighted mean of the axes; aperture shrunk below the smallest
  /// input aperture by a sigmoid gate computed with DeepSets.
  ConeTensor intersect(std::span<const ConeTensor> qs) {
    if (qs.size() < 2) throw std::invalid_argument("intersect needs at least two inputs");
    const ParamLayout& l = model_.layout();
    std::vector<ad::Var> logits, inner;
    for (const ConeTensor& q : qs) {
      if (q.rows() != qs[0].rows()) throw std::invalid_argument("intersect: row count mismatch");
      const ad::Var half = q.aperture * 0.5;
      const ad::Var bounds = ad::concat(q.axis - half, q.axis + half, 1);
      logits.push_back(mlp(l.attention, bounds));
      inner.push_back(mlp(l.inner, bounds));
    }
    // Softmax across inputs, separately per row and dimension.
    std::vector<double> peak = logits[0].value();
    for (const ad::Var& z : logits) {
      for (std::size_t i = 0; i < peak.size(); ++i) peak[i] = std::max(peak[i], z.value()[i]);
    }
    const ad::Var shift = tape_.constant(logits[0].shape(), peak);
    std::vector<ad::Var> weights;
    for (const ad::Var& z : logits) weights.push_back(ad::exp(z - shift));
    ad::Var norm = weights[0];
    for (std::size_t j = 1; j < weights.size(); ++j) norm = norm + weights[j];

    std::optional<ad::Var> x, y, pooled, smallest;
    for (std::size_t j = 0; j < qs.size(); ++j) {
      const ad::Var a = weights[j] / norm;
      const ad::Var cx = a * ad::cos(qs[j].axis);
      const ad::Var cy = a * ad::sin(qs[j].axis);
      x = x ? *x + cx : cx;
      y = y ? *y + cy : cy;
      pooled = pooled ? *pooled + inner[j] : inner[j];
      smallest = smallest ? ad::minimum(*smallest, qs[j].aperture) : qs[j].aperture;
    }
    const ad::Var gate = ad::sigmoid(mlp(l.outer, *pooled * (1.0 / static_cast<double>(qs.size()))));
    return {ad::wrap_angle(ad::atan2(*y, *x)), *smallest * gate};
  }

  /// The complementary cone: axis turned by pi, aperture 2pi - aperture.
  ConeTensor negate(const ConeTensor& q) { return {detail::half_turn(q.axis), kTwoPi - q.aperture}; }

  /// Embeds a batch of queries sharing the template `tmpl`, returning one
  /// tensor per disjunct of its normal form.
  std::vector<ConeTensor> embed(const QueryAst& tmpl, const SlotColumns& slots) {
    const QueryAst dnf = to_dnf(tmpl);
    std::vector<ConeTensor> out;
    if (dnf.kind == NodeKind::Union) {
      for (const QueryAst& c : dnf.children) out.push_back(embed_tree(c, slots));
    } else {
      out.push_back(embed_tree(dnf, slots));
    }
    return out;
  }

  /// Combined distance between query row i and points rows i*k .. i*k+k-1,
  /// where k = points.rows / q.rows. Returns [points.rows x 1].
  ad::Var distance(const ConeTensor& q, const ad::Var& points, double lambda) {
    const std::size_t n = q.rows();
    if (n == 0 || points.shape().rows % n != 0 || points.shape().cols != q.axis.shape().cols) {
      throw std::invalid_argument("distance: points must hold a whole number of rows per query");
    }
    const std::size_t k = points.shape().rows / n;
    const auto rep = [k](const ad::Var& v) { return k == 1 ? v : ad::repeat_rows(v, k); };
    const ad::Var half = q.aperture * 0.5;
    const ad::Var upper = q.axis + half, lower = q.axis - half;
    const ad::Var cu = rep(ad::cos(upper)), su = rep(ad::sin(upper));
    const ad::Var cl = rep(ad::cos(lower)), sl = rep(ad::sin(lower));
    const ad::Var ca = rep(ad::cos(q.axis)), sa = rep(ad::sin(q.axis));
    const ad::Var ce = ad::cos(points), se = ad::sin(points);
    const auto l1 = [](const ad::Var& c1, const ad::Var& s1, const ad::Var& c2, const ad::Var& s2) {
      return ad::sum(ad::abs(c1 - c2) + ad::abs(s1 - s2), 1);
    };
    const ad::Var outside = ad::minimum(l1(cu, su, ce, se), l1(cl, sl, ce, se));
    const ad::Var inside = ad::minimum(l1(ca, sa, ce, se), l1(cu, su, ca, sa));
    return outside + inside * lambda;
  }

  /// Minimum distance over the disjuncts.
  ad::Var dnf_distance(std::span<const ConeTensor> disjuncts, const ad::Var& points, double lambda) {
    if (disjuncts.empty()) throw std::invalid_argument("dnf_distance: no disjuncts");
    ad::Var d = distance(disjuncts[0], points, lambda);
    for (std::size_t i = 1; i < disjuncts.size(); ++i) d = ad::minimum(d, distance(disjuncts[i], points, lambda));
    return d;
  }

 private:
  ConeTensor embed_tree(const QueryAst& node, const SlotColumns& slots) {
    switch (node.kind) {
      case NodeKind::Nominal:
        return nominal(slots.anchors.at(node.id));
      case NodeKind::Projection:
        return project(embed_tree(node.children.at(0), slots), slots.relations.at(node.id));
      case NodeKind::Intersection: {
        std::vector<ConeTensor> parts;
        for (const QueryAst& c : node.children) parts.push_back(embed_tree(c, slots));
        return intersect(parts);
      }
      case NodeKind::Negation:
        return negate(embed_tree(node.children.at(0), slots));
      case NodeKind::Union:
        break;
    }
    throw std::invalid_argument("union below the query root cannot be embedded");
  }

  ad::Var gather(const ParamBlock& b, std::span<const std::size_t> ids) {
    const std::span<double> sink = grad_.empty() ? std::span<double>() : grad_.subspan(b.offset, b.size());
    return tape_.gather_rows(model_.block(b), b.cols, ids, sink);
  }

  ad::Var weight(const ParamBlock& b) {
    const std::span<double> sink = grad_.empty() ? std::span<double>() : grad_.subspan(b.offset, b.size());
    return tape_.parameter({b.rows, b.cols}, model_.block(b), sink);
  }

  ad::Var mlp(const MlpBlocks& m, const ad::Var& x) {
    const ad::Var h = ad::relu(ad::add_bias(ad::matmul(x, weight(m.w1)), weight(m.b1)));
    return ad::add_bias(ad::matmul(h, weight(m.w2)), weight(m.b2));
  }

  static void check_ids(std::span<const std::size_t> ids, std::size_t limit, const char* what) {
    for (std::size_t id : ids) {
      if (id >= limit) throw std::out_of_range(std::string("unknown ") + what + " id " + std::to_string(id));
    }
  }

  ad::Tape& tape_;
  const Model& model_;
  std::span<double> grad_;
};

/// -log sigmoid(gamma - d_pos) - mean_k log sigmoid(d_neg - gamma), averaged
/// over `batch` queries. `pos` has one row per query and `neg` k rows per
/// query; summing several calls with the full batch size gives the batch mean.
inline ad::Var margin_loss(const ad::Var& pos, const ad::Var& neg, double gamma, std::size_t batch) {
  const std::size_t n = pos.shape().rows;
  if (n == 0 || neg.shape().rows == 0 || neg.shape().rows % n != 0) {
    throw std::invalid_argument("margin_loss: every query needs at least one negative");
  }
  const double k = static_cast<double>(neg.shape().rows / n);
  const double b = static_cast<double>(batch);
  return ad::sum(ad::log_sigmoid(gamma - pos)) * (-1.0 / b) + ad::sum(ad::log_sigmoid(neg - gamma)) * (-1.0 / (b * k));
}

/// Queries of one template with their positive and k negative entities each.
struct QueryGroup {
  QueryAst tmpl;
  SlotColumns slots;
  std::vector<std::size_t> positives;  // one per query
  std::vector<std::size_t> negatives;  // k per query, query-major
};

inline ad::Var group_loss(Forward& f, const QueryGroup& g, double gamma, double lambda, std::size_t batch) {
  const std::vector<ConeTensor> q = f.embed(g.tmpl, g.slots);
  const ad::Var pos = f.dnf_distance(q, f.entities(g.positives), lambda);
  const ad::Var neg = f.dnf_distance(q, f.entities(g.negatives), lambda);
  return margin_loss(pos, neg, gamma, batch);
}

/// Plain-double query cone for scoring against every entity.
struct ConeRow {
  std::vector<double> axis;
  std::vector<double> aperture;
};

/// Row `r` of a batched embedding.
inline ConeRow cone_row(const ConeTensor& q, std::size_t r) {
  const std::size_t d = q.axis.shape().cols;
  const auto& ax = q.axis.value();
  const auto& ap = q.aperture.value();
  return {{ax.begin() + static_cast<std::ptrdiff_t>(r * d), ax.begin() + static_cast<std::ptrdiff_t>((r + 1) * d)},
          {ap.begin() + static_cast<std::ptrdiff_t>(r * d), ap.begin() + static_cast<std::ptrdiff_t>((r + 1) * d)}};
}

inline double cone_distance(const ConeRow& q, std::span<const double> point, double lambda) {
  double up = 0, lo = 0, ax = 0, cap = 0;
  for (std::size_t k = 0; k < q.axis.size(); ++k) {
    const double half = q.aperture[k] * 0.5;
    const double cu = std::cos(q.axis[k] + half), su = std::sin(q.axis[k] + half);
    const double cl = std::cos(q.axis[k] - half), sl = std::sin(q.axis[k] - half);
    const double ca = std::cos(q.axis[k]), sa = std::sin(q.axis[k]);
    const double ce = std::cos(point[k]), se = std::sin(point[k]);
    up += std::abs(cu - ce) + std::abs(su - se);
    lo += std::abs(cl - ce) + std::abs(sl - se);
    ax += std::abs(ca - ce) + std::abs(sa - se);
    cap += std::abs(cu - ca) + std::abs(su - sa);
  }
  return std::min(up, lo) + lambda * std::min(ax, cap);
}

/// Distance from a query (given by its disjuncts) to every entity.
inline std::vector<double> distances_to_all(const Model& m, std::span<const ConeRow> disjuncts, double lambda) {
  if (disjuncts.empty()) throw std::invalid_argument("distances_to_all: no disjuncts");
  const std::size_t d = m.dim();
  const auto table = m.block(m.layout().entity);
  std::vector<double> out(m.config().entities);
  for (std::size_t e = 0; e < out.size(); ++e) {
    const auto point = table.subspan(e * d, d);
    double best = cone_distance(disjuncts[0], point, lambda);
    for (std::size_t i = 1; i < disjuncts.size(); ++i) best = std::min(best, cone_distance(disjuncts[i], point, lambda));
    out[e] = best;
  }
  return out;
}

}  // namespace acone
