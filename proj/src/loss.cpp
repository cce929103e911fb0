#include "wtalc/loss.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "wtalc/errors.hpp"
#include "wtalc/kernels.hpp"

namespace wtalc {

std::size_t select_k(std::size_t length, std::size_t divisor) {
  if (divisor == 0) throw DomainError("select_k: divisor must be at least 1");
  return std::max<std::size_t>(1, length / divisor);
}

std::vector<std::size_t> top_k_indices(std::span<const double> row, std::size_t k) {
  if (k == 0 || k > row.size()) {
    throw DomainError("k-max pooling needs 1 <= k <= l (k=" + std::to_string(k) +
                      ", l=" + std::to_string(row.size()) + ")");
  }
  std::vector<std::size_t> idx(row.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](std::size_t a, std::size_t b) {
                      return row[a] > row[b] || (row[a] == row[b] && a < b);
                    });
  idx.resize(k);
  return idx;
}

double kmax_pool(std::span<const double> row, std::size_t k) {
  double sum = 0.0;
  for (std::size_t i : top_k_indices(row, k)) sum += row[i];
  return sum / static_cast<double>(k);
}

Vector softmax(std::span<const double> x) {
  Vector out(x.size());
  if (x.empty()) return out;
  const double peak = *std::max_element(x.begin(), x.end());
  double z = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = std::exp(x[i] - peak);
    z += out[i];
  }
  for (double& v : out) v /= z;
  return out;
}

Vector label_pmf(const LabelSet& labels, std::size_t num_classes) {
  if (labels.empty()) throw DomainError("video has no labels");
  Vector y(num_classes, 0.0);
  for (std::size_t c : labels) {
    if (c >= num_classes) throw DomainError("label index out of range");
    y[c] = 1.0;
  }
  const double m = std::accumulate(y.begin(), y.end(), 0.0);
  for (double& v : y) v /= m;
  return y;
}

Vector class_scores(const Sequence& activations, std::size_t k_divisor) {
  const std::size_t k = select_k(activations.length(), k_divisor);
  Vector s(activations.dim());
  for (std::size_t c = 0; c < activations.dim(); ++c) s[c] = kmax_pool(activations.row(c), k);
  return s;
}

PooledScores pool_scores(const Sequence& activations, const LabelSet& labels, std::size_t k_divisor) {
  PooledScores p;
  const std::size_t n_c = activations.dim();
  p.k = select_k(activations.length(), k_divisor);
  p.scores.resize(n_c);
  p.selected.resize(n_c);
  for (std::size_t c = 0; c < n_c; ++c) {
    const Vector row = activations.row(c);
    p.selected[c] = top_k_indices(row, p.k);
    double sum = 0.0;
    for (std::size_t t : p.selected[c]) sum += row[t];
    p.scores[c] = sum / static_cast<double>(p.k);
  }
  p.probs = softmax(p.scores);
  p.target = label_pmf(labels, n_c);
  return p;
}

double cross_entropy(const PooledScores& pooled) {
  double loss = 0.0;
  for (std::size_t c = 0; c < pooled.probs.size(); ++c) {
    if (pooled.target[c] > 0.0) loss -= pooled.target[c] * std::log(std::max(pooled.probs[c], kProbabilityFloor));
  }
  return loss;
}

double mill(std::span<const PooledScores> pooled) {
  if (pooled.empty()) throw DomainError("mill: empty batch");
  double sum = 0.0;
  for (const auto& p : pooled) sum += cross_entropy(p);
  return sum / static_cast<double>(pooled.size());
}

Sequence attention(const Sequence& activations) {
  Sequence out(activations.dim(), activations.length());
  for (std::size_t c = 0; c < activations.dim(); ++c) {
    const Vector probs = softmax(activations.row(c));
    for (std::size_t t = 0; t < probs.size(); ++t) out(c, t) = probs[t];
  }
  return out;
}

AttentionPair attention_features(const Sequence& hidden, std::span<const double> attention_row) {
  const std::size_t length = hidden.length();
  if (attention_row.size() != length) throw ShapeError("attention row length does not match features");
  if (length < 2) throw DomainError("low-attention feature is undefined for a single-instant video");
  AttentionPair out{Vector(hidden.dim(), 0.0), Vector(hidden.dim(), 0.0)};
  const double inv = 1.0 / static_cast<double>(length - 1);
  for (std::size_t t = 0; t < length; ++t) {
    kernels::axpy(attention_row[t], hidden.instant(t), out.high);
    kernels::axpy((1.0 - attention_row[t]) * inv, hidden.instant(t), out.low);
  }
  return out;
}

double cosine_distance(std::span<const double> f, std::span<const double> g) {
  if (f.size() != g.size()) throw ShapeError("cosine_distance: length mismatch");
  const double nf = std::sqrt(kernels::dot(f, f) + kNormEpsilon);
  const double ng = std::sqrt(kernels::dot(g, g) + kNormEpsilon);
  return 1.0 - kernels::dot(f, g) / (nf * ng);
}

namespace {

// Adds scale * d(distance)/df to df and scale * d(distance)/dg to dg.
void cosine_distance_grad(std::span<const double> f, std::span<const double> g, double scale,
                          std::span<double> df, std::span<double> dg) {
  const double ff = kernels::dot(f, f) + kNormEpsilon;
  const double gg = kernels::dot(g, g) + kNormEpsilon;
  const double fg = kernels::dot(f, g);
  const double nf = std::sqrt(ff);
  const double ng = std::sqrt(gg);
  const double inv = 1.0 / (nf * ng);
  kernels::axpy(-scale * inv, g, df);
  kernels::axpy(scale * fg * inv / ff, f, df);
  kernels::axpy(-scale * inv, f, dg);
  kernels::axpy(scale * fg * inv / gg, g, dg);
}

struct HingeTerms {
  double high_high = 0.0;  // d(H_m, H_n)
  double high_low = 0.0;   // d(H_m, L_n)
  double low_high = 0.0;   // d(L_m, H_n)
  double margin = 0.0;

  double first() const { return high_high - high_low + margin; }
  double second() const { return high_high - low_high + margin; }
  double value() const { return 0.5 * (std::max(0.0, first()) + std::max(0.0, second())); }
};

HingeTerms hinge_terms(const AttentionPair& m, const AttentionPair& n, double margin) {
  return {cosine_distance(m.high, n.high), cosine_distance(m.high, n.low), cosine_distance(m.low, n.high),
          margin};
}

// Accumulates scale * dL/d{features} into gm and gn.
void pair_loss_grad(const AttentionPair& m, const AttentionPair& n, const HingeTerms& h, double scale,
                    AttentionPair& gm, AttentionPair& gn) {
  const bool first = h.first() > 0.0;
  const bool second = h.second() > 0.0;
  const double hh = 0.5 * scale * ((first ? 1.0 : 0.0) + (second ? 1.0 : 0.0));
  if (hh != 0.0) cosine_distance_grad(m.high, n.high, hh, gm.high, gn.high);
  if (first) cosine_distance_grad(m.high, n.low, -0.5 * scale, gm.high, gn.low);
  if (second) cosine_distance_grad(m.low, n.high, -0.5 * scale, gm.low, gn.high);
}

struct ClassGroup {
  std::size_t category = 0;
  std::vector<std::size_t> videos;  // batch positions with this label and l >= 2
};

std::vector<ClassGroup> pairable_groups(std::span<const ForwardState> states, std::span<const LabelSet> labels) {
  if (states.size() != labels.size()) throw ShapeError("casl: states and labels differ in count");
  std::size_t n_c = 0;
  for (const auto& s : states) n_c = std::max(n_c, s.activations.dim());
  std::vector<ClassGroup> groups(n_c);
  for (std::size_t c = 0; c < n_c; ++c) groups[c].category = c;
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (states[i].hidden.length() < 2) continue;
    for (std::size_t c : labels[i]) {
      if (c >= n_c) throw DomainError("label index out of range");
      groups[c].videos.push_back(i);
    }
  }
  std::erase_if(groups, [](const ClassGroup& g) { return g.videos.size() < 2; });
  return groups;
}

double pair_count(std::size_t members) {
  return static_cast<double>(members) * static_cast<double>(members - 1) / 2.0;
}

}  // namespace

double pair_loss(const AttentionPair& m, const AttentionPair& n, double margin) {
  return hinge_terms(m, n, margin).value();
}

CaslResult casl(std::span<const ForwardState> states, std::span<const LabelSet> labels, double margin) {
  CaslResult out;
  const auto groups = pairable_groups(states, labels);
  if (groups.empty()) return out;
  std::vector<Sequence> att(states.size());
  for (const auto& g : groups) {
    std::vector<AttentionPair> feats;
    for (std::size_t i : g.videos) {
      if (att[i].empty()) att[i] = attention(states[i].activations);
      feats.push_back(attention_features(states[i].hidden, att[i].row(g.category)));
    }
    double sum = 0.0;
    for (std::size_t a = 0; a < feats.size(); ++a) {
      for (std::size_t b = a + 1; b < feats.size(); ++b) {
        sum += pair_loss(feats[a], feats[b], margin);
        ++out.pair_terms;
      }
    }
    out.value += sum / pair_count(feats.size());
  }
  out.active_classes = groups.size();
  out.value /= static_cast<double>(groups.size());
  out.has_pairs = true;
  return out;
}

double weight_norm_sq(const ModelParams& params) {
  return kernels::dot(params.fc_weight.flat(), params.fc_weight.flat()) +
         kernels::dot(params.cls_weight.flat(), params.cls_weight.flat());
}

LossBreakdown total_loss(double mill_value, double casl_value, const ModelParams& params, double lambda,
                         double alpha) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw DomainError("lambda must lie in [0, 1]");
  if (!(alpha >= 0.0)) throw DomainError("alpha must be non-negative");
  LossBreakdown b;
  b.mill = mill_value;
  b.casl = casl_value;
  b.reg = alpha * weight_norm_sq(params);
  b.total = lambda * mill_value + (1.0 - lambda) * casl_value + b.reg;
  return b;
}

// ---------------------------------------------------------------------------

Objective evaluate_objective(const ModelParams& params, std::span<const Sequence> inputs,
                             std::span<const ForwardState> states, std::span<const LabelSet> labels,
                             const LossWeights& weights, bool with_gradient) {
  const std::size_t batch = states.size();
  if (batch == 0) throw DomainError("evaluate_objective: empty batch");
  if (inputs.size() != batch || labels.size() != batch) {
    throw ShapeError("evaluate_objective: inputs, states and labels differ in count");
  }
  const ModelDims& dims = params.dims;
  const double lambda = weights.lambda;

  // MIL loss and its gradient w.r.t. activations.
  std::vector<PooledScores> pooled;
  pooled.reserve(batch);
  for (std::size_t i = 0; i < batch; ++i) {
    pooled.push_back(pool_scores(states[i].activations, labels[i], weights.k_divisor));
  }
  const double mill_value = mill(pooled);

  std::vector<Sequence> grad_act;
  std::vector<Sequence> grad_hidden;  // CASL contribution to dL/dX
  if (with_gradient) {
    for (std::size_t i = 0; i < batch; ++i) {
      grad_act.emplace_back(dims.num_classes, states[i].activations.length());
    }
    if (lambda > 0.0) {
      const double scale = lambda / static_cast<double>(batch);
      for (std::size_t i = 0; i < batch; ++i) {
        const PooledScores& p = pooled[i];
        double kept_target = 0.0;
        for (std::size_t c = 0; c < dims.num_classes; ++c) {
          if (p.probs[c] >= kProbabilityFloor) kept_target += p.target[c];
        }
        for (std::size_t c = 0; c < dims.num_classes; ++c) {
          const double y = p.probs[c] >= kProbabilityFloor ? p.target[c] : 0.0;
          const double ds = scale * (p.probs[c] * kept_target - y) / static_cast<double>(p.k);
          for (std::size_t t : p.selected[c]) grad_act[i](c, t) += ds;
        }
      }
    }
  }

  // CASL and its gradient w.r.t. activations and hidden features.
  const auto groups = pairable_groups(states, labels);
  double casl_value = 0.0;
  const bool casl_grad = with_gradient && lambda < 1.0 && !groups.empty();
  std::vector<Sequence> att(batch);
  if (casl_grad) {
    for (std::size_t i = 0; i < batch; ++i) {
      grad_hidden.emplace_back(dims.hidden_dim, states[i].hidden.length());
    }
  }
  for (const auto& g : groups) {
    const std::size_t members = g.videos.size();
    std::vector<AttentionPair> feats;
    feats.reserve(members);
    for (std::size_t i : g.videos) {
      if (att[i].empty()) att[i] = attention(states[i].activations);
      feats.push_back(attention_features(states[i].hidden, att[i].row(g.category)));
    }
    const double norm = pair_count(members);
    std::vector<AttentionPair> fgrad(members, AttentionPair{Vector(dims.hidden_dim, 0.0), Vector(dims.hidden_dim, 0.0)});
    const double scale = (1.0 - lambda) / (norm * static_cast<double>(groups.size()));
    double sum = 0.0;
    for (std::size_t a = 0; a < members; ++a) {
      for (std::size_t b = a + 1; b < members; ++b) {
        const HingeTerms h = hinge_terms(feats[a], feats[b], weights.margin);
        sum += h.value();
        if (casl_grad) pair_loss_grad(feats[a], feats[b], h, scale, fgrad[a], fgrad[b]);
      }
    }
    casl_value += sum / norm;
    if (!casl_grad) continue;

    // High/low feature gradients back to hidden columns and attention, then
    // through the temporal softmax to activations.
    for (std::size_t a = 0; a < members; ++a) {
      const std::size_t i = g.videos[a];
      const Sequence& hidden = states[i].hidden;
      const std::size_t length = hidden.length();
      const double inv = 1.0 / static_cast<double>(length - 1);
      Vector att_row = att[i].row(g.category);
      Vector grad_att(length);
      for (std::size_t t = 0; t < length; ++t) {
        auto x = hidden.instant(t);
        grad_att[t] = kernels::dot(x, fgrad[a].high) - inv * kernels::dot(x, fgrad[a].low);
        auto gx = grad_hidden[i].instant(t);
        kernels::axpy(att_row[t], fgrad[a].high, gx);
        kernels::axpy((1.0 - att_row[t]) * inv, fgrad[a].low, gx);
      }
      double weighted = 0.0;
      for (std::size_t t = 0; t < length; ++t) weighted += att_row[t] * grad_att[t];
      for (std::size_t t = 0; t < length; ++t) {
        grad_act[i](g.category, t) += att_row[t] * (grad_att[t] - weighted);
      }
    }
  }
  if (!groups.empty()) casl_value /= static_cast<double>(groups.size());

  Objective out;
  out.loss = total_loss(mill_value, casl_value, params, lambda, weights.alpha);
  out.casl_has_pairs = !groups.empty();
  if (!with_gradient) return out;

  // Back through the label projection, dropout, ReLU and the fc layer.
  const auto& k = kernels::active();
  ModelParams& grad = out.grad;
  grad = ModelParams::zeros(dims);
  Vector grad_x(dims.hidden_dim);
  for (std::size_t i = 0; i < batch; ++i) {
    const ForwardState& st = states[i];
    const Sequence& input = inputs[i];
    if (input.length() != st.hidden.length() || input.dim() != dims.input_dim()) {
      throw ShapeError("evaluate_objective: input does not match its forward state");
    }
    for (std::size_t t = 0; t < input.length(); ++t) {
      auto ga = grad_act[i].instant(t);
      for (std::size_t c = 0; c < dims.num_classes; ++c) grad.cls_bias[c] += ga[c];
      k.rank1_acc(grad.cls_weight.data(), dims.num_classes, dims.hidden_dim, ga.data(),
                  st.hidden.instant(t).data());
      if (casl_grad) {
        auto gh = grad_hidden[i].instant(t);
        std::copy(gh.begin(), gh.end(), grad_x.begin());
      } else {
        std::fill(grad_x.begin(), grad_x.end(), 0.0);
      }
      k.matvec_t_acc(params.cls_weight.data(), dims.num_classes, dims.hidden_dim, ga.data(), grad_x.data());
      auto relu = st.relu.instant(t);
      auto mask = st.mask.instant(t);
      for (std::size_t d = 0; d < dims.hidden_dim; ++d) {
        grad_x[d] = relu[d] > 0.0 ? grad_x[d] * mask[d] : 0.0;
        grad.fc_bias[d] += grad_x[d];
      }
      k.rank1_acc(grad.fc_weight.data(), dims.hidden_dim, dims.input_dim(), grad_x.data(),
                  input.instant(t).data());
    }
  }
  if (weights.alpha != 0.0) {
    k.axpy(2.0 * weights.alpha, params.fc_weight.data(), grad.fc_weight.data(), grad.fc_weight.size());
    k.axpy(2.0 * weights.alpha, params.cls_weight.data(), grad.cls_weight.data(), grad.cls_weight.size());
  }
  return out;
}

}  // namespace wtalc
