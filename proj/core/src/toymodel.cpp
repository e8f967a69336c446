#include "saesteer/toymodel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>

#include "saesteer/error.hpp"

namespace saesteer {

namespace {

constexpr double kNormEps = 1e-6;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

DenseMatrix random_matrix(std::size_t rows, std::size_t cols, double scale, SeededRng& rng) {
  DenseMatrix m(rows, cols);
  for (double& x : m.data()) x = scale * rng.normal();
  return m;
}

Vector random_vector(std::size_t n, double scale, SeededRng& rng) {
  Vector v(n);
  for (double& x : v) x = scale * rng.normal();
  return v;
}

// Modified Gram-Schmidt on Gaussian draws.
std::vector<Vector> orthonormal_set(std::size_t count, std::size_t dim, SeededRng& rng) {
  std::vector<Vector> basis;
  while (basis.size() < count) {
    Vector v = random_vector(dim, 1.0, rng);
    for (const Vector& b : basis) axpy(-dot(v, b), b, v);
    for (const Vector& b : basis) axpy(-dot(v, b), b, v);
    const double n = l2_norm(v);
    if (n < 1e-6) continue;
    for (double& x : v) x /= n;
    basis.push_back(std::move(v));
  }
  return basis;
}

void rms_normalize(std::span<double> y) {
  double ss = 0.0;
  for (double x : y) ss += x * x;
  const double inv = 1.0 / std::sqrt(ss / static_cast<double>(y.size()) + kNormEps);
  for (double& x : y) x *= inv;
}

void project_out_in_place(const PlantedTraits& planted, std::span<double> x) {
  axpy(-dot(planted.g_agency, x), planted.g_agency, x);
  for (const Vector& g : planted.g_specific) axpy(-dot(g, x), g, x);
}

}  // namespace

std::string hook_label(const HookPoint& hook) {
  return std::string(hook.kind == SublayerKind::delta ? "delta_L" : "attn_L") +
         std::to_string(hook.layer_index);
}

HookPoint parse_hook_label(std::string_view label) {
  HookPoint hook;
  std::string_view rest;
  if (label.starts_with("delta_L")) {
    hook.kind = SublayerKind::delta;
    rest = label.substr(7);
  } else if (label.starts_with("attn_L")) {
    hook.kind = SublayerKind::attention;
    rest = label.substr(6);
  } else {
    throw ArgumentError("bad hook label '" + std::string(label) + "'");
  }
  const auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), hook.layer_index);
  if (rest.empty() || ec != std::errc{} || ptr != rest.data() + rest.size()) {
    throw ArgumentError("bad hook label '" + std::string(label) + "'");
  }
  return hook;
}

Vector PlantedTraits::effective_direction(Trait t) const {
  const double a = std::sqrt(mix_weight);
  const double s = std::sqrt(1.0 - mix_weight);
  const Vector& g = g_specific[trait_index(t)];
  Vector u(g_agency.size());
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = a * g_agency[i] + s * g[i];
  return u;
}

Vector PlantedTraits::offset(const TraitIntensity& intensity) const {
  Vector out(g_agency.size(), 0.0);
  const double a = std::sqrt(mix_weight);
  const double s = std::sqrt(1.0 - mix_weight);
  double agency = 0.0;
  for (std::size_t t = 0; t < kTraitCount; ++t) {
    if (intensity[t] == 0.0) continue;
    agency += intensity[t];
    axpy(s * intensity[t], g_specific[t], out);
  }
  if (agency != 0.0) axpy(a * agency, g_agency, out);
  return out;
}

PlantedCoords PlantedTraits::coordinates(std::span<const double> x) const {
  PlantedCoords c{};
  c[0] = dot(g_agency, x);
  for (std::size_t t = 0; t < kTraitCount; ++t) c[1 + t] = dot(g_specific[t], x);
  return c;
}

Vector PlantedTraits::project_out(std::span<const double> x) const {
  Vector out(x.begin(), x.end());
  project_out_in_place(*this, out);
  return out;
}

PolicyReadout default_policy_readout() {
  PolicyReadout r;
  // Outcomes: stop, code_execute, web_search, file_read, file_write, ask_user.
  // Coordinates: agency, autonomy, tool_use, persistence, risk, deference.
  r.bias = {1.0, -3.5, -3.0, -3.3, -3.8, 1.2};
  r.gain[0] = {0.0, 0.0, 0.0, -2.0, 0.0, 0.0};
  r.gain[1] = {4.0, 0.0, 0.0, 0.0, 3.0, 0.0};
  r.gain[2] = {4.0, 0.0, 3.0, 0.0, 0.0, 0.0};
  r.gain[3] = {4.0, 0.0, 3.0, 0.0, 0.0, 0.0};
  r.gain[4] = {4.0, 0.0, 0.0, 0.0, 3.0, 0.0};
  r.gain[5] = {-4.0, -3.0, 0.0, 0.0, 0.0, 3.0};
  r.collapse_radius = 2.8;
  r.collapse_gain = 10.0;
  return r;
}

void ToyModelConfig::validate() const {
  if (n_blocks == 0) throw ConfigError("toy model needs at least one block");
  if (hidden_dim < 8) throw ConfigError("toy model hidden_dim must be >= 8");
  if (vocab_size <= vocab::first_general) {
    throw ConfigError("toy model vocab_size must exceed " + std::to_string(vocab::first_general));
  }
  if (!(mix_weight >= 0.0 && mix_weight <= 1.0)) throw ConfigError("mix_weight must be in [0, 1]");
  if (injection_layer >= n_layers()) throw ConfigError("injection_layer out of range");
  if (!(embedding_scale > 0.0) || !(output_scale >= 0.0)) {
    throw ConfigError("toy model scales must be positive");
  }
}

ToyModel::ToyModel(ToyModelConfig config) : config_(std::move(config)) {
  config_.validate();
  const std::size_t d = config_.hidden_dim;
  SeededRng rng(derive_seed(config_.seed, "toymodel"));

  const auto basis = orthonormal_set(kPlantedDims, d, rng);
  planted_.g_agency = basis[0];
  for (std::size_t t = 0; t < kTraitCount; ++t) planted_.g_specific[t] = basis[1 + t];
  planted_.mix_weight = config_.mix_weight;
  planted_.injection_layer = config_.injection_layer;

  embeddings_ = random_matrix(config_.vocab_size, d, config_.embedding_scale, rng);
  for (std::size_t i = 0; i < config_.vocab_size; ++i) {
    project_out_in_place(planted_, embeddings_.row(i));
  }

  const double in_scale = 1.0 / std::sqrt(static_cast<double>(d));
  const double out_scale = config_.output_scale / std::sqrt(static_cast<double>(d));
  for (std::size_t layer = 0; layer < config_.n_layers(); ++layer) {
    if (layer % 4 == 3) {
      AttentionLayerParams p;
      p.w_q = random_matrix(d, d, in_scale, rng);
      p.w_k = random_matrix(d, d, in_scale, rng);
      p.w_v = random_matrix(d, d, in_scale, rng);
      p.w_o = random_matrix(d, d, out_scale, rng);
      layers_.emplace_back(std::move(p));
    } else {
      DeltaLayerParams p;
      p.w_q = random_matrix(d, d, in_scale, rng);
      p.w_k = random_matrix(d, d, in_scale, rng);
      p.w_v = random_matrix(d, d, in_scale, rng);
      p.w_o = random_matrix(d, d, out_scale, rng);
      p.w_gate = random_vector(d, 0.5 * in_scale, rng);
      p.b_gate = 2.0;
      p.w_beta = random_vector(d, 0.5 * in_scale, rng);
      p.b_beta = 0.0;
      layers_.emplace_back(std::move(p));
    }
  }
}

SublayerKind ToyModel::layer_kind(std::size_t layer) const {
  if (layer >= layers_.size()) throw ConfigError("layer " + std::to_string(layer) + " out of range");
  return std::holds_alternative<AttentionLayerParams>(layers_[layer]) ? SublayerKind::attention
                                                                      : SublayerKind::delta;
}

std::vector<HookPoint> ToyModel::all_hooks() const {
  std::vector<HookPoint> hooks;
  for (std::size_t l = 0; l < layers_.size(); ++l) hooks.push_back(hook_at(l));
  return hooks;
}

const DeltaLayerParams& ToyModel::delta_params(std::size_t layer) const {
  if (layer_kind(layer) != SublayerKind::delta) throw ArgumentError("not a delta layer");
  return std::get<DeltaLayerParams>(layers_[layer]);
}

const AttentionLayerParams& ToyModel::attention_params(std::size_t layer) const {
  if (layer_kind(layer) != SublayerKind::attention) throw ArgumentError("not an attention layer");
  return std::get<AttentionLayerParams>(layers_[layer]);
}

std::span<const double> ToyModel::embedding(TokenId id) const {
  if (id >= config_.vocab_size) throw ArgumentError("token id out of range");
  return embeddings_.row(id);
}

BehaviorCommitment ToyModel::commit(std::span<const double> final_residual) const {
  BehaviorCommitment c;
  c.coords = planted_.coordinates(final_residual);
  c.agency_score = c.coords[0];
  const PolicyReadout& r = config_.policy;
  std::array<double, kOutcomeCount> logits{};
  for (std::size_t o = 0; o < kOutcomeCount; ++o) {
    logits[o] = r.bias[o];
    for (std::size_t j = 0; j < kPlantedDims; ++j) logits[o] += r.gain[o][j] * c.coords[j];
  }
  double radius = 0.0;
  for (double x : c.coords) radius += x * x;
  radius = std::sqrt(radius);
  const double excess = std::max(0.0, radius - r.collapse_radius);
  logits[0] += r.collapse_gain * excess * excess;
  c.stop_logit = logits[0];
  for (std::size_t t = 0; t < kToolCount; ++t) c.tool_logits[t] = logits[1 + t];
  return c;
}

void ToyModel::validate_hook(const HookPoint& hook) const {
  if (hook.layer_index >= layers_.size()) {
    throw ConfigError("hook " + hook_label(hook) + " beyond the model's " +
                      std::to_string(layers_.size()) + " layers");
  }
  if (layer_kind(hook.layer_index) != hook.kind) {
    throw ConfigError("hook " + hook_label(hook) + " has the wrong sublayer kind");
  }
}

void ToyModel::validate_steering(const SteeringConfig& steering) const {
  if (steering.vector.layer >= layers_.size()) {
    throw ConfigError("steering layer " + std::to_string(steering.vector.layer) + " out of range");
  }
  if (steering.vector.v.size() != dim()) throw ConfigError("steering vector has the wrong dimension");
  if (!all_finite(steering.vector.v) || !std::isfinite(steering.multiplier)) {
    throw ConfigError("steering vector or multiplier is not finite");
  }
}

void delta_layer_step_in_place(DeltaLayerState& state, std::span<const double> x_t,
                               const DeltaLayerParams& p, Vector& output) {
  const std::size_t d = p.w_q.rows();
  if (x_t.size() != p.w_q.cols()) throw ShapeError("delta layer input has the wrong dimension");
  if (state.s.empty()) state.s = DenseMatrix(d, d);
  const Vector q = matvec(p.w_q, x_t);
  Vector k = matvec(p.w_k, x_t);
  const Vector v = matvec(p.w_v, x_t);
  const double kn = l2_norm(k);
  if (kn > 0.0) {
    for (double& x : k) x /= kn;
  }
  const double g = sigmoid(dot(p.w_gate, x_t) + p.b_gate);
  const double beta = sigmoid(dot(p.w_beta, x_t) + p.b_beta);

  // S <- g (S - beta (S k) k^T) + beta v k^T
  const Vector sk = matvec(state.s, k);
  DenseMatrix& s = state.s;
  for (std::size_t i = 0; i < d; ++i) {
    auto row = s.row(i);
    const double a = beta * sk[i];
    const double b = beta * v[i];
    for (std::size_t j = 0; j < d; ++j) row[j] = g * (row[j] - a * k[j]) + b * k[j];
  }
  output = matvec(s, q);
  // Any non-finite entry of S makes its row of S q non-finite (inf * 0 is
  // NaN), so checking the output covers the state.
  if (!all_finite(output)) throw NumericError("delta layer state became non-finite");
}

DeltaStepResult delta_layer_step(const DeltaLayerState& state, std::span<const double> x_t,
                                 const DeltaLayerParams& params) {
  DeltaStepResult r{{}, state};
  delta_layer_step_in_place(r.state, x_t, params, r.output);
  return r;
}

namespace {

Vector attention_step(AttentionCache& cache, std::span<const double> x_t,
                      const AttentionLayerParams& p) {
  const Vector q = matvec(p.w_q, x_t);
  cache.keys.push_back(matvec(p.w_k, x_t));
  cache.values.push_back(matvec(p.w_v, x_t));
  const double scale = 1.0 / std::sqrt(static_cast<double>(q.size()));
  const std::size_t n = cache.keys.size();
  Vector scores(n);
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < n; ++s) {
    scores[s] = scale * dot(q, cache.keys[s]);
    best = std::max(best, scores[s]);
  }
  double total = 0.0;
  for (double& sc : scores) {
    sc = std::exp(sc - best);
    total += sc;
  }
  Vector out(cache.values.front().size(), 0.0);
  for (std::size_t s = 0; s < n; ++s) axpy(scores[s] / total, cache.values[s], out);
  return out;
}

}  // namespace

std::vector<Vector> attention_layer(std::span<const Vector> x_seq, const AttentionLayerParams& params) {
  AttentionCache cache;
  std::vector<Vector> out;
  out.reserve(x_seq.size());
  for (const Vector& x : x_seq) {
    if (x.size() != params.w_q.cols()) throw ShapeError("attention input has the wrong dimension");
    out.push_back(attention_step(cache, x, params));
  }
  return out;
}

std::string_view steering_mode_name(SteeringMode mode) {
  switch (mode) {
    case SteeringMode::all_positions: return "all";
    case SteeringMode::prefill_only: return "prefill";
    case SteeringMode::decode_only: return "decode";
  }
  return "?";
}

SteeringMode parse_steering_mode(std::string_view name) {
  if (name == "all") return SteeringMode::all_positions;
  if (name == "prefill") return SteeringMode::prefill_only;
  if (name == "decode") return SteeringMode::decode_only;
  throw ArgumentError("unknown steering mode '" + std::string(name) + "'");
}

const DenseMatrix& ResidualTaps::at(const HookPoint& hook) const {
  for (std::size_t i = 0; i < hooks.size(); ++i) {
    if (hooks[i] == hook) return values[i];
  }
  throw ArgumentError("no tap recorded for " + hook_label(hook));
}

ModelState initial_state(const ToyModel& model) {
  ModelState st;
  st.delta.resize(model.n_layers());
  st.attention.resize(model.n_layers());
  for (std::size_t l = 0; l < model.n_layers(); ++l) {
    if (model.layer_kind(l) == SublayerKind::delta) {
      st.delta[l].s = DenseMatrix(model.dim(), model.dim());
    }
  }
  return st;
}

namespace {

enum class Phase { prefill, decode };

bool steering_active(const SteeringConfig* steering, Phase phase) {
  if (steering == nullptr || steering->multiplier == 0.0) return false;
  switch (steering->mode) {
    case SteeringMode::all_positions: return true;
    case SteeringMode::prefill_only: return phase == Phase::prefill;
    case SteeringMode::decode_only: return phase == Phase::decode;
  }
  return false;
}

struct TapSink {
  std::vector<int> slot_of_layer;
  std::vector<std::vector<double>> rows;  // flattened per hook
};

// Layers at or above layer_end are skipped; the returned residual is then the
// one after layer_end - 1.
Vector run_position(const ToyModel& model, ModelState& state, const Token& token,
                    const SteeringConfig* steering, Phase phase, TapSink* taps,
                    std::size_t layer_end = std::numeric_limits<std::size_t>::max()) {
  const std::size_t d = model.dim();
  const PlantedTraits& planted = model.planted();
  const auto emb = model.embedding(token.id);
  Vector x(emb.begin(), emb.end());
  const bool any_intensity =
      std::any_of(token.intensity.begin(), token.intensity.end(), [](double v) { return v != 0.0; });
  const Vector offset = any_intensity ? planted.offset(token.intensity) : Vector{};
  const bool steer = steering_active(steering, phase);

  Vector u(d);
  Vector o;
  const std::size_t end = std::min(layer_end, model.n_layers());
  for (std::size_t layer = 0; layer < end; ++layer) {
    if (any_intensity && layer == planted.injection_layer) axpy(1.0, offset, x);
    std::copy(x.begin(), x.end(), u.begin());
    project_out_in_place(planted, u);
    rms_normalize(u);
    Vector out;
    if (model.layer_kind(layer) == SublayerKind::delta) {
      const auto& p = model.delta_params(layer);
      delta_layer_step_in_place(state.delta[layer], u, p, o);
      out = matvec(p.w_o, o);
    } else {
      const auto& p = model.attention_params(layer);
      o = attention_step(state.attention[layer], u, p);
      out = matvec(p.w_o, o);
    }
    project_out_in_place(planted, out);
    axpy(1.0, out, x);
    if (steer && layer == steering->vector.layer) axpy(steering->multiplier, steering->vector.v, x);
    if (taps != nullptr) {
      const int slot = taps->slot_of_layer[layer];
      if (slot >= 0) {
        auto& dst = taps->rows[static_cast<std::size_t>(slot)];
        dst.insert(dst.end(), x.begin(), x.end());
      }
    }
  }
  ++state.position;
  return x;
}

}  // namespace

namespace {

TapSink make_sink(const ToyModel& model, std::span<const HookPoint> hooks) {
  TapSink sink;
  sink.slot_of_layer.assign(model.n_layers(), -1);
  for (std::size_t i = 0; i < hooks.size(); ++i) {
    model.validate_hook(hooks[i]);
    if (sink.slot_of_layer[hooks[i].layer_index] >= 0) throw ConfigError("duplicate hook");
    sink.slot_of_layer[hooks[i].layer_index] = static_cast<int>(i);
  }
  sink.rows.resize(hooks.size());
  return sink;
}

ResidualTaps collect_taps(const ToyModel& model, std::span<const HookPoint> hooks, std::size_t n_tokens,
                          TapSink& sink) {
  ResidualTaps taps;
  taps.hooks.assign(hooks.begin(), hooks.end());
  for (std::size_t i = 0; i < hooks.size(); ++i) {
    taps.values.emplace_back(n_tokens, model.dim(), std::move(sink.rows[i]));
  }
  return taps;
}

}  // namespace

PrefillResult forward_prefill(const ToyModel& model, const TokenSequence& tokens,
                              const SteeringConfig* steering, std::span<const HookPoint> hooks) {
  if (tokens.empty()) throw ArgumentError("forward_prefill needs at least one token");
  if (steering != nullptr) model.validate_steering(*steering);
  TapSink sink = make_sink(model, hooks);

  PrefillResult result;
  result.state = initial_state(model);
  for (const Token& tok : tokens) {
    result.final_residual = run_position(model, result.state, tok, steering, Phase::prefill,
                                         hooks.empty() ? nullptr : &sink);
  }
  result.commitment = model.commit(result.final_residual);
  result.state.commitment = result.commitment;
  result.state.prefilled = true;
  result.taps = collect_taps(model, hooks, tokens.size(), sink);
  return result;
}

ResidualTaps forward_taps(const ToyModel& model, const TokenSequence& tokens, std::span<const HookPoint> hooks) {
  if (tokens.empty()) throw ArgumentError("forward_taps needs at least one token");
  TapSink sink = make_sink(model, hooks);
  std::size_t layer_end = 0;
  for (const auto& h : hooks) layer_end = std::max(layer_end, h.layer_index + 1);
  ModelState state = initial_state(model);
  for (const Token& tok : tokens) run_position(model, state, tok, nullptr, Phase::prefill, &sink, layer_end);
  return collect_taps(model, hooks, tokens.size(), sink);
}

void append_context(const ToyModel& model, ModelState& state, const TokenSequence& tokens,
                    const SteeringConfig* steering) {
  if (!state.prefilled) throw StateError("append_context before prefill");
  if (steering != nullptr) model.validate_steering(*steering);
  for (const Token& tok : tokens) run_position(model, state, tok, steering, Phase::prefill, nullptr);
}

PolicyEvent sample_policy_event(const BehaviorCommitment& c, SeededRng& rng) {
  std::array<double, kOutcomeCount> logits{};
  logits[0] = c.stop_logit;
  for (std::size_t t = 0; t < kToolCount; ++t) logits[1 + t] = c.tool_logits[t];
  const double best = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double& l : logits) {
    l = std::exp(l - best);
    total += l;
  }
  const double r = rng.uniform() * total;
  double acc = 0.0;
  std::size_t pick = kOutcomeCount - 1;
  for (std::size_t o = 0; o < kOutcomeCount; ++o) {
    acc += logits[o];
    if (r < acc) {
      pick = o;
      break;
    }
  }
  if (pick == 0) return std::nullopt;
  return kAllTools[pick - 1];
}

PolicyEvent forward_decode_step(const ToyModel& model, ModelState& state, const Token& token,
                                const SteeringConfig* steering, SeededRng& rng) {
  if (!state.prefilled) throw StateError("decode step before prefill");
  if (steering != nullptr) model.validate_steering(*steering);
  run_position(model, state, token, steering, Phase::decode, nullptr);
  return sample_policy_event(state.commitment, rng);
}

double rms_of_residuals(const DenseMatrix& taps) {
  if (taps.empty()) throw ArgumentError("rms_of_residuals needs at least one residual");
  double ss = 0.0;
  for (double x : taps.data()) ss += x * x;
  return std::sqrt(ss / static_cast<double>(taps.data().size()));
}

double perturbation_ratio(double perturbation_norm, double rms) {
  if (rms == 0.0) return std::numeric_limits<double>::infinity();
  return perturbation_norm / rms;
}

}  // namespace saesteer
