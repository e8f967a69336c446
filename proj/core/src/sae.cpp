#include "saesteer/sae.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "binary_io.hpp"
#include "saesteer/error.hpp"
#include "saesteer/io.hpp"

namespace saesteer {

void SaeConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("SaeConfig: " + what); };
  if (dict_size == 0 || input_dim == 0) fail("dict_size and input_dim must be positive");
  if (k == 0 || k > dict_size) fail("k must be in [1, dict_size]");
  if (aux_k > dict_size) fail("aux_k must be <= dict_size");
  if (dict_size < input_dim) fail("dict_size must be >= input_dim (overcomplete)");
  if (resample_interval == 0) fail("resample_interval must be > 0");
  if (!(decay_fraction > 0.0 && decay_fraction <= 1.0)) fail("decay_fraction must be in (0, 1]");
  if (!(base_lr >= 0.0)) fail("base_lr must be >= 0");
  if (!(aux_coeff >= 0.0)) fail("aux_coeff must be >= 0");
  if (batch_size == 0) fail("batch_size must be > 0");
  if (buffer_capacity < batch_size) fail("buffer_capacity must be >= batch_size");
  if (total_steps == 0) fail("total_steps must be > 0");
}

std::vector<bool> TrainStats::dead_mask(std::size_t dead_window) const {
  std::vector<bool> dead(steps_since_fired.size());
  for (std::size_t j = 0; j < dead.size(); ++j) dead[j] = steps_since_fired[j] >= dead_window;
  return dead;
}

ActivationBuffer::ActivationBuffer(std::size_t capacity, std::size_t dim)
    : capacity_(capacity), dim_(dim) {
  if (capacity == 0) throw ArgumentError("ActivationBuffer: capacity must be > 0");
  storage_.reserve(std::min<std::size_t>(capacity, 1u << 16));
}

void ActivationBuffer::push(std::span<const double> x) {
  if (x.size() != dim_) {
    throw ShapeError("ActivationBuffer::push: expected dim " + std::to_string(dim_) + ", got " +
                     std::to_string(x.size()));
  }
  if (storage_.size() < capacity_) {
    storage_.emplace_back(x.begin(), x.end());
  } else {
    storage_[write_cursor_].assign(x.begin(), x.end());
  }
  write_cursor_ = (write_cursor_ + 1) % capacity_;
  fill_level_ = std::min(fill_level_ + 1, capacity_);
}

std::vector<Vector> ActivationBuffer::sample(std::size_t count, SeededRng& rng) const {
  if (count > fill_level_) {
    throw BufferNotReady("ActivationBuffer: need " + std::to_string(count) + " vectors, have " +
                         std::to_string(fill_level_));
  }
  // Partial Fisher-Yates over slot indices.
  std::vector<std::size_t> slots(fill_level_);
  std::iota(slots.begin(), slots.end(), std::size_t{0});
  std::vector<Vector> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + rng.below(fill_level_ - i);
    std::swap(slots[i], slots[j]);
    out.push_back(storage_[slots[i]]);
  }
  return out;
}

SaeOptimizer::SaeOptimizer(const SaeParams& params)
    : w_enc(params.w_enc.data().size()),
      w_dec(params.w_dec.data().size()),
      b_pre(params.b_pre.size()) {}

Vector top_k_select(std::span<const double> v, std::size_t k) {
  if (k > v.size()) {
    throw ShapeError("top_k_select: k = " + std::to_string(k) + " exceeds length " +
                     std::to_string(v.size()));
  }
  Vector out(v.size(), 0.0);
  if (k == 0) return out;
  if (k == v.size()) {
    std::copy(v.begin(), v.end(), out.begin());
    return out;
  }
  auto larger = [&](std::size_t a, std::size_t b) {
    return v[a] > v[b] || (v[a] == v[b] && a < b);
  };
  // One pass keeping the k best indices seen so far; `worst` tracks the
  // weakest of them.
  std::vector<std::size_t> best(k);
  std::iota(best.begin(), best.end(), std::size_t{0});
  auto find_worst = [&] {
    std::size_t w = 0;
    for (std::size_t i = 1; i < k; ++i) {
      if (larger(best[w], best[i])) w = i;
    }
    return w;
  };
  std::size_t worst = find_worst();
  for (std::size_t i = k; i < v.size(); ++i) {
    if (!larger(i, best[worst])) continue;
    best[worst] = i;
    worst = find_worst();
  }
  for (std::size_t i : best) out[i] = v[i];
  return out;
}

namespace {

void check_input(const SaeParams& params, std::span<const double> x) {
  if (x.size() != params.input_dim()) {
    throw ShapeError("SAE input has dim " + std::to_string(x.size()) + ", expected " +
                     std::to_string(params.input_dim()));
  }
}

Vector relu_preactivations(const SaeParams& params, std::span<const double> x) {
  Vector centered(x.begin(), x.end());
  for (std::size_t i = 0; i < centered.size(); ++i) centered[i] -= params.b_pre[i];
  Vector pre = matvec(params.w_enc, centered);
  for (double& p : pre) p = std::max(p, 0.0);
  return pre;
}

}  // namespace

Vector encode(const SaeParams& params, std::span<const double> x, std::size_t k) {
  check_input(params, x);
  return top_k_select(relu_preactivations(params, x), k);
}

Vector decode(const SaeParams& params, std::span<const double> z) {
  if (z.size() != params.dict_size()) {
    throw ShapeError("decode: latent has dim " + std::to_string(z.size()) + ", expected " +
                     std::to_string(params.dict_size()));
  }
  Vector x = matvec_transposed(params.w_dec, z);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += params.b_pre[i];
  return x;
}

SaeLoss sae_loss(const SaeParams& params, std::span<const Vector> batch, const SaeConfig& config,
                 const std::vector<bool>& dead, SaeGradients* grads) {
  if (batch.empty()) throw ArgumentError("sae_loss: empty batch");
  const std::size_t dict = params.dict_size();
  const std::size_t dim = params.input_dim();
  if (dead.size() != dict) throw ShapeError("sae_loss: dead mask length differs from dict_size");
  const bool any_dead = std::any_of(dead.begin(), dead.end(), [](bool b) { return b; });
  const bool use_aux = config.aux_coeff > 0.0 && config.aux_k > 0 && any_dead;

  if (grads != nullptr) {
    grads->w_enc = DenseMatrix(dict, dim);
    grads->w_dec = DenseMatrix(dict, dim);
    grads->b_pre.assign(dim, 0.0);
  }

  SaeLoss loss;
  loss.fired.assign(dict, false);
  const double inv_batch = 1.0 / static_cast<double>(batch.size());

  Vector centered(dim);
  Vector g_pre(dict);
  for (const Vector& x : batch) {
    check_input(params, x);
    for (std::size_t i = 0; i < dim; ++i) centered[i] = x[i] - params.b_pre[i];
    Vector act = matvec(params.w_enc, centered);
    for (double& a : act) a = std::max(a, 0.0);
    const Vector z = top_k_select(act, config.k);
    Vector residual = centered;  // e = c − W_decᵀ z
    for (std::size_t j = 0; j < dict; ++j) {
      if (z[j] == 0.0) continue;
      loss.fired[j] = true;
      axpy(-z[j], params.w_dec.row(j), residual);
    }
    loss.mse += dot(residual, residual) * inv_batch;

    Vector z_aux;
    Vector aux_residual;  // f = e − W_decᵀ z_aux
    if (use_aux) {
      Vector dead_act(dict, 0.0);
      for (std::size_t j = 0; j < dict; ++j) {
        if (dead[j]) dead_act[j] = act[j];
      }
      z_aux = top_k_select(dead_act, config.aux_k);
      aux_residual = residual;
      for (std::size_t j = 0; j < dict; ++j) {
        if (z_aux[j] != 0.0) axpy(-z_aux[j], params.w_dec.row(j), aux_residual);
      }
      loss.aux += dot(aux_residual, aux_residual) * inv_batch;
    }

    if (grads == nullptr) continue;

    // dL/de and dL/dê for this sample, already scaled by 1/B.
    Vector g_e(dim);
    Vector g_ehat(dim, 0.0);
    for (std::size_t i = 0; i < dim; ++i) {
      g_e[i] = 2.0 * residual[i] * inv_batch;
      if (use_aux) {
        g_e[i] += 2.0 * config.aux_coeff * aux_residual[i] * inv_batch;
        g_ehat[i] = -2.0 * config.aux_coeff * aux_residual[i] * inv_batch;
      }
    }
    std::fill(g_pre.begin(), g_pre.end(), 0.0);
    for (std::size_t j = 0; j < dict; ++j) {
      if (z[j] != 0.0) {
        axpy(-z[j], g_e, grads->w_dec.row(j));
        g_pre[j] -= dot(params.w_dec.row(j), g_e);
      }
      if (use_aux && z_aux[j] != 0.0) {
        axpy(z_aux[j], g_ehat, grads->w_dec.row(j));
        g_pre[j] += dot(params.w_dec.row(j), g_ehat);
      }
    }
    Vector g_centered = g_e;
    for (std::size_t j = 0; j < dict; ++j) {
      if (g_pre[j] == 0.0) continue;
      axpy(g_pre[j], centered, grads->w_enc.row(j));
      axpy(g_pre[j], params.w_enc.row(j), g_centered);
    }
    axpy(-1.0, g_centered, grads->b_pre);
  }
  loss.total = loss.mse + config.aux_coeff * loss.aux;
  return loss;
}

void normalize_decoder_rows(SaeParams& params) {
  for (std::size_t j = 0; j < params.w_dec.rows(); ++j) {
    auto row = params.w_dec.row(j);
    const double n = l2_norm(row);
    if (n == 0.0) throw NumericError("decoder row " + std::to_string(j) + " has zero norm");
    for (double& v : row) v /= n;
  }
}

SaeParams init_sae_params(const SaeConfig& config, std::span<const Vector> init_batch,
                          SeededRng& rng) {
  config.validate();
  SaeParams params;
  params.w_dec = DenseMatrix(config.dict_size, config.input_dim);
  for (double& v : params.w_dec.data()) v = rng.normal();
  normalize_decoder_rows(params);
  params.w_enc = params.w_dec;
  params.b_pre.assign(config.input_dim, 0.0);
  if (!init_batch.empty()) {
    for (const Vector& x : init_batch) axpy(1.0, x, params.b_pre);
    for (double& b : params.b_pre) b /= static_cast<double>(init_batch.size());
  }
  return params;
}

double lr_at_step(const SaeConfig& config, std::size_t step) {
  if (step > config.total_steps) {
    throw ArgumentError("lr_at_step: step " + std::to_string(step) + " beyond total_steps " +
                        std::to_string(config.total_steps));
  }
  const auto s = static_cast<double>(step);
  const auto total = static_cast<double>(config.total_steps);
  double lr = config.base_lr;
  if (config.warmup_steps > 0 && step < config.warmup_steps) {
    lr = config.base_lr * s / static_cast<double>(config.warmup_steps);
  }
  const double decay_len = config.decay_fraction * total;
  const double decay_start = total - decay_len;
  if (s >= decay_start && decay_len > 0.0) {
    lr = std::min(lr, config.base_lr * (total - s) / decay_len);
  }
  return std::max(lr, 0.0);
}

TrainStats train_step(SaeParams& params, std::span<const Vector> batch, const SaeConfig& config,
                      SaeOptimizer& opt, TrainStats& stats) {
  if (batch.empty()) throw ArgumentError("train_step: empty batch");
  const std::size_t dict = params.dict_size();
  if (stats.feature_fire_counts.size() != dict) stats = TrainStats(dict);

  const std::vector<bool> dead = stats.dead_mask(config.dead_window);
  SaeGradients grads;
  const SaeLoss loss = sae_loss(params, batch, config, dead, &grads);
  const double lr = lr_at_step(config, stats.step);

  adam_update(params.w_enc.data(), grads.w_enc.data(), opt.w_enc, lr);
  adam_update(params.w_dec.data(), grads.w_dec.data(), opt.w_dec, lr);
  adam_update(params.b_pre, grads.b_pre, opt.b_pre, lr);
  normalize_decoder_rows(params);
  if (!params.w_enc.all_finite() || !all_finite(params.b_pre)) {
    throw NumericError("train_step: parameters became non-finite");
  }

  std::size_t dead_count = 0;
  for (std::size_t j = 0; j < dict; ++j) {
    if (loss.fired[j]) {
      stats.feature_fire_counts[j] += 1;
      stats.steps_since_fired[j] = 0;
    } else {
      stats.steps_since_fired[j] += 1;
    }
    if (stats.steps_since_fired[j] >= config.dead_window) ++dead_count;
  }
  stats.step += 1;
  stats.mse = loss.mse;
  stats.aux_loss = loss.aux;
  stats.dead_count = dead_count;
  stats.lr = lr;
  return stats;
}

std::size_t resample_dead(SaeParams& params, const ActivationBuffer& buffer, TrainStats& stats,
                          const SaeConfig& config, SeededRng& rng, SaeOptimizer* opt) {
  if (buffer.fill_level() < config.batch_size) return 0;
  const std::size_t dict = params.dict_size();
  const std::size_t dim = params.input_dim();
  std::vector<std::size_t> dead;
  for (std::size_t j = 0; j < dict; ++j) {
    if (stats.steps_since_fired[j] >= config.dead_window) dead.push_back(j);
  }
  if (dead.empty()) return 0;

  const std::size_t n_candidates =
      std::min(buffer.fill_level(), std::max<std::size_t>({4 * config.batch_size, 4 * dead.size(), 256}));
  const std::vector<Vector> candidates = buffer.sample(n_candidates, rng);
  std::vector<double> residual_energy(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const Vector recon = decode(params, encode(params, candidates[i], config.k));
    double e = 0.0;
    for (std::size_t c = 0; c < dim; ++c) e += (candidates[i][c] - recon[c]) * (candidates[i][c] - recon[c]);
    residual_energy[i] = e;
  }
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return residual_energy[a] > residual_energy[b]; });

  double alive_norm = 0.0;
  std::size_t alive = 0;
  for (std::size_t j = 0; j < dict; ++j) {
    if (stats.steps_since_fired[j] < config.dead_window) {
      alive_norm += l2_norm(params.w_enc.row(j));
      ++alive;
    }
  }
  const double encoder_scale = 0.2 * (alive > 0 ? alive_norm / static_cast<double>(alive) : 1.0);

  for (std::size_t i = 0; i < dead.size(); ++i) {
    const std::size_t j = dead[i];
    const Vector& example = candidates[order[i % order.size()]];
    Vector direction(dim);
    for (std::size_t c = 0; c < dim; ++c) direction[c] = example[c] - params.b_pre[c];
    double n = l2_norm(direction);
    if (n == 0.0) {
      for (double& v : direction) v = rng.normal();
      n = l2_norm(direction);
    }
    auto dec_row = params.w_dec.row(j);
    auto enc_row = params.w_enc.row(j);
    for (std::size_t c = 0; c < dim; ++c) {
      dec_row[c] = direction[c] / n;
      enc_row[c] = dec_row[c] * encoder_scale;
    }
    if (opt != nullptr) {
      opt->w_enc.reset_moments(j * dim, dim);
      opt->w_dec.reset_moments(j * dim, dim);
    }
    stats.steps_since_fired[j] = 0;
  }
  stats.dead_count = 0;
  for (std::size_t j = 0; j < dict; ++j) {
    if (stats.steps_since_fired[j] >= config.dead_window) ++stats.dead_count;
  }
  return dead.size();
}

TrainResult train_sae(const SaeConfig& config, std::span<const Vector> corpus,
                      std::size_t log_every) {
  config.validate();
  if (corpus.size() < config.batch_size) {
    throw ArgumentError("train_sae: corpus smaller than one batch");
  }
  SeededRng rng(config.seed);
  ActivationBuffer buffer(config.buffer_capacity, config.input_dim);
  std::size_t cursor = 0;
  const std::size_t initial = std::min(config.buffer_capacity, corpus.size());
  for (; cursor < initial; ++cursor) buffer.push(corpus[cursor]);

  std::vector<Vector> first_fill(corpus.begin(), corpus.begin() + static_cast<std::ptrdiff_t>(initial));
  TrainResult result;
  result.params = init_sae_params(config, first_fill, rng);
  first_fill.clear();
  first_fill.shrink_to_fit();

  SaeOptimizer opt(result.params);
  TrainStats stats(config.dict_size);
  const bool refresh = corpus.size() > config.buffer_capacity;
  for (std::size_t step = 0; step < config.total_steps; ++step) {
    const std::vector<Vector> batch = buffer.sample(config.batch_size, rng);
    train_step(result.params, batch, config, opt, stats);
    if (refresh) {
      for (std::size_t i = 0; i < config.batch_size; ++i) {
        buffer.push(corpus[cursor]);
        cursor = (cursor + 1) % corpus.size();
      }
    }
    if (stats.step % config.resample_interval == 0) {
      result.resampled_total += resample_dead(result.params, buffer, stats, config, rng, &opt);
    }
    if (log_every > 0 && (stats.step % log_every == 0 || stats.step == config.total_steps)) {
      TrainStats snapshot;
      snapshot.step = stats.step;
      snapshot.mse = stats.mse;
      snapshot.aux_loss = stats.aux_loss;
      snapshot.dead_count = stats.dead_count;
      snapshot.lr = stats.lr;
      result.log.push_back(std::move(snapshot));
    }
  }
  return result;
}

SaeParams round_to_f32(const SaeParams& params) {
  SaeParams out = params;
  auto round = [](std::span<double> values) {
    for (double& v : values) v = static_cast<double>(static_cast<float>(v));
  };
  round(out.w_enc.data());
  round(out.w_dec.data());
  round(out.b_pre);
  return out;
}

std::vector<std::uint8_t> serialize_checkpoint(const SaeParams& params, std::size_t k) {
  detail::ByteWriter w;
  w.raw("QSAE");
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(params.dict_size()));
  w.u32(static_cast<std::uint32_t>(params.input_dim()));
  w.u32(static_cast<std::uint32_t>(k));
  for (double v : params.b_pre) w.f32(v);
  for (double v : params.w_enc.data()) w.f32(v);
  for (double v : params.w_dec.data()) w.f32(v);
  return w.take();
}

SaeCheckpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes, "QSAE checkpoint");
  if (r.raw(4) != "QSAE") throw IoError("QSAE checkpoint: bad magic");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw IoError("QSAE checkpoint: unsupported version " + std::to_string(version));
  }
  const std::size_t dict = r.u32();
  const std::size_t dim = r.u32();
  const std::size_t k = r.u32();
  if (dict == 0 || dim == 0 || k > dict) throw IoError("QSAE checkpoint: invalid header");
  SaeCheckpoint ck;
  ck.k = k;
  ck.params.b_pre.resize(dim);
  for (double& v : ck.params.b_pre) v = r.f32();
  ck.params.w_enc = DenseMatrix(dict, dim);
  for (double& v : ck.params.w_enc.data()) v = r.f32();
  ck.params.w_dec = DenseMatrix(dict, dim);
  for (double& v : ck.params.w_dec.data()) v = r.f32();
  if (!r.at_end()) throw IoError("QSAE checkpoint: trailing bytes");
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const SaeParams& params, std::size_t k) {
  write_bytes(path, serialize_checkpoint(params, k));
}

SaeCheckpoint load_checkpoint(const std::filesystem::path& path) {
  return deserialize_checkpoint(read_bytes(path));
}

}  // namespace saesteer
