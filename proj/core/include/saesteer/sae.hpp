#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "saesteer/numerics.hpp"
#include "saesteer/rng.hpp"

namespace saesteer {

struct SaeConfig {
  std::size_t dict_size = 256;
  std::size_t input_dim = 32;
  std::size_t k = 8;
  double base_lr = 2e-3;
  std::size_t warmup_steps = 200;
  double decay_fraction = 0.2;
  std::size_t total_steps = 3000;
  std::size_t aux_k = 8;
  double aux_coeff = 1.0 / 32.0;
  std::size_t resample_interval = 500;
  std::size_t dead_window = 1000;
  std::size_t buffer_capacity = 65536;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;

  // Throws ConfigError on a violated invariant.
  void validate() const;
};

// Encoder and decoder are both D x d. Row j of w_dec is feature j's
// dictionary atom and is kept at unit norm.
struct SaeParams {
  DenseMatrix w_enc;
  DenseMatrix w_dec;
  Vector b_pre;

  std::size_t dict_size() const noexcept { return w_enc.rows(); }
  std::size_t input_dim() const noexcept { return w_enc.cols(); }

  bool operator==(const SaeParams&) const = default;
};

struct TrainStats {
  std::size_t step = 0;
  double mse = 0.0;
  double aux_loss = 0.0;
  std::size_t dead_count = 0;
  double lr = 0.0;
  std::vector<std::uint64_t> feature_fire_counts;
  // Steps since each feature last fired; a feature is dead once this
  // reaches the configured dead window.
  std::vector<std::uint64_t> steps_since_fired;

  explicit TrainStats(std::size_t dict_size = 0)
      : feature_fire_counts(dict_size, 0), steps_since_fired(dict_size, 0) {}

  std::vector<bool> dead_mask(std::size_t dead_window) const;
};

class ActivationBuffer {
 public:
  ActivationBuffer(std::size_t capacity, std::size_t dim);

  void push(std::span<const double> x);

  // Draws `count` stored vectors uniformly without replacement.
  // Throws BufferNotReady when fewer than `count` are stored.
  std::vector<Vector> sample(std::size_t count, SeededRng& rng) const;

  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t fill_level() const noexcept { return fill_level_; }
  std::size_t write_cursor() const noexcept { return write_cursor_; }
  const Vector& at(std::size_t slot) const { return storage_.at(slot); }

 private:
  std::size_t capacity_;
  std::size_t dim_;
  std::vector<Vector> storage_;
  std::size_t write_cursor_ = 0;
  std::size_t fill_level_ = 0;
};

// Optimizer state for the three parameter tensors.
struct SaeOptimizer {
  AdamState w_enc;
  AdamState w_dec;
  AdamState b_pre;

  SaeOptimizer() = default;
  explicit SaeOptimizer(const SaeParams& params);
};

struct SaeGradients {
  DenseMatrix w_enc;
  DenseMatrix w_dec;
  Vector b_pre;
};

struct SaeLoss {
  double mse = 0.0;
  double aux = 0.0;
  double total = 0.0;
  std::vector<bool> fired;  // features in the top-k support of any sample
};

// Keeps the k largest entries (ties: lowest index wins) and zeroes the rest.
Vector top_k_select(std::span<const double> v, std::size_t k);

// z = TopK(ReLU(W_enc (x - b_pre)))
Vector encode(const SaeParams& params, std::span<const double> x, std::size_t k);

// x̂ = W_decᵀ z + b_pre
Vector decode(const SaeParams& params, std::span<const double> z);

// Loss of one batch: mean ‖x − x̂‖² plus aux_coeff times the mean squared
// error of reconstructing the residual (x − x̂) from the top aux_k
// pre-activations among `dead` features. Fills `grads` when non-null with
// the exact gradient; the top-k masks are treated as locally constant.
SaeLoss sae_loss(const SaeParams& params, std::span<const Vector> batch, const SaeConfig& config,
                 const std::vector<bool>& dead, SaeGradients* grads);

// Random unit decoder rows, encoder tied to the decoder, b_pre = mean(init).
SaeParams init_sae_params(const SaeConfig& config, std::span<const Vector> init_batch,
                          SeededRng& rng);

void normalize_decoder_rows(SaeParams& params);

double lr_at_step(const SaeConfig& config, std::size_t step);

// One optimizer step. Returns the updated stats (also written into `stats`).
TrainStats train_step(SaeParams& params, std::span<const Vector> batch, const SaeConfig& config,
                      SaeOptimizer& opt, TrainStats& stats);

// Reinitializes features that have not fired within the dead window using
// high-residual buffer examples. Returns the number of features resampled;
// zero when the buffer holds fewer than batch_size vectors.
std::size_t resample_dead(SaeParams& params, const ActivationBuffer& buffer, TrainStats& stats,
                          const SaeConfig& config, SeededRng& rng, SaeOptimizer* opt = nullptr);

struct TrainResult {
  SaeParams params;
  std::vector<TrainStats> log;  // one entry per logged step
  std::size_t resampled_total = 0;
};

// Full training loop: streams `corpus` through a circular buffer, samples
// batches, applies the schedule and periodic resampling. `log_every`
// controls how often a stats snapshot (without per-feature arrays) is kept.
TrainResult train_sae(const SaeConfig& config, std::span<const Vector> corpus,
                      std::size_t log_every = 100);

// Rounds every parameter to the nearest 32-bit float.
SaeParams round_to_f32(const SaeParams& params);

// QSAE checkpoint: "QSAE", version, D, d, k (u32), then b_pre, W_enc, W_dec
// as little-endian float32, row-major.
struct SaeCheckpoint {
  SaeParams params;
  std::size_t k = 0;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> serialize_checkpoint(const SaeParams& params, std::size_t k);
SaeCheckpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const std::filesystem::path& path, const SaeParams& params, std::size_t k);
SaeCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace saesteer
