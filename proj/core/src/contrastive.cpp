#include "saesteer/contrastive.hpp"

#include <cmath>

#include "saesteer/error.hpp"
#include "saesteer/parallel.hpp"

namespace saesteer {

namespace {

TokenId general_token(SeededRng& rng, std::size_t vocab_size) {
  return vocab::first_general + static_cast<TokenId>(rng.below(vocab_size - vocab::first_general));
}

// Tokens for a (trait, slot, id) triple are fixed by the trait stream, so a
// template id always expands to the same tokens.
std::vector<TokenId> fixed_tokens(std::uint64_t trait_seed, std::uint64_t slot, std::size_t id,
                                  std::size_t length, std::size_t vocab_size) {
  SeededRng rng(derive_seed(derive_seed(trait_seed, slot), id));
  std::vector<TokenId> out(length);
  for (auto& t : out) t = general_token(rng, vocab_size);
  return out;
}

ContrastivePair build_pair(Trait trait, std::uint64_t trait_seed, std::size_t template_id,
                           std::size_t variation_id, Domain domain,
                           std::optional<std::size_t> sub_behavior, const PairCounts& counts,
                           SeededRng& rng, std::size_t vocab_size) {
  const std::uint64_t template_slot = sub_behavior ? 3 : 1;
  std::vector<TokenId> ids{vocab::bos};
  for (TokenId t : fixed_tokens(trait_seed, template_slot, template_id, 4, vocab_size)) ids.push_back(t);
  for (TokenId t : fixed_tokens(trait_seed, template_slot + 1, variation_id, 2, vocab_size)) {
    ids.push_back(t);
  }
  ids.push_back(vocab::domain_token(domain));
  if (sub_behavior) ids.push_back(vocab::sub_behavior_token(trait, *sub_behavior));
  for (int i = 0; i < 2; ++i) ids.push_back(general_token(rng, vocab_size));
  ids.push_back(vocab::trait_marker(trait));

  TraitIntensity background{};
  for (std::size_t t = 0; t < kTraitCount; ++t) {
    background[t] = counts.background_spread * rng.normal();
  }
  TraitIntensity hi = background;
  TraitIntensity lo = background;
  hi[trait_index(trait)] = 1.0;
  lo[trait_index(trait)] = -1.0;

  ContrastivePair pair;
  pair.trait = trait;
  pair.template_id = template_id;
  pair.variation_id = variation_id;
  pair.domain = domain;
  pair.kind = sub_behavior ? PairKind::sub_behavior : PairKind::composite;
  pair.sub_behavior = sub_behavior;
  for (TokenId id : ids) {
    pair.high.push_back({id, hi});
    pair.low.push_back({id, lo});
  }
  return pair;
}

}  // namespace

void PairCounts::validate() const {
  if (templates == 0 || variations == 0 || domains == 0) {
    throw ArgumentError("pair counts must be at least 1");
  }
  if (domains > kDomainCount) throw ArgumentError("at most 4 task domains");
  if ((sub_templates == 0) != (sub_variations == 0)) {
    throw ArgumentError("sub-behavior counts must both be zero or both positive");
  }
  if (!(background_spread >= 0.0)) throw ArgumentError("background_spread must be >= 0");
}

std::vector<ContrastivePair> generate_pairs(Trait trait, const PairCounts& counts, SeededRng& rng,
                                            std::size_t vocab_size) {
  counts.validate();
  if (vocab_size <= vocab::first_general) throw ArgumentError("vocabulary too small for pairs");
  const std::uint64_t trait_seed = rng.next_u64();
  std::vector<ContrastivePair> out;
  out.reserve(counts.per_trait());
  for (std::size_t t = 0; t < counts.templates; ++t) {
    for (std::size_t v = 0; v < counts.variations; ++v) {
      for (std::size_t d = 0; d < counts.domains; ++d) {
        out.push_back(build_pair(trait, trait_seed, t, v, static_cast<Domain>(d), std::nullopt,
                                 counts, rng, vocab_size));
      }
    }
  }
  for (std::size_t sub = 0; sub < 3 && counts.sub_templates > 0; ++sub) {
    for (std::size_t t = 0; t < counts.sub_templates; ++t) {
      for (std::size_t v = 0; v < counts.sub_variations; ++v) {
        const auto domain = static_cast<Domain>((t + v) % kDomainCount);
        out.push_back(build_pair(trait, trait_seed, t, v, domain, sub, counts, rng, vocab_size));
      }
    }
  }
  return out;
}

std::vector<ContrastivePair> generate_pair_set(std::span<const Trait> traits,
                                               const PairCounts& counts, std::uint64_t seed,
                                               std::size_t vocab_size) {
  std::vector<ContrastivePair> all;
  for (Trait t : traits) {
    SeededRng rng(derive_seed(seed, trait_name(t)));
    auto pairs = generate_pairs(t, counts, rng, vocab_size);
    all.insert(all.end(), std::make_move_iterator(pairs.begin()), std::make_move_iterator(pairs.end()));
  }
  return all;
}

std::vector<PooledActivationPair> harvest(const ToyModel& model, const ContrastivePair& pair,
                                          std::span<const HookPoint> hooks) {
  const ResidualTaps hi = forward_taps(model, pair.high, hooks);
  const ResidualTaps lo = forward_taps(model, pair.low, hooks);
  std::vector<PooledActivationPair> out;
  out.reserve(hooks.size());
  for (std::size_t i = 0; i < hooks.size(); ++i) {
    const DenseMatrix& th = hi.values[i];
    const DenseMatrix& tl = lo.values[i];
    const auto rh = th.row(th.rows() - 1);
    const auto rl = tl.row(tl.rows() - 1);
    out.push_back({hooks[i], Vector(rh.begin(), rh.end()), Vector(rl.begin(), rl.end())});
  }
  return out;
}

TasResult compute_tas(std::span<const Vector> z_high, std::span<const Vector> z_low) {
  if (z_high.size() != z_low.size()) throw ArgumentError("TAS needs index-paired samples");
  TasResult r;
  if (z_high.empty()) return r;
  const std::size_t dict = z_high.front().size();
  const std::size_t n = z_high.size();
  r.tas.assign(dict, 0.0);
  if (n < 2) return r;
  Vector mean(dict, 0.0);
  Vector m2(dict, 0.0);
  // Welford over the paired differences; their mean equals the difference of means.
  for (std::size_t i = 0; i < n; ++i) {
    if (z_high[i].size() != dict || z_low[i].size() != dict) {
      throw ShapeError("TAS inputs must share the dictionary size");
    }
    for (std::size_t j = 0; j < dict; ++j) {
      const double diff = z_high[i][j] - z_low[i][j];
      const double delta = diff - mean[j];
      mean[j] += delta / static_cast<double>(i + 1);
      m2[j] += delta * (diff - mean[j]);
    }
  }
  double total = 0.0;
  for (std::size_t j = 0; j < dict; ++j) {
    const double sd = std::sqrt(std::max(0.0, m2[j]) / static_cast<double>(n - 1));
    r.tas[j] = sd < kTasMinStd ? 0.0 : mean[j] / sd;
    total += std::abs(r.tas[j]);
  }
  r.mean_abs_tas = total / static_cast<double>(dict);
  return r;
}

void CorpusOptions::validate() const {
  if (sequences == 0 || length == 0) throw ArgumentError("corpus needs sequences and positions");
  if (!(active_probability >= 0.0 && active_probability <= 1.0)) {
    throw ArgumentError("corpus active_probability must be in [0, 1]");
  }
  if (!(min_magnitude >= 0.0 && max_magnitude >= min_magnitude)) {
    throw ArgumentError("corpus magnitude range is invalid");
  }
}

std::vector<std::vector<Vector>> harvest_corpus(const ToyModel& model,
                                                std::span<const HookPoint> hooks,
                                                const CorpusOptions& options, std::uint64_t seed,
                                                std::size_t workers) {
  options.validate();
  for (const HookPoint& h : hooks) model.validate_hook(h);
  const std::size_t vocab_size = model.config().vocab_size;
  std::vector<ResidualTaps> runs(options.sequences);
  parallel_for(options.sequences, workers, [&](std::size_t s) {
    SeededRng rng(derive_seed(derive_seed(seed, "corpus"), s));
    TraitIntensity intensity{};
    for (double& v : intensity) {
      if (rng.uniform() < options.active_probability) {
        const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
        v = sign * (options.min_magnitude +
                    (options.max_magnitude - options.min_magnitude) * rng.uniform());
      }
    }
    TokenSequence seq{{vocab::bos, intensity}};
    for (std::size_t i = 1; i < options.length; ++i) {
      seq.push_back({general_token(rng, vocab_size), intensity});
    }
    runs[s] = forward_taps(model, seq, hooks);
  });
  std::vector<std::vector<Vector>> out(hooks.size());
  for (std::size_t h = 0; h < hooks.size(); ++h) {
    out[h].reserve(options.sequences * options.length);
    for (const ResidualTaps& r : runs) {
      const DenseMatrix& taps = r.values[h];
      for (std::size_t p = 0; p < taps.rows(); ++p) {
        const auto row = taps.row(p);
        out[h].emplace_back(row.begin(), row.end());
      }
    }
  }
  return out;
}

HookPoint select_best_sae(std::span<const TasResult> results) {
  if (results.empty()) throw ArgumentError("select_best_sae needs at least one candidate");
  const TasResult* best = &results.front();
  for (const TasResult& r : results.subspan(1)) {
    if (r.mean_abs_tas > best->mean_abs_tas ||
        (r.mean_abs_tas == best->mean_abs_tas && r.hook.layer_index < best->hook.layer_index)) {
      best = &r;
    }
  }
  return best->hook;
}

}  // namespace saesteer
