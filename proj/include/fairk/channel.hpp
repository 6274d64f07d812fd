#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "fairk/rng.hpp"
#include "fairk/types.hpp"

namespace fairk {

enum class ChannelMode { Analog, OneBitMV, Noiseless };
enum class FadingKind { Rayleigh, UnitGain };

ChannelMode parse_channel_mode(const std::string& name);
std::string channel_mode_name(ChannelMode mode);
FadingKind parse_fading_kind(const std::string& name);
std::string fading_kind_name(FadingKind kind);

struct ChannelParams {
  double mu_c = 1.0;       // mean fading gain
  double sigma_z2 = 1.0;   // additive noise variance per entry
  ChannelMode mode = ChannelMode::Analog;
  FadingKind fading = FadingKind::Rayleigh;
  double p_flip = 0.0;     // one-bit mode: per-entry sign corruption

  // Fading variance is fixed by the envelope family: a Rayleigh amplitude
  // with mean mu_c has variance (4/pi - 1) mu_c^2; a unit gain has none.
  double sigma_c2() const;

  void validate() const;
};

// The k nonzero gradient entries of one round, in mask order.
struct SparsePayload {
  std::vector<double> values;

  SparsePayload() = default;
  explicit SparsePayload(std::vector<double> v) : values(std::move(v)) {}
  std::size_t size() const { return values.size(); }
};

// One i.i.d. gain per client.
std::vector<double> sample_fading(const ChannelParams& params, std::size_t n,
                                  Rng& rng);

// Superposed uplink: (1/N)(sum_n h_n * payload_n + noise). Noiseless mode
// omits the noise term. Clients are summed in ascending index order so
// results are bit-reproducible.
SparsePayload oac_aggregate(const std::vector<SparsePayload>& payloads,
                            const std::vector<double>& h,
                            const ChannelParams& params, Rng& rng);

// Splices the aggregated values into the selected positions; unselected
// positions keep their previous gradient value.
GradientVector reconstruct(const GradientVector& prev_g, const SelectionMask& mask,
                           const SparsePayload& agg);

// One-bit mode: each client votes sign(entry), majority wins, exact ties
// resolve to +1; the decided sign then flips with probability p_flip.
SparsePayload one_bit_mv_aggregate(const std::vector<SparsePayload>& payloads,
                                   const ChannelParams& params, Rng& rng);

// Mode dispatch used by the training loop.
SparsePayload aggregate(const std::vector<SparsePayload>& payloads,
                        const std::vector<double>& h, const ChannelParams& params,
                        Rng& rng);

}  // namespace fairk
