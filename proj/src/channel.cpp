#include "fairk/channel.hpp"

#include <cmath>
#include <stdexcept>

namespace fairk {

namespace {
constexpr double kPi = 3.14159265358979323846;

double sign_of(double x) { return x >= 0.0 ? 1.0 : -1.0; }
}  // namespace

ChannelMode parse_channel_mode(const std::string& name) {
  if (name == "analog") return ChannelMode::Analog;
  if (name == "one_bit_mv") return ChannelMode::OneBitMV;
  if (name == "noiseless") return ChannelMode::Noiseless;
  throw std::invalid_argument("unknown channel mode: " + name);
}

std::string channel_mode_name(ChannelMode mode) {
  switch (mode) {
    case ChannelMode::Analog: return "analog";
    case ChannelMode::OneBitMV: return "one_bit_mv";
    case ChannelMode::Noiseless: return "noiseless";
  }
  throw std::logic_error("channel_mode_name: bad enum value");
}

FadingKind parse_fading_kind(const std::string& name) {
  if (name == "rayleigh") return FadingKind::Rayleigh;
  if (name == "unit") return FadingKind::UnitGain;
  throw std::invalid_argument("unknown fading kind: " + name);
}

std::string fading_kind_name(FadingKind kind) {
  switch (kind) {
    case FadingKind::Rayleigh: return "rayleigh";
    case FadingKind::UnitGain: return "unit";
  }
  throw std::logic_error("fading_kind_name: bad enum value");
}

double ChannelParams::sigma_c2() const {
  if (fading == FadingKind::UnitGain) return 0.0;
  return (4.0 / kPi - 1.0) * mu_c * mu_c;
}

void ChannelParams::validate() const {
  require(mu_c > 0.0, "channel: mu_c must be > 0");
  require(sigma_z2 >= 0.0, "channel: sigma_z2 must be >= 0");
  require(std::isfinite(sigma_z2), "channel: sigma_z2 must be finite");
  require(p_flip >= 0.0 && p_flip <= 1.0, "channel: p_flip must be in [0,1]");
}

std::vector<double> sample_fading(const ChannelParams& params, std::size_t n,
                                  Rng& rng) {
  require(n >= 1, "sample_fading: need at least one client");
  std::vector<double> h(n);
  if (params.fading == FadingKind::UnitGain) {
    for (auto& x : h) x = params.mu_c;
    return h;
  }
  const double scale = params.mu_c / std::sqrt(kPi / 2.0);
  for (auto& x : h) x = rng.rayleigh(scale);
  return h;
}

SparsePayload oac_aggregate(const std::vector<SparsePayload>& payloads,
                            const std::vector<double>& h,
                            const ChannelParams& params, Rng& rng) {
  require(!payloads.empty(), "oac_aggregate: no payloads");
  require(h.size() == payloads.size(), "oac_aggregate: one gain per client required");
  const std::size_t k = payloads.front().size();
  for (const auto& p : payloads) {
    require(p.size() == k, "oac_aggregate: payload length mismatch");
  }

  SparsePayload out(std::vector<double>(k, 0.0));
  for (std::size_t n = 0; n < payloads.size(); ++n) {
    for (std::size_t j = 0; j < k; ++j) {
      out.values[j] += h[n] * payloads[n].values[j];
    }
  }
  if (params.mode != ChannelMode::Noiseless) {
    const double sigma = std::sqrt(params.sigma_z2);
    for (std::size_t j = 0; j < k; ++j) out.values[j] += rng.normal(0.0, sigma);
  }
  const double inv_n = 1.0 / static_cast<double>(payloads.size());
  for (auto& x : out.values) x *= inv_n;
  return out;
}

GradientVector reconstruct(const GradientVector& prev_g, const SelectionMask& mask,
                           const SparsePayload& agg) {
  require(prev_g.size() == mask.size(), "reconstruct: mask/gradient size mismatch");
  require(mask.count() == agg.size(), "reconstruct: mask cardinality != payload length");
  GradientVector out = prev_g;
  std::size_t next = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask.test(i)) out[i] = agg.values[next++];
  }
  return out;
}

SparsePayload one_bit_mv_aggregate(const std::vector<SparsePayload>& payloads,
                                   const ChannelParams& params, Rng& rng) {
  require(!payloads.empty(), "one_bit_mv_aggregate: no payloads");
  const std::size_t k = payloads.front().size();
  for (const auto& p : payloads) {
    require(p.size() == k, "one_bit_mv_aggregate: payload length mismatch");
  }

  SparsePayload out(std::vector<double>(k, 0.0));
  for (std::size_t j = 0; j < k; ++j) {
    double votes = 0.0;
    for (const auto& p : payloads) votes += sign_of(p.values[j]);
    double s = votes >= 0.0 ? 1.0 : -1.0;
    if (params.p_flip > 0.0 && rng.uniform01() < params.p_flip) s = -s;
    out.values[j] = s;
  }
  return out;
}

SparsePayload aggregate(const std::vector<SparsePayload>& payloads,
                        const std::vector<double>& h, const ChannelParams& params,
                        Rng& rng) {
  if (params.mode == ChannelMode::OneBitMV) {
    return one_bit_mv_aggregate(payloads, params, rng);
  }
  return oac_aggregate(payloads, h, params, rng);
}

}  // namespace fairk
