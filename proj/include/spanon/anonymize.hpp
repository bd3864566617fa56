#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "spanon/audio_io.hpp"
#include "spanon/common.hpp"

namespace spanon {

// Pole of the all-pole vocal-tract model, unit-circle polar form.
struct Pole {
  double radius = 0.0;
  double angle = 0.0;  // radians in (-pi, pi]
};

// Per-frame LPC model with convention A(z) = 1 - sum_k a_k z^-k.
struct LpcFrameModel {
  int order = 0;
  std::vector<double> coeffs;  // a_1..a_p
  double gain = 0.0;           // final prediction-error energy
  std::vector<Pole> poles;
  bool silent = false;
};

struct McAdamsConfig {
  double alpha_min = 0.75;
  double alpha_max = 0.90;
  double frame_ms = 20.0;
  double hop_ms = 10.0;
  int lpc_order = 20;
  double angle_epsilon = 1e-3;  // poles closer than this to the real axis stay put

  void validate() const;
};

struct PitchShiftConfig {
  double semitone_min = 2.0;
  double semitone_max = 5.0;  // magnitude bounds; sign is drawn per speaker
  int vocoder_iterations = 32;

  void validate() const;
};

// Autocorrelation method + Levinson-Durbin. All-zero frames yield the flat
// model (coeffs 0, gain 0) flagged silent.
LpcFrameModel lpc_analyze(const std::vector<double>& frame, int order);

// Roots of A(z) as poles (trailing zero coefficients trimmed; all-zero
// coefficients give the empty, order-0 set).
std::vector<Pole> find_poles(const std::vector<double>& coeffs);

// phi -> phi^alpha for complex poles with |angle| in (eps, pi-eps); radius
// preserved, conjugates mirrored, radii clamped below 1 for stability.
std::vector<Pole> mcadams_transform_poles(const std::vector<Pole>& poles, double alpha, double angle_epsilon);

// Expand prod_i (1 - p_i z^-1) back to prediction coefficients.
std::vector<double> poles_to_coeffs(const std::vector<Pole>& poles);

// Frame-wise LPC resynthesis with transformed pole angles: inverse-filter to
// the residual per frame, re-filter with the transformed coefficients
// (synthesis state carried across frames), weighted overlap-add, peak
// renormalization to the input peak. Length-preserving.
AudioClip anonymize_mcadams(const AudioClip& clip, const McAdamsConfig& config, double alpha);

// Deterministic uniform draw in [alpha_min, alpha_max] from a per-speaker seed.
double sample_alpha(uint64_t speaker_seed, const McAdamsConfig& config);

// Phase-vocoder time stretch by 2^(semitones/12) followed by resampling back
// to the original length.
AudioClip pitch_shift(const AudioClip& clip, double semitones);

// Randomized pitch anonymization: drawn shift, then log-mel (classifier
// preset) -> mel inversion -> Griffin-Lim resynthesis. If drawn_semitones is
// given it receives the applied signed shift.
AudioClip anonymize_pitch(const AudioClip& clip, uint64_t speaker_seed, const PitchShiftConfig& config,
                          double* drawn_semitones = nullptr);

// Sidecar record written next to every anonymized file.
struct ProvenanceRecord {
  std::string source_id;
  std::string method;  // "mcadams" | "pitch" | "none"
  std::map<std::string, double> params;
  uint64_t seed = 0;
  std::string version = kVersion;
};

std::string provenance_to_json(const ProvenanceRecord& record);

// Dispatcher used by the experiment pipelines and the cli.
struct AnonymizerSpec {
  enum class Method { none, mcadams, pitch };
  Method method = Method::none;
  bool fixed_alpha = false;  // mcadams only: use `alpha` for every speaker
  double alpha = 1.0;
  McAdamsConfig mcadams;
  PitchShiftConfig pitch;

  std::string method_name() const;
};

// Per-speaker randomness is keyed by (seed, salt, speaker_id); the salt
// separates enrollment-side from test-side draws in the inversion harness.
AudioClip apply_anonymizer(const AudioClip& clip, const AnonymizerSpec& spec, uint64_t seed,
                           const std::string& speaker_id, const std::string& salt = "",
                           std::map<std::string, double>* drawn_params = nullptr);

}  // namespace spanon
