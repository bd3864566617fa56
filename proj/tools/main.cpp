#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "spanon/anonymize.hpp"
#include "spanon/audio_io.hpp"
#include "spanon/dsp.hpp"
#include "spanon/embedding.hpp"
#include "spanon/experiment.hpp"
#include "spanon/metrics.hpp"
#include "spanon/synth.hpp"
#include "spanon/vad.hpp"

namespace fs = std::filesystem;
using namespace spanon;

namespace {

struct CliState {
  uint64_t seed = 42;
  unsigned jobs = 1;

  std::string method = "mcadams";
  std::string in;
  std::string out;
  std::string report_path;
  std::string format = "json";
  std::string trials_path;
  std::string preset = "asv";
  std::string alphas = "0.5:1.0:0.1";

  double alpha = 1.0;
  bool alpha_fixed = false;
  double alpha_min = McAdamsConfig{}.alpha_min;
  double alpha_max = McAdamsConfig{}.alpha_max;
  double semitone_min = PitchShiftConfig{}.semitone_min;
  double semitone_max = PitchShiftConfig{}.semitone_max;
  int lpc_order = McAdamsConfig{}.lpc_order;

  long long odds_n = 0;
  double odds_eer = 0.0;

  std::size_t n_speakers = 20;
  std::size_t utts_per_speaker = 8;

  EvalOptions options;
  bool no_vad = false;
};

AnonymizerSpec build_spec(const CliState& state, bool allow_none) {
  AnonymizerSpec spec;
  if (state.method == "mcadams") {
    spec.method = AnonymizerSpec::Method::mcadams;
  } else if (state.method == "pitch") {
    spec.method = AnonymizerSpec::Method::pitch;
  } else if (state.method == "none") {
    if (!allow_none) throw UsageError("method 'none' is not valid for this command");
    spec.method = AnonymizerSpec::Method::none;
  } else {
    throw UsageError("unknown method: " + state.method);
  }
  spec.fixed_alpha = state.alpha_fixed;
  spec.alpha = state.alpha;
  spec.mcadams.alpha_min = state.alpha_min;
  spec.mcadams.alpha_max = state.alpha_max;
  spec.mcadams.lpc_order = state.lpc_order;
  spec.pitch.semitone_min = state.semitone_min;
  spec.pitch.semitone_max = state.semitone_max;
  spec.mcadams.validate();
  spec.pitch.validate();
  if (spec.fixed_alpha && (!(spec.alpha > 0.0) || !(spec.alpha <= 1.2)))
    throw UsageError("invalid alpha: accepted range is (0, 1.2]");
  return spec;
}

EvalOptions build_options(const CliState& state) {
  EvalOptions options = state.options;
  options.jobs = state.jobs;
  options.use_vad = !state.no_vad;
  if (options.positives_per_speaker < 1) throw UsageError("--pps must be >= 1");
  if (options.negative_ratio < 0.0) throw UsageError("--neg-ratio must be >= 0");
  if (options.repetitions < 1) throw UsageError("--reps must be >= 1");
  return options;
}

void print_run_header(const CliState& state, const AnonymizerSpec& spec, const EvalOptions& options) {
  std::printf("seed=%" PRIu64 " config_hash=%s\n", state.seed,
              config_hash(spec, options, state.seed).c_str());
}

DatasetManifest manifest_from_input(const std::string& in) {
  if (in.empty()) throw UsageError("--in is required");
  fs::path p(in);
  if (!fs::is_directory(p) && p.extension() == ".wav") {
    if (!fs::exists(p)) throw DataError("missing file: " + in);
    DatasetManifest manifest;
    std::string stem = p.stem().string();
    manifest.speakers.push_back({stem, "F", "adult", "control"});
    manifest.utterances.push_back({stem, stem, in});
    return manifest;
  }
  return load_manifest(in);
}

std::vector<double> parse_alpha_range(const std::string& text) {
  double lo = 0, hi = 0, step = 0;
  char extra = 0;
  if (std::sscanf(text.c_str(), "%lf:%lf:%lf%c", &lo, &hi, &step, &extra) != 3)
    throw UsageError("alphas must be min:max:step, got: " + text);
  if (!(step > 0.0) || lo > hi) throw UsageError("invalid range: alphas need min <= max and step > 0");
  size_t count = size_t(std::floor((hi - lo) / step + 1e-9)) + 1;
  std::vector<double> values;
  for (size_t i = 0; i < count; ++i) values.push_back(lo + double(i) * step);
  return values;
}

void write_text(const std::string& text, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("unwritable path: " + path);
  f << text;
  if (!f.good()) throw DataError("unwritable path: " + path);
}

void maybe_emit(const CliState& state, const std::string& kind, const std::string& body_json,
                const AnonymizerSpec& spec, const EvalOptions& options) {
  std::string envelope =
      report_to_json_text(kind, state.seed, config_hash(spec, options, state.seed), body_json);
  if (!state.report_path.empty()) emit_report(envelope, state.format, state.report_path);
}

int cmd_anonymize(const CliState& state) {
  AnonymizerSpec spec = build_spec(state, false);
  EvalOptions options = build_options(state);
  print_run_header(state, spec, options);
  if (state.out.empty()) throw UsageError("--out is required");

  DatasetManifest manifest = manifest_from_input(state.in);
  fs::create_directories(state.out);

  std::vector<std::string> lines(manifest.utterances.size());
  parallel_for(manifest.utterances.size(), state.jobs, [&](size_t i) {
    const Utterance& utt = manifest.utterances[i];
    AudioClip clip = read_wav(utt.path);
    clip.source_id = utt.id;
    std::map<std::string, double> params;
    AudioClip anon = apply_anonymizer(clip, spec, state.seed, utt.speaker_id, "", &params);
    fs::path wav_path = fs::path(state.out) / (utt.id + ".wav");
    write_wav(anon, wav_path.string());

    ProvenanceRecord record;
    record.source_id = utt.id;
    record.method = spec.method_name();
    record.params = params;
    record.seed = state.seed;
    fs::path sidecar = fs::path(state.out) / (utt.id + ".json");
    std::ofstream f(sidecar, std::ios::binary);
    if (!f) throw DataError("unwritable path: " + sidecar.string());
    f << provenance_to_json(record);

    std::ostringstream line;
    line << utt.id << " -> " << wav_path.string();
    for (const auto& [key, value] : params) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), " %s=%.6g", key.c_str(), value);
      line << buf;
    }
    lines[i] = line.str();
  });
  for (const std::string& line : lines) std::cout << line << "\n";
  return 0;
}

int cmd_eval_privacy(const CliState& state) {
  AnonymizerSpec spec = build_spec(state, true);
  EvalOptions options = build_options(state);
  print_run_header(state, spec, options);
  DatasetManifest manifest = manifest_from_input(state.in);
  PrivacyReport report = run_privacy_eval(manifest, spec, state.seed, options);
  std::printf("eer_original=%.4f%% eer_anonymized=%.4f%% n_trials=%zu n_test_speakers=%zu\n",
              report.original.eer_percent, report.anonymized.eer_percent, report.n_trials,
              report.n_test_speakers);
  maybe_emit(state, "privacy", privacy_report_json(report), spec, options);
  if (!state.trials_path.empty()) {
    SplitPlan split = make_split(manifest, options.task, state.seed);
    std::vector<TrialPair> pairs = generate_trials(split.test, manifest, state.seed,
                                                   options.positives_per_speaker, options.negative_ratio);
    write_text(trials_to_csv(pairs, score_trial_pairs(manifest, pairs, spec, state.seed, options)),
               state.trials_path);
  }
  return 0;
}

int cmd_eval_utility(const CliState& state) {
  AnonymizerSpec spec = build_spec(state, true);
  EvalOptions options = build_options(state);
  print_run_header(state, spec, options);
  DatasetManifest manifest = manifest_from_input(state.in);
  UtilityReport report = run_utility_pipeline(manifest, spec, state.seed, options);
  std::printf("auroc=%.4f accuracy=%.4f sensitivity=%.4f specificity=%.4f\n", report.overall.auroc,
              report.overall.accuracy, report.overall.sensitivity, report.overall.specificity);
  maybe_emit(state, "utility", utility_report_json(report), spec, options);
  return 0;
}

int cmd_eval_fairness(const CliState& state) {
  AnonymizerSpec spec = build_spec(state, true);
  EvalOptions options = build_options(state);
  print_run_header(state, spec, options);
  DatasetManifest manifest = manifest_from_input(state.in);
  PrivacyReport privacy = run_privacy_eval(manifest, spec, state.seed, options);
  UtilityReport utility = run_utility_pipeline(manifest, spec, state.seed, options);
  if (utility.ptd_gender)
    std::printf("ptd_gender=%+.4f (minority %s)\n", *utility.ptd_gender, utility.gender_minority.c_str());
  if (utility.ptd_age)
    std::printf("ptd_age=%+.4f (minority %s)\n", *utility.ptd_age, utility.age_minority.c_str());
  for (const auto& [key, sub] : privacy.subgroups)
    if (sub.eer_defined)
      std::printf("subgroup %s: eer_original=%.4f%% eer_anonymized=%.4f%% n=%zu\n", key.c_str(),
                  sub.eer_original, sub.eer_anonymized, sub.n_trials);
  nlohmann::json body;
  body["privacy"] = nlohmann::json::parse(privacy_report_json(privacy));
  body["utility"] = nlohmann::json::parse(utility_report_json(utility));
  maybe_emit(state, "fairness", body.dump(2) + "\n", spec, options);
  return 0;
}

int cmd_eval_odds(const CliState& state) {
  AnonymizerSpec spec;
  EvalOptions options = build_options(state);
  print_run_header(state, spec, options);
  OddsResult odds = identification_odds(state.odds_n, state.odds_eer);
  std::printf("1:%lld\n", odds.odds_denominator);
  if (!state.report_path.empty()) {
    nlohmann::json body{{"n_speakers", state.odds_n},
                        {"eer_percent", state.odds_eer},
                        {"expected_false_accepts", odds.expected_false_accepts},
                        {"odds", "1:" + std::to_string(odds.odds_denominator)}};
    maybe_emit(state, "odds", body.dump(2) + "\n", spec, options);
  }
  return 0;
}

int cmd_eval_sweep(const CliState& state) {
  AnonymizerSpec spec = build_spec(state, true);
  EvalOptions options = build_options(state);
  print_run_header(state, spec, options);
  DatasetManifest manifest = manifest_from_input(state.in);
  std::vector<double> alphas = parse_alpha_range(state.alphas);
  SweepReport report = run_sweep(manifest, alphas, state.seed, options, spec);
  std::cout << sweep_report_csv(report);
  std::printf("eer_original=%.4f%% pearson_r=%.4f p=%.4g\n", report.eer_original,
              report.eer_auroc_correlation.r, report.eer_auroc_correlation.p);
  maybe_emit(state, "sweep", sweep_report_json(report), spec, options);
  return 0;
}

int cmd_eval_invert(const CliState& state) {
  AnonymizerSpec spec = build_spec(state, false);
  EvalOptions options = build_options(state);
  print_run_header(state, spec, options);
  DatasetManifest manifest = manifest_from_input(state.in);
  InversionReport report = run_inversion_attack(manifest, spec, state.seed, options);
  std::printf("eer_original=%.4f%% eer_naive=%.4f%% eer_inverse=%.4f%% n_trials=%zu\n",
              report.eer_original, report.eer_naive, report.eer_inverse, report.n_trials);
  maybe_emit(state, "inversion", inversion_report_json(report), spec, options);
  return 0;
}

int cmd_features(const CliState& state) {
  AnonymizerSpec spec;
  EvalOptions options = build_options(state);
  print_run_header(state, spec, options);
  if (state.in.empty()) throw UsageError("--in is required");
  AudioClip clip = read_wav(state.in);
  clip.source_id = fs::path(state.in).stem().string();
  if (options.use_vad) clip = apply_vad(clip, VadConfig{});
  FeatureConfig config;
  if (state.preset == "asv") {
    config = asv_preset(clip.sample_rate);
  } else if (state.preset == "classifier") {
    config = classifier_preset(clip.sample_rate);
  } else {
    throw UsageError("unknown preset: " + state.preset);
  }
  MelSpectrogram mel = compute_log_mel(clip, config);
  mel.source_id = clip.source_id;
  write_text(mel_to_text(mel), state.out);
  return 0;
}

int cmd_embed(const CliState& state) {
  AnonymizerSpec spec;
  EvalOptions options = build_options(state);
  print_run_header(state, spec, options);
  DatasetManifest manifest = manifest_from_input(state.in);
  std::vector<SpeakerEmbedding> embeddings(manifest.utterances.size());
  parallel_for(manifest.utterances.size(), state.jobs, [&](size_t i) {
    const Utterance& utt = manifest.utterances[i];
    AudioClip clip = read_wav(utt.path);
    clip.source_id = utt.id;
    if (options.use_vad) clip = apply_vad(clip, VadConfig{});
    MelSpectrogram mel = compute_log_mel(clip, asv_preset(clip.sample_rate));
    SpeakerEmbedding e = embed_utterance(mel);
    e.speaker_id = utt.speaker_id;
    e.utterance_id = utt.id;
    embeddings[i] = std::move(e);
  });
  write_text(embeddings_to_csv(embeddings), state.out);
  return 0;
}

int cmd_synth_corpus(const CliState& state) {
  AnonymizerSpec spec;
  EvalOptions options = build_options(state);
  print_run_header(state, spec, options);
  if (state.out.empty()) throw UsageError("--out is required");
  write_synth_corpus(state.n_speakers, state.utts_per_speaker, state.seed, state.out);
  std::printf("wrote %zu speakers x %zu utterances to %s\n", state.n_speakers,
              state.utts_per_speaker, state.out.c_str());
  return 0;
}

int cmd_report(const CliState& state) {
  print_run_header(state, AnonymizerSpec{}, build_options(state));
  if (state.in.empty()) throw UsageError("--in is required");
  std::ifstream f(state.in, std::ios::binary);
  if (!f) throw DataError("missing file: " + state.in);
  std::stringstream buffer;
  buffer << f.rdbuf();
  emit_report(buffer.str(), state.format, state.out);
  return 0;
}

void add_eval_common(CLI::App* cmd, CliState& state, bool with_method = true) {
  cmd->add_option("--in", state.in, "manifest directory (speakers.csv + utterances.csv) or a .wav file");
  if (with_method) {
    cmd->add_option("--method", state.method, "anonymization method")
        ->check(CLI::IsMember({"mcadams", "pitch", "none"}));
    CLI::Option* alpha = cmd->add_option("--alpha", state.alpha, "fixed McAdams coefficient for every speaker")
                             ->each([&state](const std::string&) { state.alpha_fixed = true; });
    CLI::Option* amin = cmd->add_option("--alpha-min", state.alpha_min, "lower bound of the per-speaker alpha draw");
    CLI::Option* amax = cmd->add_option("--alpha-max", state.alpha_max, "upper bound of the per-speaker alpha draw");
    alpha->excludes(amin)->excludes(amax);
    cmd->add_option("--semitone-min", state.semitone_min, "pitch-shift magnitude lower bound");
    cmd->add_option("--semitone-max", state.semitone_max, "pitch-shift magnitude upper bound");
  }
  cmd->add_option("--task", state.options.task, "disorder label or 'pooled'");
  cmd->add_option("--pps", state.options.positives_per_speaker, "positive trials per test speaker");
  cmd->add_option("--neg-ratio", state.options.negative_ratio, "negatives per positive");
  cmd->add_option("--reps", state.options.repetitions, "test-phase repetitions");
  cmd->add_flag("--no-vad", state.no_vad, "skip voice-activity detection in the feature pipeline");
  cmd->add_option("--report", state.report_path, "write the full report here");
  cmd->add_option("--format", state.format, "report format")->check(CLI::IsMember({"json", "csv"}));
}

}  // namespace

int main(int argc, char** argv) {
  CliState state;
  CLI::App app{"speaker anonymization toolkit for pathological speech research"};
  app.set_version_flag("--version", spanon::kVersion);
  app.require_subcommand(1);
  app.add_option("--seed", state.seed, "global random seed")->envname("SPANON_SEED")->capture_default_str();
  app.add_option("--jobs", state.jobs, "worker thread bound (results are independent of it)")
      ->capture_default_str();

  int rc = 0;
  auto run = [&rc](int code) { rc = code; };

  CLI::App* anonymize = app.add_subcommand("anonymize", "rewrite audio with hidden speaker identity");
  anonymize->add_option("method", state.method, "mcadams | pitch")->required();
  anonymize->add_option("--in", state.in, "manifest directory or a single .wav file");
  anonymize->add_option("--out", state.out, "output directory for WAVs + provenance sidecars");
  CLI::Option* fixed = anonymize->add_option("--alpha", state.alpha, "fixed McAdams coefficient")
                           ->each([&state](const std::string&) { state.alpha_fixed = true; });
  CLI::Option* amin =
      anonymize->add_option("--alpha-min", state.alpha_min, "lower bound of the per-speaker alpha draw");
  CLI::Option* amax =
      anonymize->add_option("--alpha-max", state.alpha_max, "upper bound of the per-speaker alpha draw");
  fixed->excludes(amin)->excludes(amax);
  anonymize->add_option("--semitone-min", state.semitone_min, "pitch-shift magnitude lower bound");
  anonymize->add_option("--semitone-max", state.semitone_max, "pitch-shift magnitude upper bound");
  anonymize->add_option("--lpc-order", state.lpc_order, "LPC model order")->capture_default_str();
  anonymize->callback([&] { run(cmd_anonymize(state)); });

  CLI::App* eval = app.add_subcommand("eval", "run an evaluation protocol");
  eval->require_subcommand(1);

  CLI::App* privacy = eval->add_subcommand("privacy", "EER before/after anonymization");
  add_eval_common(privacy, state);
  privacy->add_option("--trials", state.trials_path, "also export the scored trial list as CSV");
  privacy->callback([&] { run(cmd_eval_privacy(state)); });

  CLI::App* utility = eval->add_subcommand("utility", "pathology-classification utility");
  add_eval_common(utility, state);
  utility->callback([&] { run(cmd_eval_utility(state)); });

  CLI::App* fairness = eval->add_subcommand("fairness", "subgroup metrics and parity differences");
  add_eval_common(fairness, state);
  fairness->callback([&] { run(cmd_eval_fairness(state)); });

  CLI::App* odds = eval->add_subcommand("odds", "identification odds from corpus size and EER");
  odds->add_option("--n", state.odds_n, "number of speakers")->required();
  odds->add_option("--eer", state.odds_eer, "equal error rate in percent")->required();
  odds->add_option("--report", state.report_path, "write the odds record here");
  odds->add_option("--format", state.format, "report format")->check(CLI::IsMember({"json", "csv"}));
  odds->callback([&] { run(cmd_eval_odds(state)); });

  CLI::App* sweep = eval->add_subcommand("sweep", "privacy-utility table over McAdams coefficients");
  add_eval_common(sweep, state);
  sweep->add_option("--alphas", state.alphas, "coefficient range as min:max:step")->capture_default_str();
  sweep->callback([&] { run(cmd_eval_sweep(state)); });

  CLI::App* invert = eval->add_subcommand("invert", "informed re-enrollment (inversion) attack");
  add_eval_common(invert, state);
  invert->callback([&] { run(cmd_eval_invert(state)); });

  CLI::App* features = app.add_subcommand("features", "dump log-mel features for one clip");
  features->add_option("--in", state.in, "input .wav file");
  features->add_option("--preset", state.preset, "asv | classifier")
      ->check(CLI::IsMember({"asv", "classifier"}));
  features->add_flag("--no-vad", state.no_vad, "skip voice-activity detection");
  features->add_option("--out", state.out, "output path ('-' = stdout)");
  features->callback([&] { run(cmd_features(state)); });

  CLI::App* embed = app.add_subcommand("embed", "compute speaker embeddings as CSV");
  embed->add_option("--in", state.in, "manifest directory or a single .wav file");
  embed->add_flag("--no-vad", state.no_vad, "skip voice-activity detection");
  embed->add_option("--out", state.out, "output path ('-' = stdout)");
  embed->callback([&] { run(cmd_embed(state)); });

  CLI::App* synth = app.add_subcommand("synth-corpus", "generate the synthetic evaluation corpus");
  synth->add_option("--speakers", state.n_speakers, "number of synthetic speakers")->capture_default_str();
  synth->add_option("--utterances-per-speaker", state.utts_per_speaker, "utterances per speaker")
      ->capture_default_str();
  synth->add_option("--out", state.out, "output directory");
  synth->callback([&] { run(cmd_synth_corpus(state)); });

  CLI::App* report = app.add_subcommand("report", "re-serialize a JSON report (e.g. to CSV)");
  report->add_option("--in", state.in, "input report (canonical JSON)");
  report->add_option("--format", state.format, "target format")->check(CLI::IsMember({"json", "csv"}));
  report->add_option("--out", state.out, "output path ('-' = stdout)");
  report->callback([&] { run(cmd_report(state)); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const DataError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return rc;
}
