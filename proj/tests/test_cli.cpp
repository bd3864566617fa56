#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "helpers.hpp"
#include "spanon/audio_io.hpp"
#include "spanon/embedding.hpp"
#include "spanon/synth.hpp"

using namespace spanon;
using testutil::TempDir;

namespace {

struct RunResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunResult run_cli(const std::string& args, const std::string& env_prefix = "") {
  static TempDir dir;
  static int counter = 0;
  std::string out_path = dir.file("out" + std::to_string(counter) + ".txt");
  std::string err_path = dir.file("err" + std::to_string(counter) + ".txt");
  ++counter;
  std::string cmd = env_prefix + SPANON_CLI_BIN " " + args + " > " + out_path + " 2> " + err_path;
  int status = std::system(cmd.c_str());
  RunResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out_path);
  r.err = slurp(err_path);
  return r;
}

// Shared on-disk corpus for the cli suite: 4 speakers x 2 utterances.
const std::string& cli_corpus() {
  static TempDir dir;
  static bool built = false;
  if (!built) {
    write_synth_corpus(4, 2, 42, dir.path, 16000, 0.8);
    built = true;
  }
  return dir.path;
}

size_t count_lines(const std::string& text) {
  size_t n = 0;
  for (char c : text) n += c == '\n';
  return n;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("help and version") {
  CHECK(run_cli("--help").code == 0);
  for (const char* sub : {"anonymize", "eval", "features", "embed", "synth-corpus", "report"}) {
    RunResult r = run_cli(std::string(sub) + " --help");
    INFO("subcommand ", sub);
    CHECK(r.code == 0);
  }
  for (const char* sub : {"privacy", "utility", "fairness", "odds", "sweep", "invert"}) {
    RunResult r = run_cli(std::string("eval ") + sub + " --help");
    INFO("eval subcommand ", sub);
    CHECK(r.code == 0);
  }
  RunResult v = run_cli("--version");
  CHECK(v.code == 0);
  CHECK(v.out.find(kVersion) != std::string::npos);
}

TEST_CASE("bad invocations are usage errors") {
  CHECK(run_cli("").code == 1);                                   // subcommand required
  CHECK(run_cli("frobnicate").code == 1);                         // unknown subcommand
  CHECK(run_cli("eval odds --n 5 --eer 2 --bogus 1").code == 1);  // unknown flag
  CHECK(run_cli("eval odds --n 5").code == 1);                    // missing required flag
  CHECK(run_cli("anonymize").code == 1);                          // missing method
  RunResult r = run_cli("eval privacy");
  CHECK(r.code == 1);
  CHECK(r.err.find("--in is required") != std::string::npos);
}

TEST_CASE("odds lookup reproduces the headline ratio") {
  RunResult r = run_cli("eval odds --n 2742 --eer 4.02");
  CHECK(r.code == 0);
  CHECK(r.out.find("1:110") != std::string::npos);
  CHECK(r.out.find("seed=42") != std::string::npos);
  CHECK(r.out.find("config_hash=") != std::string::npos);

  CHECK(run_cli("eval odds --n 1 --eer 5").code == 1);
  CHECK(run_cli("eval odds --n 100 --eer 101").code == 1);
}

TEST_CASE("seed override via flag and environment") {
  RunResult flag = run_cli("--seed 7 eval odds --n 100 --eer 5");
  CHECK(flag.code == 0);
  CHECK(flag.out.find("seed=7") != std::string::npos);

  RunResult env = run_cli("eval odds --n 100 --eer 5", "SPANON_SEED=9 ");
  CHECK(env.code == 0);
  CHECK(env.out.find("seed=9") != std::string::npos);

  // explicit flag beats the environment
  RunResult both = run_cli("--seed 7 eval odds --n 100 --eer 5", "SPANON_SEED=9 ");
  CHECK(both.out.find("seed=7") != std::string::npos);
}

TEST_CASE("alpha flag validation") {
  TempDir out;
  RunResult r = run_cli("anonymize mcadams --in " + cli_corpus() + " --out " + out.path +
                        " --alpha-min 0.9 --alpha-max 0.7");
  CHECK(r.code == 1);
  CHECK(r.err.find("invalid range") != std::string::npos);

  // --alpha conflicts with the range bounds
  CHECK(run_cli("anonymize mcadams --in " + cli_corpus() + " --out " + out.path +
                " --alpha 0.8 --alpha-min 0.7")
            .code == 1);
  CHECK(run_cli("anonymize mcadams --in " + cli_corpus() + " --out " + out.path + " --alpha 7")
            .code == 1);
}

TEST_CASE("identity-alpha anonymization of a single file") {
  TempDir out;
  std::string wav = cli_corpus() + "/spk000_u0.wav";
  RunResult r = run_cli("anonymize mcadams --alpha 1.0 --in " + wav + " --out " + out.path);
  CHECK(r.code == 0);
  CHECK(r.out.find("spk000_u0 -> ") != std::string::npos);

  std::string out_wav = out.path + "/spk000_u0.wav";
  REQUIRE(std::filesystem::exists(out_wav));
  AudioClip original = read_wav(wav);
  AudioClip anonymized = read_wav(out_wav);
  REQUIRE(anonymized.samples.size() == original.samples.size());
  CHECK(testutil::correlation(anonymized.samples, original.samples) >= 0.99);

  std::string sidecar = slurp(out.path + "/spk000_u0.json");
  CHECK(sidecar.find("\"mcadams\"") != std::string::npos);
  CHECK(sidecar.find("alpha") != std::string::npos);
  CHECK(sidecar.find("\"seed\": 42") != std::string::npos);
}

TEST_CASE("anonymize maps data problems to exit 2") {
  TempDir out;
  CHECK(run_cli("anonymize mcadams --in /no/such/file.wav --out " + out.path).code == 2);
  CHECK(run_cli("eval privacy --in /no/such/dir").code == 2);
}

TEST_CASE("privacy eval prints headline numbers and exports trials") {
  TempDir out;
  std::string trials = out.file("trials.csv");
  RunResult r = run_cli("eval privacy --in " + cli_corpus() + " --method none --trials " + trials);
  CHECK(r.code == 0);
  CHECK(r.out.find("eer_original=") != std::string::npos);
  CHECK(r.out.find("n_trials=8") != std::string::npos);

  std::string csv = slurp(trials);
  CHECK(csv.rfind("enroll_id,test_id,score,label,gender,age_group,disorder\n", 0) == 0);
  CHECK(count_lines(csv) == 9);  // header + 8 trials
}

TEST_CASE("reports are byte-identical across reruns and job counts") {
  TempDir out;
  std::string a = out.file("a.json"), b = out.file("b.json"), c = out.file("c.json");
  CHECK(run_cli("eval privacy --in " + cli_corpus() + " --method none --report " + a).code == 0);
  CHECK(run_cli("eval privacy --in " + cli_corpus() + " --method none --report " + b).code == 0);
  CHECK(run_cli("--jobs 3 eval privacy --in " + cli_corpus() + " --method none --report " + c).code == 0);
  std::string ja = slurp(a);
  CHECK(!ja.empty());
  CHECK(ja == slurp(b));
  CHECK(ja == slurp(c));
  CHECK(ja.find("\"toolkit_version\"") != std::string::npos);
  CHECK(ja.find("\"config_hash\"") != std::string::npos);
}

TEST_CASE("utility and fairness evals run end to end") {
  RunResult u = run_cli("eval utility --in " + cli_corpus() + " --method none");
  CHECK(u.code == 0);
  CHECK(u.out.find("auroc=") != std::string::npos);

  RunResult f = run_cli("eval fairness --in " + cli_corpus() + " --method none");
  CHECK(f.code == 0);
  CHECK(f.out.find("subgroup ") != std::string::npos);
}

TEST_CASE("sweep emits one csv row per alpha") {
  TempDir out;
  std::string report = out.file("sweep.csv");
  RunResult r = run_cli("eval sweep --in " + cli_corpus() +
                        " --alphas 0.5:1.0:0.1 --report " + report + " --format csv");
  CHECK(r.code == 0);
  CHECK(r.out.find("alpha,eer_percent,auroc,accuracy,sensitivity,specificity") != std::string::npos);
  CHECK(r.out.find("eer_original=") != std::string::npos);
  CHECK(r.out.find("pearson_r=") != std::string::npos);

  std::string csv = slurp(report);
  CHECK(count_lines(csv) == 7);  // header + 6 alphas

  CHECK(run_cli("eval sweep --in " + cli_corpus() + " --alphas 1.0:0.5:0.1").code == 1);
  CHECK(run_cli("eval sweep --in " + cli_corpus() + " --alphas nonsense").code == 1);
}

TEST_CASE("inversion eval rejects method none and runs with mcadams") {
  CHECK(run_cli("eval invert --in " + cli_corpus() + " --method none").code == 1);
  RunResult r = run_cli("eval invert --in " + cli_corpus());
  CHECK(r.code == 0);
  CHECK(r.out.find("eer_naive=") != std::string::npos);
  CHECK(r.out.find("eer_inverse=") != std::string::npos);
}

TEST_CASE("feature dump honours the preset") {
  TempDir out;
  std::string wav = cli_corpus() + "/spk001_u0.wav";
  std::string asv = out.file("asv.txt"), cls = out.file("cls.txt");
  CHECK(run_cli("features --in " + wav + " --out " + asv).code == 0);
  CHECK(slurp(asv).find("n_mels=40") != std::string::npos);
  CHECK(run_cli("features --in " + wav + " --preset classifier --out " + cls).code == 0);
  CHECK(slurp(cls).find("n_mels=80") != std::string::npos);
  CHECK(run_cli("features --in " + wav + " --preset bogus --out -").code == 1);
  CHECK(run_cli("features --out -").code == 1);
}

TEST_CASE("embedding export loads back") {
  TempDir out;
  std::string path = out.file("emb.csv");
  RunResult r = run_cli("embed --in " + cli_corpus() + " --out " + path);
  CHECK(r.code == 0);
  std::vector<SpeakerEmbedding> embs = load_embeddings(path);
  CHECK(embs.size() == 8);
  for (const SpeakerEmbedding& e : embs) CHECK(e.dim() == 80);
}

TEST_CASE("synth corpus generation is seeded and validated") {
  TempDir a, b;
  CHECK(run_cli("synth-corpus --speakers 1 --out " + a.path).code == 1);

  RunResult r = run_cli("synth-corpus --speakers 3 --utterances-per-speaker 2 --out " + a.path);
  CHECK(r.code == 0);
  CHECK(r.out.find("wrote 3 speakers x 2 utterances") != std::string::npos);
  size_t wavs = 0;
  for (const auto& entry : std::filesystem::directory_iterator(a.path))
    wavs += entry.path().extension() == ".wav";
  CHECK(wavs == 6);
  CHECK(std::filesystem::exists(a.path + "/speakers.csv"));
  CHECK(std::filesystem::exists(a.path + "/utterances.csv"));

  CHECK(run_cli("synth-corpus --speakers 3 --utterances-per-speaker 2 --out " + b.path).code == 0);
  CHECK(slurp(a.path + "/speakers.csv") == slurp(b.path + "/speakers.csv"));
  CHECK(slurp(a.path + "/spk000_u0.wav") == slurp(b.path + "/spk000_u0.wav"));

  RunResult other_seed = run_cli("--seed 5 synth-corpus --speakers 3 --utterances-per-speaker 2 --out " + b.path);
  CHECK(other_seed.code == 0);
  CHECK(slurp(a.path + "/spk000_u0.wav") != slurp(b.path + "/spk000_u0.wav"));
}

TEST_CASE("report re-serialization to csv") {
  TempDir out;
  std::string json_path = out.file("r.json");
  CHECK(run_cli("eval privacy --in " + cli_corpus() + " --method none --report " + json_path).code == 0);

  std::string csv_path = out.file("r.csv");
  RunResult r = run_cli("report --in " + json_path + " --format csv --out " + csv_path);
  CHECK(r.code == 0);
  std::string csv = slurp(csv_path);
  CHECK(csv.rfind("key,value\n", 0) == 0);
  CHECK(csv.find("report.eer_original_percent,") != std::string::npos);

  CHECK(run_cli("report --in /no/such.json --format csv --out -").code == 2);
}

}  // TEST_SUITE
