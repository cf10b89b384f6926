// Runs the command-line tool as a subprocess.

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"

#include "acm/data_io.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) out += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return out + "'";
}

// Fresh scratch directory removed on scope exit.
struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) {
    path = fs::temp_directory_path() / ("acm_cli_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& leaf) const { return (path / leaf).string(); }
};

Run run(const TempDir& dir, const std::string& args) {
  const std::string out = dir / "stdout.txt", err = dir / "stderr.txt";
  const std::string cmd = quote(ACM_CLI_PATH) + " " + args + " >" + quote(out) + " 2>" + quote(err);
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

std::string equal_lag0(const std::string& subject, int sessions, int seed) {
  return quote(R"({"kind":"equal_lag0","subject":")" + subject +
               R"(","channels":3,"coef":0.8,"samples":256,"epochs_per_class":20,"sessions":)" +
               std::to_string(sessions) + "}") +
         " --seed " + std::to_string(seed);
}

json error_json(const Run& r) {
  REQUIRE(!r.err.empty());
  return json::parse(r.err);
}

}  // namespace

TEST_CASE("simulate writes a readable container and is deterministic") {
  TempDir dir("simulate");
  const Run a = run(dir, "simulate --spec-json " + equal_lag0("s1", 2, 4) + " --out " + dir / "a");
  REQUIRE_MESSAGE(a.code == 0, a.err);
  CHECK(json::parse(a.out)["total_epochs"] == 80);
  CHECK(fs::exists(dir / "a/summary.json"));
  const json manifest = json::parse(slurp(dir / "a/manifest.json"));
  CHECK(manifest["command"] == "simulate");
  CHECK(manifest["config"]["spec"]["seed"] == 4);
  CHECK(manifest["versions"].contains("acm"));

  const acm::EpochSet set = acm::read_epochset(dir / "a/epochs.acm");
  CHECK(set.subject == "s1");
  CHECK(set.sessions.size() == 2);

  REQUIRE(run(dir, "simulate --spec-json " + equal_lag0("s1", 2, 4) + " --out " + dir / "b").code == 0);
  CHECK(slurp(dir / "a/epochs.acm") == slurp(dir / "b/epochs.acm"));

  const std::string spec_file = dir / "spec.json";
  std::ofstream(spec_file) << R"({"kind":"sine","period":32,"seed":8})";
  CHECK(run(dir, "simulate --spec " + spec_file + " --out " + dir / "c").code == 0);
}

TEST_CASE("simulate errors") {
  TempDir dir("simulate_err");
  const Run unstable = run(
      dir, "simulate --seed 1 --out " + dir / "u" + " --spec-json " +
               quote(R"({"kind":"ar","classes":[{"name":"a","coefficients":[[[1.2]]],"innovation":[[1]]}]})"));
  CHECK(unstable.code == 2);
  CHECK(error_json(unstable)["error"] == "UnstableSpec");

  const Run no_seed = run(dir, "simulate --out " + dir / "n" + " --spec-json " + quote(R"({"kind":"sine"})"));
  CHECK(no_seed.code == 2);
  CHECK(error_json(no_seed)["message"].get<std::string>().find("seed") != std::string::npos);

  const Run usage = run(dir, "simulate --out " + dir / "x" + " --bogus");
  CHECK(usage.code == 2);
  CHECK(error_json(usage)["error"] == "UsageError");
}

TEST_CASE("estimate-params on a sine and on a constant container") {
  TempDir dir("estimate");
  REQUIRE(run(dir, "simulate --spec-json " + quote(R"({"kind":"sine","period":64,"samples":1024})") +
                       " --seed 3 --out " + dir / "sine")
              .code == 0);
  const Run ami = run(dir, "estimate-params --input " + dir / "sine/epochs.acm" + " --out " + dir / "ami");
  REQUIRE_MESSAGE(ami.code == 0, ami.err);
  const json est = json::parse(slurp(dir / "ami/estimate.json"));
  CHECK(std::abs(est["tau"].get<int>() - 16) <= 2);
  CHECK(est["D"] == 2);
  for (const auto& [name, path] : est["diagnostics"].items()) CHECK(fs::exists(path.get<std::string>()));
  CHECK(est["diagnostics"].size() >= 2);

  const Run mdop = run(dir, "estimate-params --method mdop --input " + dir / "sine/epochs.acm" +
                                " --out " + dir / "mdop");
  REQUIRE_MESSAGE(mdop.code == 0, mdop.err);
  const json m = json::parse(mdop.out);
  CHECK(m["method"] == "mdop");
  CHECK(m["D"].get<int>() <= 3);

  acm::EpochSet flat = acm::read_epochset(dir / "sine/epochs.acm");
  for (auto& s : flat.sessions)
    for (auto& e : s.epochs) e.data.setConstant(2.5);
  acm::write_epochset(flat, dir / "flat.acm");
  const Run constant = run(dir, "estimate-params --input " + dir / "flat.acm" + " --out " + dir / "flat");
  CHECK(constant.code == 2);
  CHECK(error_json(constant)["error"] == "ConstantSeries");
}

TEST_CASE("evaluate writes reports, score maps and timings") {
  TempDir dir("evaluate");
  for (int s = 0; s < 2; ++s) {
    const std::string name = "s" + std::to_string(s);
    REQUIRE(run(dir, "simulate --spec-json " + equal_lag0(name, 2, 30 + s) + " --out " + dir / name).code == 0);
  }
  const std::string inputs = "--input " + dir / "s0/epochs.acm" + " " + dir / "s1/epochs.acm";
  const std::string base = "evaluate " + inputs +
                           " --pipeline ACM+MDM --grid-max-order 3 --grid-max-lag 2 --folds 4 "
                           "--inner-folds 3 --seed 5 --svg";
  const Run one = run(dir, base + " --workers 1 --out " + dir / "w1");
  REQUIRE_MESSAGE(one.code == 0, one.err);
  const Run eight = run(dir, base + " --workers 8 --out " + dir / "w8");
  REQUIRE(eight.code == 0);
  CHECK(slurp(dir / "w1/report.json") == slurp(dir / "w8/report.json"));
  CHECK(slurp(dir / "w1/scores.csv") == slurp(dir / "w8/scores.csv"));

  const json report = json::parse(slurp(dir / "w1/report.json"));
  CHECK(report["summary"]["mean"].get<double>() >= 0.8);
  CHECK(fs::exists(dir / "w1/timing.csv"));
  int grids = 0, svgs = 0;
  for (const auto& e : fs::directory_iterator(dir / "w1/grids")) {
    grids += e.path().extension() == ".csv";
    svgs += e.path().extension() == ".svg";
  }
  CHECK(grids == 2 * 2 * 4);
  CHECK(svgs == grids);
  CHECK(json::parse(slurp(dir / "w1/manifest.json"))["config"]["seed"] == 5);

  const Run cs = run(dir, "evaluate " + inputs + " --pipeline TANG+SVM --eval cs --seed 5 --out " + dir / "cs");
  REQUIRE_MESSAGE(cs.code == 0, cs.err);
  CHECK(json::parse(slurp(dir / "cs/report.json"))["summary"]["n_subjects"] == 2);
}

TEST_CASE("evaluate errors map to exit codes") {
  TempDir dir("evaluate_err");
  REQUIRE(run(dir, "simulate --spec-json " + equal_lag0("one", 1, 2) + " --out " + dir / "one").code == 0);
  const std::string input = " --input " + dir / "one/epochs.acm";

  const Run single = run(dir, "evaluate" + input + " --eval cs --seed 1 --out " + dir / "o1");
  CHECK(single.code == 2);
  CHECK(error_json(single)["error"] == "SingleSession");

  const Run no_seed = run(dir, "evaluate" + input + " --out " + dir / "o2");
  CHECK(no_seed.code == 2);

  const Run missing = run(dir, "evaluate --input " + dir / "absent.acm" + " --seed 1 --out " + dir / "o3");
  CHECK(missing.code == 2);

  // A duplicated channel makes every plain covariance singular.
  acm::EpochSet dup = acm::read_epochset(dir / "one/epochs.acm");
  for (auto& s : dup.sessions)
    for (auto& e : s.epochs) e.data.row(2) = e.data.row(1);
  acm::write_epochset(dup, dir / "dup.acm");
  const Run singular = run(dir, "evaluate --input " + dir / "dup.acm" +
                                    " --pipeline MDM --param-source fixed --seed 1 --out " + dir / "o4");
  CHECK(singular.code == 3);
  const json e = error_json(singular);
  CHECK(e["error"] == "NotSPD");
  CHECK(e["exit_code"] == 3);
}

TEST_CASE("stats compares paired reports") {
  TempDir dir("stats");
  std::string inputs = "--input";
  for (int s = 0; s < 3; ++s) {
    const std::string name = "s" + std::to_string(s);
    REQUIRE(run(dir, "simulate --spec-json " + equal_lag0(name, 1, 50 + s) + " --out " + dir / name).code == 0);
    inputs += " " + dir / (name + "/epochs.acm");
  }
  REQUIRE(run(dir, "evaluate " + inputs + " --pipeline MDM --param-source fixed --folds 4 --seed 1 --out " +
                       dir / "plain")
              .code == 0);
  REQUIRE(run(dir, "evaluate " + inputs +
                       " --pipeline ACM+MDM --param-source fixed --order 2 --folds 4 --seed 1 --out " +
                       dir / "acm")
              .code == 0);

  const Run st = run(dir, "stats " + dir / "plain/report.json" + " " + dir / "acm/report.json" +
                              " --seed 3 --n-perm 2000 --out " + dir / "meta");
  REQUIRE_MESSAGE(st.code == 0, st.err);
  CHECK(slurp(dir / "meta/meta_analysis.json") == st.out);
  CHECK(st.out.find("\"ACM+MDM[fixed]\"") != std::string::npos);

  const Run self = run(dir, "stats " + dir / "plain/report.json" + " " + dir / "plain/report.json" +
                                " --out " + dir / "self");
  REQUIRE_MESSAGE(self.code == 0, self.err);
  CHECK(self.out.find("\"MDM[fixed]#2\"") != std::string::npos);

  REQUIRE(run(dir, "evaluate --input " + dir / "s0/epochs.acm" +
                       " --pipeline MDM --param-source fixed --folds 4 --seed 1 --out " + dir / "short")
              .code == 0);
  const Run unpaired = run(dir, "stats " + dir / "short/report.json" + " " + dir / "acm/report.json" +
                                    " --out " + dir / "bad");
  CHECK(unpaired.code == 2);
  CHECK(error_json(unpaired)["error"] == "PairingViolation");
}
