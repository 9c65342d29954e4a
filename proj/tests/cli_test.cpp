#include "calseq/commands.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "calseq/calibration.hpp"
#include "calseq/checkpoint.hpp"
#include "calseq/corpus.hpp"
#include "calseq/io.hpp"
#include "test_util.hpp"

using namespace calseq;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream ss(text);
  for (std::string line; std::getline(ss, line);) out.push_back(line);
  return out;
}

const std::vector<std::string> kSmall{"--users", "40", "--items", "30", "--categories", "4",
                                      "--mean-length", "12", "--seed", "5"};

std::vector<std::string> with(std::vector<std::string> head, const std::vector<std::string>& tail) {
  head.insert(head.end(), tail.begin(), tail.end());
  return head;
}

// Synthesizes, prepares and trains once per test binary.
struct Pipeline {
  fs::path root;
  fs::path data;
  fs::path ckpt;

  static const Pipeline& get() {
    static Pipeline p = [] {
      Pipeline p;
      p.root = test::scratch_dir("cli_pipeline");
      auto raw = p.root / "raw";
      p.data = p.root / "prepared";
      p.ckpt = p.root / "model.json";
      EXPECT_EQ(cli(with({"synth", "--out", raw.string()}, kSmall)).code, 0);
      EXPECT_EQ(cli({"prepare", "--interactions", (raw / "interactions.tsv").string(), "--catalog",
                     (raw / "catalog.tsv").string(), "--out", p.data.string()})
                    .code,
                0);
      EXPECT_EQ(cli({"train", "--data", p.data.string(), "--checkpoint", p.ckpt.string(), "--epochs", "3",
                     "--dim", "8", "--learning-rate", "0.05"})
                    .code,
                0);
      return p;
    }();
    return p;
  }
};

}  // namespace

TEST(Cli, PrepareWritesArtifacts) {
  const auto& p = Pipeline::get();
  for (const char* name : {"interactions.tsv", "catalog.tsv", "train.tsv", "validation.tsv", "test.tsv",
                           "remap.json"})
    EXPECT_TRUE(fs::exists(p.data / name)) << name;
}

TEST(Cli, PrepareReferentialErrorNamesItem) {
  auto dir = test::scratch_dir("cli_referential");
  {
    std::ofstream(dir / "catalog.tsv") << "i1\tA\n";
    std::ofstream(dir / "interactions.tsv") << "u1\ti1\t1\nu1\tghost\t2\n";
  }
  auto r = cli({"prepare", "--interactions", (dir / "interactions.tsv").string(), "--catalog",
                (dir / "catalog.tsv").string(), "--out", (dir / "out").string()});
  EXPECT_EQ(r.code, kExitInput);
  EXPECT_NE(r.err.find("ghost"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find(":2:"), std::string::npos) << r.err;
}

TEST(Cli, PrepareParseErrorReportsLine) {
  auto dir = test::scratch_dir("cli_parse");
  {
    std::ofstream(dir / "catalog.tsv") << "i1\tA\ni2\n";
    std::ofstream(dir / "interactions.tsv") << "u1\ti1\t1\n";
  }
  auto r = cli({"prepare", "--interactions", (dir / "interactions.tsv").string(), "--catalog",
                (dir / "catalog.tsv").string(), "--out", (dir / "out").string()});
  EXPECT_EQ(r.code, kExitInput);
  EXPECT_NE(r.err.find("2"), std::string::npos) << r.err;
}

TEST(Cli, OverwriteGuard) {
  auto dir = test::scratch_dir("cli_guard");
  auto raw = dir / "raw";
  ASSERT_EQ(cli(with({"synth", "--out", raw.string()}, kSmall)).code, 0);
  std::vector<std::string> prep{"prepare", "--interactions", (raw / "interactions.tsv").string(),
                                "--catalog", (raw / "catalog.tsv").string(), "--out", (dir / "p").string()};
  ASSERT_EQ(cli(prep).code, 0);
  const auto before = read_file(dir / "p" / "train.tsv");
  auto again = cli(prep);
  EXPECT_EQ(again.code, kExitInput);
  EXPECT_NE(again.err.find("--force"), std::string::npos);
  prep.push_back("--force");
  EXPECT_EQ(cli(prep).code, 0);
  EXPECT_EQ(read_file(dir / "p" / "train.tsv"), before);
  EXPECT_EQ(cli(with({"synth", "--out", raw.string()}, kSmall)).code, kExitInput);
}

TEST(Cli, TrainPrintsEpochLinesAndIsDeterministic) {
  const auto& p = Pipeline::get();
  auto second = p.root / "model2.json";
  auto r = cli({"train", "--data", p.data.string(), "--checkpoint", second.string(), "--epochs", "3", "--dim",
                "8", "--learning-rate", "0.05", "--force"});
  ASSERT_EQ(r.code, 0) << r.err;
  auto l = lines(r.out);
  ASSERT_EQ(l.size(), 4u);
  EXPECT_EQ(l[0], "epoch,loss,bpr,cdbpr");
  EXPECT_EQ(l[1].substr(0, 2), "1,");
  EXPECT_EQ(read_file(second), read_file(p.ckpt));
  auto ckpt = load_checkpoint(second);
  EXPECT_EQ(ckpt.params.dim, 8u);
  EXPECT_EQ(ckpt.meta.seed, 42u);
}

TEST(Cli, TrainNumericFailureExitsThree) {
  const auto& p = Pipeline::get();
  auto r = cli({"train", "--data", p.data.string(), "--checkpoint", (p.root / "bad.json").string(),
                "--epochs", "50", "--dim", "8", "--learning-rate", "1e300", "--init-scale", "1"});
  EXPECT_EQ(r.code, kExitRuntime);
  EXPECT_NE(r.err.find("epoch"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(p.root / "bad.json"));
}

TEST(Cli, RerankLambdaZeroEqualsScheduleNone) {
  const auto& p = Pipeline::get();
  std::vector<std::string> base{"rerank", "--data", p.data.string(), "--checkpoint", p.ckpt.string()};
  auto zero = cli(with(base, {"--lambda", "0"}));
  auto none = cli(with(base, {"--schedule", "none", "--lambda", "0.9"}));
  ASSERT_EQ(zero.code, 0) << zero.err;
  ASSERT_EQ(none.code, 0) << none.err;
  EXPECT_EQ(zero.out, none.out);
  auto l = lines(zero.out);
  EXPECT_EQ(l[0], "user_id\trank\titem_id\tscore\trelevance_term\tdelta_term");
  EXPECT_GT(l.size(), 1u);
  auto calibrated = cli(with(base, {"--lambda", "0.9"}));
  EXPECT_NE(calibrated.out, zero.out);
}

TEST(Cli, RerankToFileIsIdempotent) {
  const auto& p = Pipeline::get();
  auto out = p.root / "recs.tsv";
  std::vector<std::string> args{"rerank", "--data", p.data.string(), "--checkpoint", p.ckpt.string(),
                                "--out", out.string(), "--force", "--threads", "2"};
  ASSERT_EQ(cli(args).code, 0);
  const auto first = read_file(out);
  ASSERT_EQ(cli(args).code, 0);
  EXPECT_EQ(read_file(out), first);
  EXPECT_EQ(cli({"rerank", "--data", p.data.string(), "--checkpoint", p.ckpt.string()}).out, first);
}

TEST(Cli, EvaluateAndPerUser) {
  const auto& p = Pipeline::get();
  auto per_user = p.root / "per_user.tsv";
  auto r = cli({"evaluate", "--data", p.data.string(), "--checkpoint", p.ckpt.string(), "--per-user",
                per_user.string(), "--force", "--k", "5"});
  ASSERT_EQ(r.code, 0) << r.err;
  auto l = lines(r.out);
  ASSERT_EQ(l.size(), 2u);
  EXPECT_EQ(l[0], "schedule,metric,lambda,k,hr,ndcg,mean_skl,users");
  EXPECT_EQ(l[1].substr(0, 25), "prioritized,sequential,0.");
  EXPECT_NE(l[1].find(",5,"), std::string::npos);
  auto pu = lines(read_file(per_user));
  EXPECT_EQ(pu[0], "user_id\tskl");
  EXPECT_EQ(pu.size(), 41u);
}

TEST(Cli, SweepRowCount) {
  const auto& p = Pipeline::get();
  auto r = cli({"sweep", "--data", p.data.string(), "--checkpoint", p.ckpt.string(), "--lambdas",
                "0,0.3,0.9", "--schedules", "prioritized,uniform"});
  ASSERT_EQ(r.code, 0) << r.err;
  auto l = lines(r.out);
  ASSERT_EQ(l.size(), 7u);
  std::size_t prioritized = 0, uniform = 0;
  for (std::size_t i = 1; i < l.size(); ++i) {
    prioritized += l[i].rfind("prioritized,", 0) == 0;
    uniform += l[i].rfind("uniform,", 0) == 0;
  }
  EXPECT_EQ(prioritized, 3u);
  EXPECT_EQ(uniform, 3u);
}

TEST(Cli, ConfigFileAndFlagPrecedence) {
  const auto& p = Pipeline::get();
  auto cfg = p.root / "cfg.json";
  std::ofstream(cfg) << R"({"lambda": 0.9, "schedule": "uniform"})";
  std::vector<std::string> base{"rerank", "--data", p.data.string(), "--checkpoint", p.ckpt.string()};
  auto from_file = cli(with(base, {"--config", cfg.string()}));
  auto explicit_flags = cli(with(base, {"--lambda", "0.9", "--schedule", "uniform"}));
  EXPECT_EQ(from_file.out, explicit_flags.out);
  auto overridden = cli(with(base, {"--config", cfg.string(), "--lambda", "0"}));
  auto zero = cli(with(base, {"--lambda", "0"}));
  EXPECT_EQ(overridden.out, zero.out);

  std::ofstream(cfg) << R"({"lamda": 0.9})";
  EXPECT_EQ(cli(with(base, {"--config", cfg.string()})).code, kExitInput);
}

TEST(Cli, InputErrorsExitTwo) {
  const auto& p = Pipeline::get();
  EXPECT_EQ(cli({"rerank", "--data", p.data.string(), "--checkpoint", (p.root / "nope.json").string()}).code,
            kExitInput);
  EXPECT_EQ(cli({"rerank", "--data", p.data.string()}).code, kExitInput);
  EXPECT_EQ(cli({"rerank", "--data", p.data.string(), "--checkpoint", p.ckpt.string(), "--lambda", "2"}).code,
            kExitInput);
  EXPECT_EQ(cli({"rerank", "--data", p.data.string(), "--checkpoint", p.ckpt.string(), "--bogus", "1"}).code,
            kExitInput);
  EXPECT_EQ(cli({}).code, kExitInput);
  EXPECT_EQ(cli({"frobnicate"}).code, kExitInput);

  auto broken = p.root / "broken.json";
  std::ofstream(broken) << read_file(p.ckpt).substr(0, 100);
  EXPECT_EQ(cli({"rerank", "--data", p.data.string(), "--checkpoint", broken.string()}).code, kExitInput);
}

TEST(Cli, CheckpointMustMatchDataset) {
  const auto& p = Pipeline::get();
  auto dir = test::scratch_dir("cli_mismatch");
  ASSERT_EQ(cli({"synth", "--out", dir.string(), "--users", "20", "--items", "25", "--categories", "4",
                 "--mean-length", "8"})
                .code,
            0);
  auto r = cli({"rerank", "--data", dir.string(), "--checkpoint", p.ckpt.string()});
  EXPECT_EQ(r.code, kExitInput);
  EXPECT_NE(r.err.find("items"), std::string::npos);
}

TEST(Cli, DriftOnStationaryDataIsFlat) {
  auto dir = test::scratch_dir("cli_drift");
  ASSERT_EQ(cli({"synth", "--out", dir.string(), "--users", "300", "--items", "200", "--categories", "8",
                 "--mean-length", "160", "--drift-rate", "0", "--seed", "11"})
                .code,
            0);
  auto r = cli({"drift", "--data", dir.string(), "--window", "20", "--intervals", "20,40,60,80,100"});
  ASSERT_EQ(r.code, 0) << r.err;
  auto l = lines(r.out);
  ASSERT_EQ(l.size(), 6u);
  EXPECT_EQ(l[0], "interval,mean_kl,count");
  double lo = 1e9, hi = -1e9;
  for (std::size_t i = 1; i < l.size(); ++i) {
    auto first = l[i].find(','), second = l[i].find(',', first + 1);
    double v = std::stod(l[i].substr(first + 1, second - first - 1));
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  auto catalog = load_catalog(dir / "catalog.tsv");
  auto data = load_interactions(dir / "interactions.tsv", catalog);
  double max_se = 0.0;
  for (std::size_t interval : {20u, 40u, 60u, 80u, 100u})
    max_se = std::max(max_se, drift_bootstrap_stderr(drift_samples(data, 20, interval, {}), 200, 3));
  EXPECT_LE(hi - lo, 3 * max_se) << "range " << hi - lo << " stderr " << max_se;
}

TEST(Cli, HelpExitsZero) {
  auto r = cli({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("rerank"), std::string::npos);
}
