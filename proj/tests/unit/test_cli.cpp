#include "ctrirl/cli.hpp"
#include "ctrirl/experiment.hpp"
#include "ctrirl/gridworld.hpp"
#include "ctrirl/solver.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace ctrirl;
namespace fs = std::filesystem;

namespace {

struct CliRun {
    int code;
    std::string out;
    std::string err;
};

CliRun cli(std::vector<std::string> args) {
    args.insert(args.begin(), "ctrirl");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() / "ctrirl_test_cli";
        fs::remove_all(dir_);
        fs::create_directories(dir_);
        std::ofstream(dir_ / "small.ini") << "preset = easy\n[env]\nn = 1500\n[baseline]\nmax_epochs = 10\n"
                                             "[eval]\nname = small\nreruns = 2\nthreads = 1\n";
    }
    std::string path(const std::string& name) const { return (dir_ / name).string(); }
    fs::path dir_;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST_F(CliTest, UsageErrorsExitOne) {
    EXPECT_EQ(cli({}).code, 1);
    const CliRun bad = cli({"solve", "x.csv", "--bogus"});
    EXPECT_EQ(bad.code, 1);
    EXPECT_NE(bad.err.find("Usage"), std::string::npos) << bad.err;
    EXPECT_EQ(cli({"frobnicate"}).code, 1);
    EXPECT_EQ(cli({"--help"}).code, 0);
}

TEST_F(CliTest, MissingFileExitsTwoWithPath) {
    const CliRun r = cli({"solve", path("missing.csv")});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("missing.csv"), std::string::npos) << r.err;
    const CliRun c = cli({"gen-data", "--config", path("nope.ini")});
    EXPECT_EQ(c.code, 2);
    EXPECT_NE(c.err.find("nope.ini"), std::string::npos) << c.err;
}

TEST_F(CliTest, GenSolveEvalPipeline) {
    ASSERT_EQ(cli({"gen-data", "--config", path("small.ini"), "--seed", "3", "--out", path("data.csv"), "--quiet"}).code,
              0);
    const TransitionDataset data = read_dataset(path("data.csv"));
    EXPECT_EQ(data.size(), 1500u);
    EXPECT_EQ(data.meta().seed, 3u);

    ASSERT_EQ(cli({"solve", path("data.csv"), "--config", path("small.ini"), "--out", path("sol"), "--quiet"}).code, 0);
    for (const char* f : {"r.csv", "v.csv", "u.csv", "c.csv", "diagnostics.json"}) {
        EXPECT_TRUE(fs::exists(dir_ / "sol" / f)) << f;
    }
    const CliRun ev = cli({"eval", path("sol"), "--config", path("small.ini"), "--out", path("metrics.csv")});
    ASSERT_EQ(ev.code, 0) << ev.err;
    EXPECT_NE(ev.out.find("Corr"), std::string::npos);
    EXPECT_EQ(slurp(dir_ / "metrics.csv").rfind("metric,value\nrmse,", 0), 0u);

    const CliRun base = cli({"baseline", path("data.csv"), "--config", path("small.ini"), "--out", path("base"), "--quiet"});
    ASSERT_EQ(base.code, 0) << base.err;
    for (const char* f : {"theta.csv", "r.csv", "v.csv", "loss.csv", "diagnostics.json"}) {
        EXPECT_TRUE(fs::exists(dir_ / "base" / f)) << f;
    }
    EXPECT_EQ(cli({"eval", path("base"), "--config", path("small.ini"), "--quiet"}).code, 0);

    const CliRun diag = cli({"diagnose", path("data.csv"), "--config", path("small.ini")});
    ASSERT_EQ(diag.code, 0) << diag.err;
    EXPECT_EQ(diag.out.rfind("# kappa_hat=", 0), 0u);
    EXPECT_NE(diag.out.find("k,eta,eta_population,step_sup,error_sup,gamma_pow_k_bound\n1,"), std::string::npos);
}

TEST_F(CliTest, EvalOfExactSolutionHasZeroKl) {
    GridworldSpec spec = preset("easy").env;
    spec.seed = 4;
    const Gridworld env = build_env(spec);
    const PolicyTable pi = expert_policy(env.mdp, env.r_true);
    const IrlSolution exact =
        exact_population_solver(env.mdp, pi, NormalizationMeasure::uniform(env.mdp.n_states(), env.mdp.n_actions()));
    write_solution(dir_ / "exact", exact, {{"seed", "4"}});
    const CliRun ev = cli({"eval", path("exact"), "--preset", "easy"});
    ASSERT_EQ(ev.code, 0) << ev.err;
    EXPECT_NE(ev.out.find("KL 0.0000"), std::string::npos) << ev.out;
    EXPECT_NE(ev.out.find("Top-1 1.0000"), std::string::npos) << ev.out;
}

TEST_F(CliTest, MismatchedDatasetIsRuntimeError) {
    ASSERT_EQ(cli({"gen-data", "--config", path("small.ini"), "--out", path("d.csv"), "--quiet"}).code, 0);
    const CliRun r = cli({"solve", path("d.csv"), "--preset", "ident", "--out", path("s")});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("states"), std::string::npos) << r.err;
}

TEST_F(CliTest, ReproduceWritesTableAndIsDeterministic) {
    const CliRun a = cli({"reproduce", "--config", path("small.ini"), "--seed", "7", "--out", path("a"), "--quiet"});
    ASSERT_EQ(a.code, 0) << a.err;
    const CliRun b = cli({"reproduce", "--config", path("small.ini"), "--seed", "7", "--out", path("b"), "--quiet"});
    ASSERT_EQ(b.code, 0) << b.err;
    EXPECT_EQ(slurp(dir_ / "a" / "raw.csv"), slurp(dir_ / "b" / "raw.csv"));
    EXPECT_EQ(a.out, b.out);
    EXPECT_NE(a.out.find("| Method | RMSE | Corr | KL | TV | Top-1 |"), std::string::npos) << a.out;
    EXPECT_NE(a.out.find("| Ours |"), std::string::npos);
    EXPECT_NE(a.out.find("| MaxEnt |"), std::string::npos);
    EXPECT_NE(a.out.find("reruns=2/2"), std::string::npos) << a.out;
    EXPECT_EQ(cli({"reproduce", "medium", "--quiet"}).code, 2);
    EXPECT_EQ(cli({"reproduce", "--reruns", "0", "--config", path("small.ini")}).code, 2);
}
