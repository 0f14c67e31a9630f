#include "ctrirl/error.hpp"
#include "ctrirl/experiment.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace ctrirl;

namespace {

ExperimentConfig small_config() {
    ExperimentConfig cfg = preset("easy");
    cfg.name = "small";
    cfg.n = 2000;
    cfg.reruns = 3;
    cfg.base_seed = 5;
    cfg.baseline.max_epochs = 15;
    cfg.threads = 2;
    return cfg;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> lines(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
}

} // namespace

TEST(DeriveSeeds, DeterministicAndDistinct) {
    const RerunSeeds a = derive_seeds(7, 3), b = derive_seeds(7, 3), c = derive_seeds(7, 4);
    EXPECT_EQ(a.rerun, 10u);
    EXPECT_EQ(a.env, b.env);
    EXPECT_EQ(a.sampler, b.sampler);
    EXPECT_NE(a.env, c.env);
    EXPECT_NE(a.env, a.sampler);
    EXPECT_NE(a.sampler, a.split);
}

TEST(Experiment, RerunsAreBitIdentical) {
    const ExperimentConfig cfg = small_config();
    const ExperimentResult r1 = run_experiment(cfg);
    const ExperimentResult r2 = run_experiment(cfg);
    EXPECT_EQ(raw_csv(r1), raw_csv(r2));
    EXPECT_EQ(summary_csv(r1), summary_csv(r2));
    EXPECT_EQ(markdown_table(r1), markdown_table(r2));

    ExperimentConfig serial = cfg;
    serial.threads = 1;
    EXPECT_EQ(raw_csv(run_experiment(serial)), raw_csv(r1));

    const auto dir = std::filesystem::temp_directory_path() / "ctrirl_test_experiment";
    std::filesystem::remove_all(dir);
    write_experiment(dir / "a", r1);
    write_experiment(dir / "b", r2);
    for (const char* f : {"raw.csv", "summary.csv", "table.md", "config.ini"}) {
        EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
    }
}

TEST(Experiment, OutputLayout) {
    const ExperimentResult res = run_experiment(small_config());
    EXPECT_EQ(res.methods(), (std::vector<std::string>{"Ours", "MaxEnt"}));
    const auto raw = lines(raw_csv(res));
    EXPECT_EQ(raw.front(), "rerun,seed,method,metric,value");
    EXPECT_EQ(raw.size(), 1u + 3 * 2 * 5);
    const auto summary = lines(summary_csv(res));
    EXPECT_EQ(summary.front(), "method,metric,mean,se,count");
    EXPECT_EQ(summary.size(), 1u + 2 * 5);

    const std::string table = markdown_table(res);
    EXPECT_NE(table.find("| Method | RMSE | Corr | KL | TV | Top-1 |"), std::string::npos) << table;
    EXPECT_NE(table.find("| Ours |"), std::string::npos);
    EXPECT_NE(table.find("| MaxEnt |"), std::string::npos);
}

TEST(Experiment, SummaryRecomputableFromRaw) {
    const ExperimentResult res = run_experiment(small_config());
    for (const auto& method : res.methods()) {
        for (const char* metric : kMetricNames) {
            const std::vector<double> v = res.values(method, metric);
            ASSERT_EQ(v.size(), 3u);
            double mean = 0;
            for (double x : v) mean += x / 3.0;
            double ss = 0;
            for (double x : v) ss += (x - mean) * (x - mean);
            const Summary& s = res.summary.at(method).at(metric);
            EXPECT_NEAR(s.mean, mean, 1e-12);
            EXPECT_NEAR(s.se, std::sqrt(ss / 2.0) / std::sqrt(3.0), 1e-12);
        }
    }
}

TEST(Experiment, TooManyFailuresIsAnError) {
    ExperimentConfig cfg = small_config();
    cfg.n = 3;
    cfg.solver.split = true;  // three records cannot fill the folds
    cfg.run_baseline = false;
    cfg.reruns = 2;
    try {
        run_experiment(cfg);
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("80%"), std::string::npos) << e.what();
    }
    const RerunResult one = run_rerun(cfg, 0);
    EXPECT_FALSE(one.ok);
    EXPECT_FALSE(one.error.empty());
}

TEST(Experiment, WithoutBaselineHasOneMethod) {
    ExperimentConfig cfg = small_config();
    cfg.run_baseline = false;
    cfg.reruns = 1;
    EXPECT_EQ(run_experiment(cfg).methods(), std::vector<std::string>{"Ours"});
}

TEST(Config, PresetsExist) {
    EXPECT_EQ(preset_names(), (std::vector<std::string>{"easy", "ident", "hard"}));
    EXPECT_EQ(preset("easy").env.width, 4);
    EXPECT_EQ(preset("easy").env.topology, Topology::Torus);
    EXPECT_EQ(preset("ident").env.reward_kind, RewardKind::TabularLinear);
    EXPECT_EQ(preset("hard").env.reward_kind, RewardKind::Nonlinear);
    for (const auto& name : preset_names()) {
        EXPECT_DOUBLE_EQ(preset(name).env.gamma, 0.97);
        EXPECT_EQ(preset(name).n, 50000u);
    }
    EXPECT_THROW(preset("medium"), InvalidArgument);
}

TEST(Config, ParseOverridesPreset) {
    const ExperimentConfig cfg = parse_config(R"(preset = hard
[env]
n = 1234
gamma = 0.9
[solver]
K = 7
mu = point-mass
mu_action = 2
split = true
classifier = multinomial-logistic
[baseline]
optimizer = adam
max_epochs = 50
[eval]
reruns = 4
seed = 11
weighting = empirical
)");
    EXPECT_EQ(cfg.env.reward_kind, RewardKind::Nonlinear);
    EXPECT_EQ(cfg.n, 1234u);
    EXPECT_DOUBLE_EQ(cfg.env.gamma, 0.9);
    EXPECT_EQ(cfg.solver.K, std::optional<std::size_t>(7));
    EXPECT_EQ(cfg.solver.mu, MeasureKind::PointMass);
    EXPECT_EQ(cfg.solver.mu_action, 2);
    EXPECT_TRUE(cfg.solver.split);
    EXPECT_EQ(cfg.solver.classifier.kind, ClassifierKind::MultinomialLogistic);
    EXPECT_EQ(cfg.baseline.optimizer, MaxEntOptimizer::Adam);
    EXPECT_EQ(cfg.baseline.max_epochs, 50u);
    EXPECT_EQ(cfg.reruns, 4u);
    EXPECT_EQ(cfg.base_seed, 11u);
    EXPECT_EQ(cfg.weighting, StateWeighting::Empirical);
}

TEST(Config, FormatRoundTrips) {
    for (const auto& name : preset_names()) {
        const std::string text = format_config(preset(name));
        EXPECT_EQ(format_config(parse_config(text)), text);
    }
    ExperimentConfig cfg = parse_config("[solver]\nK = auto\n");
    EXPECT_FALSE(cfg.solver.K.has_value());
}

TEST(Config, Errors) {
    EXPECT_THROW(parse_config("[bogus]\nx = 1\n"), ParseError);
    EXPECT_THROW(parse_config("[env]\ncolour = red\n"), ParseError);
    EXPECT_THROW(parse_config("[env]\nn = many\n"), ParseError);
    EXPECT_THROW(parse_config("[eval]\nreruns = 0\n"), ParseError);
    EXPECT_THROW(parse_config("[solver]\nmu = lebesgue\n"), ParseError);
    EXPECT_THROW(load_config("/nonexistent/cfg.ini"), Error);
}
