#include "ctrirl/error.hpp"
#include "ctrirl/experiment.hpp"
#include "text_io.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace ctrirl {

namespace pt = boost::property_tree;

ExperimentConfig preset(std::string_view name) {
    ExperimentConfig cfg;
    cfg.name = std::string(name);
    cfg.n = 50000;
    cfg.reruns = 20;
    cfg.env.gamma = 0.97;
    if (name == "easy") {
        cfg.env.width = 4;
        cfg.env.height = 4;
        cfg.env.topology = Topology::Torus;
        cfg.env.reward_kind = RewardKind::Linear;
        cfg.env.feature_dim = 3;
        cfg.env.reward_scale = 0.5;
    } else if (name == "ident") {
        cfg.env.width = 8;
        cfg.env.height = 8;
        cfg.env.topology = Topology::Bounded;
        cfg.env.reward_kind = RewardKind::TabularLinear;
        cfg.env.reward_scale = 0.5;
    } else if (name == "hard") {
        cfg.env.width = 8;
        cfg.env.height = 8;
        cfg.env.topology = Topology::Bounded;
        cfg.env.reward_kind = RewardKind::Nonlinear;
        cfg.env.reward_scale = 0.5;
    } else {
        throw InvalidArgument("unknown preset '" + std::string(name) + "' (easy|ident|hard)");
    }
    return cfg;
}

std::vector<std::string> preset_names() { return {"easy", "ident", "hard"}; }

namespace {

using Setter = std::function<void(ExperimentConfig&, const std::string&)>;

template <typename T>
T parse_integer(const std::string& text, const std::string& key) {
    T value{};
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw InvalidArgument(key + ": expected a nonnegative integer, got '" + text + "'");
    }
    return value;
}

double parse_real(const std::string& text, const std::string& key) {
    try {
        return detail::parse_double(text, 0);
    } catch (const ParseError&) {
        throw InvalidArgument(key + ": expected a number, got '" + text + "'");
    }
}

bool parse_bool(const std::string& text, const std::string& key) {
    if (text == "true" || text == "1" || text == "yes") return true;
    if (text == "false" || text == "0" || text == "no") return false;
    throw InvalidArgument(key + ": expected true or false, got '" + text + "'");
}

#define CTRIRL_COUNT(field) [](ExperimentConfig& c, const std::string& v) { c.field = parse_integer<std::size_t>(v, #field); }
#define CTRIRL_INDEX(field) [](ExperimentConfig& c, const std::string& v) { c.field = parse_integer<Index>(v, #field); }
#define CTRIRL_SEED(field) [](ExperimentConfig& c, const std::string& v) { c.field = parse_integer<std::uint64_t>(v, #field); }
#define CTRIRL_REAL(field) [](ExperimentConfig& c, const std::string& v) { c.field = parse_real(v, #field); }
#define CTRIRL_BOOL(field) [](ExperimentConfig& c, const std::string& v) { c.field = parse_bool(v, #field); }
#define CTRIRL_ENUM(field, parser) [](ExperimentConfig& c, const std::string& v) { c.field = parser(v); }

const std::map<std::string, std::map<std::string, Setter>>& setters() {
    static const std::map<std::string, std::map<std::string, Setter>> table = {
        {"env",
         {
             {"width", CTRIRL_INDEX(env.width)},
             {"height", CTRIRL_INDEX(env.height)},
             {"topology", CTRIRL_ENUM(env.topology, parse_topology)},
             {"reward", CTRIRL_ENUM(env.reward_kind, parse_reward_kind)},
             {"feature_dim", CTRIRL_INDEX(env.feature_dim)},
             {"seed", CTRIRL_SEED(env.seed)},
             {"gamma", CTRIRL_REAL(env.gamma)},
             {"reward_scale", CTRIRL_REAL(env.reward_scale)},
             {"n", CTRIRL_COUNT(n)},
             {"regime", CTRIRL_ENUM(regime, parse_sampling_regime)},
         }},
        {"solver",
         {
             {"K",
              [](ExperimentConfig& c, const std::string& v) {
                  if (v == "auto") {
                      c.solver.K.reset();
                  } else {
                      c.solver.K = parse_integer<std::size_t>(v, "K");
                  }
              }},
             {"mu", CTRIRL_ENUM(solver.mu, parse_measure_kind)},
             {"mu_action", CTRIRL_INDEX(solver.mu_action)},
             {"split", CTRIRL_BOOL(solver.split)},
             {"folds", CTRIRL_COUNT(solver.folds)},
             {"classifier", CTRIRL_ENUM(solver.classifier.kind, parse_classifier_kind)},
             {"classifier_features", CTRIRL_ENUM(classifier_features, parse_feature_source)},
             {"smoothing_alpha", CTRIRL_REAL(solver.classifier.smoothing_alpha)},
             {"prob_floor", CTRIRL_REAL(solver.classifier.prob_floor)},
             {"logistic_optimizer", CTRIRL_ENUM(solver.classifier.optimizer, parse_logistic_optimizer)},
             {"step_size", CTRIRL_REAL(solver.classifier.step_size)},
             {"epochs", CTRIRL_COUNT(solver.classifier.epochs)},
             {"batch_size", CTRIRL_COUNT(solver.classifier.batch_size)},
             {"l2", CTRIRL_REAL(solver.classifier.l2)},
             {"regressor", CTRIRL_ENUM(solver.regressor.kind, parse_regressor_kind)},
             {"regressor_features", CTRIRL_ENUM(regressor_features, parse_feature_source)},
             {"ridge_lambda", CTRIRL_REAL(solver.regressor.ridge_lambda)},
             {"fallback", CTRIRL_REAL(solver.regressor.fallback)},
         }},
        {"baseline",
         {
             {"enabled", CTRIRL_BOOL(run_baseline)},
             {"optimizer", CTRIRL_ENUM(baseline.optimizer, parse_maxent_optimizer)},
             {"step_size", CTRIRL_REAL(baseline.step_size)},
             {"schedule", CTRIRL_ENUM(baseline.schedule, parse_step_schedule)},
             {"clip_norm", CTRIRL_REAL(baseline.clip_norm)},
             {"max_epochs", CTRIRL_COUNT(baseline.max_epochs)},
             {"patience", CTRIRL_COUNT(baseline.patience)},
             {"tolerance", CTRIRL_REAL(baseline.tolerance)},
             {"inner_tol", CTRIRL_REAL(baseline.inner_tol)},
             {"init", CTRIRL_ENUM(baseline.init, parse_weight_init)},
             {"init_scale", CTRIRL_REAL(baseline.init_scale)},
         }},
        {"eval",
         {
             {"name", [](ExperimentConfig& c, const std::string& v) { c.name = v; }},
             {"reruns", CTRIRL_COUNT(reruns)},
             {"seed", CTRIRL_SEED(base_seed)},
             {"weighting", CTRIRL_ENUM(weighting, parse_state_weighting)},
             {"ref_action", CTRIRL_INDEX(ref_action)},
             {"threads", CTRIRL_COUNT(threads)},
         }},
    };
    return table;
}

#undef CTRIRL_COUNT
#undef CTRIRL_INDEX
#undef CTRIRL_SEED
#undef CTRIRL_REAL
#undef CTRIRL_BOOL
#undef CTRIRL_ENUM

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

} // namespace

ExperimentConfig parse_config(std::string_view text, const std::string& source) {
    pt::ptree tree;
    std::istringstream in{std::string(text)};
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ParseError(source + ": " + e.message(), e.line());
    }

    ExperimentConfig cfg;
    for (const auto& [key, node] : tree) {
        if (node.empty()) {
            if (key != "preset") throw ParseError(source + ": unknown top-level key '" + key + "'", 0);
            cfg = preset(trim(node.data()));
        }
    }
    const auto& table = setters();
    for (const auto& [section, node] : tree) {
        if (node.empty()) continue;
        const auto sec = table.find(section);
        if (sec == table.end()) throw ParseError(source + ": unknown section [" + section + "]", 0);
        for (const auto& [key, leaf] : node) {
            const auto setter = sec->second.find(key);
            if (setter == sec->second.end()) {
                throw ParseError(source + ": unknown key '" + key + "' in [" + section + "]", 0);
            }
            try {
                setter->second(cfg, trim(leaf.data()));
            } catch (const InvalidArgument& e) {
                throw ParseError(source + ": [" + section + "] " + e.what(), 0);
            }
        }
    }
    if (cfg.reruns == 0) throw ParseError(source + ": [eval] reruns must be >= 1", 0);
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open config " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str(), path.string());
}

std::string format_config(const ExperimentConfig& c) {
    using detail::format_double;
    std::ostringstream out;
    out << "[env]\n"
        << "width = " << c.env.width << '\n'
        << "height = " << c.env.height << '\n'
        << "topology = " << to_string(c.env.topology) << '\n'
        << "reward = " << to_string(c.env.reward_kind) << '\n'
        << "feature_dim = " << c.env.feature_dim << '\n'
        << "seed = " << c.env.seed << '\n'
        << "gamma = " << format_double(c.env.gamma) << '\n'
        << "reward_scale = " << format_double(c.env.reward_scale) << '\n'
        << "n = " << c.n << '\n'
        << "regime = " << to_string(c.regime) << "\n\n";
    out << "[solver]\n"
        << "K = " << (c.solver.K ? std::to_string(*c.solver.K) : std::string("auto")) << '\n'
        << "mu = " << to_string(c.solver.mu) << '\n'
        << "mu_action = " << c.solver.mu_action << '\n'
        << "split = " << (c.solver.split ? "true" : "false") << '\n'
        << "folds = " << c.solver.folds << '\n'
        << "classifier = " << to_string(c.solver.classifier.kind) << '\n'
        << "classifier_features = " << to_string(c.classifier_features) << '\n'
        << "smoothing_alpha = " << format_double(c.solver.classifier.smoothing_alpha) << '\n'
        << "prob_floor = " << format_double(c.solver.classifier.prob_floor) << '\n'
        << "logistic_optimizer = "
        << (c.solver.classifier.optimizer == LogisticOptimizer::Newton ? "newton" : "gradient-descent") << '\n'
        << "step_size = " << format_double(c.solver.classifier.step_size) << '\n'
        << "epochs = " << c.solver.classifier.epochs << '\n'
        << "batch_size = " << c.solver.classifier.batch_size << '\n'
        << "l2 = " << format_double(c.solver.classifier.l2) << '\n'
        << "regressor = " << to_string(c.solver.regressor.kind) << '\n'
        << "regressor_features = " << to_string(c.regressor_features) << '\n'
        << "ridge_lambda = " << format_double(c.solver.regressor.ridge_lambda) << '\n'
        << "fallback = " << format_double(c.solver.regressor.fallback) << "\n\n";
    out << "[baseline]\n"
        << "enabled = " << (c.run_baseline ? "true" : "false") << '\n'
        << "optimizer = " << to_string(c.baseline.optimizer) << '\n'
        << "step_size = " << format_double(c.baseline.step_size) << '\n'
        << "schedule = " << to_string(c.baseline.schedule) << '\n'
        << "clip_norm = " << format_double(c.baseline.clip_norm) << '\n'
        << "max_epochs = " << c.baseline.max_epochs << '\n'
        << "patience = " << c.baseline.patience << '\n'
        << "tolerance = " << format_double(c.baseline.tolerance) << '\n'
        << "inner_tol = " << format_double(c.baseline.inner_tol) << '\n'
        << "init = " << to_string(c.baseline.init) << '\n'
        << "init_scale = " << format_double(c.baseline.init_scale) << "\n\n";
    out << "[eval]\n"
        << "name = " << c.name << '\n'
        << "reruns = " << c.reruns << '\n'
        << "seed = " << c.base_seed << '\n'
        << "weighting = " << to_string(c.weighting) << '\n'
        << "ref_action = " << c.ref_action << '\n'
        << "threads = " << c.threads << '\n';
    return out.str();
}

} // namespace ctrirl
