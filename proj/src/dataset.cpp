#include "ctrirl/dataset.hpp"

#include "ctrirl/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

namespace ctrirl {

TransitionDataset::TransitionDataset(DatasetMeta meta, std::vector<Transition> records)
    : meta_(std::move(meta)), records_(std::move(records)) {
    validate();
}

TransitionDataset::TransitionDataset(DatasetMeta meta, std::vector<Transition> records, std::vector<double> weights)
    : meta_(std::move(meta)), records_(std::move(records)), weights_(std::move(weights)) {
    if (weights_.size() != records_.size()) throw ShapeError("TransitionDataset: one weight per record required");
    for (double w : weights_) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidArgument("TransitionDataset: weights must be finite and >= 0");
    }
    validate();
}

void TransitionDataset::validate() const {
    if (meta_.n_states <= 0 || meta_.n_actions <= 0) throw InvalidArgument("TransitionDataset: empty state or action space");
    for (std::size_t i = 0; i < records_.size(); ++i) {
        const auto& t = records_[i];
        if (t.s < 0 || t.s >= meta_.n_states || t.next < 0 || t.next >= meta_.n_states || t.a < 0 ||
            t.a >= meta_.n_actions) {
            throw InvalidArgument("TransitionDataset: record " + std::to_string(i) + " out of range");
        }
    }
}

double TransitionDataset::total_weight() const {
    if (weights_.empty()) return static_cast<double>(records_.size());
    double total = 0.0;
    for (double w : weights_) total += w;
    return total;
}

TransitionDataset TransitionDataset::select(const std::vector<std::size_t>& positions) const {
    std::vector<Transition> recs;
    recs.reserve(positions.size());
    std::vector<double> ws;
    for (std::size_t p : positions) {
        recs.push_back(records_.at(p));
        if (weighted()) ws.push_back(weights_[p]);
    }
    if (weighted()) return TransitionDataset(meta_, std::move(recs), std::move(ws));
    return TransitionDataset(meta_, std::move(recs));
}

TransitionDataset TransitionDataset::slice(std::size_t begin, std::size_t end) const {
    std::vector<std::size_t> positions;
    for (std::size_t i = begin; i < end && i < records_.size(); ++i) positions.push_back(i);
    return select(positions);
}

TransitionDataset TransitionDataset::compressed() const {
    std::map<std::tuple<Index, Index, Index>, double> merged;
    for (std::size_t i = 0; i < records_.size(); ++i) {
        const auto& t = records_[i];
        merged[{t.s, t.a, t.next}] += weight(i);
    }
    std::vector<Transition> recs;
    std::vector<double> ws;
    recs.reserve(merged.size());
    ws.reserve(merged.size());
    for (const auto& [key, w] : merged) {
        recs.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key)});
        ws.push_back(w);
    }
    return TransitionDataset(meta_, std::move(recs), std::move(ws));
}

Matrix count_table(const TransitionDataset& data) {
    Matrix counts = Matrix::Zero(data.meta().n_states, data.meta().n_actions);
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto& t = data.records()[i];
        counts(t.s, t.a) += data.weight(i);
    }
    return counts;
}

OccupancyMeasure empirical_occupancy(const TransitionDataset& data) {
    if (data.empty()) throw InvalidArgument("empirical_occupancy: empty dataset");
    Matrix counts = count_table(data);
    const double total = counts.sum();
    if (!(total > 0.0)) throw InvalidArgument("empirical_occupancy: dataset has zero total weight");
    return OccupancyMeasure(Matrix(counts / total));
}

double conditional_loglik(const TransitionDataset& data, const StateActionFn& r, const StateActionFn& v, double gamma) {
    return conditional_loglik(empirical_occupancy(data), r, v, gamma);
}

TransitionDataset population_dataset(const TabularMdp& mdp, const PolicyTable& pi, const StateDistribution& states) {
    if (pi.n_states() != mdp.n_states() || states.size() != mdp.n_states()) {
        throw ShapeError("population_dataset: shapes differ from MDP");
    }
    std::vector<Transition> recs;
    std::vector<double> ws;
    for (Index s = 0; s < mdp.n_states(); ++s) {
        for (Index a = 0; a < mdp.n_actions(); ++a) {
            for (Index next = 0; next < mdp.n_states(); ++next) {
                const double w = states[s] * pi(s, a) * mdp.prob(s, a, next);
                if (w > 0.0) {
                    recs.push_back({s, a, next});
                    ws.push_back(w);
                }
            }
        }
    }
    return TransitionDataset(DatasetMeta{"population", 0, mdp.n_states(), mdp.n_actions()}, std::move(recs),
                             std::move(ws));
}

// ---------------------------------------------------------------------------

namespace {

constexpr const char* kMagic = "# ctrirl-dataset";

template <typename T>
bool parse_number(std::string_view text, T& out) {
    const char* begin = text.data();
    const char* end = begin + text.size();
    auto [ptr, ec] = std::from_chars(begin, end, out);
    return ec == std::errc() && ptr == end;
}

} // namespace

void write_dataset(const std::filesystem::path& path, const TransitionDataset& data) {
    if (data.weighted()) throw InvalidArgument("write_dataset: weighted datasets cannot be serialized");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("write_dataset: cannot open " + path.string());
    const auto& m = data.meta();
    out << kMagic << " env=" << m.env_id << " seed=" << m.seed << " states=" << m.n_states
        << " actions=" << m.n_actions << " n=" << data.size() << '\n';
    for (const auto& t : data.records()) out << t.s << ',' << t.a << ',' << t.next << '\n';
    if (!out) throw Error("write_dataset: write failed for " + path.string());
}

TransitionDataset read_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("read_dataset: cannot open " + path.string());

    std::string line;
    if (!std::getline(in, line)) throw ParseError("missing header", 1);
    if (line.rfind(kMagic, 0) != 0) throw ParseError("header must start with '" + std::string(kMagic) + "'", 1);

    DatasetMeta meta;
    std::size_t declared_n = 0;
    bool have_states = false, have_actions = false, have_n = false;
    std::istringstream header(line.substr(std::string(kMagic).size()));
    std::string token;
    while (header >> token) {
        const auto eq = token.find('=');
        if (eq == std::string::npos) throw ParseError("malformed header token '" + token + "'", 1);
        const std::string key = token.substr(0, eq);
        const std::string value = token.substr(eq + 1);
        bool ok = true;
        if (key == "env") {
            meta.env_id = value;
        } else if (key == "seed") {
            ok = parse_number(value, meta.seed);
        } else if (key == "states") {
            ok = parse_number(value, meta.n_states) && meta.n_states > 0;
            have_states = true;
        } else if (key == "actions") {
            ok = parse_number(value, meta.n_actions) && meta.n_actions > 0;
            have_actions = true;
        } else if (key == "n") {
            ok = parse_number(value, declared_n);
            have_n = true;
        } else {
            throw ParseError("unknown header key '" + key + "'", 1);
        }
        if (!ok) throw ParseError("bad value for header key '" + key + "'", 1);
    }
    if (!have_states || !have_actions || !have_n) throw ParseError("header must declare states, actions and n", 1);

    std::vector<Transition> records;
    records.reserve(declared_n);
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto c1 = line.find(',');
        const auto c2 = c1 == std::string::npos ? std::string::npos : line.find(',', c1 + 1);
        if (c2 == std::string::npos || line.find(',', c2 + 1) != std::string::npos) {
            throw ParseError("expected 's,a,s_next', got '" + line + "'", lineno);
        }
        Transition t;
        std::string_view view(line);
        if (!parse_number(view.substr(0, c1), t.s) || !parse_number(view.substr(c1 + 1, c2 - c1 - 1), t.a) ||
            !parse_number(view.substr(c2 + 1), t.next)) {
            throw ParseError("non-integer field in '" + line + "'", lineno);
        }
        if (t.s < 0 || t.s >= meta.n_states || t.next < 0 || t.next >= meta.n_states) {
            throw ParseError("state index out of range in '" + line + "'", lineno);
        }
        if (t.a < 0 || t.a >= meta.n_actions) throw ParseError("action index out of range in '" + line + "'", lineno);
        records.push_back(t);
    }
    if (records.size() != declared_n) {
        throw ParseError("header declares n=" + std::to_string(declared_n) + " but file holds " +
                             std::to_string(records.size()) + " records",
                         0);
    }
    return TransitionDataset(std::move(meta), std::move(records));
}

} // namespace ctrirl
