#pragma once

#include "ctrirl/mdp.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace ctrirl {

struct Transition {
    Index s = 0;
    Index a = 0;
    Index next = 0;

    friend bool operator==(const Transition&, const Transition&) = default;
};

struct DatasetMeta {
    std::string env_id = "custom";
    std::uint64_t seed = 0;
    Index n_states = 0;
    Index n_actions = 0;

    friend bool operator==(const DatasetMeta&, const DatasetMeta&) = default;
};

/// Observed (s, a, s') records. Records may carry nonnegative weights; an
/// unweighted dataset treats every record as weight one. Weighted datasets
/// represent population distributions (every reachable triple, weighted by
/// its probability) and are never written to disk.
class TransitionDataset {
public:
    TransitionDataset() = default;
    TransitionDataset(DatasetMeta meta, std::vector<Transition> records);
    TransitionDataset(DatasetMeta meta, std::vector<Transition> records, std::vector<double> weights);

    const DatasetMeta& meta() const noexcept { return meta_; }
    const std::vector<Transition>& records() const noexcept { return records_; }
    std::size_t size() const noexcept { return records_.size(); }
    bool empty() const noexcept { return records_.empty(); }
    bool weighted() const noexcept { return !weights_.empty(); }
    double weight(std::size_t i) const { return weights_.empty() ? 1.0 : weights_[i]; }
    double total_weight() const;

    /// Records at the given positions, weights carried along.
    TransitionDataset select(const std::vector<std::size_t>& positions) const;
    TransitionDataset slice(std::size_t begin, std::size_t end) const;

    /// Merges duplicate (s, a, s') triples, summing their weights. Weighted
    /// statistics (counts, means, least squares) are unchanged.
    TransitionDataset compressed() const;

    friend bool operator==(const TransitionDataset&, const TransitionDataset&) = default;

private:
    void validate() const;

    DatasetMeta meta_;
    std::vector<Transition> records_;
    std::vector<double> weights_;
};

/// Weighted (s, a) counts.
Matrix count_table(const TransitionDataset& data);

/// Normalized (s, a) frequencies. Throws InvalidArgument on an empty dataset.
OccupancyMeasure empirical_occupancy(const TransitionDataset& data);

/// Mean over records of r + gamma v - Xi(r + gamma v)(s).
double conditional_loglik(const TransitionDataset& data, const StateActionFn& r, const StateActionFn& v, double gamma);

/// Every (s, a, s') with positive probability, weighted by d(s) pi(a|s) P(s'|s,a).
TransitionDataset population_dataset(const TabularMdp& mdp, const PolicyTable& pi, const StateDistribution& states);

/// Text format: one header line
///   # ctrirl-dataset env=<id> seed=<seed> states=<S> actions=<A> n=<n>
/// followed by n lines `s,a,s_next`.
void write_dataset(const std::filesystem::path& path, const TransitionDataset& data);
TransitionDataset read_dataset(const std::filesystem::path& path);

} // namespace ctrirl
