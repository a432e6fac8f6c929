#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "longdr/synth/dgp.hpp"
#include "longdr/synth/plans.hpp"

namespace longdr::synth {

struct CapoTruth {
    double mean = 0.0; // raw outcome units
    double se = 0.0;
    std::size_t n_mc = 0;
};

// Monte Carlo mean of the raw terminal outcome with treatments forced to the
// plan. Policy plans read the simulated history as it unfolds.
CapoTruth ground_truth_capo(const DgpConfig& config, const TreatmentPlan& plan, std::size_t n_mc,
                            std::uint64_t seed);

// Same, memoised as a small JSON file under cache_dir keyed by a hash of the
// inputs. An empty cache_dir disables caching.
CapoTruth cached_ground_truth(const DgpConfig& config, const TreatmentPlan& plan, std::size_t n_mc,
                             std::uint64_t seed, const std::string& cache_dir);

// 64-bit FNV-1a, rendered as 16 hex digits.
std::string stable_hash(const std::string& text);

} // namespace longdr::synth
