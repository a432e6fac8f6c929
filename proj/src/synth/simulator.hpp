#pragma once

// Structural equations shared by the dataset generator and the oracle.

#include <cstdint>
#include <random>
#include <vector>

#include "longdr/synth/dgp.hpp"
#include "longdr/synth/plans.hpp"

namespace longdr::synth::detail {

enum class StreamTag : std::uint32_t { dataset = 1, oracle = 2 };

std::mt19937_64 unit_stream(std::uint64_t seed, std::uint64_t unit, StreamTag tag);

struct UnitDraw {
    std::vector<std::vector<double>> covariates; // raw L_t rows
    std::vector<int> actions;
    std::vector<double> propensity;              // true P(A_t = 1 | H_t)
    double outcome = 0.0;                        // raw terminal Y
};

// One unit. With a plan the action at every step is forced; the noise draws
// happen in the same order either way, so replaying the natural-course
// actions reproduces the observational unit exactly.
UnitDraw simulate_unit(const DgpConfig& config, const std::vector<double>& coeffs,
                       std::mt19937_64& rng, const TreatmentPlan* plan);

} // namespace longdr::synth::detail
