#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "neurosig/types.hpp"

namespace neurosig {

struct GeneratorConfig {
    int n_subjects = 60;
    int frames_per_session = 18; // T
    GridDims dims{8, 8, 8};
    int n_target_voxels = 12;
    int k_true = 5;
    double state_noise_sigma = 0.1;
    double amygdala_noise_sigma = 0.1;
    double gain_spread = 0.25;
    int trait_count = 3;
    double trait_noise_sigma = 0.05;
    std::uint64_t seed = 0;

    void require_valid() const; // throws ValidationError
};

// Everything the generator planted, kept as the oracle for recovery tests.
// Frame indices stored here are 1-based, matching the match-map convention.
struct GroundTruth {
    std::vector<std::vector<double>> prototypes;          // k_true x n_rest
    std::vector<std::vector<double>> gains;               // per subject, k_true
    std::vector<std::vector<double>> visit_distributions; // per subject, k_true
    std::vector<std::vector<double>> trait_weights;       // (2*k_true) x trait_count
    std::vector<double> trait_bias;                       // trait_count
    std::vector<std::vector<int>> session1_states;        // per subject, T (0-based ids)
    std::vector<std::vector<int>> session2_states;        // per subject, T
    std::vector<std::vector<int>> planted_matches;        // per subject, T: u_t for frame t
    std::vector<std::vector<int>> session2_sources;       // per subject, T: source frame per u
    std::vector<std::int32_t> alternate_target_voxels;    // row-major voxel indices
};

// Two-point per-(subject, cluster) learning gains: every pair gets the base
// gain, a seeded 30% get base + gain_spread. The asymmetric split keeps the
// per-cluster prediction error an affine function of the gain, so a linear
// readout can recover it.
inline constexpr double kBaseGain = 0.3;
inline constexpr double kHighGainProb = 0.3;

std::pair<Cohort, GroundTruth> generate_cohort(const GeneratorConfig& config,
                                               std::vector<std::string>* warnings = nullptr);

// Emits the cohort directory format plus ground_truth.json; round-trips
// through load_cohort and is byte-stable under write -> load -> write.
void write_cohort(const Cohort& cohort, const GroundTruth& truth, const std::string& dir);

GroundTruth read_ground_truth(const std::string& path);

GeneratorConfig generator_config_from_json_file(const std::string& path);

} // namespace neurosig
