#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "neurosig/types.hpp"

namespace neurosig {

struct CentroidSet {
    int k = 0;
    std::vector<std::vector<double>> centroids; // k rows of length n_rest
    std::uint64_t seed = 0;
    double inertia = 0.0;                 // final within-cluster sum of squares
    std::vector<double> inertia_history;  // per Lloyd iteration, winning restart
};

struct KMeansOptions {
    int max_iters = 100;
    double tol = 1e-6;    // max centroid movement (L2) to declare convergence
    int n_restarts = 5;   // independent seeded inits, best inertia kept
    int threads = 1;
};

// Lloyd's algorithm with k-means++ initialization. Empty clusters are
// re-seeded to the point farthest from its assigned centroid. Deterministic
// for a fixed seed regardless of thread count; inertia is checked to be
// non-increasing on every iteration.
CentroidSet fit_kmeans(const std::vector<std::vector<double>>& points, int k,
                       std::uint64_t seed, const KMeansOptions& options = {});

// argmin_i ||v - centroid_i||^2, ties to the smallest index.
int assign_cluster(const std::vector<double>& v, const CentroidSet& centroids);

std::vector<int> assign_all(const std::vector<std::vector<double>>& points,
                            const CentroidSet& centroids, int threads = 1);

struct OccupancyProfile {
    std::vector<double> ratios; // fraction of all frames per cluster, sums to 1
    double dispersion = 0.0;    // coefficient of variation of the ratios
};

// cohort_assignments: per-subject per-frame cluster ids.
OccupancyProfile occupancy(const std::vector<std::vector<int>>& cohort_assignments, int k);

struct KSelection {
    int k = 0;
    bool warning = false; // no k met the dispersion bound, fell back to k_min
    struct Candidate {
        int k = 0;
        bool feasible = false; // k-means fit succeeded (enough distinct points)
        double dispersion = 0.0;
        double inertia = 0.0;
    };
    std::vector<Candidate> candidates;
};

// Fits k-means for every k in [k_min, k_max] and returns the largest k whose
// occupancy dispersion stays within dispersion_max.
KSelection select_k(const std::vector<std::vector<double>>& points, int k_min, int k_max,
                    double dispersion_max, std::uint64_t seed,
                    const KMeansOptions& options = {});

inline constexpr double kDefaultDispersionMax = 0.5;

// Centroid file: magic "NFKC", version u32, k u32, n_rest u32, then k rows of
// float32 LE values.
std::string encode_centroids(const CentroidSet& centroids);
CentroidSet decode_centroids(const std::string& bytes, const std::string& context);
void write_centroids(const std::string& path, const CentroidSet& centroids);
CentroidSet read_centroids(const std::string& path);

} // namespace neurosig
