#include "neurosig/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>

#include "neurosig/binio.hpp"
#include "neurosig/parallel.hpp"
#include "neurosig/rng.hpp"

namespace neurosig {

namespace {

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

std::size_t count_distinct(const std::vector<std::vector<double>>& points) {
    std::vector<const std::vector<double>*> sorted;
    sorted.reserve(points.size());
    for (const auto& p : points) sorted.push_back(&p);
    std::sort(sorted.begin(), sorted.end(),
              [](const auto* a, const auto* b) { return *a < *b; });
    std::size_t distinct = 0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        if (i == 0 || *sorted[i] != *sorted[i - 1]) ++distinct;
    }
    return distinct;
}

std::vector<std::vector<double>> kmeanspp_init(const std::vector<std::vector<double>>& points,
                                               int k, RandomStream& stream) {
    const std::size_t n = points.size();
    std::vector<std::vector<double>> centers;
    centers.reserve(static_cast<size_t>(k));
    centers.push_back(points[stream.uniform_index(n)]);

    std::vector<double> best_d2(n);
    for (std::size_t i = 0; i < n; ++i) best_d2[i] = sq_dist(points[i], centers[0]);

    while (static_cast<int>(centers.size()) < k) {
        const double total = std::accumulate(best_d2.begin(), best_d2.end(), 0.0);
        std::size_t pick = 0;
        if (total <= 0.0) {
            pick = stream.uniform_index(n);
        } else {
            const double r = stream.uniform() * total;
            double cum = 0.0;
            pick = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                cum += best_d2[i];
                if (r < cum) {
                    pick = i;
                    break;
                }
            }
        }
        centers.push_back(points[pick]);
        const auto& c = centers.back();
        for (std::size_t i = 0; i < n; ++i) {
            best_d2[i] = std::min(best_d2[i], sq_dist(points[i], c));
        }
    }
    return centers;
}

struct LloydResult {
    std::vector<std::vector<double>> centroids;
    double inertia = 0.0;
    std::vector<double> history;
};

// one assignment pass; writes per-point slots so it parallelizes deterministically
double assign_pass(const std::vector<std::vector<double>>& points,
                   const std::vector<std::vector<double>>& centroids, int threads,
                   std::vector<int>& labels, std::vector<double>& dist2) {
    parallel_for(points.size(), threads, [&](std::size_t i) {
        int best = 0;
        double best_d = sq_dist(points[i], centroids[0]);
        for (std::size_t c = 1; c < centroids.size(); ++c) {
            const double d = sq_dist(points[i], centroids[c]);
            if (d < best_d) {
                best_d = d;
                best = static_cast<int>(c);
            }
        }
        labels[i] = best;
        dist2[i] = best_d;
    });
    double inertia = 0.0;
    for (double d : dist2) inertia += d;
    return inertia;
}

LloydResult lloyd(const std::vector<std::vector<double>>& points,
                  std::vector<std::vector<double>> centroids, const KMeansOptions& options) {
    const std::size_t n = points.size();
    const std::size_t dim = points[0].size();
    const std::size_t k = centroids.size();

    std::vector<int> labels(n);
    std::vector<double> dist2(n);
    LloydResult result;

    double prev_inertia = std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < options.max_iters; ++iter) {
        const double inertia = assign_pass(points, centroids, options.threads, labels, dist2);
        result.history.push_back(inertia);
        if (inertia > prev_inertia * (1.0 + 1e-12) + 1e-12) {
            throw NumericalError("k-means inertia increased between iterations");
        }
        prev_inertia = inertia;

        // means, accumulated in point index order
        std::vector<std::vector<double>> sums(k, std::vector<double>(dim, 0.0));
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto ci = static_cast<std::size_t>(labels[i]);
            ++counts[ci];
            auto& sum = sums[ci];
            const auto& p = points[i];
            for (std::size_t d = 0; d < dim; ++d) sum[d] += p[d];
        }

        std::vector<bool> reseeded(n, false);
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] > 0) {
                for (std::size_t d = 0; d < dim; ++d) sums[c][d] /= static_cast<double>(counts[c]);
            } else {
                // empty cluster: move to the point farthest from its centroid
                std::size_t far = 0;
                double far_d = -1.0;
                for (std::size_t i = 0; i < n; ++i) {
                    if (!reseeded[i] && dist2[i] > far_d) {
                        far_d = dist2[i];
                        far = i;
                    }
                }
                reseeded[far] = true;
                sums[c] = points[far];
            }
        }

        double movement = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            movement = std::max(movement, std::sqrt(sq_dist(sums[c], centroids[c])));
        }
        centroids = std::move(sums);
        if (movement < options.tol) break;
    }

    result.inertia = assign_pass(points, centroids, options.threads, labels, dist2);
    result.history.push_back(result.inertia);
    if (result.inertia > prev_inertia * (1.0 + 1e-12) + 1e-12) {
        throw NumericalError("k-means inertia increased after final update");
    }
    result.centroids = std::move(centroids);
    return result;
}

} // namespace

CentroidSet fit_kmeans(const std::vector<std::vector<double>>& points, int k, std::uint64_t seed,
                       const KMeansOptions& options) {
    if (points.empty()) throw ValidationError("fit_kmeans: empty input");
    if (k < 1) throw ValidationError("fit_kmeans: k must be >= 1");
    const std::size_t dim = points[0].size();
    for (const auto& p : points) {
        if (p.size() != dim) throw ValidationError("fit_kmeans: inconsistent point dimensions");
    }
    if (static_cast<std::size_t>(k) > count_distinct(points)) {
        throw ValidationError("fit_kmeans: k exceeds the number of distinct points");
    }

    const int restarts = std::max(1, options.n_restarts);
    LloydResult best;
    bool have_best = false;
    for (int r = 0; r < restarts; ++r) {
        RandomStream stream(derive_seed(seed, "kmeans_restart", static_cast<std::uint64_t>(r)));
        LloydResult result = lloyd(points, kmeanspp_init(points, k, stream), options);
        if (!have_best || result.inertia < best.inertia) {
            best = std::move(result);
            have_best = true;
        }
    }

    CentroidSet out;
    out.k = k;
    out.centroids = std::move(best.centroids);
    out.seed = seed;
    out.inertia = best.inertia;
    out.inertia_history = std::move(best.history);
    return out;
}

int assign_cluster(const std::vector<double>& v, const CentroidSet& centroids) {
    if (centroids.k < 1) throw ValidationError("assign_cluster: empty centroid set");
    if (v.size() != centroids.centroids[0].size()) {
        throw ValidationError("assign_cluster: vector length does not match centroids");
    }
    int best = 0;
    double best_d = sq_dist(v, centroids.centroids[0]);
    for (int c = 1; c < centroids.k; ++c) {
        const double d = sq_dist(v, centroids.centroids[static_cast<size_t>(c)]);
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    return best;
}

std::vector<int> assign_all(const std::vector<std::vector<double>>& points,
                            const CentroidSet& centroids, int threads) {
    std::vector<int> labels(points.size());
    parallel_for(points.size(), threads,
                 [&](std::size_t i) { labels[i] = assign_cluster(points[i], centroids); });
    return labels;
}

OccupancyProfile occupancy(const std::vector<std::vector<int>>& cohort_assignments, int k) {
    if (k < 1) throw ValidationError("occupancy: k must be >= 1");
    std::vector<std::size_t> counts(static_cast<size_t>(k), 0);
    std::size_t total = 0;
    for (const auto& subject : cohort_assignments) {
        for (int id : subject) {
            if (id < 0 || id >= k) {
                throw ValidationError("occupancy: cluster id " + std::to_string(id) +
                                      " out of range [0," + std::to_string(k) + ")");
            }
            ++counts[static_cast<size_t>(id)];
            ++total;
        }
    }
    if (total == 0) throw ValidationError("occupancy: no assignments");

    OccupancyProfile profile;
    profile.ratios.resize(static_cast<size_t>(k));
    for (int i = 0; i < k; ++i) {
        profile.ratios[static_cast<size_t>(i)] =
            static_cast<double>(counts[static_cast<size_t>(i)]) / static_cast<double>(total);
    }
    const double mean = 1.0 / k;
    double var = 0.0;
    for (double r : profile.ratios) var += (r - mean) * (r - mean);
    var /= k; // population variance
    profile.dispersion = std::sqrt(var) / mean;
    return profile;
}

KSelection select_k(const std::vector<std::vector<double>>& points, int k_min, int k_max,
                    double dispersion_max, std::uint64_t seed, const KMeansOptions& options) {
    if (k_min < 2) throw ValidationError("select_k: k_min must be >= 2");
    if (k_max < k_min) throw ValidationError("select_k: empty k range");

    KSelection selection;
    for (int k = k_min; k <= k_max; ++k) {
        KSelection::Candidate cand;
        cand.k = k;
        try {
            const CentroidSet cs = fit_kmeans(points, k, seed, options);
            const std::vector<int> labels = assign_all(points, cs, options.threads);
            cand.dispersion = occupancy({labels}, k).dispersion;
            cand.inertia = cs.inertia;
            cand.feasible = true;
        } catch (const ValidationError&) {
            cand.feasible = false; // not enough distinct points for this k
        }
        selection.candidates.push_back(cand);
    }

    selection.k = k_min;
    selection.warning = true;
    for (const auto& cand : selection.candidates) {
        if (cand.feasible && cand.dispersion <= dispersion_max) {
            selection.k = cand.k; // candidates are ascending, keep the largest
            selection.warning = false;
        }
    }
    return selection;
}

namespace {
constexpr char kCentroidMagic[4] = {'N', 'F', 'K', 'C'};
constexpr std::uint32_t kCentroidFormatVersion = 1;
} // namespace

std::string encode_centroids(const CentroidSet& centroids) {
    std::string out;
    out.append(kCentroidMagic, 4);
    put_u32_le(out, kCentroidFormatVersion);
    put_u32_le(out, static_cast<std::uint32_t>(centroids.k));
    const std::uint32_t dim =
        centroids.centroids.empty() ? 0 : static_cast<std::uint32_t>(centroids.centroids[0].size());
    put_u32_le(out, dim);
    for (const auto& row : centroids.centroids) {
        for (double v : row) put_f32_le(out, static_cast<float>(v));
    }
    return out;
}

CentroidSet decode_centroids(const std::string& bytes, const std::string& context) {
    if (bytes.size() < 16) throw ValidationError(context + ": centroid file shorter than header");
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    if (std::memcmp(p, kCentroidMagic, 4) != 0) {
        throw ValidationError(context + ": bad magic, expected NFKC");
    }
    if (get_u32_le(p + 4) != kCentroidFormatVersion) {
        throw ValidationError(context + ": unsupported centroid format version");
    }
    const std::uint32_t k = get_u32_le(p + 8);
    const std::uint32_t dim = get_u32_le(p + 12);
    if (bytes.size() != 16 + 4ull * k * dim) {
        throw ValidationError(context + ": centroid file size mismatch");
    }
    CentroidSet out;
    out.k = static_cast<int>(k);
    out.centroids.resize(k, std::vector<double>(dim));
    p += 16;
    for (auto& row : out.centroids) {
        for (auto& v : row) {
            v = get_f32_le(p);
            p += 4;
        }
    }
    return out;
}

void write_centroids(const std::string& path, const CentroidSet& centroids) {
    write_file_bytes(path, encode_centroids(centroids));
}

CentroidSet read_centroids(const std::string& path) {
    return decode_centroids(read_file_bytes(path), path);
}

} // namespace neurosig
