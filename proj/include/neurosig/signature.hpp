#pragma once

#include <string>
#include <vector>

#include "neurosig/clustering.hpp"
#include "neurosig/matching.hpp"
#include "neurosig/predictor.hpp"
#include "neurosig/types.hpp"

namespace neurosig {

enum class SignatureVariant { kFull, kRawDiff, kCountOnly, kErrorOnly };

SignatureVariant signature_variant_from_string(const std::string& name);
std::string to_string(SignatureVariant v);

// Norm used for the per-frame prediction error entering the signature.
// Sum-of-squares over target voxels is the default; per-voxel mean is the
// training-loss convention and available behind this switch.
enum class ErrorNorm { kSumSquares, kMeanSquares };

// Which frame vector feeds cluster assignment: rest-only (the standard
// pipeline) or the whole brain state (alternative-clustering ablation).
enum class ClusteringSpace { kRestOnly, kFullBrain };

// Full-brain vectors are [target | rest] in ascending voxel order per block.
std::vector<double> clustering_vector(const Frame& frame, ClusteringSpace space);

// Per-subject k x 2 signature: cluster visit counts and mean prediction error
// per cluster. Empty clusters get (0, 0).
struct SignatureMatrix {
    std::string subject_id;
    SignatureVariant variant = SignatureVariant::kFull;
    std::vector<int> counts;     // k, sums to T for full/raw-diff
    std::vector<double> errors;  // k

    int k() const { return static_cast<int>(counts.size()); }
};

struct SignatureVector {
    std::string subject_id;
    SignatureVariant variant = SignatureVariant::kFull;
    int k = 0;
    std::vector<double> values; // 2k interleaved (counts even, errors odd) or k
};

// Assigns session-1 frames to clusters and averages the predictor's error per
// cluster. A no-feedback model scores each session-1 frame against itself;
// a paired model scores the matched session-2 frame.
SignatureMatrix build_signature(const SubjectRecord& subject, const CentroidSet& centroids,
                                const PredictorModel& model, const MatchMap& matchmap,
                                ClusteringSpace space = ClusteringSpace::kRestOnly,
                                ErrorNorm norm = ErrorNorm::kSumSquares);

// Ablation variant: prediction error replaced by the raw cross-session
// target-region difference.
SignatureMatrix build_raw_diff_signature(const SubjectRecord& subject,
                                         const CentroidSet& centroids, const MatchMap& matchmap,
                                         ClusteringSpace space = ClusteringSpace::kRestOnly,
                                         ErrorNorm norm = ErrorNorm::kSumSquares);

// requested = the matrix's own variant gives the interleaved 2k layout;
// kCountOnly / kErrorOnly extract a single column.
SignatureVector flatten(const SignatureMatrix& sig, SignatureVariant requested);

// Inverse of the interleaved flattening (full / raw-diff layouts only).
SignatureMatrix unflatten(const SignatureVector& vec);

// CSV: subject_id,variant,count_0,err_0,...,count_{k-1},err_{k-1}
void write_signatures_csv(const std::string& path, const std::vector<SignatureMatrix>& sigs);
std::vector<SignatureMatrix> read_signatures_csv(const std::string& path);

} // namespace neurosig
