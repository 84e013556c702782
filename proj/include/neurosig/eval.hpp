#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "neurosig/clustering.hpp"
#include "neurosig/predictor.hpp"
#include "neurosig/readout.hpp"
#include "neurosig/signature.hpp"
#include "neurosig/types.hpp"

namespace neurosig {

struct SplitFractions {
    double train = 0.6;
    double validation = 0.2;
    double test = 0.2;
};

// Subject-level splits; one plan is shared by every stage of a run.
struct SplitPlan {
    int repeats = 5;
    SplitFractions fractions;
    std::uint64_t seed = 0;
    struct Assignment {
        std::vector<std::string> train;
        std::vector<std::string> validation;
        std::vector<std::string> test;
    };
    std::vector<Assignment> assignments;

    int n_train() const { return assignments.empty() ? 0 : static_cast<int>(assignments[0].train.size()); }
    int n_test() const { return assignments.empty() ? 0 : static_cast<int>(assignments[0].test.size()); }
};

// Validation and test take floor(fraction * n) subjects each, train keeps the
// remainder. Deterministic for identical inputs.
SplitPlan make_splits(const Cohort& cohort, std::uint64_t plan_seed, int repeats = 5,
                      SplitFractions fractions = {});

enum class Method {
    kFull,
    kMean,
    kRawDiff,
    kCountOnly,
    kErrorOnly,
    kNoFeedback,
    kAltClustering,
    kAltRoi,
};

Method method_from_string(const std::string& name);
std::string to_string(Method m);
std::vector<Method> all_methods();

struct KSelectionConfig {
    int fixed_k = 0; // 0 selects k by occupancy dispersion
    int k_min = 2;
    int k_max = 10;
    double dispersion_max = kDefaultDispersionMax;
};

struct PipelineConfig {
    KSelectionConfig k_selection;
    KMeansOptions kmeans;
    PredictorConfig predictor;
    std::vector<double> lambda_grid = kDefaultLambdaGrid;
    ErrorNorm error_norm = ErrorNorm::kSumSquares;
    std::uint64_t seed = 0;
    int threads = 1;

    std::string canonical_json() const; // stable serialization, hashed for provenance
};

PipelineConfig pipeline_config_from_json_file(const std::string& path);

// Per-(method, repeat) record; every reported aggregate traces back to these.
struct RepeatRecord {
    int repeat_index = 0;
    int k = 0;
    bool k_warning = false;
    double readout_lambda = 0.0;
    std::vector<double> per_trait_mse; // real traits, test subjects
    double aggregate_mse = 0.0;        // mean over real traits
    std::vector<double> per_label_auc; // NaN when the test fold is single-class
    // supp-table trio, recorded when the method trains a paired predictor
    std::optional<double> predictor_test_loss;
    std::optional<double> copy_a1_test_loss;
    std::optional<double> mean_prediction_test_loss;
    std::string centroid_hash;
    std::string model_hash;
    std::string readout_hash;
};

struct MethodReport {
    Method method = Method::kFull;
    std::vector<RepeatRecord> repeats;

    std::vector<double> trait_mse_series(std::size_t trait_index) const;
    std::vector<double> aggregate_mse_series() const;
    double mean_aggregate_mse() const;
    double mean_trait_mse(std::size_t trait_index) const;
    double mean_label_auc(std::size_t label_index) const; // NaN-skipping
};

struct TTestResult {
    double t = 0.0;
    double p = 1.0;
    bool infinite_t = false; // zero variance with nonzero mean
};

// Corrected resampled t-test (variance inflated by n_test/n_train) on paired
// per-repeat errors; two-sided p from Student t with J-1 degrees of freedom.
TTestResult corrected_t_test(const std::vector<double>& errors_a,
                             const std::vector<double>& errors_b, int n_train, int n_test);

struct EvalReport {
    std::uint64_t seed = 0;
    std::string config_hash;
    std::vector<std::string> trait_names;
    std::vector<std::string> label_names;
    SplitPlan plan;
    std::map<std::string, MethodReport> methods; // keyed by method name
    // "full_vs_<baseline>" -> trait name (or "aggregate") -> test result
    std::map<std::string, std::map<std::string, TTestResult>> comparisons;
    std::map<std::string, std::string> provenance;

    const MethodReport* find(Method m) const;
};

// Runs the requested methods on shared per-repeat artifacts. Test subjects
// never influence centroids, the predictor, standardization, or the readout.
// alt_cohort (the alternate-ROI remap of the same cohort) is required only
// when methods includes kAltRoi.
EvalReport run_evaluation(const Cohort& cohort, const Cohort* alt_cohort,
                          const PipelineConfig& config, const SplitPlan& plan,
                          const std::vector<Method>& methods);

EvalReport run_pipeline(const Cohort& cohort, const PipelineConfig& config,
                        const SplitPlan& plan);

EvalReport run_baseline(const std::string& name, const Cohort& cohort, const Cohort* alt_cohort,
                        const PipelineConfig& config, const SplitPlan& plan);

std::string report_to_json(const EvalReport& report);
// Table-shaped grid: rows are methods, columns are traits (MSE) and binary
// labels (AUC), cells are "mean +- sd" over repeats.
std::string report_csv_from_json(const std::string& report_json);

} // namespace neurosig
