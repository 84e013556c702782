#include "neurosig/eval.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>

#include "json.hpp"
#include "neurosig/matching.hpp"
#include "neurosig/parallel.hpp"
#include "neurosig/rng.hpp"

using json = nlohmann::json;

namespace neurosig {

SplitPlan make_splits(const Cohort& cohort, std::uint64_t plan_seed, int repeats,
                      SplitFractions fractions) {
    const int n = static_cast<int>(cohort.subjects.size());
    if (n < 5) throw ValidationError("make_splits: cohort too small (need >= 5 subjects)");
    if (repeats < 1) throw ValidationError("make_splits: repeats must be >= 1");
    if (!(fractions.validation > 0) || !(fractions.test > 0) ||
        fractions.validation + fractions.test >= 1.0) {
        throw ValidationError("make_splits: fractions must be positive with train remainder");
    }

    const int n_val = static_cast<int>(std::floor(fractions.validation * n));
    const int n_test = static_cast<int>(std::floor(fractions.test * n));
    const int n_train = n - n_val - n_test;
    if (n_val < 1 || n_test < 1 || n_train < 1) {
        throw ValidationError("make_splits: a split would be empty at this cohort size");
    }

    std::vector<std::string> ids;
    ids.reserve(static_cast<size_t>(n));
    for (const auto& s : cohort.subjects) ids.push_back(s.subject_id);
    std::sort(ids.begin(), ids.end());

    SplitPlan plan;
    plan.repeats = repeats;
    plan.fractions = fractions;
    plan.seed = plan_seed;
    for (int r = 0; r < repeats; ++r) {
        std::vector<std::string> shuffled = ids;
        RandomStream stream(derive_seed(plan_seed, "split_repeat", static_cast<std::uint64_t>(r)));
        stream.shuffle(shuffled);
        SplitPlan::Assignment a;
        a.train.assign(shuffled.begin(), shuffled.begin() + n_train);
        a.validation.assign(shuffled.begin() + n_train, shuffled.begin() + n_train + n_val);
        a.test.assign(shuffled.begin() + n_train + n_val, shuffled.end());
        plan.assignments.push_back(std::move(a));
    }
    return plan;
}

Method method_from_string(const std::string& name) {
    if (name == "full") return Method::kFull;
    if (name == "mean") return Method::kMean;
    if (name == "raw_diff") return Method::kRawDiff;
    if (name == "count_only") return Method::kCountOnly;
    if (name == "error_only") return Method::kErrorOnly;
    if (name == "no_feedback") return Method::kNoFeedback;
    if (name == "alt_clustering") return Method::kAltClustering;
    if (name == "alt_roi") return Method::kAltRoi;
    throw ValidationError("unknown method: " + name);
}

std::string to_string(Method m) {
    switch (m) {
    case Method::kFull: return "full";
    case Method::kMean: return "mean";
    case Method::kRawDiff: return "raw_diff";
    case Method::kCountOnly: return "count_only";
    case Method::kErrorOnly: return "error_only";
    case Method::kNoFeedback: return "no_feedback";
    case Method::kAltClustering: return "alt_clustering";
    case Method::kAltRoi: return "alt_roi";
    }
    return "full";
}

std::vector<Method> all_methods() {
    return {Method::kFull,      Method::kMean,       Method::kRawDiff,
            Method::kCountOnly, Method::kErrorOnly,  Method::kNoFeedback,
            Method::kAltClustering, Method::kAltRoi};
}

TTestResult corrected_t_test(const std::vector<double>& errors_a,
                             const std::vector<double>& errors_b, int n_train, int n_test) {
    if (errors_a.size() != errors_b.size()) {
        throw ValidationError("corrected_t_test: unequal sample lengths");
    }
    const std::size_t J = errors_a.size();
    if (J < 2) throw ValidationError("corrected_t_test: need >= 2 repeats");
    if (n_train < 1 || n_test < 1) {
        throw ValidationError("corrected_t_test: split sizes must be >= 1");
    }

    std::vector<double> d(J);
    for (std::size_t j = 0; j < J; ++j) d[j] = errors_a[j] - errors_b[j];
    const double mean = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(J);
    double var = 0.0;
    for (double x : d) var += (x - mean) * (x - mean);
    var /= static_cast<double>(J - 1);

    TTestResult result;
    if (var == 0.0) {
        if (mean == 0.0) return {0.0, 1.0, false};
        result.t = mean > 0 ? std::numeric_limits<double>::infinity()
                            : -std::numeric_limits<double>::infinity();
        result.p = 0.0;
        result.infinite_t = true;
        return result;
    }

    const double correction = 1.0 / static_cast<double>(J) +
                              static_cast<double>(n_test) / static_cast<double>(n_train);
    result.t = mean / std::sqrt(correction * var);
    const boost::math::students_t_distribution<double> dist(static_cast<double>(J - 1));
    result.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(result.t)));
    return result;
}

std::string PipelineConfig::canonical_json() const {
    json j;
    j["k"] = k_selection.fixed_k;
    j["k_min"] = k_selection.k_min;
    j["k_max"] = k_selection.k_max;
    j["dispersion_max"] = k_selection.dispersion_max;
    j["kmeans"] = {{"max_iters", kmeans.max_iters},
                   {"tol", kmeans.tol},
                   {"n_restarts", kmeans.n_restarts}};
    j["predictor"] = {{"hidden_layers", predictor.hidden_layers},
                      {"activation", to_string(predictor.activation)},
                      {"learning_rate", predictor.learning_rate},
                      {"batch_size", predictor.batch_size},
                      {"adam_beta1", predictor.adam_beta1},
                      {"adam_beta2", predictor.adam_beta2},
                      {"adam_epsilon", predictor.adam_epsilon},
                      {"max_epochs", predictor.max_epochs},
                      {"patience", predictor.patience}};
    j["lambda_grid"] = lambda_grid;
    j["error_norm"] = error_norm == ErrorNorm::kSumSquares ? "sum_squares" : "mean_squares";
    j["seed"] = seed;
    return j.dump();
}

PipelineConfig pipeline_config_from_json_file(const std::string& path) {
    json j;
    try {
        std::ifstream in(path);
        if (!in) throw ValidationError("cannot open pipeline config: " + path);
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ValidationError("pipeline config parse error: " + std::string(e.what()));
    }
    PipelineConfig c;
    c.k_selection.fixed_k = j.value("k", c.k_selection.fixed_k);
    c.k_selection.k_min = j.value("k_min", c.k_selection.k_min);
    c.k_selection.k_max = j.value("k_max", c.k_selection.k_max);
    c.k_selection.dispersion_max = j.value("dispersion_max", c.k_selection.dispersion_max);
    if (j.contains("kmeans")) {
        const auto& k = j.at("kmeans");
        c.kmeans.max_iters = k.value("max_iters", c.kmeans.max_iters);
        c.kmeans.tol = k.value("tol", c.kmeans.tol);
        c.kmeans.n_restarts = k.value("n_restarts", c.kmeans.n_restarts);
    }
    if (j.contains("predictor")) {
        const auto& p = j.at("predictor");
        c.predictor.hidden_layers =
            p.value("hidden_layers", c.predictor.hidden_layers);
        if (p.contains("activation")) {
            c.predictor.activation = activation_from_string(p.at("activation").get<std::string>());
        }
        c.predictor.learning_rate = p.value("learning_rate", c.predictor.learning_rate);
        c.predictor.batch_size = p.value("batch_size", c.predictor.batch_size);
        c.predictor.adam_beta1 = p.value("adam_beta1", c.predictor.adam_beta1);
        c.predictor.adam_beta2 = p.value("adam_beta2", c.predictor.adam_beta2);
        c.predictor.adam_epsilon = p.value("adam_epsilon", c.predictor.adam_epsilon);
        c.predictor.max_epochs = p.value("max_epochs", c.predictor.max_epochs);
        c.predictor.patience = p.value("patience", c.predictor.patience);
    }
    c.lambda_grid = j.value("lambda_grid", c.lambda_grid);
    if (j.contains("error_norm")) {
        const std::string norm = j.at("error_norm").get<std::string>();
        if (norm == "sum_squares") {
            c.error_norm = ErrorNorm::kSumSquares;
        } else if (norm == "mean_squares") {
            c.error_norm = ErrorNorm::kMeanSquares;
        } else {
            throw ValidationError("pipeline config: unknown error_norm '" + norm + "'");
        }
    }
    c.seed = j.value("seed", c.seed);
    return c;
}

std::vector<double> MethodReport::trait_mse_series(std::size_t trait_index) const {
    std::vector<double> out;
    for (const auto& r : repeats) out.push_back(r.per_trait_mse.at(trait_index));
    return out;
}

std::vector<double> MethodReport::aggregate_mse_series() const {
    std::vector<double> out;
    for (const auto& r : repeats) out.push_back(r.aggregate_mse);
    return out;
}

double MethodReport::mean_aggregate_mse() const {
    const auto series = aggregate_mse_series();
    return std::accumulate(series.begin(), series.end(), 0.0) / static_cast<double>(series.size());
}

double MethodReport::mean_trait_mse(std::size_t trait_index) const {
    const auto series = trait_mse_series(trait_index);
    return std::accumulate(series.begin(), series.end(), 0.0) / static_cast<double>(series.size());
}

double MethodReport::mean_label_auc(std::size_t label_index) const {
    double sum = 0.0;
    int count = 0;
    for (const auto& r : repeats) {
        const double auc = r.per_label_auc.at(label_index);
        if (std::isfinite(auc)) {
            sum += auc;
            ++count;
        }
    }
    return count > 0 ? sum / count : std::numeric_limits<double>::quiet_NaN();
}

const MethodReport* EvalReport::find(Method m) const {
    const auto it = methods.find(to_string(m));
    return it == methods.end() ? nullptr : &it->second;
}

namespace {

struct RoiData {
    const Cohort* cohort = nullptr;
    std::map<std::string, MatchMap> matches;
    std::vector<TrainSample> paired_samples;
    std::vector<TrainSample> nf_samples;
    bool nf_built = false;
};

std::vector<TrainSample> filter_samples(const std::vector<TrainSample>& samples,
                                        const std::set<std::string>& ids) {
    std::vector<TrainSample> out;
    for (const auto& s : samples) {
        if (ids.count(s.subject_id)) out.push_back(s);
    }
    return out;
}

std::vector<int> subject_indices(const Cohort& cohort, const std::set<std::string>& ids) {
    std::vector<int> out;
    for (std::size_t i = 0; i < cohort.subjects.size(); ++i) {
        if (ids.count(cohort.subjects[i].subject_id)) out.push_back(static_cast<int>(i));
    }
    return out;
}

double sample_sd(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    return std::sqrt(var / static_cast<double>(v.size() - 1));
}

class Evaluator {
public:
    Evaluator(const Cohort& cohort, const Cohort* alt_cohort, const PipelineConfig& config,
              const SplitPlan& plan)
        : cohort_(cohort), alt_cohort_(alt_cohort), config_(config), plan_(plan) {
        if (plan.assignments.empty()) throw ValidationError("run_evaluation: empty split plan");
        trait_names_ = cohort.trait_names();
        label_names_ = cohort.label_names();
        std_roi_.cohort = &cohort;
    }

    EvalReport run(const std::vector<Method>& methods) {
        if (methods.empty()) throw ValidationError("run_evaluation: no methods requested");
        for (Method m : methods) {
            if (m == Method::kAltRoi && alt_cohort_ == nullptr) {
                throw ValidationError(
                    "run_evaluation: alt_roi requires a cohort with an alternate ROI mask");
            }
        }
        prepare_roi_data(methods);

        EvalReport report;
        report.seed = config_.seed;
        report.config_hash = hex64(fnv1a64(config_.canonical_json()));
        report.trait_names = trait_names_;
        report.label_names = label_names_;
        report.plan = plan_;

        for (int r = 0; r < static_cast<int>(plan_.assignments.size()); ++r) {
            RepeatState state = make_repeat_state(r);
            for (Method m : methods) {
                report.methods[to_string(m)].method = m;
                report.methods[to_string(m)].repeats.push_back(eval_method(m, r, state));
            }
        }

        const MethodReport* full = report.find(Method::kFull);
        if (full != nullptr) {
            for (Method m : methods) {
                if (m == Method::kFull) continue;
                const MethodReport& other = report.methods.at(to_string(m));
                auto& cmp = report.comparisons["full_vs_" + to_string(m)];
                for (std::size_t ti = 0; ti < trait_names_.size(); ++ti) {
                    cmp[trait_names_[ti]] =
                        corrected_t_test(full->trait_mse_series(ti), other.trait_mse_series(ti),
                                         plan_.n_train(), plan_.n_test());
                }
                cmp["aggregate"] = corrected_t_test(full->aggregate_mse_series(),
                                                    other.aggregate_mse_series(),
                                                    plan_.n_train(), plan_.n_test());
            }
        }
        return report;
    }

private:
    struct RepeatState {
        int repeat = 0;
        std::set<std::string> train_ids, val_ids, test_ids;
        std::map<std::string, CentroidSet> centroids;           // "std_rest", "std_full", "alt_rest"
        std::map<std::string, std::pair<int, bool>> k_info;
        std::map<std::string, PredictorModel> models;           // "std_paired", "std_nf", "alt_paired"
        std::map<std::string, std::vector<SignatureMatrix>> sigs;
    };

    void prepare_roi_data(const std::vector<Method>& methods) {
        bool need_std_matches = false, need_nf = false, need_alt = false;
        for (Method m : methods) {
            if (m != Method::kMean && m != Method::kAltRoi) need_std_matches = true;
            if (m == Method::kNoFeedback) need_nf = true;
            if (m == Method::kAltRoi) need_alt = true;
        }
        if (need_std_matches && std_roi_.matches.empty()) {
            std_roi_.matches = match_all(cohort_, config_.threads);
            std_roi_.paired_samples = build_dataset(cohort_, std_roi_.matches, InputMode::kPaired);
        }
        if (need_nf && !std_roi_.nf_built) {
            std_roi_.nf_samples = build_dataset(cohort_, {}, InputMode::kNoFeedback);
            std_roi_.nf_built = true;
        }
        if (need_alt && alt_roi_.matches.empty()) {
            alt_roi_.cohort = alt_cohort_;
            alt_roi_.matches = match_all(*alt_cohort_, config_.threads);
            alt_roi_.paired_samples =
                build_dataset(*alt_cohort_, alt_roi_.matches, InputMode::kPaired);
        }
    }

    RepeatState make_repeat_state(int r) {
        RepeatState state;
        state.repeat = r;
        const auto& a = plan_.assignments[static_cast<size_t>(r)];
        state.train_ids.insert(a.train.begin(), a.train.end());
        state.val_ids.insert(a.validation.begin(), a.validation.end());
        state.test_ids.insert(a.test.begin(), a.test.end());
        return state;
    }

    const RoiData& roi_data(bool alt) const { return alt ? alt_roi_ : std_roi_; }

    const CentroidSet& get_centroids(RepeatState& state, bool alt, ClusteringSpace space) {
        const std::string key = std::string(alt ? "alt" : "std") +
                                (space == ClusteringSpace::kRestOnly ? "_rest" : "_full");
        auto it = state.centroids.find(key);
        if (it != state.centroids.end()) return it->second;

        const Cohort& cohort = *roi_data(alt).cohort;
        std::vector<std::vector<double>> points;
        const auto& train_list = plan_.assignments[static_cast<size_t>(state.repeat)].train;
        for (const auto& id : train_list) {
            const auto& subject = subject_by_id(cohort, id);
            for (const auto& frame : subject.sessions.at(0)) {
                points.push_back(clustering_vector(frame, space));
            }
        }

        const std::uint64_t seed =
            derive_seed(config_.seed, "kmeans_" + key, static_cast<std::uint64_t>(state.repeat));
        KMeansOptions options = config_.kmeans;
        options.threads = config_.threads;

        int k = config_.k_selection.fixed_k;
        bool warning = false;
        if (k <= 0) {
            const KSelection sel =
                select_k(points, config_.k_selection.k_min, config_.k_selection.k_max,
                         config_.k_selection.dispersion_max, seed, options);
            k = sel.k;
            warning = sel.warning;
        }
        state.k_info[key] = {k, warning};
        it = state.centroids.emplace(key, fit_kmeans(points, k, seed, options)).first;
        return it->second;
    }

    const PredictorModel& get_model(RepeatState& state, bool alt, InputMode mode) {
        const std::string key =
            std::string(alt ? "alt" : "std") + (mode == InputMode::kPaired ? "_paired" : "_nf");
        auto it = state.models.find(key);
        if (it != state.models.end()) return it->second;

        const RoiData& roi = roi_data(alt);
        const auto& pool = mode == InputMode::kPaired ? roi.paired_samples : roi.nf_samples;
        PredictorConfig cfg = config_.predictor;
        cfg.input_mode = mode;
        cfg.seed = derive_seed(config_.seed, "predictor_" + key,
                               static_cast<std::uint64_t>(state.repeat));
        PredictorModel model = train(filter_samples(pool, state.train_ids), cfg,
                                     filter_samples(pool, state.val_ids));
        it = state.models.emplace(key, std::move(model)).first;
        return it->second;
    }

    // signatures for every subject, cohort order
    const std::vector<SignatureMatrix>& get_signatures(RepeatState& state, const std::string& kind) {
        auto it = state.sigs.find(kind);
        if (it != state.sigs.end()) return it->second;

        const bool alt = kind == "alt_full";
        const Cohort& cohort = *roi_data(alt).cohort;
        const auto& matches = roi_data(alt).matches;
        std::vector<SignatureMatrix> sigs(cohort.subjects.size());

        if (kind == "raw") {
            const CentroidSet& cs = get_centroids(state, false, ClusteringSpace::kRestOnly);
            parallel_for(cohort.subjects.size(), config_.threads, [&](std::size_t i) {
                const auto& subject = cohort.subjects[i];
                sigs[i] = build_raw_diff_signature(subject, cs, matches.at(subject.subject_id),
                                                   ClusteringSpace::kRestOnly, config_.error_norm);
            });
        } else {
            ClusteringSpace space = ClusteringSpace::kRestOnly;
            InputMode mode = InputMode::kPaired;
            if (kind == "fullbrain") space = ClusteringSpace::kFullBrain;
            if (kind == "nf") mode = InputMode::kNoFeedback;
            const CentroidSet& cs = get_centroids(state, alt, space);
            const PredictorModel& model = get_model(state, alt, mode);
            parallel_for(cohort.subjects.size(), config_.threads, [&](std::size_t i) {
                const auto& subject = cohort.subjects[i];
                sigs[i] = build_signature(subject, cs, model, matches.at(subject.subject_id),
                                          space, config_.error_norm);
            });
        }
        it = state.sigs.emplace(kind, std::move(sigs)).first;
        return it->second;
    }

    static const SubjectRecord& subject_by_id(const Cohort& cohort, const std::string& id) {
        for (const auto& s : cohort.subjects) {
            if (s.subject_id == id) return s;
        }
        throw ValidationError("split plan references unknown subject '" + id + "'");
    }

    Eigen::MatrixXd targets_for(const Cohort& cohort, const std::vector<int>& indices) const {
        const std::size_t l = trait_names_.size();
        Eigen::MatrixXd Y(static_cast<Eigen::Index>(indices.size()),
                          static_cast<Eigen::Index>(l + label_names_.size()));
        for (std::size_t i = 0; i < indices.size(); ++i) {
            const auto& s = cohort.subjects[static_cast<size_t>(indices[i])];
            for (std::size_t j = 0; j < l; ++j) {
                Y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = s.traits[j];
            }
            for (std::size_t j = 0; j < label_names_.size(); ++j) {
                Y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l + j)) =
                    s.binary_labels.at(label_names_[j]) ? 1.0 : 0.0;
            }
        }
        return Y;
    }

    Eigen::MatrixXd features_for(const std::vector<SignatureMatrix>& sigs,
                                 const std::vector<int>& indices, SignatureVariant variant) const {
        std::vector<std::vector<double>> rows;
        rows.reserve(indices.size());
        for (int idx : indices) {
            rows.push_back(flatten(sigs[static_cast<size_t>(idx)], variant).values);
        }
        Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()),
                          rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size()));
        for (std::size_t i = 0; i < rows.size(); ++i) {
            for (std::size_t j = 0; j < rows[i].size(); ++j) {
                X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
            }
        }
        return X;
    }

    void fill_metrics(RepeatRecord& record, const Cohort& cohort,
                      const std::vector<int>& test_idx, const Eigen::MatrixXd& predictions,
                      const Eigen::MatrixXd& test_targets) const {
        const std::size_t l = trait_names_.size();
        record.per_trait_mse.resize(l);
        double aggregate = 0.0;
        for (std::size_t j = 0; j < l; ++j) {
            const double mse = (predictions.col(static_cast<Eigen::Index>(j)) -
                                test_targets.col(static_cast<Eigen::Index>(j)))
                                   .array()
                                   .square()
                                   .mean();
            record.per_trait_mse[j] = mse;
            aggregate += mse;
        }
        record.aggregate_mse = l > 0 ? aggregate / static_cast<double>(l) : 0.0;

        record.per_label_auc.resize(label_names_.size());
        for (std::size_t j = 0; j < label_names_.size(); ++j) {
            std::vector<double> scores;
            std::vector<bool> labels;
            for (std::size_t i = 0; i < test_idx.size(); ++i) {
                scores.push_back(predictions(static_cast<Eigen::Index>(i),
                                             static_cast<Eigen::Index>(l + j)));
                labels.push_back(
                    cohort.subjects[static_cast<size_t>(test_idx[i])].binary_labels.at(
                        label_names_[j]));
            }
            const bool has_pos = std::find(labels.begin(), labels.end(), true) != labels.end();
            const bool has_neg = std::find(labels.begin(), labels.end(), false) != labels.end();
            record.per_label_auc[j] = (has_pos && has_neg)
                                          ? roc_auc(scores, labels)
                                          : std::numeric_limits<double>::quiet_NaN();
        }
    }

    RepeatRecord eval_method(Method m, int r, RepeatState& state) {
        RepeatRecord record;
        record.repeat_index = r;

        const bool alt = m == Method::kAltRoi;
        const Cohort& cohort = *roi_data(alt).cohort;
        const std::vector<int> train_idx = subject_indices(cohort, state.train_ids);
        const std::vector<int> val_idx = subject_indices(cohort, state.val_ids);
        const std::vector<int> test_idx = subject_indices(cohort, state.test_ids);
        const Eigen::MatrixXd train_Y = targets_for(cohort, train_idx);
        const Eigen::MatrixXd val_Y = targets_for(cohort, val_idx);
        const Eigen::MatrixXd test_Y = targets_for(cohort, test_idx);

        if (m == Method::kMean) {
            const Eigen::RowVectorXd means = train_Y.colwise().mean();
            Eigen::MatrixXd predictions(test_Y.rows(), test_Y.cols());
            predictions.rowwise() = means;
            fill_metrics(record, cohort, test_idx, predictions, test_Y);
            return record;
        }

        std::string sig_kind;
        SignatureVariant flatten_variant = SignatureVariant::kFull;
        switch (m) {
        case Method::kFull: sig_kind = "full"; break;
        case Method::kRawDiff:
            sig_kind = "raw";
            flatten_variant = SignatureVariant::kRawDiff;
            break;
        case Method::kCountOnly:
            sig_kind = "raw"; // counts are model-free and identical across variants
            flatten_variant = SignatureVariant::kCountOnly;
            break;
        case Method::kErrorOnly:
            sig_kind = "full";
            flatten_variant = SignatureVariant::kErrorOnly;
            break;
        case Method::kNoFeedback: sig_kind = "nf"; break;
        case Method::kAltClustering: sig_kind = "fullbrain"; break;
        case Method::kAltRoi: sig_kind = "alt_full"; break;
        case Method::kMean: break;
        }

        const auto& sigs = get_signatures(state, sig_kind);
        const Eigen::MatrixXd train_X = features_for(sigs, train_idx, flatten_variant);
        const Eigen::MatrixXd val_X = features_for(sigs, val_idx, flatten_variant);
        const Eigen::MatrixXd test_X = features_for(sigs, test_idx, flatten_variant);

        LambdaSelection selection =
            select_lambda(train_X, train_Y, val_X, val_Y, config_.lambda_grid);
        LinearReadout& readout = selection.readout;
        readout.output_names = trait_names_;
        for (const auto& name : label_names_) readout.output_names.push_back(name);
        record.readout_lambda = selection.lambda;

        const Eigen::MatrixXd predictions = predict_all(readout, test_X);
        fill_metrics(record, cohort, test_idx, predictions, test_Y);

        // provenance + per-repeat artifact identity
        const bool fullbrain = m == Method::kAltClustering;
        const std::string centroid_key =
            std::string(alt ? "alt" : "std") + (fullbrain ? "_full" : "_rest");
        const CentroidSet& cs =
            get_centroids(state, alt, fullbrain ? ClusteringSpace::kFullBrain
                                                : ClusteringSpace::kRestOnly);
        record.k = state.k_info.count(centroid_key) ? state.k_info[centroid_key].first : cs.k;
        record.k_warning = state.k_info.count(centroid_key) && state.k_info[centroid_key].second;
        record.centroid_hash = hex64(fnv1a64(encode_centroids(cs)));
        record.readout_hash = hex64(fnv1a64(encode_readout(readout)));
        if (m != Method::kRawDiff && m != Method::kCountOnly) {
            const InputMode mode =
                m == Method::kNoFeedback ? InputMode::kNoFeedback : InputMode::kPaired;
            record.model_hash = hex64(fnv1a64(encode_model(get_model(state, alt, mode))));
        }

        // supp-table loss trio on the test fold for paired-predictor methods
        if (m == Method::kFull || m == Method::kAltRoi) {
            const auto& pool = roi_data(alt).paired_samples;
            const auto test_samples = filter_samples(pool, state.test_ids);
            const auto train_samples = filter_samples(pool, state.train_ids);
            const PredictorModel& model = get_model(state, alt, InputMode::kPaired);
            record.predictor_test_loss = mean_loss(model, test_samples);
            record.copy_a1_test_loss =
                copy_baseline_loss(test_samples, static_cast<int>(cohort.n_rest()),
                                   static_cast<int>(cohort.n_target()));
            record.mean_prediction_test_loss =
                mean_prediction_loss(test_samples, target_voxel_means(train_samples));
        }
        return record;
    }

    const Cohort& cohort_;
    const Cohort* alt_cohort_;
    PipelineConfig config_;
    SplitPlan plan_;
    std::vector<std::string> trait_names_;
    std::vector<std::string> label_names_;
    RoiData std_roi_, alt_roi_;
};

json number_or_null(double v) {
    if (std::isfinite(v)) return v;
    return nullptr;
}

json ttest_to_json(const TTestResult& t) {
    json j;
    j["t"] = number_or_null(t.t);
    j["p"] = t.p;
    j["infinite_t"] = t.infinite_t;
    return j;
}

} // namespace

EvalReport run_evaluation(const Cohort& cohort, const Cohort* alt_cohort,
                          const PipelineConfig& config, const SplitPlan& plan,
                          const std::vector<Method>& methods) {
    Evaluator evaluator(cohort, alt_cohort, config, plan);
    return evaluator.run(methods);
}

EvalReport run_pipeline(const Cohort& cohort, const PipelineConfig& config,
                        const SplitPlan& plan) {
    return run_evaluation(cohort, nullptr, config, plan, {Method::kFull});
}

EvalReport run_baseline(const std::string& name, const Cohort& cohort, const Cohort* alt_cohort,
                        const PipelineConfig& config, const SplitPlan& plan) {
    return run_evaluation(cohort, alt_cohort, config, plan, {method_from_string(name)});
}

std::string report_to_json(const EvalReport& report) {
    json j;
    j["schema_version"] = 1;
    j["seed"] = report.seed;
    j["config_hash"] = report.config_hash;
    j["trait_names"] = report.trait_names;
    j["label_names"] = report.label_names;
    j["n_train"] = report.plan.n_train();
    j["n_test"] = report.plan.n_test();

    json splits;
    splits["repeats"] = report.plan.repeats;
    splits["fractions"] = {report.plan.fractions.train, report.plan.fractions.validation,
                           report.plan.fractions.test};
    splits["seed"] = report.plan.seed;
    json assignments = json::array();
    for (const auto& a : report.plan.assignments) {
        assignments.push_back(
            {{"train", a.train}, {"validation", a.validation}, {"test", a.test}});
    }
    splits["assignments"] = assignments;
    j["splits"] = splits;

    json methods;
    for (const auto& [name, mr] : report.methods) {
        json repeats = json::array();
        for (const auto& r : mr.repeats) {
            json rec;
            rec["repeat"] = r.repeat_index;
            rec["k"] = r.k;
            rec["k_warning"] = r.k_warning;
            rec["readout_lambda"] = r.readout_lambda;
            json per_trait;
            for (std::size_t t = 0; t < report.trait_names.size(); ++t) {
                per_trait[report.trait_names[t]] = r.per_trait_mse[t];
            }
            rec["per_trait_mse"] = per_trait;
            rec["aggregate_mse"] = r.aggregate_mse;
            json per_label;
            for (std::size_t t = 0; t < report.label_names.size(); ++t) {
                per_label[report.label_names[t]] = number_or_null(r.per_label_auc[t]);
            }
            rec["per_label_auc"] = per_label;
            if (r.predictor_test_loss) {
                rec["predictor_test_loss"] = *r.predictor_test_loss;
                rec["copy_a1_test_loss"] = *r.copy_a1_test_loss;
                rec["mean_prediction_test_loss"] = *r.mean_prediction_test_loss;
            }
            rec["centroid_hash"] = r.centroid_hash;
            rec["model_hash"] = r.model_hash;
            rec["readout_hash"] = r.readout_hash;
            repeats.push_back(rec);
        }
        json summary;
        json per_trait;
        for (std::size_t t = 0; t < report.trait_names.size(); ++t) {
            const auto series = mr.trait_mse_series(t);
            per_trait[report.trait_names[t]] = {{"mean", mr.mean_trait_mse(t)},
                                                {"sd", sample_sd(series)}};
        }
        summary["per_trait_mse"] = per_trait;
        const auto agg = mr.aggregate_mse_series();
        summary["aggregate_mse"] = {{"mean", mr.mean_aggregate_mse()}, {"sd", sample_sd(agg)}};
        json per_label;
        for (std::size_t t = 0; t < report.label_names.size(); ++t) {
            std::vector<double> series;
            for (const auto& r : mr.repeats) {
                if (std::isfinite(r.per_label_auc[t])) series.push_back(r.per_label_auc[t]);
            }
            per_label[report.label_names[t]] = {
                {"mean", number_or_null(mr.mean_label_auc(t))},
                {"sd", sample_sd(series)},
                {"repeats_counted", series.size()}};
        }
        summary["per_label_auc"] = per_label;
        methods[name] = {{"repeats", repeats}, {"summary", summary}};
    }
    j["methods"] = methods;

    json comparisons;
    for (const auto& [name, per_trait] : report.comparisons) {
        json entry;
        for (const auto& [trait, tt] : per_trait) entry[trait] = ttest_to_json(tt);
        comparisons[name] = entry;
    }
    j["comparisons"] = comparisons;
    j["provenance"] = report.provenance;

    return j.dump(2) + "\n";
}

std::string report_csv_from_json(const std::string& report_json) {
    json j;
    try {
        j = json::parse(report_json);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("report json parse error: ") + e.what());
    }
    const auto trait_names = j.at("trait_names").get<std::vector<std::string>>();
    const auto label_names = j.at("label_names").get<std::vector<std::string>>();

    std::string csv = "method";
    for (const auto& t : trait_names) csv += "," + t + "_mse";
    csv += ",aggregate_mse";
    for (const auto& b : label_names) csv += "," + b + "_auc";
    csv += "\n";

    const auto format_cell = [](const json& summary) -> std::string {
        char buf[64];
        if (summary.at("mean").is_null()) return "n/a";
        std::snprintf(buf, sizeof(buf), "%.4g +- %.2g", summary.at("mean").get<double>(),
                      summary.at("sd").get<double>());
        return buf;
    };

    // canonical row order, restricted to the methods present
    for (const Method m : all_methods()) {
        const std::string name = to_string(m);
        if (!j.at("methods").contains(name)) continue;
        const auto& summary = j.at("methods").at(name).at("summary");
        csv += name;
        for (const auto& t : trait_names) {
            csv += "," + format_cell(summary.at("per_trait_mse").at(t));
        }
        csv += "," + format_cell(summary.at("aggregate_mse"));
        for (const auto& b : label_names) {
            csv += "," + format_cell(summary.at("per_label_auc").at(b));
        }
        csv += "\n";
    }
    return csv;
}

} // namespace neurosig
