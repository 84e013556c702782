#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "neurosig/matching.hpp"
#include "neurosig/types.hpp"

namespace neurosig {

enum class Activation { kRelu, kTanh, kIdentity };
enum class InputMode { kPaired, kNoFeedback };

Activation activation_from_string(const std::string& name);
std::string to_string(Activation a);
InputMode input_mode_from_string(const std::string& name);
std::string to_string(InputMode m);

struct PredictorConfig {
    std::vector<int> hidden_layers{256, 128};
    Activation activation = Activation::kRelu;
    double learning_rate = 0.001;
    int batch_size = 16;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    int max_epochs = 200;
    int patience = 10;
    std::uint64_t seed = 0;
    InputMode input_mode = InputMode::kPaired;

    void require_valid() const;
};

struct TrainSample {
    Eigen::VectorXd input;
    Eigen::VectorXd target;
    std::string subject_id;
    int t = 0; // 1-based session-1 (or same-session) frame
    int u = 0; // 1-based matched session-2 frame; equals t in no-feedback mode
};

struct EpochStats {
    double train_loss = 0.0;
    double validation_loss = 0.0;
};

// Fully connected network predicting the target-region state; hidden layers
// use the configured activation, the output layer is linear. All math in
// double precision.
class PredictorModel {
public:
    struct Layer {
        Eigen::MatrixXd weights; // out x in
        Eigen::VectorXd bias;    // out
    };

    PredictorModel() = default;
    // Seeded initialization; standardization is off until set.
    PredictorModel(const PredictorConfig& config, int input_dim, int output_dim);

    int input_dim() const { return input_dim_; }
    int output_dim() const { return output_dim_; }
    const PredictorConfig& config() const { return config_; }
    const std::vector<Layer>& layers() const { return layers_; }
    std::vector<Layer>& layers() { return layers_; }
    const std::vector<EpochStats>& train_history() const { return train_history_; }

    bool has_standardization() const { return input_offset_.size() > 0; }
    void set_standardization(Eigen::VectorXd offset, Eigen::VectorXd scale);
    const Eigen::VectorXd& input_offset() const { return input_offset_; }
    const Eigen::VectorXd& input_scale() const { return input_scale_; }

    Eigen::VectorXd forward(const Eigen::VectorXd& input) const;
    // columns are samples
    Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& inputs) const;

    std::size_t parameter_count() const;
    double get_parameter(std::size_t index) const;
    void set_parameter(std::size_t index, double value);

    // Gradient of the per-voxel-mean MSE, averaged over the batch columns.
    // Returns the loss; fills per-layer gradients shaped like the layers.
    double loss_and_gradients(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
                              std::vector<Layer>& gradients) const;

    friend PredictorModel train(const std::vector<TrainSample>& samples,
                                const PredictorConfig& config,
                                const std::vector<TrainSample>& validation_samples);
    friend std::string encode_model(const PredictorModel& model);
    friend PredictorModel decode_model(const std::string& bytes, const std::string& context);

private:
    PredictorConfig config_;
    int input_dim_ = 0;
    int output_dim_ = 0;
    std::vector<Layer> layers_;
    Eigen::VectorXd input_offset_;
    Eigen::VectorXd input_scale_;
    std::vector<EpochStats> train_history_;
};

// One sample per (subject, t) in paired mode with input [R1 | A1 | R2[u_t]]
// and target A2[u_t]; one sample per (subject, session, t) in no-feedback
// mode with input R[t] and target A[t].
std::vector<TrainSample> build_dataset(const Cohort& cohort,
                                       const std::map<std::string, MatchMap>& matches,
                                       InputMode mode);

// Mean per-voxel MSE: ||forward(input) - target||^2 / n_target.
double loss(const PredictorModel& model, const TrainSample& sample);
double mean_loss(const PredictorModel& model, const std::vector<TrainSample>& samples);

// Mini-batch Adam with per-epoch seeded shuffling and early stopping on the
// validation loss; returns the best-validation checkpoint.
PredictorModel train(const std::vector<TrainSample>& samples, const PredictorConfig& config,
                     const std::vector<TrainSample>& validation_samples);

// Max relative error between analytic and central finite-difference gradients
// over a seeded 200-parameter subset.
double grad_check(const PredictorModel& model, const TrainSample& sample, double epsilon);

struct BaselineLosses {
    double mean_prediction = 0.0; // per-voxel training-mean predictor
    double copy_a1 = 0.0;         // predict the matched frame by the input frame
};

BaselineLosses eval_baseline_losses(const Cohort& cohort,
                                    const std::map<std::string, MatchMap>& matches);

// Harness variants: means fitted on one sample set, losses evaluated on another.
Eigen::VectorXd target_voxel_means(const std::vector<TrainSample>& samples);
double mean_prediction_loss(const std::vector<TrainSample>& samples, const Eigen::VectorXd& means);
// A1 lives at input.segment(n_rest, n_target) of a paired sample.
double copy_baseline_loss(const std::vector<TrainSample>& samples, int n_rest, int n_target);

// Checkpoint: magic "NFPM", version u32, header length u32, JSON architecture
// header, FNV-1a32 header checksum, float32 LE parameter blob.
std::string encode_model(const PredictorModel& model);
PredictorModel decode_model(const std::string& bytes, const std::string& context);
void write_model(const std::string& path, const PredictorModel& model);
PredictorModel read_model(const std::string& path);

} // namespace neurosig
