#include "neurosig/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "json.hpp"
#include "neurosig/binio.hpp"
#include "neurosig/rng.hpp"

using json = nlohmann::json;

namespace neurosig {

Activation activation_from_string(const std::string& name) {
    if (name == "relu") return Activation::kRelu;
    if (name == "tanh") return Activation::kTanh;
    if (name == "identity") return Activation::kIdentity;
    throw ValidationError("unknown activation: " + name);
}

std::string to_string(Activation a) {
    switch (a) {
    case Activation::kRelu: return "relu";
    case Activation::kTanh: return "tanh";
    case Activation::kIdentity: return "identity";
    }
    return "relu";
}

InputMode input_mode_from_string(const std::string& name) {
    if (name == "paired") return InputMode::kPaired;
    if (name == "nofeedback" || name == "no_feedback") return InputMode::kNoFeedback;
    throw ValidationError("unknown input mode: " + name);
}

std::string to_string(InputMode m) {
    return m == InputMode::kPaired ? "paired" : "nofeedback";
}

void PredictorConfig::require_valid() const {
    for (int w : hidden_layers) {
        if (w < 1) throw ValidationError("predictor: hidden layer widths must be >= 1");
    }
    if (!(learning_rate > 0)) throw ValidationError("predictor: learning_rate must be > 0");
    if (batch_size < 1) throw ValidationError("predictor: batch_size must be >= 1");
    if (max_epochs < 1) throw ValidationError("predictor: max_epochs must be >= 1");
    if (patience < 1) throw ValidationError("predictor: patience must be >= 1");
    if (adam_beta1 < 0 || adam_beta1 >= 1 || adam_beta2 < 0 || adam_beta2 >= 1) {
        throw ValidationError("predictor: adam betas must be in [0,1)");
    }
    if (!(adam_epsilon > 0)) throw ValidationError("predictor: adam_epsilon must be > 0");
}

namespace {

void apply_activation(Eigen::MatrixXd& z, Activation a) {
    switch (a) {
    case Activation::kRelu:
        z = z.cwiseMax(0.0);
        break;
    case Activation::kTanh:
        z = z.array().tanh().matrix();
        break;
    case Activation::kIdentity:
        break;
    }
}

// derivative as a function of the pre-activation
Eigen::ArrayXXd activation_derivative(const Eigen::MatrixXd& z, Activation a) {
    switch (a) {
    case Activation::kRelu:
        return (z.array() > 0.0).cast<double>();
    case Activation::kTanh:
        return 1.0 - z.array().tanh().square();
    case Activation::kIdentity:
        return Eigen::ArrayXXd::Ones(z.rows(), z.cols());
    }
    return Eigen::ArrayXXd::Ones(z.rows(), z.cols());
}

} // namespace

PredictorModel::PredictorModel(const PredictorConfig& config, int input_dim, int output_dim)
    : config_(config), input_dim_(input_dim), output_dim_(output_dim) {
    config.require_valid();
    if (input_dim < 1 || output_dim < 1) {
        throw ValidationError("predictor: input and output dims must be >= 1");
    }
    std::vector<int> widths;
    widths.push_back(input_dim);
    for (int w : config.hidden_layers) widths.push_back(w);
    widths.push_back(output_dim);

    RandomStream stream(derive_seed(config.seed, "predictor_init"));
    layers_.resize(widths.size() - 1);
    for (std::size_t j = 0; j < layers_.size(); ++j) {
        const int fan_in = widths[j];
        const int fan_out = widths[j + 1];
        const double limit = config.activation == Activation::kRelu
                                 ? std::sqrt(6.0 / fan_in)
                                 : std::sqrt(6.0 / (fan_in + fan_out));
        auto& layer = layers_[j];
        layer.weights.resize(fan_out, fan_in);
        for (int r = 0; r < fan_out; ++r)
            for (int c = 0; c < fan_in; ++c) layer.weights(r, c) = stream.uniform(-limit, limit);
        layer.bias = Eigen::VectorXd::Zero(fan_out);
    }
}

void PredictorModel::set_standardization(Eigen::VectorXd offset, Eigen::VectorXd scale) {
    if (offset.size() != input_dim_ || scale.size() != input_dim_) {
        throw ValidationError("predictor: standardization vectors must match input_dim");
    }
    input_offset_ = std::move(offset);
    input_scale_ = std::move(scale);
}

Eigen::MatrixXd PredictorModel::forward_batch(const Eigen::MatrixXd& inputs) const {
    if (inputs.rows() != input_dim_) {
        throw ValidationError("predictor forward: input length " + std::to_string(inputs.rows()) +
                              " does not match input_dim " + std::to_string(input_dim_));
    }
    Eigen::MatrixXd h;
    if (has_standardization()) {
        h = ((inputs.colwise() - input_offset_).array().colwise() / input_scale_.array()).matrix();
    } else {
        h = inputs;
    }
    for (std::size_t j = 0; j < layers_.size(); ++j) {
        Eigen::MatrixXd z = (layers_[j].weights * h).colwise() + layers_[j].bias;
        if (j + 1 < layers_.size()) apply_activation(z, config_.activation);
        h = std::move(z);
    }
    return h;
}

Eigen::VectorXd PredictorModel::forward(const Eigen::VectorXd& input) const {
    return forward_batch(input);
}

std::size_t PredictorModel::parameter_count() const {
    std::size_t n = 0;
    for (const auto& layer : layers_) {
        n += static_cast<std::size_t>(layer.weights.size()) +
             static_cast<std::size_t>(layer.bias.size());
    }
    return n;
}

double PredictorModel::get_parameter(std::size_t index) const {
    for (const auto& layer : layers_) {
        const auto wsize = static_cast<std::size_t>(layer.weights.size());
        if (index < wsize) return layer.weights.data()[index];
        index -= wsize;
        const auto bsize = static_cast<std::size_t>(layer.bias.size());
        if (index < bsize) return layer.bias[static_cast<Eigen::Index>(index)];
        index -= bsize;
    }
    throw ValidationError("parameter index out of range");
}

void PredictorModel::set_parameter(std::size_t index, double value) {
    for (auto& layer : layers_) {
        const auto wsize = static_cast<std::size_t>(layer.weights.size());
        if (index < wsize) {
            layer.weights.data()[index] = value;
            return;
        }
        index -= wsize;
        const auto bsize = static_cast<std::size_t>(layer.bias.size());
        if (index < bsize) {
            layer.bias[static_cast<Eigen::Index>(index)] = value;
            return;
        }
        index -= bsize;
    }
    throw ValidationError("parameter index out of range");
}

double PredictorModel::loss_and_gradients(const Eigen::MatrixXd& inputs,
                                          const Eigen::MatrixXd& targets,
                                          std::vector<Layer>& gradients) const {
    const auto n = inputs.cols();
    if (targets.cols() != n || targets.rows() != output_dim_) {
        throw ValidationError("predictor: target shape mismatch");
    }

    // forward, keeping per-layer inputs and pre-activations
    std::vector<Eigen::MatrixXd> layer_inputs; // h_0 .. h_{L-1}
    std::vector<Eigen::MatrixXd> pre_acts;     // z_0 .. z_{L-1}
    layer_inputs.reserve(layers_.size());
    pre_acts.reserve(layers_.size());

    Eigen::MatrixXd h;
    if (has_standardization()) {
        h = ((inputs.colwise() - input_offset_).array().colwise() / input_scale_.array()).matrix();
    } else {
        h = inputs;
    }
    for (std::size_t j = 0; j < layers_.size(); ++j) {
        layer_inputs.push_back(h);
        Eigen::MatrixXd z = (layers_[j].weights * h).colwise() + layers_[j].bias;
        pre_acts.push_back(z);
        if (j + 1 < layers_.size()) apply_activation(z, config_.activation);
        h = std::move(z);
    }

    const Eigen::MatrixXd diff = h - targets;
    const double loss =
        diff.array().square().sum() / (static_cast<double>(output_dim_) * static_cast<double>(n));

    gradients.resize(layers_.size());
    Eigen::MatrixXd delta =
        (2.0 / (static_cast<double>(output_dim_) * static_cast<double>(n))) * diff;
    for (std::size_t j = layers_.size(); j-- > 0;) {
        gradients[j].weights.noalias() = delta * layer_inputs[j].transpose();
        gradients[j].bias = delta.rowwise().sum();
        if (j > 0) {
            Eigen::MatrixXd back = layers_[j].weights.transpose() * delta;
            delta = (back.array() * activation_derivative(pre_acts[j - 1], config_.activation))
                        .matrix();
        }
    }
    return loss;
}

std::vector<TrainSample> build_dataset(const Cohort& cohort,
                                       const std::map<std::string, MatchMap>& matches,
                                       InputMode mode) {
    const int n_rest = static_cast<int>(cohort.n_rest());
    const int n_target = static_cast<int>(cohort.n_target());
    std::vector<TrainSample> samples;

    if (mode == InputMode::kPaired) {
        for (const auto& s : cohort.subjects) {
            if (s.session_count() < 2) {
                throw ValidationError("build_dataset: subject " + s.subject_id +
                                      " is missing a second session");
            }
            const auto it = matches.find(s.subject_id);
            if (it == matches.end()) {
                throw ValidationError("build_dataset: missing match map for subject " +
                                      s.subject_id);
            }
            const auto& map = it->second;
            const auto& first = s.sessions[0];
            const auto& second = s.sessions[1];
            if (map.pairs.size() != first.size()) {
                throw ValidationError("build_dataset: match map for subject " + s.subject_id +
                                      " has wrong length");
            }
            for (std::size_t t = 0; t < first.size(); ++t) {
                const int u = map.pairs[t].second;
                if (u < 1 || u > static_cast<int>(second.size())) {
                    throw ValidationError("build_dataset: match index out of range for subject " +
                                          s.subject_id);
                }
                const auto& f1 = first[t];
                const auto& f2 = second[static_cast<size_t>(u - 1)];
                TrainSample sample;
                sample.subject_id = s.subject_id;
                sample.t = static_cast<int>(t) + 1;
                sample.u = u;
                sample.input.resize(2 * n_rest + n_target);
                for (int i = 0; i < n_rest; ++i) sample.input[i] = f1.rest_vec[static_cast<size_t>(i)];
                for (int i = 0; i < n_target; ++i)
                    sample.input[n_rest + i] = f1.target_vec[static_cast<size_t>(i)];
                for (int i = 0; i < n_rest; ++i)
                    sample.input[n_rest + n_target + i] = f2.rest_vec[static_cast<size_t>(i)];
                sample.target.resize(n_target);
                for (int i = 0; i < n_target; ++i)
                    sample.target[i] = f2.target_vec[static_cast<size_t>(i)];
                samples.push_back(std::move(sample));
            }
        }
    } else {
        for (const auto& s : cohort.subjects) {
            for (const auto& session : s.sessions) {
                for (std::size_t t = 0; t < session.size(); ++t) {
                    const auto& f = session[t];
                    TrainSample sample;
                    sample.subject_id = s.subject_id;
                    sample.t = static_cast<int>(t) + 1;
                    sample.u = sample.t;
                    sample.input =
                        Eigen::Map<const Eigen::VectorXd>(f.rest_vec.data(), n_rest);
                    sample.target =
                        Eigen::Map<const Eigen::VectorXd>(f.target_vec.data(), n_target);
                    samples.push_back(std::move(sample));
                }
            }
        }
    }
    return samples;
}

double loss(const PredictorModel& model, const TrainSample& sample) {
    const Eigen::VectorXd out = model.forward(sample.input);
    if (out.size() != sample.target.size()) {
        throw ValidationError("loss: target length does not match model output");
    }
    return (out - sample.target).squaredNorm() / static_cast<double>(out.size());
}

double mean_loss(const PredictorModel& model, const std::vector<TrainSample>& samples) {
    if (samples.empty()) throw ValidationError("mean_loss: empty sample set");
    constexpr int kChunk = 256;
    const int in = model.input_dim();
    const int out = model.output_dim();
    double total = 0.0;
    for (std::size_t start = 0; start < samples.size(); start += kChunk) {
        const auto count = std::min<std::size_t>(kChunk, samples.size() - start);
        Eigen::MatrixXd X(in, count), Y(out, count);
        for (std::size_t i = 0; i < count; ++i) {
            X.col(static_cast<Eigen::Index>(i)) = samples[start + i].input;
            Y.col(static_cast<Eigen::Index>(i)) = samples[start + i].target;
        }
        const Eigen::MatrixXd pred = model.forward_batch(X);
        for (std::size_t i = 0; i < count; ++i) {
            total += (pred.col(static_cast<Eigen::Index>(i)) -
                      Y.col(static_cast<Eigen::Index>(i)))
                         .squaredNorm() /
                     out;
        }
    }
    return total / static_cast<double>(samples.size());
}

PredictorModel train(const std::vector<TrainSample>& samples, const PredictorConfig& config,
                     const std::vector<TrainSample>& validation_samples) {
    config.require_valid();
    if (samples.empty()) throw ValidationError("train: empty training set");
    if (validation_samples.empty()) throw ValidationError("train: empty validation set");

    const int in = static_cast<int>(samples[0].input.size());
    const int out = static_cast<int>(samples[0].target.size());
    for (const auto& s : samples) {
        if (s.input.size() != in || s.target.size() != out) {
            throw ValidationError("train: inconsistent sample dimensions");
        }
    }

    // per-dimension standardization from the training set only
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(in);
    for (const auto& s : samples) mean += s.input;
    mean /= static_cast<double>(samples.size());
    Eigen::VectorXd var = Eigen::VectorXd::Zero(in);
    for (const auto& s : samples) var += (s.input - mean).array().square().matrix();
    var /= static_cast<double>(samples.size());
    Eigen::VectorXd scale = var.array().sqrt();
    for (int i = 0; i < in; ++i) {
        if (!(scale[i] > 1e-12)) scale[i] = 1.0;
    }

    PredictorModel model(config, in, out);
    model.set_standardization(std::move(mean), std::move(scale));

    using Layer = PredictorModel::Layer;
    std::vector<Layer> adam_m(model.layers().size()), adam_v(model.layers().size());
    for (std::size_t j = 0; j < model.layers().size(); ++j) {
        adam_m[j].weights = Eigen::MatrixXd::Zero(model.layers()[j].weights.rows(),
                                                  model.layers()[j].weights.cols());
        adam_m[j].bias = Eigen::VectorXd::Zero(model.layers()[j].bias.size());
        adam_v[j] = adam_m[j];
    }

    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), 0);

    std::vector<Layer> best_layers = model.layers();
    double best_val = std::numeric_limits<double>::infinity();
    int best_epoch = -1;
    int epochs_without_improvement = 0;
    long step = 0;
    std::vector<Layer> grads;

    for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
        RandomStream shuffle_stream(
            derive_seed(config.seed, "epoch_shuffle", static_cast<std::uint64_t>(epoch)));
        shuffle_stream.shuffle(order);

        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < samples.size(); start += config.batch_size) {
            const auto count =
                std::min<std::size_t>(static_cast<std::size_t>(config.batch_size),
                                      samples.size() - start);
            Eigen::MatrixXd X(in, count), Y(out, count);
            for (std::size_t i = 0; i < count; ++i) {
                X.col(static_cast<Eigen::Index>(i)) = samples[order[start + i]].input;
                Y.col(static_cast<Eigen::Index>(i)) = samples[order[start + i]].target;
            }
            const double batch_loss = model.loss_and_gradients(X, Y, grads);
            if (!std::isfinite(batch_loss)) {
                throw NumericalError("train: loss diverged at epoch " + std::to_string(epoch) +
                                     " (non-finite batch loss)");
            }
            epoch_loss += batch_loss * static_cast<double>(count);

            ++step;
            const double bc1 = 1.0 - std::pow(config.adam_beta1, static_cast<double>(step));
            const double bc2 = 1.0 - std::pow(config.adam_beta2, static_cast<double>(step));
            for (std::size_t j = 0; j < model.layers().size(); ++j) {
                auto& layer = model.layers()[j];
                auto& g = grads[j];
                adam_m[j].weights = config.adam_beta1 * adam_m[j].weights +
                                    (1.0 - config.adam_beta1) * g.weights;
                adam_v[j].weights =
                    config.adam_beta2 * adam_v[j].weights +
                    (1.0 - config.adam_beta2) * g.weights.array().square().matrix();
                layer.weights.array() -=
                    config.learning_rate * (adam_m[j].weights.array() / bc1) /
                    ((adam_v[j].weights.array() / bc2).sqrt() + config.adam_epsilon);

                adam_m[j].bias =
                    config.adam_beta1 * adam_m[j].bias + (1.0 - config.adam_beta1) * g.bias;
                adam_v[j].bias = config.adam_beta2 * adam_v[j].bias +
                                 (1.0 - config.adam_beta2) * g.bias.array().square().matrix();
                layer.bias.array() -= config.learning_rate * (adam_m[j].bias.array() / bc1) /
                                      ((adam_v[j].bias.array() / bc2).sqrt() + config.adam_epsilon);
            }
        }

        const double train_loss = epoch_loss / static_cast<double>(samples.size());
        const double val_loss = mean_loss(model, validation_samples);
        if (!std::isfinite(val_loss)) {
            throw NumericalError("train: validation loss diverged at epoch " +
                                 std::to_string(epoch));
        }
        model.train_history_.push_back({train_loss, val_loss});

        if (val_loss < best_val) {
            best_val = val_loss;
            best_layers = model.layers();
            best_epoch = epoch;
            epochs_without_improvement = 0;
        } else {
            ++epochs_without_improvement;
        }
        if (epochs_without_improvement >= config.patience) break;
    }

    (void)best_epoch;
    model.layers() = std::move(best_layers);
    return model;
}

double grad_check(const PredictorModel& model, const TrainSample& sample, double epsilon) {
    if (epsilon < 1e-7 || epsilon > 1e-3) {
        throw ValidationError("grad_check: epsilon must be in [1e-7, 1e-3]");
    }

    std::vector<PredictorModel::Layer> grads;
    Eigen::MatrixXd X = sample.input;
    Eigen::MatrixXd Y = sample.target;
    model.loss_and_gradients(X, Y, grads);

    std::vector<double> flat;
    for (const auto& g : grads) {
        flat.insert(flat.end(), g.weights.data(), g.weights.data() + g.weights.size());
        flat.insert(flat.end(), g.bias.data(), g.bias.data() + g.bias.size());
    }

    const std::size_t n_params = flat.size();
    std::vector<std::size_t> subset;
    if (n_params <= 200) {
        subset.resize(n_params);
        std::iota(subset.begin(), subset.end(), 0);
    } else {
        RandomStream stream(derive_seed(model.config().seed, "grad_check"));
        std::set<std::size_t> chosen;
        while (chosen.size() < 200) chosen.insert(stream.uniform_index(n_params));
        subset.assign(chosen.begin(), chosen.end());
    }

    PredictorModel probe = model;
    double max_rel = 0.0;
    for (std::size_t idx : subset) {
        const double saved = probe.get_parameter(idx);
        probe.set_parameter(idx, saved + epsilon);
        const double plus = loss(probe, sample);
        probe.set_parameter(idx, saved - epsilon);
        const double minus = loss(probe, sample);
        probe.set_parameter(idx, saved);
        const double fd = (plus - minus) / (2.0 * epsilon);
        const double analytic = flat[idx];
        const double rel = std::abs(analytic - fd) /
                           std::max({std::abs(analytic), std::abs(fd), 1e-8});
        max_rel = std::max(max_rel, rel);
    }
    return max_rel;
}

Eigen::VectorXd target_voxel_means(const std::vector<TrainSample>& samples) {
    if (samples.empty()) throw ValidationError("target_voxel_means: empty sample set");
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(samples[0].target.size());
    for (const auto& s : samples) mean += s.target;
    return mean / static_cast<double>(samples.size());
}

double mean_prediction_loss(const std::vector<TrainSample>& samples,
                            const Eigen::VectorXd& means) {
    if (samples.empty()) throw ValidationError("mean_prediction_loss: empty sample set");
    double total = 0.0;
    for (const auto& s : samples) {
        total += (s.target - means).squaredNorm() / static_cast<double>(means.size());
    }
    return total / static_cast<double>(samples.size());
}

double copy_baseline_loss(const std::vector<TrainSample>& samples, int n_rest, int n_target) {
    if (samples.empty()) throw ValidationError("copy_baseline_loss: empty sample set");
    double total = 0.0;
    for (const auto& s : samples) {
        if (s.input.size() != 2 * n_rest + n_target) {
            throw ValidationError("copy_baseline_loss: samples are not paired-mode");
        }
        total += (s.input.segment(n_rest, n_target) - s.target).squaredNorm() /
                 static_cast<double>(n_target);
    }
    return total / static_cast<double>(samples.size());
}

BaselineLosses eval_baseline_losses(const Cohort& cohort,
                                    const std::map<std::string, MatchMap>& matches) {
    const auto samples = build_dataset(cohort, matches, InputMode::kPaired);
    BaselineLosses out;
    out.mean_prediction = mean_prediction_loss(samples, target_voxel_means(samples));
    out.copy_a1 = copy_baseline_loss(samples, static_cast<int>(cohort.n_rest()),
                                     static_cast<int>(cohort.n_target()));
    return out;
}

namespace {
constexpr char kModelMagic[4] = {'N', 'F', 'P', 'M'};
constexpr std::uint32_t kModelFormatVersion = 1;
} // namespace

std::string encode_model(const PredictorModel& model) {
    json header;
    header["format_version"] = kModelFormatVersion;
    header["input_dim"] = model.input_dim_;
    header["output_dim"] = model.output_dim_;
    header["hidden_layers"] = model.config_.hidden_layers;
    header["activation"] = to_string(model.config_.activation);
    header["input_mode"] = to_string(model.config_.input_mode);
    header["learning_rate"] = model.config_.learning_rate;
    header["batch_size"] = model.config_.batch_size;
    header["adam_beta1"] = model.config_.adam_beta1;
    header["adam_beta2"] = model.config_.adam_beta2;
    header["adam_epsilon"] = model.config_.adam_epsilon;
    header["max_epochs"] = model.config_.max_epochs;
    header["patience"] = model.config_.patience;
    header["seed"] = model.config_.seed;
    header["has_standardization"] = model.has_standardization();
    header["parameter_count"] = model.parameter_count();
    const std::string header_bytes = header.dump();

    std::string out;
    out.append(kModelMagic, 4);
    put_u32_le(out, kModelFormatVersion);
    put_u32_le(out, static_cast<std::uint32_t>(header_bytes.size()));
    out += header_bytes;
    put_u32_le(out, fnv1a32(header_bytes));

    for (const auto& layer : model.layers_) {
        for (Eigen::Index i = 0; i < layer.weights.size(); ++i) {
            put_f32_le(out, static_cast<float>(layer.weights.data()[i]));
        }
        for (Eigen::Index i = 0; i < layer.bias.size(); ++i) {
            put_f32_le(out, static_cast<float>(layer.bias[i]));
        }
    }
    if (model.has_standardization()) {
        for (Eigen::Index i = 0; i < model.input_offset_.size(); ++i) {
            put_f32_le(out, static_cast<float>(model.input_offset_[i]));
        }
        for (Eigen::Index i = 0; i < model.input_scale_.size(); ++i) {
            put_f32_le(out, static_cast<float>(model.input_scale_[i]));
        }
    }
    return out;
}

PredictorModel decode_model(const std::string& bytes, const std::string& context) {
    if (bytes.size() < 12) throw ValidationError(context + ": model file shorter than header");
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    if (std::memcmp(p, kModelMagic, 4) != 0) {
        throw ValidationError(context + ": bad magic, expected NFPM");
    }
    if (get_u32_le(p + 4) != kModelFormatVersion) {
        throw ValidationError(context + ": unsupported model format version");
    }
    const std::uint32_t header_len = get_u32_le(p + 8);
    if (bytes.size() < 16ull + header_len) {
        throw ValidationError(context + ": truncated model header");
    }
    const std::string header_bytes = bytes.substr(12, header_len);
    const std::uint32_t checksum = get_u32_le(p + 12 + header_len);
    if (checksum != fnv1a32(header_bytes)) {
        throw ValidationError(context + ": model header checksum mismatch");
    }
    json header;
    try {
        header = json::parse(header_bytes);
    } catch (const json::exception& e) {
        throw ValidationError(context + ": bad model header json: " + e.what());
    }

    PredictorConfig config;
    config.hidden_layers = header.at("hidden_layers").get<std::vector<int>>();
    config.activation = activation_from_string(header.at("activation").get<std::string>());
    config.input_mode = input_mode_from_string(header.at("input_mode").get<std::string>());
    config.learning_rate = header.at("learning_rate").get<double>();
    config.batch_size = header.at("batch_size").get<int>();
    config.adam_beta1 = header.at("adam_beta1").get<double>();
    config.adam_beta2 = header.at("adam_beta2").get<double>();
    config.adam_epsilon = header.at("adam_epsilon").get<double>();
    config.max_epochs = header.at("max_epochs").get<int>();
    config.patience = header.at("patience").get<int>();
    config.seed = header.at("seed").get<std::uint64_t>();

    PredictorModel model(config, header.at("input_dim").get<int>(),
                         header.at("output_dim").get<int>());
    const bool has_std = header.at("has_standardization").get<bool>();
    std::size_t n_values = model.parameter_count();
    if (n_values != header.at("parameter_count").get<std::size_t>()) {
        throw ValidationError(context + ": parameter count does not match architecture");
    }
    if (has_std) n_values += 2 * static_cast<std::size_t>(model.input_dim_);
    const std::size_t blob_offset = 16ull + header_len;
    if (bytes.size() != blob_offset + 4 * n_values) {
        throw ValidationError(context + ": model blob size mismatch");
    }

    const auto* blob = reinterpret_cast<const unsigned char*>(bytes.data()) + blob_offset;
    for (auto& layer : model.layers_) {
        for (Eigen::Index i = 0; i < layer.weights.size(); ++i, blob += 4) {
            layer.weights.data()[i] = get_f32_le(blob);
        }
        for (Eigen::Index i = 0; i < layer.bias.size(); ++i, blob += 4) {
            layer.bias[i] = get_f32_le(blob);
        }
    }
    if (has_std) {
        Eigen::VectorXd offset(model.input_dim_), scale(model.input_dim_);
        for (Eigen::Index i = 0; i < offset.size(); ++i, blob += 4) offset[i] = get_f32_le(blob);
        for (Eigen::Index i = 0; i < scale.size(); ++i, blob += 4) scale[i] = get_f32_le(blob);
        model.set_standardization(std::move(offset), std::move(scale));
    }
    return model;
}

void write_model(const std::string& path, const PredictorModel& model) {
    write_file_bytes(path, encode_model(model));
}

PredictorModel read_model(const std::string& path) {
    return decode_model(read_file_bytes(path), path);
}

} // namespace neurosig
