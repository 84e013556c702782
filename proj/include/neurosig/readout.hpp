#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "neurosig/common.hpp"

namespace neurosig {

// Linear map from flattened signatures to trait scores, fitted in closed form
// on z-scored features. Ridge with lambda = 0 reduces to least squares (with a
// pseudo-inverse fallback for rank-deficient feature matrices); the bias is
// never regularized.
struct LinearReadout {
    Eigen::MatrixXd coefficients; // features x outputs
    Eigen::VectorXd bias;         // outputs
    Eigen::VectorXd feature_means;
    Eigen::VectorXd feature_stds; // zero-variance features get std 1
    double ridge_lambda = 0.0;
    std::vector<std::string> output_names;

    Eigen::Index feature_count() const { return coefficients.rows(); }
    Eigen::Index output_count() const { return coefficients.cols(); }
};

// features: n x p (rows are subjects), targets: n x l.
LinearReadout fit_readout(const Eigen::MatrixXd& features, const Eigen::MatrixXd& targets,
                          double ridge_lambda);

Eigen::VectorXd predict(const LinearReadout& readout, const Eigen::VectorXd& features);
Eigen::MatrixXd predict_all(const LinearReadout& readout, const Eigen::MatrixXd& features);

// Mean squared error per output column.
Eigen::VectorXd per_output_mse(const LinearReadout& readout, const Eigen::MatrixXd& features,
                               const Eigen::MatrixXd& targets);

// Extends past 1.0 so the validation fold can shrink a signal-free readout
// all the way down to the mean predictor.
inline const std::vector<double> kDefaultLambdaGrid{0.0, 1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0, 1000.0};

struct LambdaSelection {
    LinearReadout readout; // refitted on the training set with the chosen lambda
    double lambda = 0.0;
    std::vector<double> validation_mse; // per grid entry, mean over outputs
};

// Fits one readout per grid entry and keeps the lambda with the lowest mean
// validation MSE (first entry wins ties).
LambdaSelection select_lambda(const Eigen::MatrixXd& train_features,
                              const Eigen::MatrixXd& train_targets,
                              const Eigen::MatrixXd& val_features,
                              const Eigen::MatrixXd& val_targets,
                              const std::vector<double>& lambda_grid = kDefaultLambdaGrid);

// Mann-Whitney AUC with midranks; ties contribute 1/2.
double roc_auc(const std::vector<double>& scores, const std::vector<bool>& labels);

// Readout file: JSON with coefficients, bias, standardization, lambda, names.
std::string encode_readout(const LinearReadout& readout);
LinearReadout decode_readout(const std::string& bytes, const std::string& context);
void write_readout(const std::string& path, const LinearReadout& readout);
LinearReadout read_readout(const std::string& path);

} // namespace neurosig
