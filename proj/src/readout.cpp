#include "neurosig/readout.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"
#include "neurosig/binio.hpp"

using json = nlohmann::json;

namespace neurosig {

LinearReadout fit_readout(const Eigen::MatrixXd& features, const Eigen::MatrixXd& targets,
                          double ridge_lambda) {
    const Eigen::Index n = features.rows();
    const Eigen::Index p = features.cols();
    if (n < 2) throw ValidationError("fit_readout: need at least 2 samples");
    if (targets.rows() != n) throw ValidationError("fit_readout: feature/target row mismatch");
    if (ridge_lambda < 0) throw ValidationError("fit_readout: ridge_lambda must be >= 0");

    LinearReadout readout;
    readout.ridge_lambda = ridge_lambda;
    readout.feature_means = features.colwise().mean();
    Eigen::VectorXd stds(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        const double var = (features.col(j).array() - readout.feature_means[j]).square().mean();
        const double sd = std::sqrt(var);
        stds[j] = sd > 1e-12 ? sd : 1.0;
    }
    readout.feature_stds = stds;

    const Eigen::MatrixXd X =
        (features.rowwise() - readout.feature_means.transpose()).array().rowwise() /
        stds.transpose().array();
    readout.bias = targets.colwise().mean();
    const Eigen::MatrixXd Y = targets.rowwise() - readout.bias.transpose();

    if (ridge_lambda > 0) {
        const Eigen::MatrixXd gram =
            X.transpose() * X + ridge_lambda * Eigen::MatrixXd::Identity(p, p);
        readout.coefficients = gram.ldlt().solve(X.transpose() * Y);
    } else {
        // least squares; rank-deficient systems get the minimum-norm solution
        readout.coefficients = X.completeOrthogonalDecomposition().solve(Y);
    }
    if (!readout.coefficients.allFinite()) {
        throw NumericalError("fit_readout: non-finite coefficients");
    }
    return readout;
}

Eigen::VectorXd predict(const LinearReadout& readout, const Eigen::VectorXd& features) {
    if (features.size() != readout.feature_count()) {
        throw ValidationError("predict: feature length " + std::to_string(features.size()) +
                              " does not match readout (" +
                              std::to_string(readout.feature_count()) + ")");
    }
    const Eigen::VectorXd z =
        (features - readout.feature_means).cwiseQuotient(readout.feature_stds);
    return readout.coefficients.transpose() * z + readout.bias;
}

Eigen::MatrixXd predict_all(const LinearReadout& readout, const Eigen::MatrixXd& features) {
    if (features.cols() != readout.feature_count()) {
        throw ValidationError("predict_all: feature width does not match readout");
    }
    const Eigen::MatrixXd Z =
        (features.rowwise() - readout.feature_means.transpose()).array().rowwise() /
        readout.feature_stds.transpose().array();
    return (Z * readout.coefficients).rowwise() + readout.bias.transpose();
}

Eigen::VectorXd per_output_mse(const LinearReadout& readout, const Eigen::MatrixXd& features,
                               const Eigen::MatrixXd& targets) {
    const Eigen::MatrixXd pred = predict_all(readout, features);
    if (targets.rows() != pred.rows() || targets.cols() != pred.cols()) {
        throw ValidationError("per_output_mse: target shape mismatch");
    }
    return (pred - targets).array().square().colwise().mean();
}

LambdaSelection select_lambda(const Eigen::MatrixXd& train_features,
                              const Eigen::MatrixXd& train_targets,
                              const Eigen::MatrixXd& val_features,
                              const Eigen::MatrixXd& val_targets,
                              const std::vector<double>& lambda_grid) {
    if (lambda_grid.empty()) throw ValidationError("select_lambda: empty grid");
    LambdaSelection selection;
    double best = std::numeric_limits<double>::infinity();
    for (double lambda : lambda_grid) {
        const LinearReadout candidate = fit_readout(train_features, train_targets, lambda);
        const double val_mse = per_output_mse(candidate, val_features, val_targets).mean();
        selection.validation_mse.push_back(val_mse);
        if (val_mse < best) {
            best = val_mse;
            selection.lambda = lambda;
            selection.readout = candidate;
        }
    }
    return selection;
}

double roc_auc(const std::vector<double>& scores, const std::vector<bool>& labels) {
    if (scores.size() != labels.size() || scores.empty()) {
        throw ValidationError("roc_auc: scores and labels must be equal-length and non-empty");
    }
    std::size_t n_pos = 0;
    for (bool b : labels) n_pos += b ? 1 : 0;
    const std::size_t n_neg = labels.size() - n_pos;
    if (n_pos == 0 || n_neg == 0) {
        throw ValidationError("roc_auc: both classes must be present");
    }

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores[a] != scores[b] ? scores[a] < scores[b] : a < b;
    });

    // midranks over tie groups
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t m = i; m <= j; ++m) {
            if (labels[order[m]]) rank_sum_pos += midrank;
        }
        i = j + 1;
    }
    const double u = rank_sum_pos - static_cast<double>(n_pos) * (n_pos + 1) / 2.0;
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

namespace {

json matrix_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(row);
    }
    return rows;
}

Eigen::MatrixXd matrix_from_json(const json& rows) {
    const auto r = rows.size();
    const auto c = r == 0 ? 0 : rows.at(0).size();
    Eigen::MatrixXd m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                rows.at(i).at(j).get<double>();
        }
    }
    return m;
}

std::vector<double> vector_to_std(const Eigen::VectorXd& v) {
    return {v.data(), v.data() + v.size()};
}

Eigen::VectorXd vector_from_json(const json& arr) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(arr.size()));
    for (std::size_t i = 0; i < arr.size(); ++i) v[static_cast<Eigen::Index>(i)] = arr.at(i).get<double>();
    return v;
}

} // namespace

std::string encode_readout(const LinearReadout& readout) {
    json j;
    j["schema_version"] = 1;
    j["coefficients"] = matrix_to_json(readout.coefficients);
    j["bias"] = vector_to_std(readout.bias);
    j["feature_means"] = vector_to_std(readout.feature_means);
    j["feature_stds"] = vector_to_std(readout.feature_stds);
    j["ridge_lambda"] = readout.ridge_lambda;
    j["output_names"] = readout.output_names;
    return j.dump(2) + "\n";
}

LinearReadout decode_readout(const std::string& bytes, const std::string& context) {
    json j;
    try {
        j = json::parse(bytes);
    } catch (const json::exception& e) {
        throw ValidationError(context + ": bad readout json: " + e.what());
    }
    LinearReadout readout;
    readout.coefficients = matrix_from_json(j.at("coefficients"));
    readout.bias = vector_from_json(j.at("bias"));
    readout.feature_means = vector_from_json(j.at("feature_means"));
    readout.feature_stds = vector_from_json(j.at("feature_stds"));
    readout.ridge_lambda = j.at("ridge_lambda").get<double>();
    readout.output_names = j.at("output_names").get<std::vector<std::string>>();
    if (readout.feature_means.size() != readout.coefficients.rows() ||
        readout.feature_stds.size() != readout.coefficients.rows() ||
        readout.bias.size() != readout.coefficients.cols()) {
        throw ValidationError(context + ": inconsistent readout shapes");
    }
    return readout;
}

void write_readout(const std::string& path, const LinearReadout& readout) {
    write_file_bytes(path, encode_readout(readout));
}

LinearReadout read_readout(const std::string& path) {
    return decode_readout(read_file_bytes(path), path);
}

} // namespace neurosig
