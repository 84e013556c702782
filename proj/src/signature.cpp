#include "neurosig/signature.hpp"

#include <cmath>
#include <cstdio>

#include "neurosig/binio.hpp"
#include "neurosig/io.hpp"

namespace neurosig {

SignatureVariant signature_variant_from_string(const std::string& name) {
    if (name == "full") return SignatureVariant::kFull;
    if (name == "raw_diff") return SignatureVariant::kRawDiff;
    if (name == "count_only") return SignatureVariant::kCountOnly;
    if (name == "error_only") return SignatureVariant::kErrorOnly;
    throw ValidationError("unknown signature variant: " + name);
}

std::string to_string(SignatureVariant v) {
    switch (v) {
    case SignatureVariant::kFull: return "full";
    case SignatureVariant::kRawDiff: return "raw_diff";
    case SignatureVariant::kCountOnly: return "count_only";
    case SignatureVariant::kErrorOnly: return "error_only";
    }
    return "full";
}

std::vector<double> clustering_vector(const Frame& frame, ClusteringSpace space) {
    if (space == ClusteringSpace::kRestOnly) return frame.rest_vec;
    std::vector<double> v;
    v.reserve(frame.target_vec.size() + frame.rest_vec.size());
    v.insert(v.end(), frame.target_vec.begin(), frame.target_vec.end());
    v.insert(v.end(), frame.rest_vec.begin(), frame.rest_vec.end());
    return v;
}

namespace {

double frame_error_norm(double sum_sq, std::size_t n_target, ErrorNorm norm) {
    return norm == ErrorNorm::kSumSquares ? sum_sq : sum_sq / static_cast<double>(n_target);
}

SignatureMatrix aggregate(const SubjectRecord& subject, const CentroidSet& centroids,
                          ClusteringSpace space, SignatureVariant variant,
                          const std::vector<double>& per_frame_error) {
    const auto& first = subject.sessions.at(0);
    SignatureMatrix sig;
    sig.subject_id = subject.subject_id;
    sig.variant = variant;
    sig.counts.assign(static_cast<size_t>(centroids.k), 0);
    sig.errors.assign(static_cast<size_t>(centroids.k), 0.0);
    for (std::size_t t = 0; t < first.size(); ++t) {
        const int c = assign_cluster(clustering_vector(first[t], space), centroids);
        sig.counts[static_cast<size_t>(c)] += 1;
        sig.errors[static_cast<size_t>(c)] += per_frame_error[t];
    }
    for (int i = 0; i < sig.k(); ++i) {
        if (sig.counts[static_cast<size_t>(i)] > 0) {
            sig.errors[static_cast<size_t>(i)] /= sig.counts[static_cast<size_t>(i)];
        } else {
            sig.errors[static_cast<size_t>(i)] = 0.0; // count column already encodes emptiness
        }
    }
    return sig;
}

} // namespace

SignatureMatrix build_signature(const SubjectRecord& subject, const CentroidSet& centroids,
                                const PredictorModel& model, const MatchMap& matchmap,
                                ClusteringSpace space, ErrorNorm norm) {
    if (subject.sessions.empty()) {
        throw ValidationError("build_signature: subject " + subject.subject_id +
                              " has no sessions");
    }
    const auto& first = subject.sessions[0];
    const bool paired = model.config().input_mode == InputMode::kPaired;
    if (paired && subject.session_count() < 2) {
        throw ValidationError("build_signature: subject " + subject.subject_id +
                              " is missing a second session");
    }
    if (paired && matchmap.pairs.size() != first.size()) {
        throw ValidationError("build_signature: match map for subject " + subject.subject_id +
                              " has wrong length");
    }

    const std::size_t n_target = first.at(0).target_vec.size();
    const std::size_t n_rest = first.at(0).rest_vec.size();
    std::vector<double> per_frame_error(first.size());
    for (std::size_t t = 0; t < first.size(); ++t) {
        const auto& f1 = first[t];
        Eigen::VectorXd input;
        Eigen::Map<const Eigen::VectorXd> target1(f1.target_vec.data(),
                                                  static_cast<Eigen::Index>(n_target));
        Eigen::VectorXd prediction;
        double sum_sq = 0.0;
        if (paired) {
            const int u = matchmap.pairs[t].second;
            const auto& f2 = subject.sessions[1].at(static_cast<size_t>(u - 1));
            input.resize(static_cast<Eigen::Index>(2 * n_rest + n_target));
            for (std::size_t i = 0; i < n_rest; ++i) input[static_cast<Eigen::Index>(i)] = f1.rest_vec[i];
            for (std::size_t i = 0; i < n_target; ++i)
                input[static_cast<Eigen::Index>(n_rest + i)] = f1.target_vec[i];
            for (std::size_t i = 0; i < n_rest; ++i)
                input[static_cast<Eigen::Index>(n_rest + n_target + i)] = f2.rest_vec[i];
            prediction = model.forward(input);
            Eigen::Map<const Eigen::VectorXd> target2(f2.target_vec.data(),
                                                      static_cast<Eigen::Index>(n_target));
            sum_sq = (prediction - target2).squaredNorm();
        } else {
            input = Eigen::Map<const Eigen::VectorXd>(f1.rest_vec.data(),
                                                      static_cast<Eigen::Index>(n_rest));
            prediction = model.forward(input);
            sum_sq = (prediction - target1).squaredNorm();
        }
        per_frame_error[t] = frame_error_norm(sum_sq, n_target, norm);
    }
    return aggregate(subject, centroids, space, SignatureVariant::kFull, per_frame_error);
}

SignatureMatrix build_raw_diff_signature(const SubjectRecord& subject,
                                         const CentroidSet& centroids, const MatchMap& matchmap,
                                         ClusteringSpace space, ErrorNorm norm) {
    if (subject.session_count() < 2) {
        throw ValidationError("build_raw_diff_signature: subject " + subject.subject_id +
                              " is missing a second session");
    }
    const auto& first = subject.sessions[0];
    const auto& second = subject.sessions[1];
    if (matchmap.pairs.size() != first.size()) {
        throw ValidationError("build_raw_diff_signature: match map for subject " +
                              subject.subject_id + " has wrong length");
    }
    const std::size_t n_target = first.at(0).target_vec.size();
    std::vector<double> per_frame_error(first.size());
    for (std::size_t t = 0; t < first.size(); ++t) {
        const int u = matchmap.pairs[t].second;
        const auto& a1 = first[t].target_vec;
        const auto& a2 = second.at(static_cast<size_t>(u - 1)).target_vec;
        double sum_sq = 0.0;
        for (std::size_t i = 0; i < n_target; ++i) {
            const double d = a1[i] - a2[i];
            sum_sq += d * d;
        }
        per_frame_error[t] = frame_error_norm(sum_sq, n_target, norm);
    }
    return aggregate(subject, centroids, space, SignatureVariant::kRawDiff, per_frame_error);
}

SignatureVector flatten(const SignatureMatrix& sig, SignatureVariant requested) {
    SignatureVector out;
    out.subject_id = sig.subject_id;
    out.variant = requested;
    out.k = sig.k();
    if (requested == SignatureVariant::kCountOnly) {
        out.values.assign(sig.counts.begin(), sig.counts.end());
        return out;
    }
    if (requested == SignatureVariant::kErrorOnly) {
        out.values = sig.errors;
        return out;
    }
    if (requested != sig.variant) {
        throw ValidationError("flatten: cannot produce '" + to_string(requested) +
                              "' from a '" + to_string(sig.variant) + "' matrix");
    }
    out.values.reserve(2 * sig.counts.size());
    for (std::size_t i = 0; i < sig.counts.size(); ++i) {
        out.values.push_back(static_cast<double>(sig.counts[i]));
        out.values.push_back(sig.errors[i]);
    }
    return out;
}

SignatureMatrix unflatten(const SignatureVector& vec) {
    if (vec.variant != SignatureVariant::kFull && vec.variant != SignatureVariant::kRawDiff) {
        throw ValidationError("unflatten: only interleaved layouts are invertible");
    }
    if (vec.values.size() != static_cast<size_t>(2 * vec.k)) {
        throw ValidationError("unflatten: expected 2k values");
    }
    SignatureMatrix sig;
    sig.subject_id = vec.subject_id;
    sig.variant = vec.variant;
    for (int i = 0; i < vec.k; ++i) {
        sig.counts.push_back(static_cast<int>(std::lround(vec.values[static_cast<size_t>(2 * i)])));
        sig.errors.push_back(vec.values[static_cast<size_t>(2 * i + 1)]);
    }
    return sig;
}

void write_signatures_csv(const std::string& path, const std::vector<SignatureMatrix>& sigs) {
    if (sigs.empty()) throw ValidationError("write_signatures_csv: no signatures");
    const int k = sigs[0].k();
    std::string csv = "subject_id,variant";
    for (int i = 0; i < k; ++i) {
        csv += ",count_" + std::to_string(i) + ",err_" + std::to_string(i);
    }
    csv += "\n";
    for (const auto& sig : sigs) {
        if (sig.k() != k) throw ValidationError("write_signatures_csv: inconsistent k");
        csv += sig.subject_id + "," + to_string(sig.variant);
        for (int i = 0; i < k; ++i) {
            char buf[48];
            std::snprintf(buf, sizeof(buf), ",%d,%.17g", sig.counts[static_cast<size_t>(i)],
                          sig.errors[static_cast<size_t>(i)]);
            csv += buf;
        }
        csv += "\n";
    }
    write_file_bytes(path, csv);
}

std::vector<SignatureMatrix> read_signatures_csv(const std::string& path) {
    const auto rows = read_csv(path);
    if (rows.empty() || rows[0].size() < 4 || rows[0][0] != "subject_id" ||
        rows[0][1] != "variant") {
        throw ValidationError("signatures csv: bad header in " + path);
    }
    const int k = static_cast<int>((rows[0].size() - 2) / 2);
    std::vector<SignatureMatrix> out;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() != static_cast<size_t>(2 + 2 * k)) {
            throw ValidationError("signatures csv: bad row in " + path);
        }
        SignatureMatrix sig;
        sig.subject_id = row[0];
        sig.variant = signature_variant_from_string(row[1]);
        for (int i = 0; i < k; ++i) {
            sig.counts.push_back(std::stoi(row[static_cast<size_t>(2 + 2 * i)]));
            sig.errors.push_back(std::stod(row[static_cast<size_t>(3 + 2 * i)]));
        }
        out.push_back(std::move(sig));
    }
    return out;
}

} // namespace neurosig
