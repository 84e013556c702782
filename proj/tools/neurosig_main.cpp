#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "neurosig/binio.hpp"
#include "neurosig/clustering.hpp"
#include "neurosig/eval.hpp"
#include "neurosig/io.hpp"
#include "neurosig/matching.hpp"
#include "neurosig/predictor.hpp"
#include "neurosig/readout.hpp"
#include "neurosig/rng.hpp"
#include "neurosig/signature.hpp"
#include "neurosig/synth.hpp"

namespace fs = std::filesystem;
using namespace neurosig;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

struct GlobalOptions {
    std::uint64_t seed = 0;
    bool seed_set = false;
    int threads = 1;
    std::string config_path;
};

std::vector<std::vector<double>> session1_vectors(const Cohort& cohort, ClusteringSpace space) {
    std::vector<std::vector<double>> points;
    for (const auto& s : cohort.subjects) {
        for (const auto& f : s.sessions.at(0)) points.push_back(clustering_vector(f, space));
    }
    return points;
}

PipelineConfig load_pipeline_config(const GlobalOptions& global) {
    PipelineConfig config;
    if (!global.config_path.empty()) config = pipeline_config_from_json_file(global.config_path);
    if (global.seed_set) config.seed = global.seed;
    config.threads = global.threads;
    return config;
}

// deterministic train/validation subject split for the standalone trainer
std::pair<std::vector<std::string>, std::vector<std::string>>
train_val_ids(const Cohort& cohort, double val_fraction, std::uint64_t seed) {
    std::vector<std::string> ids;
    for (const auto& s : cohort.subjects) ids.push_back(s.subject_id);
    std::sort(ids.begin(), ids.end());
    RandomStream stream(derive_seed(seed, "train_val_split"));
    stream.shuffle(ids);
    const auto n_val = std::max<std::size_t>(1, static_cast<std::size_t>(val_fraction * ids.size()));
    if (n_val >= ids.size()) throw ValidationError("validation fraction leaves no training subjects");
    std::vector<std::string> val(ids.begin(), ids.begin() + static_cast<long>(n_val));
    std::vector<std::string> train(ids.begin() + static_cast<long>(n_val), ids.end());
    return {train, val};
}

int run_generate(const GlobalOptions& global, const std::string& config_path,
                 const std::string& out_dir) {
    GeneratorConfig config;
    if (!config_path.empty()) config = generator_config_from_json_file(config_path);
    if (global.seed_set) config.seed = global.seed;

    std::vector<std::string> warnings;
    auto [cohort, truth] = generate_cohort(config, &warnings);
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
    write_cohort(cohort, truth, out_dir);
    std::cout << "wrote cohort with " << cohort.subjects.size() << " subjects to " << out_dir
              << "\n";
    return 0;
}

int run_cluster(const GlobalOptions& global, const std::string& cohort_dir, const std::string& k_arg,
                const std::string& out_path, int k_min, int k_max, double dispersion_max,
                const std::string& space_arg) {
    const Cohort cohort = load_cohort(cohort_dir);
    const ClusteringSpace space =
        space_arg == "full" ? ClusteringSpace::kFullBrain : ClusteringSpace::kRestOnly;
    const auto points = session1_vectors(cohort, space);

    PipelineConfig config = load_pipeline_config(global);
    KMeansOptions options = config.kmeans;
    options.threads = global.threads;
    const std::uint64_t seed = derive_seed(config.seed, "kmeans_cli");

    int k = 0;
    if (k_arg == "auto") {
        const KSelection sel = select_k(points, k_min, k_max, dispersion_max, seed, options);
        k = sel.k;
        if (sel.warning) {
            std::cerr << "warning: no k in [" << k_min << "," << k_max
                      << "] met the dispersion bound; using k_min\n";
        }
        for (const auto& cand : sel.candidates) {
            if (cand.feasible) {
                std::printf("k=%d dispersion=%.4f inertia=%.4g\n", cand.k, cand.dispersion,
                            cand.inertia);
            } else {
                std::printf("k=%d infeasible (too few distinct points)\n", cand.k);
            }
        }
    } else {
        k = std::stoi(k_arg);
    }

    const CentroidSet centroids = fit_kmeans(points, k, seed, options);
    write_centroids(out_path, centroids);
    std::cout << "k=" << k << " inertia=" << centroids.inertia << " -> " << out_path << "\n";
    return 0;
}

int run_match(const std::string& cohort_dir, const std::string& out_path, int threads) {
    const Cohort cohort = load_cohort(cohort_dir);
    const auto matches = match_all(cohort, threads);
    write_matches_csv(out_path, matches);
    std::cout << "wrote " << matches.size() << " match maps to " << out_path << "\n";
    return 0;
}

int run_train_predictor(const GlobalOptions& global, const std::string& cohort_dir,
                        const std::string& matches_path, const std::string& mode_arg,
                        const std::string& out_path, double val_fraction) {
    const Cohort cohort = load_cohort(cohort_dir);
    const InputMode mode = input_mode_from_string(mode_arg);
    std::map<std::string, MatchMap> matches;
    if (mode == InputMode::kPaired) {
        matches = matches_path.empty() ? match_all(cohort, global.threads)
                                       : read_matches_csv(matches_path);
    }
    PipelineConfig config = load_pipeline_config(global);
    PredictorConfig pc = config.predictor;
    pc.input_mode = mode;
    pc.seed = derive_seed(config.seed, "predictor_cli");

    const auto samples = build_dataset(cohort, matches, mode);
    const auto [train_ids, val_ids] = train_val_ids(cohort, val_fraction, config.seed);
    std::set<std::string> train_set(train_ids.begin(), train_ids.end());
    std::set<std::string> val_set(val_ids.begin(), val_ids.end());
    std::vector<TrainSample> train_samples, val_samples;
    for (const auto& s : samples) {
        (train_set.count(s.subject_id) ? train_samples : val_samples).push_back(s);
    }

    const PredictorModel model = train(train_samples, pc, val_samples);
    write_model(out_path, model);
    const auto& history = model.train_history();
    std::cout << "trained " << history.size() << " epochs, best validation loss "
              << (history.empty() ? 0.0
                                  : std::min_element(history.begin(), history.end(),
                                                     [](const EpochStats& a, const EpochStats& b) {
                                                         return a.validation_loss <
                                                                b.validation_loss;
                                                     })
                                        ->validation_loss)
              << " -> " << out_path << "\n";
    return 0;
}

int run_signature(const GlobalOptions& global, const std::string& cohort_dir,
                  const std::string& centroids_path, const std::string& model_path,
                  const std::string& matches_path, const std::string& out_path,
                  const std::string& variant_arg, const std::string& norm_arg) {
    const Cohort cohort = load_cohort(cohort_dir);
    const CentroidSet centroids = read_centroids(centroids_path);
    const auto matches =
        matches_path.empty() ? match_all(cohort, global.threads) : read_matches_csv(matches_path);
    const ErrorNorm norm = norm_arg == "mean" ? ErrorNorm::kMeanSquares : ErrorNorm::kSumSquares;

    std::vector<SignatureMatrix> sigs;
    if (variant_arg == "raw_diff") {
        for (const auto& s : cohort.subjects) {
            sigs.push_back(build_raw_diff_signature(s, centroids, matches.at(s.subject_id),
                                                    ClusteringSpace::kRestOnly, norm));
        }
    } else if (variant_arg == "full") {
        if (model_path.empty()) throw ValidationError("signature: --model required for full variant");
        const PredictorModel model = read_model(model_path);
        for (const auto& s : cohort.subjects) {
            sigs.push_back(build_signature(s, centroids, model, matches.at(s.subject_id),
                                           ClusteringSpace::kRestOnly, norm));
        }
    } else {
        throw ValidationError("signature: variant must be full or raw_diff");
    }
    write_signatures_csv(out_path, sigs);
    std::cout << "wrote " << sigs.size() << " signatures to " << out_path << "\n";
    return 0;
}

int run_readout(const GlobalOptions& global, const std::string& signatures_path,
                const std::string& traits_path, const std::string& lambda_arg,
                const std::string& variant_arg, const std::string& out_path,
                double val_fraction) {
    const auto sigs = read_signatures_csv(signatures_path);
    const SignatureVariant variant = signature_variant_from_string(variant_arg);

    // traits.csv: header row subject_id,<names...>; all columns used as targets
    const auto rows = read_csv(traits_path);
    if (rows.size() < 2 || rows[0].empty() || rows[0][0] != "subject_id") {
        throw ValidationError("readout: traits csv needs a subject_id header and data rows");
    }
    std::map<std::string, std::vector<double>> traits;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        std::vector<double> values;
        for (std::size_t c = 1; c < rows[r].size(); ++c) values.push_back(std::stod(rows[r][c]));
        traits[rows[r][0]] = values;
    }

    std::vector<std::vector<double>> feature_rows;
    std::vector<std::vector<double>> target_rows;
    std::vector<std::string> ids;
    for (const auto& sig : sigs) {
        const auto it = traits.find(sig.subject_id);
        if (it == traits.end()) {
            throw ValidationError("readout: subject " + sig.subject_id + " missing from traits");
        }
        feature_rows.push_back(flatten(sig, variant).values);
        target_rows.push_back(it->second);
        ids.push_back(sig.subject_id);
    }
    const Eigen::Index n = static_cast<Eigen::Index>(feature_rows.size());
    const Eigen::Index p = n > 0 ? static_cast<Eigen::Index>(feature_rows[0].size()) : 0;
    const Eigen::Index l = n > 0 ? static_cast<Eigen::Index>(target_rows[0].size()) : 0;
    Eigen::MatrixXd X(n, p), Y(n, l);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index c = 0; c < p; ++c) X(i, c) = feature_rows[static_cast<size_t>(i)][static_cast<size_t>(c)];
        for (Eigen::Index c = 0; c < l; ++c) Y(i, c) = target_rows[static_cast<size_t>(i)][static_cast<size_t>(c)];
    }

    PipelineConfig config = load_pipeline_config(global);
    LinearReadout readout;
    if (lambda_arg == "auto") {
        // hold out a seeded validation subset for the grid search
        std::vector<Eigen::Index> order(static_cast<size_t>(n));
        std::iota(order.begin(), order.end(), 0);
        RandomStream stream(derive_seed(config.seed, "readout_lambda_split"));
        stream.shuffle(order);
        const Eigen::Index n_val =
            std::max<Eigen::Index>(1, static_cast<Eigen::Index>(val_fraction * n));
        if (n_val + 2 > n) throw ValidationError("readout: too few subjects for lambda selection");
        Eigen::MatrixXd Xv(n_val, p), Yv(n_val, l), Xt(n - n_val, p), Yt(n - n_val, l);
        for (Eigen::Index i = 0; i < n; ++i) {
            if (i < n_val) {
                Xv.row(i) = X.row(order[static_cast<size_t>(i)]);
                Yv.row(i) = Y.row(order[static_cast<size_t>(i)]);
            } else {
                Xt.row(i - n_val) = X.row(order[static_cast<size_t>(i)]);
                Yt.row(i - n_val) = Y.row(order[static_cast<size_t>(i)]);
            }
        }
        const LambdaSelection sel = select_lambda(Xt, Yt, Xv, Yv, config.lambda_grid);
        readout = fit_readout(X, Y, sel.lambda); // refit on everything with the chosen lambda
        std::cout << "selected lambda=" << sel.lambda << "\n";
    } else {
        readout = fit_readout(X, Y, std::stod(lambda_arg));
    }
    for (std::size_t c = 1; c < rows[0].size(); ++c) readout.output_names.push_back(rows[0][c]);
    write_readout(out_path, readout);

    const Eigen::VectorXd train_mse = per_output_mse(readout, X, Y);
    std::cout << "training mse per output:";
    for (Eigen::Index c = 0; c < train_mse.size(); ++c) std::cout << " " << train_mse[c];
    std::cout << "\n-> " << out_path << "\n";
    return 0;
}

int run_evaluate(const GlobalOptions& global, const std::string& cohort_dir,
                 const std::string& out_dir, int repeats, const std::string& k_arg,
                 const std::string& methods_arg) {
    const Cohort cohort = load_cohort(cohort_dir);
    Cohort alt_cohort;
    bool has_alt = manifest_has_alternate_mask(cohort_dir);
    if (has_alt) alt_cohort = load_cohort_alternate_roi(cohort_dir);

    PipelineConfig config = load_pipeline_config(global);
    if (k_arg != "auto") config.k_selection.fixed_k = std::stoi(k_arg);

    std::vector<Method> methods;
    if (methods_arg == "all") {
        methods = all_methods();
        if (!has_alt) {
            std::cerr << "note: cohort has no alternate ROI mask, skipping alt_roi\n";
            methods.erase(std::remove(methods.begin(), methods.end(), Method::kAltRoi),
                          methods.end());
        }
    } else {
        std::string remaining = methods_arg;
        while (!remaining.empty()) {
            const auto comma = remaining.find(',');
            methods.push_back(method_from_string(remaining.substr(0, comma)));
            if (comma == std::string::npos) break;
            remaining = remaining.substr(comma + 1);
        }
    }

    const SplitPlan plan = make_splits(cohort, derive_seed(config.seed, "splits"), repeats);
    EvalReport report =
        run_evaluation(cohort, has_alt ? &alt_cohort : nullptr, config, plan, methods);
    report.provenance["cohort"] = cohort_dir;
    report.provenance["tool"] = "neurosig";

    fs::create_directories(out_dir);
    const std::string report_json = report_to_json(report);
    write_file_bytes((fs::path(out_dir) / "report.json").string(), report_json);
    write_file_bytes((fs::path(out_dir) / "report.csv").string(),
                     report_csv_from_json(report_json));

    for (const auto& [name, mr] : report.methods) {
        std::printf("%-16s aggregate mse %.5g", name.c_str(), mr.mean_aggregate_mse());
        for (std::size_t b = 0; b < report.label_names.size(); ++b) {
            std::printf("  %s auc %.3f", report.label_names[b].c_str(), mr.mean_label_auc(b));
        }
        std::printf("\n");
    }
    std::cout << "report written to " << out_dir << "\n";
    return 0;
}

int run_report(const std::string& in_path, const std::string& out_path,
               const std::string& format) {
    const std::string report_json = read_file_bytes(in_path);
    std::string rendered;
    if (format == "csv") {
        rendered = report_csv_from_json(report_json);
    } else if (format == "text") {
        // align the csv into a fixed-width table
        const std::string csv = report_csv_from_json(report_json);
        std::vector<std::vector<std::string>> rows;
        std::string line;
        std::vector<std::size_t> widths;
        for (std::size_t pos = 0; pos < csv.size();) {
            const auto end = csv.find('\n', pos);
            line = csv.substr(pos, end - pos);
            pos = end == std::string::npos ? csv.size() : end + 1;
            if (line.empty()) continue;
            std::vector<std::string> cells;
            std::size_t start = 0;
            for (;;) {
                const auto comma = line.find(',', start);
                cells.push_back(line.substr(start, comma - start));
                if (comma == std::string::npos) break;
                start = comma + 1;
            }
            widths.resize(std::max(widths.size(), cells.size()), 0);
            for (std::size_t c = 0; c < cells.size(); ++c) {
                widths[c] = std::max(widths[c], cells[c].size());
            }
            rows.push_back(std::move(cells));
        }
        for (const auto& cells : rows) {
            for (std::size_t c = 0; c < cells.size(); ++c) {
                rendered += cells[c];
                if (c + 1 < cells.size()) {
                    rendered += std::string(widths[c] - cells[c].size() + 2, ' ');
                }
            }
            rendered += "\n";
        }
    } else {
        throw ValidationError("report: format must be csv or text");
    }
    if (out_path.empty()) {
        std::cout << rendered;
    } else {
        write_file_bytes(out_path, rendered);
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"neurosig: brain-state signature pipeline over neurofeedback fMRI sessions"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalOptions global;
    app.add_option("--seed", global.seed, "master random seed")
        ->each([&](const std::string&) { global.seed_set = true; });
    app.add_option("--threads", global.threads, "worker threads for parallel stages")
        ->check(CLI::PositiveNumber);
    app.add_option("--config", global.config_path, "pipeline config json");

    auto* generate = app.add_subcommand("generate", "generate a synthetic cohort");
    std::string gen_config, gen_out;
    generate->add_option("--generator-config", gen_config, "generator config json");
    generate->add_option("--out", gen_out, "output cohort directory")->required();

    auto* cluster = app.add_subcommand("cluster", "fit brain-state prototypes");
    std::string cl_cohort, cl_k = "auto", cl_out, cl_space = "rest";
    int cl_kmin = 2, cl_kmax = 10;
    double cl_dispersion = kDefaultDispersionMax;
    cluster->add_option("--cohort", cl_cohort, "cohort directory")->required();
    cluster->add_option("--k", cl_k, "cluster count or 'auto'");
    cluster->add_option("--out", cl_out, "output centroid file")->required();
    cluster->add_option("--kmin", cl_kmin, "smallest k for auto selection");
    cluster->add_option("--kmax", cl_kmax, "largest k for auto selection");
    cluster->add_option("--dispersion-max", cl_dispersion, "occupancy dispersion bound");
    cluster->add_option("--space", cl_space, "clustering space: rest|full");

    auto* match = app.add_subcommand("match", "match session-1 frames to session-2 frames");
    std::string ma_cohort, ma_out;
    match->add_option("--cohort", ma_cohort, "cohort directory")->required();
    match->add_option("--out", ma_out, "output csv")->required();

    auto* train_cmd = app.add_subcommand("train-predictor", "train the state predictor");
    std::string tp_cohort, tp_matches, tp_mode = "paired", tp_out;
    double tp_val_fraction = 0.2;
    train_cmd->add_option("--cohort", tp_cohort, "cohort directory")->required();
    train_cmd->add_option("--matches", tp_matches, "matches csv (computed when omitted)");
    train_cmd->add_option("--mode", tp_mode, "paired|nofeedback");
    train_cmd->add_option("--out", tp_out, "output model file")->required();
    train_cmd->add_option("--val-fraction", tp_val_fraction, "validation subject fraction");

    auto* signature = app.add_subcommand("signature", "build per-subject signatures");
    std::string sg_cohort, sg_centroids, sg_model, sg_matches, sg_out, sg_variant = "full",
                           sg_norm = "sum";
    signature->add_option("--cohort", sg_cohort, "cohort directory")->required();
    signature->add_option("--centroids", sg_centroids, "centroid file")->required();
    signature->add_option("--model", sg_model, "predictor model file");
    signature->add_option("--matches", sg_matches, "matches csv (computed when omitted)");
    signature->add_option("--out", sg_out, "output csv")->required();
    signature->add_option("--variant", sg_variant, "full|raw_diff");
    signature->add_option("--norm", sg_norm, "per-frame error norm: sum|mean");

    auto* readout = app.add_subcommand("readout", "fit the linear trait readout");
    std::string ro_signatures, ro_traits, ro_lambda = "auto", ro_variant = "full", ro_out;
    double ro_val_fraction = 0.2;
    readout->add_option("--signatures", ro_signatures, "signatures csv")->required();
    readout->add_option("--traits", ro_traits, "traits csv")->required();
    readout->add_option("--lambda", ro_lambda, "ridge lambda or 'auto'");
    readout->add_option("--variant", ro_variant, "full|raw_diff|count_only|error_only");
    readout->add_option("--out", ro_out, "output readout json")->required();
    readout->add_option("--val-fraction", ro_val_fraction, "validation fraction for auto lambda");

    auto* evaluate = app.add_subcommand("evaluate", "cross-validated pipeline and baselines");
    std::string ev_cohort, ev_out, ev_k = "auto", ev_methods = "all";
    int ev_repeats = 5;
    evaluate->add_option("--cohort", ev_cohort, "cohort directory")->required();
    evaluate->add_option("--out-dir", ev_out, "output directory")->required();
    evaluate->add_option("--repeats", ev_repeats, "number of random splits");
    evaluate->add_option("--k", ev_k, "cluster count or 'auto'");
    evaluate->add_option("--methods", ev_methods, "comma list or 'all'");

    auto* report = app.add_subcommand("report", "render a report.json");
    std::string rp_in, rp_out, rp_format = "text";
    report->add_option("--in", rp_in, "report.json path")->required();
    report->add_option("--out", rp_out, "output path (stdout when omitted)");
    report->add_option("--format", rp_format, "csv|text");

    CLI11_PARSE(app, argc, argv);

    try {
        if (generate->parsed()) return run_generate(global, gen_config, gen_out);
        if (cluster->parsed()) {
            return run_cluster(global, cl_cohort, cl_k, cl_out, cl_kmin, cl_kmax, cl_dispersion,
                               cl_space);
        }
        if (match->parsed()) return run_match(ma_cohort, ma_out, global.threads);
        if (train_cmd->parsed()) {
            return run_train_predictor(global, tp_cohort, tp_matches, tp_mode, tp_out,
                                       tp_val_fraction);
        }
        if (signature->parsed()) {
            return run_signature(global, sg_cohort, sg_centroids, sg_model, sg_matches, sg_out,
                                 sg_variant, sg_norm);
        }
        if (readout->parsed()) {
            return run_readout(global, ro_signatures, ro_traits, ro_lambda, ro_variant, ro_out,
                               ro_val_fraction);
        }
        if (evaluate->parsed()) {
            return run_evaluate(global, ev_cohort, ev_out, ev_repeats, ev_k, ev_methods);
        }
        if (report->parsed()) return run_report(rp_in, rp_out, rp_format);
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
