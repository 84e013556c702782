#include "neurosig/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "json.hpp"
#include "neurosig/binio.hpp"
#include "neurosig/io.hpp"
#include "neurosig/rng.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace neurosig {

namespace {

// Per-subject target baseline deviation, as a multiple of the per-frame
// amygdala noise. Gives the mean-prediction baseline a subject-identity
// component that the paired predictor can explain away.
constexpr double kSubjectBaselineSpreadFactor = 3.0;
constexpr double kVisitDirichletAlpha = 3.0;

int sample_categorical(RandomStream& stream, const std::vector<double>& probs) {
    const double u = stream.uniform();
    double cum = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        cum += probs[i];
        if (u < cum) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size()) - 1;
}

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

// argmin over candidate indices, ties to the smallest index
int argmin_sq_dist(const std::vector<double>& query,
                   const std::vector<std::vector<double>>& pool,
                   const std::vector<int>& candidates) {
    int best = -1;
    double best_d = 0.0;
    for (int c : candidates) {
        const double d = sq_dist(query, pool[static_cast<size_t>(c)]);
        if (best < 0 || d < best_d) {
            best = c;
            best_d = d;
        }
    }
    return best;
}

ROIMask build_center_target_mask(const GridDims& dims, int n_target) {
    // target = the n_target voxels nearest the grid center, everything else rest
    struct Entry {
        double dist2;
        std::int32_t index;
    };
    std::vector<Entry> entries;
    entries.reserve(static_cast<size_t>(dims.voxel_count()));
    const double ch = (dims.h - 1) / 2.0, cw = (dims.w - 1) / 2.0, cd = (dims.d - 1) / 2.0;
    std::int32_t idx = 0;
    for (int h = 0; h < dims.h; ++h)
        for (int w = 0; w < dims.w; ++w)
            for (int d = 0; d < dims.d; ++d, ++idx) {
                const double dist2 = (h - ch) * (h - ch) + (w - cw) * (w - cw) + (d - cd) * (d - cd);
                entries.push_back({dist2, idx});
            }
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        return a.dist2 != b.dist2 ? a.dist2 < b.dist2 : a.index < b.index;
    });
    std::vector<std::int8_t> labels(entries.size(), static_cast<std::int8_t>(VoxelLabel::kRest));
    for (int i = 0; i < n_target; ++i) {
        labels[static_cast<size_t>(entries[static_cast<size_t>(i)].index)] =
            static_cast<std::int8_t>(VoxelLabel::kTarget);
    }
    return ROIMask(dims, std::move(labels));
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

void GeneratorConfig::require_valid() const {
    if (n_subjects < 1) throw ValidationError("generator: n_subjects must be >= 1");
    if (frames_per_session < 1) throw ValidationError("generator: frames_per_session must be >= 1");
    if (dims.h < 1 || dims.w < 1 || dims.d < 1) throw ValidationError("generator: dims must be positive");
    if (k_true < 2) throw ValidationError("generator: k_true must be >= 2");
    if (n_target_voxels < 1 || n_target_voxels >= dims.voxel_count()) {
        throw ValidationError("generator: n_target_voxels must be in [1, voxels)");
    }
    if (state_noise_sigma < 0 || amygdala_noise_sigma < 0 || trait_noise_sigma < 0 ||
        gain_spread < 0) {
        throw ValidationError("generator: sigmas and gain_spread must be >= 0");
    }
    if (trait_count < 1) throw ValidationError("generator: trait_count must be >= 1");
}

std::pair<Cohort, GroundTruth> generate_cohort(const GeneratorConfig& config,
                                               std::vector<std::string>* warnings) {
    config.require_valid();
    if (config.frames_per_session < config.k_true && warnings) {
        warnings->push_back("frames_per_session < k_true: some states will go unvisited");
    }

    const int T = config.frames_per_session;
    const int k = config.k_true;
    const int l = config.trait_count;

    Cohort cohort;
    cohort.mask = build_center_target_mask(config.dims, config.n_target_voxels);
    cohort.frames_per_session = T;
    cohort.session_count = 2;
    for (int j = 0; j < l; ++j) {
        cohort.trait_schema.push_back({"trait_" + std::to_string(j), TraitField::Type::kReal});
    }
    cohort.trait_schema.push_back({"experienced", TraitField::Type::kBinary});

    const std::size_t n_rest = cohort.mask.n_rest();
    const std::size_t n_target = cohort.mask.n_target();

    GroundTruth truth;

    // cohort-level draws, fixed order: prototypes, target baseline, trait map,
    // alternate region
    RandomStream cohort_stream(derive_seed(config.seed, "cohort"));
    truth.prototypes.resize(static_cast<size_t>(k));
    for (auto& proto : truth.prototypes) {
        proto.resize(n_rest);
        for (auto& v : proto) v = cohort_stream.normal();
    }
    std::vector<double> global_baseline(n_target);
    for (auto& v : global_baseline) v = cohort_stream.uniform(0.5, 1.5);
    truth.trait_weights.assign(static_cast<size_t>(2 * k), std::vector<double>(static_cast<size_t>(l)));
    for (auto& row : truth.trait_weights)
        for (auto& v : row) v = cohort_stream.normal();
    truth.trait_bias.resize(static_cast<size_t>(l));
    for (auto& v : truth.trait_bias) v = cohort_stream.normal();

    std::vector<std::int32_t> alt_pool(cohort.mask.rest_indices());
    cohort_stream.shuffle(alt_pool);
    const std::size_t n_alt = std::min<std::size_t>(n_target, alt_pool.size() > 1 ? alt_pool.size() - 1 : 0);
    truth.alternate_target_voxels.assign(alt_pool.begin(), alt_pool.begin() + static_cast<long>(n_alt));
    std::sort(truth.alternate_target_voxels.begin(), truth.alternate_target_voxels.end());

    const double baseline_spread = kSubjectBaselineSpreadFactor * config.amygdala_noise_sigma;

    std::vector<double> mean_gains(static_cast<size_t>(config.n_subjects));

    for (int s = 0; s < config.n_subjects; ++s) {
        RandomStream stream(derive_seed(config.seed, "subject", static_cast<std::uint64_t>(s)));
        SubjectRecord rec;
        char idbuf[16];
        std::snprintf(idbuf, sizeof(idbuf), "s%03d", s);
        rec.subject_id = idbuf;

        std::vector<double> visits = stream.dirichlet(static_cast<size_t>(k), kVisitDirichletAlpha);

        std::vector<double> gains(static_cast<size_t>(k));
        for (auto& g : gains) {
            g = kBaseGain + (stream.uniform() < kHighGainProb ? config.gain_spread : 0.0);
        }
        mean_gains[static_cast<size_t>(s)] =
            std::accumulate(gains.begin(), gains.end(), 0.0) / k;

        std::vector<double> baseline(n_target);
        for (std::size_t v = 0; v < n_target; ++v) {
            baseline[v] = global_baseline[v] + stream.normal(0.0, baseline_spread);
        }

        // session 1
        std::vector<int> states1(static_cast<size_t>(T));
        std::vector<std::vector<double>> rest1(static_cast<size_t>(T));
        std::vector<std::vector<double>> amy1(static_cast<size_t>(T));
        for (int t = 0; t < T; ++t) {
            states1[static_cast<size_t>(t)] = sample_categorical(stream, visits);
            auto& r = rest1[static_cast<size_t>(t)];
            r = truth.prototypes[static_cast<size_t>(states1[static_cast<size_t>(t)])];
            for (auto& v : r) v += stream.normal(0.0, config.state_noise_sigma);
            auto& a = amy1[static_cast<size_t>(t)];
            a.resize(n_target);
            for (std::size_t v = 0; v < n_target; ++v) {
                a[v] = baseline[v] + stream.normal(0.0, config.amygdala_noise_sigma);
            }
        }

        // session 2 rest patterns
        std::vector<int> states2(static_cast<size_t>(T));
        std::vector<std::vector<double>> rest2(static_cast<size_t>(T));
        for (int u = 0; u < T; ++u) {
            states2[static_cast<size_t>(u)] = sample_categorical(stream, visits);
            auto& r = rest2[static_cast<size_t>(u)];
            r = truth.prototypes[static_cast<size_t>(states2[static_cast<size_t>(u)])];
            for (auto& v : r) v += stream.normal(0.0, config.state_noise_sigma);
        }

        // session-2 amygdala: down-regulated copy of the nearest same-state
        // session-1 frame, so cross-session matching has a planted answer
        std::vector<int> sources(static_cast<size_t>(T));
        std::vector<std::vector<double>> amy2(static_cast<size_t>(T));
        std::vector<int> all_frames(static_cast<size_t>(T));
        std::iota(all_frames.begin(), all_frames.end(), 0);
        for (int u = 0; u < T; ++u) {
            std::vector<int> same_state;
            for (int t = 0; t < T; ++t) {
                if (states1[static_cast<size_t>(t)] == states2[static_cast<size_t>(u)]) {
                    same_state.push_back(t);
                }
            }
            const int src = argmin_sq_dist(rest2[static_cast<size_t>(u)], rest1,
                                           same_state.empty() ? all_frames : same_state);
            sources[static_cast<size_t>(u)] = src;
            const double keep = 1.0 - gains[static_cast<size_t>(states2[static_cast<size_t>(u)])];
            auto& a = amy2[static_cast<size_t>(u)];
            a.resize(n_target);
            for (std::size_t v = 0; v < n_target; ++v) {
                a[v] = keep * amy1[static_cast<size_t>(src)][v] +
                       stream.normal(0.0, config.amygdala_noise_sigma);
            }
        }

        // generator-side brute-force match oracle (1-based)
        std::vector<int> matches(static_cast<size_t>(T));
        for (int t = 0; t < T; ++t) {
            matches[static_cast<size_t>(t)] =
                argmin_sq_dist(rest1[static_cast<size_t>(t)], rest2, all_frames) + 1;
        }

        // traits linear in [gains ; visits]
        rec.traits.resize(static_cast<size_t>(l));
        for (int j = 0; j < l; ++j) {
            double y = truth.trait_bias[static_cast<size_t>(j)];
            for (int i = 0; i < k; ++i) {
                y += truth.trait_weights[static_cast<size_t>(i)][static_cast<size_t>(j)] *
                     gains[static_cast<size_t>(i)];
                y += truth.trait_weights[static_cast<size_t>(k + i)][static_cast<size_t>(j)] *
                     visits[static_cast<size_t>(i)];
            }
            rec.traits[static_cast<size_t>(j)] = y + stream.normal(0.0, config.trait_noise_sigma);
        }

        rec.sessions.resize(2);
        for (int t = 0; t < T; ++t) {
            Frame f1;
            f1.full = unsplit_frame(amy1[static_cast<size_t>(t)], rest1[static_cast<size_t>(t)],
                                    cohort.mask);
            f1.target_vec = std::move(amy1[static_cast<size_t>(t)]);
            f1.rest_vec = std::move(rest1[static_cast<size_t>(t)]);
            rec.sessions[0].push_back(std::move(f1));
            Frame f2;
            f2.full = unsplit_frame(amy2[static_cast<size_t>(t)], rest2[static_cast<size_t>(t)],
                                    cohort.mask);
            f2.target_vec = std::move(amy2[static_cast<size_t>(t)]);
            f2.rest_vec = std::move(rest2[static_cast<size_t>(t)]);
            rec.sessions[1].push_back(std::move(f2));
        }

        truth.gains.push_back(std::move(gains));
        truth.visit_distributions.push_back(std::move(visits));
        truth.session1_states.push_back(std::move(states1));
        truth.session2_states.push_back(std::move(states2));
        truth.session2_sources.push_back(std::move(sources));
        truth.planted_matches.push_back(std::move(matches));
        cohort.subjects.push_back(std::move(rec));
    }

    // binary label: learned more than the cohort median
    std::vector<double> sorted_gains(mean_gains);
    std::sort(sorted_gains.begin(), sorted_gains.end());
    const std::size_t n = sorted_gains.size();
    const double median = n % 2 == 1 ? sorted_gains[n / 2]
                                     : 0.5 * (sorted_gains[n / 2 - 1] + sorted_gains[n / 2]);
    for (int s = 0; s < config.n_subjects; ++s) {
        cohort.subjects[static_cast<size_t>(s)].binary_labels["experienced"] =
            mean_gains[static_cast<size_t>(s)] > median;
    }

    return {std::move(cohort), std::move(truth)};
}

void write_cohort(const Cohort& cohort, const GroundTruth& truth, const std::string& dir) {
    fs::create_directories(dir);
    const fs::path base(dir);

    write_mask_file((base / "mask.bin").string(), cohort.mask);

    json manifest;
    manifest["schema_version"] = kManifestSchemaVersion;
    manifest["dims"] = {cohort.mask.dims().h, cohort.mask.dims().w, cohort.mask.dims().d};
    manifest["frames_per_session"] = cohort.frames_per_session;
    manifest["session_count"] = cohort.session_count;
    manifest["mask"] = "mask.bin";
    manifest["traits"] = "traits.csv";

    if (!truth.alternate_target_voxels.empty()) {
        // alternate-ROI mask: target moves to an inert rest region, the original
        // target region drops out entirely
        std::vector<std::int8_t> labels(cohort.mask.labels());
        for (std::int32_t idx : cohort.mask.target_indices()) {
            labels[static_cast<size_t>(idx)] = static_cast<std::int8_t>(VoxelLabel::kExcluded);
        }
        for (std::int32_t idx : truth.alternate_target_voxels) {
            labels[static_cast<size_t>(idx)] = static_cast<std::int8_t>(VoxelLabel::kTarget);
        }
        write_mask_file((base / "mask_alt.bin").string(),
                        ROIMask(cohort.mask.dims(), std::move(labels)));
        manifest["alternate_mask"] = "mask_alt.bin";
    }

    json schema = json::array();
    for (const auto& f : cohort.trait_schema) {
        schema.push_back({{"name", f.name},
                          {"type", f.type == TraitField::Type::kReal ? "real" : "binary"}});
    }
    manifest["trait_schema"] = schema;

    std::string traits_csv = "subject_id";
    for (const auto& f : cohort.trait_schema) traits_csv += "," + f.name;
    traits_csv += "\n";

    json subjects = json::array();
    for (const auto& s : cohort.subjects) {
        json entry;
        entry["id"] = s.subject_id;
        json files = json::array();
        for (int m = 0; m < s.session_count(); ++m) {
            const std::string fname = s.subject_id + "_ses" + std::to_string(m + 1) + ".bin";
            VolumeSeries series;
            series.dims = cohort.mask.dims();
            series.frame_count = static_cast<int>(s.sessions[static_cast<size_t>(m)].size());
            for (const auto& f : s.sessions[static_cast<size_t>(m)]) {
                series.frames.push_back(f.full.values);
            }
            write_volume_series((base / fname).string(), series);
            files.push_back(fname);
        }
        entry["sessions"] = files;
        subjects.push_back(entry);

        traits_csv += s.subject_id;
        std::size_t real_i = 0;
        for (const auto& f : cohort.trait_schema) {
            if (f.type == TraitField::Type::kReal) {
                traits_csv += "," + format_double(s.traits[real_i++]);
            } else {
                traits_csv += s.binary_labels.at(f.name) ? ",1" : ",0";
            }
        }
        traits_csv += "\n";
    }
    manifest["subjects"] = subjects;

    write_file_bytes((base / "manifest.json").string(), manifest.dump(2) + "\n");
    write_file_bytes((base / "traits.csv").string(), traits_csv);

    json gt;
    gt["schema_version"] = 1;
    gt["prototypes"] = truth.prototypes;
    gt["gains"] = truth.gains;
    gt["visit_distributions"] = truth.visit_distributions;
    gt["trait_weights"] = truth.trait_weights;
    gt["trait_bias"] = truth.trait_bias;
    gt["session1_states"] = truth.session1_states;
    gt["session2_states"] = truth.session2_states;
    gt["planted_matches"] = truth.planted_matches;
    gt["session2_sources"] = truth.session2_sources;
    gt["alternate_target_voxels"] = truth.alternate_target_voxels;
    write_file_bytes((base / "ground_truth.json").string(), gt.dump(2) + "\n");
}

GroundTruth read_ground_truth(const std::string& path) {
    fs::path p(path);
    if (fs::is_directory(p)) p /= "ground_truth.json";
    json gt;
    try {
        std::ifstream in(p);
        if (!in) throw ValidationError("cannot open " + p.string());
        gt = json::parse(in);
    } catch (const json::exception& e) {
        throw ValidationError("ground_truth parse error: " + std::string(e.what()));
    }
    GroundTruth truth;
    truth.prototypes = gt.at("prototypes").get<std::vector<std::vector<double>>>();
    truth.gains = gt.at("gains").get<std::vector<std::vector<double>>>();
    truth.visit_distributions = gt.at("visit_distributions").get<std::vector<std::vector<double>>>();
    truth.trait_weights = gt.at("trait_weights").get<std::vector<std::vector<double>>>();
    truth.trait_bias = gt.at("trait_bias").get<std::vector<double>>();
    truth.session1_states = gt.at("session1_states").get<std::vector<std::vector<int>>>();
    truth.session2_states = gt.at("session2_states").get<std::vector<std::vector<int>>>();
    truth.planted_matches = gt.at("planted_matches").get<std::vector<std::vector<int>>>();
    truth.session2_sources = gt.at("session2_sources").get<std::vector<std::vector<int>>>();
    truth.alternate_target_voxels = gt.at("alternate_target_voxels").get<std::vector<std::int32_t>>();
    return truth;
}

GeneratorConfig generator_config_from_json_file(const std::string& path) {
    json j;
    try {
        std::ifstream in(path);
        if (!in) throw ValidationError("cannot open generator config: " + path);
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ValidationError("generator config parse error: " + std::string(e.what()));
    }
    GeneratorConfig c;
    c.n_subjects = j.value("n_subjects", c.n_subjects);
    c.frames_per_session = j.value("frames_per_session", c.frames_per_session);
    if (j.contains("dims")) {
        const auto& d = j.at("dims");
        c.dims = GridDims{d.at(0).get<int>(), d.at(1).get<int>(), d.at(2).get<int>()};
    }
    c.n_target_voxels = j.value("n_target_voxels", c.n_target_voxels);
    c.k_true = j.value("k_true", c.k_true);
    c.state_noise_sigma = j.value("state_noise_sigma", c.state_noise_sigma);
    c.amygdala_noise_sigma = j.value("amygdala_noise_sigma", c.amygdala_noise_sigma);
    c.gain_spread = j.value("gain_spread", c.gain_spread);
    c.trait_count = j.value("trait_count", c.trait_count);
    c.trait_noise_sigma = j.value("trait_noise_sigma", c.trait_noise_sigma);
    c.seed = j.value("seed", c.seed);
    return c;
}

} // namespace neurosig
