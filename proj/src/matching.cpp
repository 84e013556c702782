#include "neurosig/matching.hpp"

#include <cmath>
#include <cstdio>

#include "neurosig/binio.hpp"
#include "neurosig/io.hpp"
#include "neurosig/parallel.hpp"

namespace neurosig {

MatchMap match_frames(const SubjectRecord& subject) {
    if (subject.session_count() < 2) {
        throw ValidationError("match_frames: subject " + subject.subject_id +
                              " is missing a second session");
    }
    const auto& first = subject.sessions[0];
    const auto& second = subject.sessions[1];
    if (first.size() != second.size() || first.empty()) {
        throw ValidationError("match_frames: subject " + subject.subject_id +
                              " has mismatched session lengths");
    }
    const int T = static_cast<int>(first.size());

    MatchMap map;
    map.subject_id = subject.subject_id;
    map.pairs.reserve(static_cast<size_t>(T));
    map.distances.reserve(static_cast<size_t>(T));
    for (int t = 0; t < T; ++t) {
        const auto& query = first[static_cast<size_t>(t)].rest_vec;
        int best = 0;
        double best_d = -1.0;
        for (int u = 0; u < T; ++u) {
            const auto& cand = second[static_cast<size_t>(u)].rest_vec;
            double d = 0.0;
            for (std::size_t i = 0; i < query.size(); ++i) {
                const double diff = query[i] - cand[i];
                d += diff * diff;
            }
            if (best_d < 0.0 || d < best_d) {
                best_d = d;
                best = u;
            }
        }
        map.pairs.emplace_back(t + 1, best + 1);
        map.distances.push_back(std::sqrt(best_d));
    }
    return map;
}

std::map<std::string, MatchMap> match_all(const Cohort& cohort, int threads) {
    std::vector<MatchMap> maps(cohort.subjects.size());
    parallel_for(cohort.subjects.size(), threads,
                 [&](std::size_t i) { maps[i] = match_frames(cohort.subjects[i]); });
    std::map<std::string, MatchMap> out;
    for (auto& m : maps) {
        std::string key = m.subject_id;
        out.emplace(std::move(key), std::move(m));
    }
    return out;
}

void write_matches_csv(const std::string& path, const std::map<std::string, MatchMap>& matches) {
    std::string csv = "subject_id,t,u_t,distance\n";
    for (const auto& [id, map] : matches) {
        for (std::size_t i = 0; i < map.pairs.size(); ++i) {
            char buf[64];
            std::snprintf(buf, sizeof(buf), ",%d,%d,%.17g\n", map.pairs[i].first,
                          map.pairs[i].second, map.distances[i]);
            csv += id;
            csv += buf;
        }
    }
    write_file_bytes(path, csv);
}

std::map<std::string, MatchMap> read_matches_csv(const std::string& path) {
    const auto rows = read_csv(path);
    if (rows.empty() || rows[0] != std::vector<std::string>{"subject_id", "t", "u_t", "distance"}) {
        throw ValidationError("matches csv: bad header in " + path);
    }
    std::map<std::string, MatchMap> out;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() != 4) throw ValidationError("matches csv: bad row in " + path);
        MatchMap& map = out[row[0]];
        map.subject_id = row[0];
        map.pairs.emplace_back(std::stoi(row[1]), std::stoi(row[2]));
        map.distances.push_back(std::stod(row[3]));
    }
    for (const auto& [id, map] : out) {
        for (std::size_t i = 0; i < map.pairs.size(); ++i) {
            if (map.pairs[i].first != static_cast<int>(i) + 1) {
                throw ValidationError("matches csv: non-contiguous frames for subject " + id);
            }
        }
    }
    return out;
}

} // namespace neurosig
