#pragma once

#include <map>
#include <string>
#include <vector>

#include "neurosig/types.hpp"

namespace neurosig {

// Cross-session frame matching in rest-of-brain space. Frame indices are
// 1-based here and in the CSV dump; many-to-one matches are allowed.
struct MatchMap {
    std::string subject_id;
    std::vector<std::pair<int, int>> pairs; // (t, u_t) for t = 1..T
    std::vector<double> distances;          // Euclidean distance per pair

    int match_of(int t) const { return pairs[static_cast<size_t>(t - 1)].second; }
};

// For each session-1 frame, the session-2 frame with the nearest rest vector;
// exhaustive O(T^2) scan, ties to the smallest session-2 index.
MatchMap match_frames(const SubjectRecord& subject);

std::map<std::string, MatchMap> match_all(const Cohort& cohort, int threads = 1);

void write_matches_csv(const std::string& path, const std::map<std::string, MatchMap>& matches);
std::map<std::string, MatchMap> read_matches_csv(const std::string& path);

} // namespace neurosig
