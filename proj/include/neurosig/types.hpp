#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "neurosig/common.hpp"

namespace neurosig {

// Voxel ordering everywhere is row-major with H outermost and D innermost:
// index = (h * W + w) * D + d. Checkpoints and signatures rely on this.
struct GridDims {
    int h = 0, w = 0, d = 0;

    std::int64_t voxel_count() const {
        return static_cast<std::int64_t>(h) * w * d;
    }
    bool operator==(const GridDims&) const = default;
};

struct VoxelGrid {
    GridDims dims;
    std::vector<double> values; // length h*w*d, finite

    double& at(int h, int w, int d) {
        return values[static_cast<size_t>((h * dims.w + w) * dims.d + d)];
    }
    double at(int h, int w, int d) const {
        return values[static_cast<size_t>((h * dims.w + w) * dims.d + d)];
    }
};

enum class VoxelLabel : std::int8_t {
    kExcluded = -1,
    kRest = 0,
    kTarget = 1,
};

// Binary ROI partition. Target is the modulated region (amygdala-like),
// rest is the clustering/matching space, excluded voxels appear in neither.
class ROIMask {
public:
    ROIMask() = default;
    ROIMask(GridDims dims, std::vector<std::int8_t> labels);

    const GridDims& dims() const { return dims_; }
    const std::vector<std::int8_t>& labels() const { return labels_; }
    // ascending row-major voxel indices per role
    const std::vector<std::int32_t>& target_indices() const { return target_indices_; }
    const std::vector<std::int32_t>& rest_indices() const { return rest_indices_; }
    std::size_t n_target() const { return target_indices_.size(); }
    std::size_t n_rest() const { return rest_indices_.size(); }

    void require_valid() const; // throws ValidationError unless >=1 target and >=1 rest

private:
    GridDims dims_;
    std::vector<std::int8_t> labels_;
    std::vector<std::int32_t> target_indices_;
    std::vector<std::int32_t> rest_indices_;
};

struct Frame {
    VoxelGrid full;
    std::vector<double> target_vec; // target voxels, ascending index order
    std::vector<double> rest_vec;   // rest voxels, ascending index order
};

// (target_vec, rest_vec) extracted from a grid under a mask.
std::pair<std::vector<double>, std::vector<double>> split_frame(const VoxelGrid& grid,
                                                                const ROIMask& mask);

Frame make_frame(VoxelGrid grid, const ROIMask& mask);

// Scatter (target_vec, rest_vec) back into a grid; excluded voxels get `fill`.
// Inverse of split_frame on non-excluded voxels.
VoxelGrid unsplit_frame(const std::vector<double>& target_vec,
                        const std::vector<double>& rest_vec, const ROIMask& mask,
                        double fill = 0.0);

struct SubjectRecord {
    std::string subject_id;
    std::vector<std::vector<Frame>> sessions; // M sessions of T frames
    std::vector<double> traits;
    std::map<std::string, bool> binary_labels;

    int session_count() const { return static_cast<int>(sessions.size()); }
};

struct TraitField {
    enum class Type { kReal, kBinary };
    std::string name;
    Type type = Type::kReal;
    bool operator==(const TraitField&) const = default;
};

struct Cohort {
    std::vector<SubjectRecord> subjects;
    ROIMask mask;
    std::vector<TraitField> trait_schema; // real traits first, then binary labels
    int frames_per_session = 0;           // T
    int session_count = 0;                // M

    std::size_t n_target() const { return mask.n_target(); }
    std::size_t n_rest() const { return mask.n_rest(); }

    std::vector<std::string> trait_names() const;  // real-typed entries
    std::vector<std::string> label_names() const;  // binary-typed entries

    // Rebuild every frame's target/rest vectors from the stored full grids
    // under a different mask (alternative-ROI runs).
    Cohort remapped(const ROIMask& new_mask) const;
};

struct Violation {
    std::string code; // machine readable: frame_count, non_finite, ...
    std::string message;
    std::string subject_id; // empty when cohort-level
    int session = -1;       // 0-based, -1 when n/a
    int frame = -1;         // 0-based, -1 when n/a
};

// Checks every type invariant; violations are data, not failures.
std::vector<Violation> validate_cohort(const Cohort& cohort);

} // namespace neurosig
