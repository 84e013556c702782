#include "neurosig/types.hpp"

#include <algorithm>

namespace neurosig {

ROIMask::ROIMask(GridDims dims, std::vector<std::int8_t> labels)
    : dims_(dims), labels_(std::move(labels)) {
    if (static_cast<std::int64_t>(labels_.size()) != dims_.voxel_count()) {
        throw ValidationError("mask label count does not match dims");
    }
    for (std::size_t i = 0; i < labels_.size(); ++i) {
        switch (labels_[i]) {
        case static_cast<std::int8_t>(VoxelLabel::kTarget):
            target_indices_.push_back(static_cast<std::int32_t>(i));
            break;
        case static_cast<std::int8_t>(VoxelLabel::kRest):
            rest_indices_.push_back(static_cast<std::int32_t>(i));
            break;
        case static_cast<std::int8_t>(VoxelLabel::kExcluded):
            break;
        default:
            throw ValidationError("mask label out of {-1,0,1} at voxel " + std::to_string(i));
        }
    }
}

void ROIMask::require_valid() const {
    if (target_indices_.empty()) throw ValidationError("mask has no target voxels");
    if (rest_indices_.empty()) throw ValidationError("mask has no rest voxels");
}

std::pair<std::vector<double>, std::vector<double>> split_frame(const VoxelGrid& grid,
                                                                const ROIMask& mask) {
    if (!(grid.dims == mask.dims())) {
        throw ValidationError("split_frame: grid dims do not match mask dims");
    }
    std::vector<double> target(mask.n_target());
    std::vector<double> rest(mask.n_rest());
    const auto& ti = mask.target_indices();
    const auto& ri = mask.rest_indices();
    for (std::size_t i = 0; i < ti.size(); ++i) target[i] = grid.values[static_cast<size_t>(ti[i])];
    for (std::size_t i = 0; i < ri.size(); ++i) rest[i] = grid.values[static_cast<size_t>(ri[i])];
    return {std::move(target), std::move(rest)};
}

Frame make_frame(VoxelGrid grid, const ROIMask& mask) {
    auto [target, rest] = split_frame(grid, mask);
    return Frame{std::move(grid), std::move(target), std::move(rest)};
}

VoxelGrid unsplit_frame(const std::vector<double>& target_vec,
                        const std::vector<double>& rest_vec, const ROIMask& mask, double fill) {
    if (target_vec.size() != mask.n_target() || rest_vec.size() != mask.n_rest()) {
        throw ValidationError("unsplit_frame: vector lengths do not match mask");
    }
    VoxelGrid grid{mask.dims(), std::vector<double>(static_cast<size_t>(mask.dims().voxel_count()), fill)};
    const auto& ti = mask.target_indices();
    const auto& ri = mask.rest_indices();
    for (std::size_t i = 0; i < ti.size(); ++i) grid.values[static_cast<size_t>(ti[i])] = target_vec[i];
    for (std::size_t i = 0; i < ri.size(); ++i) grid.values[static_cast<size_t>(ri[i])] = rest_vec[i];
    return grid;
}

std::vector<std::string> Cohort::trait_names() const {
    std::vector<std::string> names;
    for (const auto& f : trait_schema)
        if (f.type == TraitField::Type::kReal) names.push_back(f.name);
    return names;
}

std::vector<std::string> Cohort::label_names() const {
    std::vector<std::string> names;
    for (const auto& f : trait_schema)
        if (f.type == TraitField::Type::kBinary) names.push_back(f.name);
    return names;
}

Cohort Cohort::remapped(const ROIMask& new_mask) const {
    if (!(new_mask.dims() == mask.dims())) {
        throw ValidationError("remapped: new mask dims do not match cohort dims");
    }
    new_mask.require_valid();
    Cohort out;
    out.mask = new_mask;
    out.trait_schema = trait_schema;
    out.frames_per_session = frames_per_session;
    out.session_count = session_count;
    out.subjects.reserve(subjects.size());
    for (const auto& s : subjects) {
        SubjectRecord r;
        r.subject_id = s.subject_id;
        r.traits = s.traits;
        r.binary_labels = s.binary_labels;
        r.sessions.reserve(s.sessions.size());
        for (const auto& session : s.sessions) {
            std::vector<Frame> frames;
            frames.reserve(session.size());
            for (const auto& f : session) frames.push_back(make_frame(f.full, new_mask));
            r.sessions.push_back(std::move(frames));
        }
        out.subjects.push_back(std::move(r));
    }
    return out;
}

namespace {

bool all_finite(const std::vector<double>& v, std::size_t* bad_index = nullptr) {
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v[i])) {
            if (bad_index) *bad_index = i;
            return false;
        }
    }
    return true;
}

} // namespace

std::vector<Violation> validate_cohort(const Cohort& cohort) {
    std::vector<Violation> out;
    const auto add = [&out](std::string code, std::string msg, std::string sid = "",
                            int session = -1, int frame = -1) {
        out.push_back({std::move(code), std::move(msg), std::move(sid), session, frame});
    };

    if (cohort.mask.n_target() == 0 || cohort.mask.n_rest() == 0) {
        add("mask_invalid", "mask must contain at least one target and one rest voxel");
    }
    if (cohort.frames_per_session <= 0) {
        add("frame_count", "cohort frames_per_session must be positive");
    }

    for (const auto& s : cohort.subjects) {
        if (s.session_count() != cohort.session_count) {
            add("session_count",
                "subject has " + std::to_string(s.session_count()) + " sessions, expected " +
                    std::to_string(cohort.session_count),
                s.subject_id);
        }
        if (s.traits.size() != cohort.trait_names().size()) {
            add("trait_length",
                "subject has " + std::to_string(s.traits.size()) + " traits, expected " +
                    std::to_string(cohort.trait_names().size()),
                s.subject_id);
        }
        for (double y : s.traits) {
            if (!std::isfinite(y)) {
                add("non_finite", "non-finite trait value", s.subject_id);
                break;
            }
        }
        for (int m = 0; m < s.session_count(); ++m) {
            const auto& session = s.sessions[static_cast<size_t>(m)];
            if (static_cast<int>(session.size()) != cohort.frames_per_session) {
                add("frame_count",
                    "session has " + std::to_string(session.size()) + " frames, expected " +
                        std::to_string(cohort.frames_per_session),
                    s.subject_id, m);
            }
            for (int t = 0; t < static_cast<int>(session.size()); ++t) {
                const auto& f = session[static_cast<size_t>(t)];
                if (!(f.full.dims == cohort.mask.dims())) {
                    add("dims_mismatch", "frame dims do not match cohort mask", s.subject_id, m, t);
                    continue;
                }
                if (f.target_vec.size() != cohort.n_target() ||
                    f.rest_vec.size() != cohort.n_rest()) {
                    add("vector_length", "frame vector lengths do not match mask", s.subject_id,
                        m, t);
                }
                std::size_t bad = 0;
                if (!all_finite(f.full.values, &bad)) {
                    add("non_finite", "non-finite voxel value at index " + std::to_string(bad),
                        s.subject_id, m, t);
                }
            }
        }
    }
    return out;
}

} // namespace neurosig
