#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "neurosig/types.hpp"

namespace neurosig {

// Cohort directory format
// -----------------------
// manifest.json     schema version, dims, T, M, trait schema, subject list,
//                   mask file, traits file, optional alternate mask file
// <subject>_sN.bin  24-byte header (magic "NFSG", version u32, H, W, D, T as
//                   u32, little-endian) + T*H*W*D float32 LE values
// mask.bin          same header with T=1, then H*W*D int8 labels
//                   {1=target, 0=rest, -1=excluded}
// traits.csv        header row "subject_id,<trait names...>"; binary traits
//                   are written as 0/1

inline constexpr std::uint32_t kVolumeFormatVersion = 1;
inline constexpr std::uint32_t kManifestSchemaVersion = 1;

struct VolumeSeries {
    GridDims dims;
    int frame_count = 0;
    std::vector<std::vector<double>> frames; // frame_count grids of h*w*d values
};

std::string encode_volume_series(const VolumeSeries& series);
VolumeSeries decode_volume_series(const std::string& bytes, const std::string& context);

std::string encode_mask(const ROIMask& mask);
ROIMask decode_mask(const std::string& bytes, const std::string& context);

void write_volume_series(const std::string& path, const VolumeSeries& series);
VolumeSeries read_volume_series(const std::string& path);
void write_mask_file(const std::string& path, const ROIMask& mask);
ROIMask read_mask_file(const std::string& path);

// Loads and fully validates a cohort directory (path to manifest.json or to
// the directory containing it). Errors carry subject id and frame context.
Cohort load_cohort(const std::string& manifest_path);

// Loads the cohort remapped onto the alternate ROI mask declared in the
// manifest; throws ValidationError when the manifest declares none.
Cohort load_cohort_alternate_roi(const std::string& manifest_path);

bool manifest_has_alternate_mask(const std::string& manifest_path);

// CSV helpers shared by the CLI (matches, signatures, readout tables).
std::vector<std::vector<std::string>> read_csv(const std::string& path);

} // namespace neurosig
