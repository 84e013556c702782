#include "neurosig/io.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "neurosig/binio.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace neurosig {

std::string read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_bytes(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open file for writing: " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("write failed: " + path);
}

namespace {

constexpr char kVolumeMagic[4] = {'N', 'F', 'S', 'G'};
constexpr std::size_t kHeaderSize = 24;

std::string encode_header(const GridDims& dims, std::uint32_t frame_count) {
    std::string out;
    out.append(kVolumeMagic, 4);
    put_u32_le(out, kVolumeFormatVersion);
    put_u32_le(out, static_cast<std::uint32_t>(dims.h));
    put_u32_le(out, static_cast<std::uint32_t>(dims.w));
    put_u32_le(out, static_cast<std::uint32_t>(dims.d));
    put_u32_le(out, frame_count);
    return out;
}

struct Header {
    GridDims dims;
    std::uint32_t frame_count = 0;
};

Header decode_header(const std::string& bytes, const std::string& context) {
    if (bytes.size() < kHeaderSize) {
        throw ValidationError(context + ": file shorter than 24-byte header");
    }
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    if (std::memcmp(p, kVolumeMagic, 4) != 0) {
        throw ValidationError(context + ": bad magic, expected NFSG");
    }
    const std::uint32_t version = get_u32_le(p + 4);
    if (version != kVolumeFormatVersion) {
        throw ValidationError(context + ": unsupported format version " + std::to_string(version));
    }
    Header h;
    h.dims.h = static_cast<int>(get_u32_le(p + 8));
    h.dims.w = static_cast<int>(get_u32_le(p + 12));
    h.dims.d = static_cast<int>(get_u32_le(p + 16));
    h.frame_count = get_u32_le(p + 20);
    if (h.dims.h <= 0 || h.dims.w <= 0 || h.dims.d <= 0) {
        throw ValidationError(context + ": non-positive dims in header");
    }
    return h;
}

} // namespace

std::string encode_volume_series(const VolumeSeries& series) {
    std::string out = encode_header(series.dims, static_cast<std::uint32_t>(series.frame_count));
    const std::size_t voxels = static_cast<std::size_t>(series.dims.voxel_count());
    out.reserve(out.size() + 4 * voxels * series.frames.size());
    for (const auto& frame : series.frames) {
        if (frame.size() != voxels) throw Error("encode_volume_series: frame length mismatch");
        for (double v : frame) put_f32_le(out, static_cast<float>(v));
    }
    return out;
}

VolumeSeries decode_volume_series(const std::string& bytes, const std::string& context) {
    const Header h = decode_header(bytes, context);
    const std::size_t voxels = static_cast<std::size_t>(h.dims.voxel_count());
    const std::size_t expected = kHeaderSize + 4 * voxels * h.frame_count;
    if (bytes.size() != expected) {
        throw ValidationError(context + ": frame size mismatch, expected " +
                              std::to_string(expected) + " bytes, got " +
                              std::to_string(bytes.size()));
    }
    VolumeSeries series;
    series.dims = h.dims;
    series.frame_count = static_cast<int>(h.frame_count);
    series.frames.resize(h.frame_count);
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data()) + kHeaderSize;
    for (auto& frame : series.frames) {
        frame.resize(voxels);
        for (std::size_t i = 0; i < voxels; ++i, p += 4) frame[i] = get_f32_le(p);
    }
    return series;
}

std::string encode_mask(const ROIMask& mask) {
    std::string out = encode_header(mask.dims(), 1);
    out.reserve(out.size() + mask.labels().size());
    for (std::int8_t label : mask.labels()) out.push_back(static_cast<char>(label));
    return out;
}

ROIMask decode_mask(const std::string& bytes, const std::string& context) {
    const Header h = decode_header(bytes, context);
    if (h.frame_count != 1) {
        throw ValidationError(context + ": mask file must have frame count 1");
    }
    const std::size_t voxels = static_cast<std::size_t>(h.dims.voxel_count());
    if (bytes.size() != kHeaderSize + voxels) {
        throw ValidationError(context + ": mask size mismatch");
    }
    std::vector<std::int8_t> labels(voxels);
    std::memcpy(labels.data(), bytes.data() + kHeaderSize, voxels);
    return ROIMask(h.dims, std::move(labels));
}

void write_volume_series(const std::string& path, const VolumeSeries& series) {
    write_file_bytes(path, encode_volume_series(series));
}

VolumeSeries read_volume_series(const std::string& path) {
    return decode_volume_series(read_file_bytes(path), path);
}

void write_mask_file(const std::string& path, const ROIMask& mask) {
    write_file_bytes(path, encode_mask(mask));
}

ROIMask read_mask_file(const std::string& path) {
    return decode_mask(read_file_bytes(path), path);
}

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open file: " + path);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::size_t start = 0;
        for (;;) {
            const std::size_t comma = line.find(',', start);
            if (comma == std::string::npos) {
                cells.push_back(line.substr(start));
                break;
            }
            cells.push_back(line.substr(start, comma - start));
            start = comma + 1;
        }
        rows.push_back(std::move(cells));
    }
    return rows;
}

namespace {

fs::path resolve_manifest(const std::string& manifest_path) {
    fs::path p(manifest_path);
    if (fs::is_directory(p)) p /= "manifest.json";
    if (!fs::exists(p)) throw ValidationError("manifest not found: " + p.string());
    return p;
}

json parse_manifest(const fs::path& p) {
    json m;
    try {
        std::ifstream in(p);
        m = json::parse(in);
    } catch (const json::exception& e) {
        throw ValidationError("manifest parse error in " + p.string() + ": " + e.what());
    }
    if (m.value("schema_version", 0u) != kManifestSchemaVersion) {
        throw ValidationError("unsupported manifest schema_version in " + p.string());
    }
    return m;
}

Cohort load_cohort_impl(const std::string& manifest_path, bool use_alternate_mask) {
    const fs::path mpath = resolve_manifest(manifest_path);
    const fs::path dir = mpath.parent_path();
    const json m = parse_manifest(mpath);

    Cohort cohort;
    const auto dims_arr = m.at("dims");
    if (!dims_arr.is_array() || dims_arr.size() != 3) {
        throw ValidationError("manifest dims must be [H,W,D]");
    }
    GridDims dims{dims_arr[0].get<int>(), dims_arr[1].get<int>(), dims_arr[2].get<int>()};
    cohort.frames_per_session = m.at("frames_per_session").get<int>();
    cohort.session_count = m.at("session_count").get<int>();
    if (cohort.frames_per_session <= 0 || cohort.session_count <= 0) {
        throw ValidationError("manifest frames_per_session and session_count must be positive");
    }

    std::string mask_file = m.at("mask").get<std::string>();
    if (use_alternate_mask) {
        if (!m.contains("alternate_mask")) {
            throw ValidationError("manifest declares no alternate_mask: " + mpath.string());
        }
        mask_file = m.at("alternate_mask").get<std::string>();
    }
    cohort.mask = read_mask_file((dir / mask_file).string());
    if (!(cohort.mask.dims() == dims)) {
        throw ValidationError("mask dims do not match manifest dims");
    }
    cohort.mask.require_valid();

    for (const auto& f : m.at("trait_schema")) {
        TraitField field;
        field.name = f.at("name").get<std::string>();
        const std::string type = f.at("type").get<std::string>();
        if (type == "real") {
            field.type = TraitField::Type::kReal;
        } else if (type == "binary") {
            field.type = TraitField::Type::kBinary;
        } else {
            throw ValidationError("unknown trait type '" + type + "' for " + field.name);
        }
        cohort.trait_schema.push_back(field);
    }

    // traits.csv: header "subject_id,<trait names...>", order must match schema
    const auto rows = read_csv((dir / m.at("traits").get<std::string>()).string());
    if (rows.empty() || rows[0].empty() || rows[0][0] != "subject_id") {
        throw ValidationError("traits.csv must start with a subject_id header row");
    }
    if (rows[0].size() != cohort.trait_schema.size() + 1) {
        throw ValidationError("traits.csv has " + std::to_string(rows[0].size() - 1) +
                              " trait columns, schema has " +
                              std::to_string(cohort.trait_schema.size()));
    }
    for (std::size_t i = 0; i < cohort.trait_schema.size(); ++i) {
        if (rows[0][i + 1] != cohort.trait_schema[i].name) {
            throw ValidationError("unknown trait column '" + rows[0][i + 1] +
                                  "', schema expects '" + cohort.trait_schema[i].name + "'");
        }
    }
    std::map<std::string, std::vector<std::string>> trait_rows;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        if (rows[r].size() != rows[0].size()) {
            throw ValidationError("traits.csv row " + std::to_string(r) + " has wrong cell count");
        }
        trait_rows[rows[r][0]] = rows[r];
    }

    for (const auto& subj : m.at("subjects")) {
        SubjectRecord rec;
        rec.subject_id = subj.at("id").get<std::string>();
        const auto& session_files = subj.at("sessions");
        if (static_cast<int>(session_files.size()) != cohort.session_count) {
            throw ValidationError("subject " + rec.subject_id + ": expected " +
                                  std::to_string(cohort.session_count) + " session files, got " +
                                  std::to_string(session_files.size()));
        }
        for (std::size_t mi = 0; mi < session_files.size(); ++mi) {
            const std::string fname = session_files[mi].get<std::string>();
            const std::string context = "subject " + rec.subject_id + " session " +
                                        std::to_string(mi + 1) + " (" + fname + ")";
            VolumeSeries series =
                decode_volume_series(read_file_bytes((dir / fname).string()), context);
            if (!(series.dims == dims)) {
                throw ValidationError(context + ": dims do not match manifest");
            }
            if (series.frame_count != cohort.frames_per_session) {
                throw ValidationError(context + ": has " + std::to_string(series.frame_count) +
                                      " frames, expected " +
                                      std::to_string(cohort.frames_per_session));
            }
            std::vector<Frame> frames;
            frames.reserve(series.frames.size());
            for (std::size_t t = 0; t < series.frames.size(); ++t) {
                for (double v : series.frames[t]) {
                    if (!std::isfinite(v)) {
                        throw ValidationError(context + " frame " + std::to_string(t + 1) +
                                              ": non-finite voxel value");
                    }
                }
                frames.push_back(make_frame(VoxelGrid{dims, std::move(series.frames[t])},
                                            cohort.mask));
            }
            rec.sessions.push_back(std::move(frames));
        }

        const auto it = trait_rows.find(rec.subject_id);
        if (it == trait_rows.end()) {
            throw ValidationError("subject " + rec.subject_id + " missing from traits.csv");
        }
        for (std::size_t i = 0; i < cohort.trait_schema.size(); ++i) {
            const std::string& cell = it->second[i + 1];
            double value = 0;
            try {
                value = std::stod(cell);
            } catch (const std::exception&) {
                throw ValidationError("subject " + rec.subject_id + ": bad trait value '" + cell +
                                      "' in column " + cohort.trait_schema[i].name);
            }
            if (cohort.trait_schema[i].type == TraitField::Type::kReal) {
                rec.traits.push_back(value);
            } else {
                rec.binary_labels[cohort.trait_schema[i].name] = value != 0.0;
            }
        }
        cohort.subjects.push_back(std::move(rec));
    }

    const auto violations = validate_cohort(cohort);
    if (!violations.empty()) {
        throw ValidationError("cohort validation failed: " + violations.front().code + " (" +
                              violations.front().message + ")");
    }
    return cohort;
}

} // namespace

Cohort load_cohort(const std::string& manifest_path) {
    return load_cohort_impl(manifest_path, false);
}

Cohort load_cohort_alternate_roi(const std::string& manifest_path) {
    return load_cohort_impl(manifest_path, true);
}

bool manifest_has_alternate_mask(const std::string& manifest_path) {
    const fs::path mpath = resolve_manifest(manifest_path);
    return parse_manifest(mpath).contains("alternate_mask");
}

} // namespace neurosig
