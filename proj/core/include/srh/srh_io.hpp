#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "srh/common.hpp"
#include "srh/image.hpp"

namespace srh::io {

// ---------------------------------------------------------------------------
// SRH1 slide file: magic "SRH1", little-endian u32 height, u32 width, then
// ch2845 then ch2930 as u16 row-major. Round-trips bit-exactly.
// ---------------------------------------------------------------------------

void write_slide(const RawSrhImage& img, const std::filesystem::path& path);
RawSrhImage read_slide(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Dataset manifest and patient-level splits.
// ---------------------------------------------------------------------------

struct ManifestEntry {
    std::string slide_path;
    std::string patient_id;
    std::string slide_id;
    ClassLabel label = ClassLabel::Nondiagnostic;
    std::string center;
};

struct DatasetManifest {
    std::vector<ManifestEntry> entries;

    std::vector<std::string> patient_ids() const;  // sorted, unique
    void validate() const;                         // slide_id uniqueness
};

void write_manifest(const DatasetManifest& m, const std::filesystem::path& path);
DatasetManifest read_manifest(const std::filesystem::path& path);

struct SplitSpec {
    std::set<std::string> train_patients;
    std::set<std::string> test_patients;
    std::uint64_t seed = 0;

    bool operator==(const SplitSpec&) const = default;
};

// Patient-disjoint split: |test| = round(test_fraction * #patients), at least
// one patient per side, deterministic for a fixed seed.
SplitSpec split_by_patient(const DatasetManifest& manifest, double test_fraction,
                           std::uint64_t seed);

}  // namespace srh::io
