#include "srh/srh_io.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

namespace srh::io {

namespace {

constexpr char kMagic[4] = {'S', 'R', 'H', '1'};

void put_u32(std::ofstream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v),
                          static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::ifstream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 |
           std::uint32_t(b[3]) << 24;
}

void write_u16_plane(std::ofstream& out, const std::vector<std::uint16_t>& plane) {
    std::vector<unsigned char> buf(plane.size() * 2);
    for (std::size_t i = 0; i < plane.size(); ++i) {
        buf[2 * i] = static_cast<unsigned char>(plane[i]);
        buf[2 * i + 1] = static_cast<unsigned char>(plane[i] >> 8);
    }
    out.write(reinterpret_cast<const char*>(buf.data()), std::streamsize(buf.size()));
}

void read_u16_plane(std::ifstream& in, std::vector<std::uint16_t>& plane, std::size_t n,
                    const std::filesystem::path& path) {
    std::vector<unsigned char> buf(n * 2);
    in.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size()));
    if (std::size_t(in.gcount()) != buf.size())
        throw SizeError("truncated SRH1 payload: " + path.string());
    plane.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        plane[i] = std::uint16_t(buf[2 * i]) | std::uint16_t(buf[2 * i + 1]) << 8;
}

}  // namespace

void write_slide(const RawSrhImage& img, const std::filesystem::path& path) {
    std::size_t n = img.pixel_count();
    if (img.ch2845.size() != n || img.ch2930.size() != n)
        throw SizeError("channel length does not match dimensions");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open for write: " + path.string());
    out.write(kMagic, 4);
    put_u32(out, img.height);
    put_u32(out, img.width);
    write_u16_plane(out, img.ch2845);
    write_u16_plane(out, img.ch2930);
    if (!out) throw Error("write failed: " + path.string());
}

RawSrhImage read_slide(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open: " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (in.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0)
        throw FormatError("bad SRH1 magic: " + path.string());
    RawSrhImage img;
    img.height = get_u32(in);
    img.width = get_u32(in);
    if (!in) throw FormatError("truncated SRH1 header: " + path.string());
    std::size_t n = img.pixel_count();
    read_u16_plane(in, img.ch2845, n, path);
    read_u16_plane(in, img.ch2930, n, path);
    return img;
}

std::vector<std::string> DatasetManifest::patient_ids() const {
    std::vector<std::string> ids;
    ids.reserve(entries.size());
    for (const auto& e : entries) ids.push_back(e.patient_id);
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return ids;
}

void DatasetManifest::validate() const {
    std::set<std::string> seen;
    for (const auto& e : entries) {
        if (!seen.insert(e.slide_id).second)
            throw ContractError("duplicate slide_id in manifest: " + e.slide_id);
    }
}

void write_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& e : m.entries) {
        arr.push_back({{"path", e.slide_path},
                       {"patient_id", e.patient_id},
                       {"slide_id", e.slide_id},
                       {"label", std::string(class_name(e.label))},
                       {"center", e.center}});
    }
    std::ofstream out(path);
    if (!out) throw Error("cannot open for write: " + path.string());
    out << arr.dump(2) << "\n";
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open: " + path.string());
    nlohmann::json arr = nlohmann::json::parse(in, nullptr, /*allow_exceptions=*/false);
    if (arr.is_discarded() || !arr.is_array())
        throw FormatError("manifest is not a JSON array: " + path.string());
    DatasetManifest m;
    for (const auto& j : arr) {
        ManifestEntry e;
        e.slide_path = j.at("path").get<std::string>();
        e.patient_id = j.at("patient_id").get<std::string>();
        e.slide_id = j.at("slide_id").get<std::string>();
        e.center = j.value("center", "synthetic");
        auto label = class_from_name(j.at("label").get<std::string>());
        if (!label) throw FormatError("unknown class label in manifest: " + j.at("label").dump());
        e.label = *label;
        m.entries.push_back(std::move(e));
    }
    m.validate();
    return m;
}

SplitSpec split_by_patient(const DatasetManifest& manifest, double test_fraction,
                           std::uint64_t seed) {
    if (manifest.entries.empty()) throw ContractError("empty manifest");
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw ContractError("test_fraction must lie in (0, 1)");
    auto patients = manifest.patient_ids();
    if (patients.size() < 2) throw SplitError("need at least 2 patients to split");

    // Fisher-Yates over the sorted id list keeps the split a pure function of
    // (patients, seed), independent of manifest entry order.
    Rng rng(mix_seed(seed, 0x5e17));
    for (std::size_t i = patients.size() - 1; i > 0; --i) {
        std::size_t j = std::size_t(rng.next_below(i + 1));
        std::swap(patients[i], patients[j]);
    }

    std::size_t n_test = std::size_t(std::llround(test_fraction * double(patients.size())));
    n_test = std::clamp<std::size_t>(n_test, 1, patients.size() - 1);

    SplitSpec split;
    split.seed = seed;
    for (std::size_t i = 0; i < patients.size(); ++i) {
        if (i < n_test)
            split.test_patients.insert(patients[i]);
        else
            split.train_patients.insert(patients[i]);
    }
    return split;
}

}  // namespace srh::io
