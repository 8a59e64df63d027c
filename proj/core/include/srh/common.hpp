#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace srh {

// ---------------------------------------------------------------------------
// Error types. Thrown on contract violations; message carries context.
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct FormatError : Error { using Error::Error; };      // malformed file header / magic
struct SizeError : Error { using Error::Error; };        // truncated payload, bad dimensions
struct ShapeError : Error { using Error::Error; };       // tensor / matrix dimension mismatch
struct ContractError : Error { using Error::Error; };    // precondition violated
struct LabelError : Error { using Error::Error; };       // label not admissible for the operation
struct StateError : Error { using Error::Error; };       // missing cached state
struct DegenerateNormError : Error { using Error::Error; };
struct SplitError : Error { using Error::Error; };
struct LeakageError : Error { using Error::Error; };     // train/test patient overlap
struct DegeneracyError : Error { using Error::Error; };  // all-identical tsne inputs

// ---------------------------------------------------------------------------
// Class labels. Index order is fixed; ties everywhere break toward the
// lowest index. The first five are tumor classes, the last three nontumor.
// ---------------------------------------------------------------------------

enum class ClassLabel : std::uint8_t {
    PituitaryAdenoma = 0,
    Meningioma = 1,
    Schwannoma = 2,
    Lymphoma = 3,
    Metastasis = 4,
    NormalBrain = 5,
    NormalPituitary = 6,
    Nondiagnostic = 7,
};

inline constexpr int kNumClasses = 8;
inline constexpr int kNumTumorClasses = 5;

inline constexpr std::array<std::string_view, kNumClasses> kClassNames = {
    "pituitary_adenoma", "meningioma", "schwannoma", "lymphoma",
    "metastasis",        "normal_brain", "normal_pituitary", "nondiagnostic",
};

inline bool is_tumor_class(ClassLabel c) {
    return static_cast<int>(c) < kNumTumorClasses;
}

inline std::string_view class_name(ClassLabel c) {
    return kClassNames[static_cast<int>(c)];
}

std::optional<ClassLabel> class_from_name(std::string_view name);

// ---------------------------------------------------------------------------
// Deterministic RNG. std::mt19937_64 has a standard-specified sequence but
// the <random> distributions do not, so conversions are done by hand to keep
// generated slides bit-identical across compilers.
// ---------------------------------------------------------------------------

// splitmix64; used to derive independent stream seeds from (seed, index) pairs.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ULL) {}

    std::uint64_t next_u64();
    std::uint32_t next_u32() { return static_cast<std::uint32_t>(next_u64() >> 32); }

    // uniform in [0, 1)
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * (1.0 / 9007199254740992.0);
    }
    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // uniform integer in [0, n)
    std::uint64_t next_below(std::uint64_t n);

    // standard normal via Box-Muller (no cached spare; one sample per call)
    double normal();

private:
    std::uint64_t state_;  // xorshift* state
};

}  // namespace srh
