#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace rfml {

// Base class for everything this library throws.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct InvalidArgument : Error {
    using Error::Error;
};
struct ShapeMismatch : Error {
    using Error::Error;
};
struct UnsupportedScheme : Error {
    using Error::Error;
};
struct InvalidWarp : Error {
    using Error::Error;
};
struct DegenerateSignal : Error {
    using Error::Error;
};
struct UnsupportedFormat : Error {
    using Error::Error;
};
struct CorruptDataset : Error {
    using Error::Error;
};
struct DegenerateKappa : Error {
    using Error::Error;
};
struct DegenerateReference : Error {
    using Error::Error;
};
struct MissingLabels : Error {
    using Error::Error;
};
struct NonFiniteGradient : Error {
    using Error::Error;
};
struct NonFiniteLoss : Error {
    NonFiniteLoss(const std::string& msg, std::int64_t batch) : Error(msg), batch_id(batch) {}
    std::int64_t batch_id;
};
struct SequenceTooLong : Error {
    using Error::Error;
};
struct IncompatibleCheckpoint : Error {
    using Error::Error;
};
struct CorruptCheckpoint : Error {
    using Error::Error;
};
struct InsufficientShots : Error {
    using Error::Error;
};
struct ConfigError : Error {
    using Error::Error;
};
struct IoError : Error {
    using Error::Error;
};

// SNR sentinel for a channel without additive noise. estimate_snr() returns it
// when the residual power is exactly zero.
inline constexpr double kNoiselessDb = std::numeric_limits<double>::infinity();

inline bool is_noiseless(double snr_db) { return std::isinf(snr_db) && snr_db > 0; }

// FNV-1a, used for config hashes and seed derivation from strings.
inline std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t fnv1a(const std::string& s, std::uint64_t h = 0xcbf29ce484222325ull) {
    return fnv1a(s.data(), s.size(), h);
}

}  // namespace rfml
