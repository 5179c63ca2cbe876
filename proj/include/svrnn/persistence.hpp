#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "svrnn/dataset.hpp"
#include "svrnn/models.hpp"

namespace svrnn {

/// Base of every file-format error.
class PersistenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class FormatError : public PersistenceError {
public:
    using PersistenceError::PersistenceError;
};

class VersionError : public PersistenceError {
public:
    using PersistenceError::PersistenceError;
};

class TruncationError : public PersistenceError {
public:
    using PersistenceError::PersistenceError;
};

class CountMismatchError : public PersistenceError {
public:
    using PersistenceError::PersistenceError;
};

class ChecksumError : public PersistenceError {
public:
    using PersistenceError::PersistenceError;
};

/// File missing, unreadable, or unwritable.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr std::uint16_t kDatasetVersion = 1;
inline constexpr std::uint16_t kCheckpointVersion = 1;

/// FNV-1a, 64-bit.
std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);

// Dataset file "SVTF":
//   magic[4] version:u16 N:u32 T:u32 H:u32 W:u32 flags:u8 meta_len:u32 meta[meta_len]
//   payload: N*T*H*W float32, order (datum, time, row, col)
// flags bit 0: support provenance, bit 1: generated provenance.
// Metadata is "key=value\n" lines; per-datum origins travel as origin.<i>.{centers,widths,theta0}.
std::vector<std::uint8_t> encode_dataset(const Dataset& ds);
Dataset decode_dataset(std::span<const std::uint8_t> bytes);
void write_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset read_dataset(const std::filesystem::path& path);

// Checkpoint file "SVCK":
//   magic[4] version:u16 kind:u8 arch_len:u32 arch[arch_len] count:u32
//   entries: name_len:u32 name rank:u32 extents:u64[rank] payload:f64[prod(extents)]
//   checksum:u64 (FNV-1a of every preceding byte)
struct Checkpoint {
    Architecture arch;
    ParamStore params;
};

std::vector<std::uint8_t> encode_checkpoint(const Architecture& arch, const ParamStore& params);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);
void write_checkpoint(const GenerativeModel& model, const std::filesystem::path& path);
void write_checkpoint(const Architecture& arch, const ParamStore& params, const std::filesystem::path& path);
Checkpoint read_checkpoint(const std::filesystem::path& path);
std::unique_ptr<GenerativeModel> load_model(const std::filesystem::path& path);

/// Binary PGM of frame t, min-max normalized over the whole datum. A constant datum maps to 128.
std::vector<std::uint8_t> encode_field_image(const Datum& datum, std::size_t t, std::size_t grid_side);
void export_field_image(const Datum& datum, std::size_t t, std::size_t grid_side, const std::filesystem::path& path);

std::string history_csv(const std::vector<LossBreakdown>& history);

/// Writes to a sibling temporary file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text_atomic(const std::filesystem::path& path, const std::string& text);
std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

}  // namespace svrnn
