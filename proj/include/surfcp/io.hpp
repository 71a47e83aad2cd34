#pragma once

// File formats: the binary dataset container, long-format CSV, the true
// kernel sidecar and the study / rolling / band outputs.
//
// Dataset container, little-endian:
//   "FTS2"  u16 version (1)  u32 N1  u32 N2  u32 T  u8 flags (bit0: mask)
//   [mask: N1*N2 bytes, 0/1, row-major]
//   u: N1 float64   v: N2 float64
//   T frames of N1*N2 float64, row-major
// The declared sizes must account for every byte of the payload.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "surfcp/conformal.hpp"
#include "surfcp/far.hpp"
#include "surfcp/grid.hpp"
#include "surfcp/pipeline.hpp"
#include "surfcp/simulate.hpp"

namespace surfcp {

inline constexpr std::uint16_t kDatasetVersion = 1;

std::vector<std::uint8_t> encode_dataset(const FtsDataset& ds);
FtsDataset decode_dataset(std::span<const std::uint8_t> bytes);

void write_dataset(const std::string& path, const FtsDataset& ds);
FtsDataset read_dataset(const std::string& path);

std::vector<std::uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, std::span<const std::uint8_t> bytes);
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view text);

/// Shortest decimal that parses back to the same double; "NA" for NaN,
/// "inf" / "-inf" for infinities.
std::string format_double(double x);
double parse_double(std::string_view text);

/// Long-format CSV "t,i,j,value" (0-based indices, header optional on input)
/// and mask CSV "i,j,inside". Every cell of every frame must appear once.
FtsDataset parse_csv(std::string_view values, std::optional<std::string_view> mask = std::nullopt);
std::string format_values_csv(const FtsDataset& ds);
std::string format_mask_csv(const Mask& mask);

FtsDataset import_csv(const std::string& values_path, const std::optional<std::string>& mask_path);
void export_csv(const FtsDataset& ds, const std::string& values_path, const std::optional<std::string>& mask_path);

std::string kernel_to_json(const TrueKernel& kernel);
TrueKernel kernel_from_json(std::string_view text);

inline constexpr std::string_view kStudyHeader = "method,T,b,rep,covered,band_size,seed";
inline constexpr std::string_view kAggregateHeader =
    "method,T,b,n_reps,n_failed,coverage,ci_lower,ci_upper,mean_size,median_size";
inline constexpr std::string_view kRollingHeader =
    "shift,covered,covered_differenced,band_size,radius,seed,status,error";

std::string format_study_csv(const std::vector<StudyRecord>& records);
std::string format_aggregate_csv(const std::vector<StudyAggregate>& aggregates);
/// Inverse of format_study_csv (failure reasons are not stored).
std::vector<StudyRecord> parse_study_csv(std::string_view text);

std::string format_rolling_csv(const RollingReport& report);

/// Grid payloads as single-frame datasets.
FtsDataset surface_dataset(const Surface& s, const GridDomain& d, const std::optional<Mask>& mask);

struct BandFiles {
  std::string center;
  std::string lower;
  std::string upper;
  std::string sidecar;
};

BandFiles band_file_names(const std::string& prefix);

}  // namespace surfcp
