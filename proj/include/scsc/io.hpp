#pragma once

#include <scsc/core.hpp>

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace scsc {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Images -----------------------------------------------------------------------

// 8-bit grayscale PNG or binary PGM (P5, maxval <= 255), scaled to [0, 1].
Signal read_image(const std::filesystem::path& path);

// Writes values clamped to [0, 1] as 8-bit grayscale; format from extension
// (.png or .pgm).
void write_image(const std::filesystem::path& path, const Signal& image);

// Affine map of the image's [min, max] onto [0, 1] (constant images map to 0).
Signal rescale_for_display(const Signal& image);

// Sorted list of .png/.pgm files in a directory, or the path itself if it is
// a file.
std::vector<std::filesystem::path> list_images(const std::filesystem::path& path);

// Dictionary files (.cscd) -------------------------------------------------------
//
//   offset  size      field
//   0       4         magic "CSCD"
//   4       2         format version (u16 LE, currently 1)
//   6       4         K (u32 LE)
//   10      4         filter side m (u32 LE)
//   14      8*K*m*m   coefficients, f64 LE, filter-major, row-major filters
//   end-4   4         CRC-32 (zlib polynomial) of the coefficient bytes, u32 LE

inline constexpr std::uint16_t kDictionaryFormatVersion = 1;

std::vector<std::uint8_t> encode_dictionary(const Dictionary& dict);
Dictionary decode_dictionary(std::span<const std::uint8_t> bytes);
void write_dictionary(const std::filesystem::path& path, const Dictionary& dict);
Dictionary read_dictionary(const std::filesystem::path& path);

// Filters tiled on a ceil(sqrt(K)) grid, each min-max normalized, with a
// one-pixel border.
Signal filter_mosaic(const Dictionary& dict);

// CSV ----------------------------------------------------------------------------

inline constexpr const char* kTraceHeader =
    "iter,wall_s,objective,test_objective,test_psnr_db,nnz_frac";

std::string trace_to_csv(const TrainTrace& trace);
TrainTrace trace_from_csv(const std::string& text);
void write_trace(const std::filesystem::path& path, const TrainTrace& trace);
TrainTrace read_trace(const std::filesystem::path& path);

// Splits one RFC-4180 document into records of fields.
std::vector<std::vector<std::string>> parse_csv(const std::string& text);

// Shortest decimal text that round-trips to the same double.
std::string format_double(double v);

void write_text(const std::filesystem::path& path, const std::string& text);
// CRC-32 (zlib polynomial) of a file's bytes.
std::uint32_t file_crc32(const std::filesystem::path& path);
std::string read_text(const std::filesystem::path& path);

}  // namespace scsc
