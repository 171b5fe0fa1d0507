#include <scsc/io.hpp>

#include <png.h>
#include <zlib.h>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace scsc {

namespace fs = std::filesystem;

namespace {

std::string lower_extension(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const fs::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

Signal read_png(const fs::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str()))
    throw IoError("cannot read PNG " + path.string() + ": " + image.message);
  if (image.format & PNG_FORMAT_FLAG_COLOR) {
    png_image_free(&image);
    throw IoError("PNG is not grayscale: " + path.string());
  }
  image.format = PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr))
    throw IoError("cannot decode PNG " + path.string() + ": " + image.message);
  Signal s(int(image.height), int(image.width));
  for (Index i = 0; i < s.size(); ++i) s.data()[i] = buf[i] / 255.0;
  return s;
}

// Skips whitespace and '#' comments in a PGM header.
std::size_t skip_pgm_space(const std::vector<std::uint8_t>& b, std::size_t pos) {
  while (pos < b.size()) {
    if (b[pos] == '#') {
      while (pos < b.size() && b[pos] != '\n') ++pos;
    } else if (std::isspace(b[pos])) {
      ++pos;
    } else {
      break;
    }
  }
  return pos;
}

long read_pgm_int(const std::vector<std::uint8_t>& b, std::size_t& pos, const fs::path& path) {
  pos = skip_pgm_space(b, pos);
  long v = 0;
  const std::size_t begin = pos;
  while (pos < b.size() && std::isdigit(b[pos])) v = v * 10 + (b[pos++] - '0');
  if (pos == begin) throw IoError("malformed PGM header in " + path.string());
  return v;
}

Signal read_pgm(const fs::path& path) {
  const auto b = read_bytes(path);
  if (b.size() < 2 || b[0] != 'P' || b[1] != '5') throw IoError("not a binary PGM: " + path.string());
  std::size_t pos = 2;
  const long width = read_pgm_int(b, pos, path);
  const long height = read_pgm_int(b, pos, path);
  const long maxval = read_pgm_int(b, pos, path);
  if (width < 1 || height < 1) throw IoError("PGM has empty dimensions: " + path.string());
  if (maxval < 1 || maxval > 255) throw IoError("only 8-bit PGM is supported: " + path.string());
  ++pos;  // single whitespace after maxval
  if (b.size() < pos + std::size_t(width * height)) throw IoError("truncated PGM: " + path.string());
  Signal s(height, width);
  for (Index i = 0; i < s.size(); ++i) s.data()[i] = b[pos + i] / double(maxval);
  return s;
}

std::vector<std::uint8_t> to_bytes(const Signal& image) {
  std::vector<std::uint8_t> px(std::size_t(image.size()));
  for (Index i = 0; i < image.size(); ++i) {
    const double v = std::clamp(image.data()[i], 0.0, 1.0);
    px[i] = std::uint8_t(std::lround(v * 255.0));
  }
  return px;
}

template <class T>
void put_le(std::vector<std::uint8_t>& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(std::uint8_t(v >> (8 * i)));
}

template <class T>
T get_le(std::span<const std::uint8_t> b, std::size_t pos) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= T(b[pos + i]) << (8 * i);
  return v;
}

std::optional<double> parse_optional(const std::string& field) {
  if (field.empty()) return std::nullopt;
  return std::stod(field);
}

}  // namespace

// Images -----------------------------------------------------------------------

Signal read_image(const fs::path& path) {
  if (!fs::exists(path)) throw IoError("no such file: " + path.string());
  const std::string ext = lower_extension(path);
  if (ext == ".png") return read_png(path);
  if (ext == ".pgm") return read_pgm(path);
  throw IoError("unsupported image format: " + path.string());
}

void write_image(const fs::path& path, const Signal& image) {
  const auto px = to_bytes(image);
  const std::string ext = lower_extension(path);
  if (ext == ".png") {
    png_image out;
    std::memset(&out, 0, sizeof out);
    out.version = PNG_IMAGE_VERSION;
    out.width = png_uint_32(image.cols());
    out.height = png_uint_32(image.rows());
    out.format = PNG_FORMAT_GRAY;
    if (!png_image_write_to_file(&out, path.string().c_str(), 0, px.data(), 0, nullptr))
      throw IoError("cannot write PNG " + path.string() + ": " + out.message);
    return;
  }
  if (ext == ".pgm") {
    std::ostringstream header;
    header << "P5\n" << image.cols() << " " << image.rows() << "\n255\n";
    const std::string h = header.str();
    std::vector<std::uint8_t> bytes(h.begin(), h.end());
    bytes.insert(bytes.end(), px.begin(), px.end());
    write_bytes(path, bytes);
    return;
  }
  throw IoError("unsupported image format: " + path.string());
}

Signal rescale_for_display(const Signal& image) {
  if (image.size() == 0) return image;
  const double lo = image.minCoeff();
  const double range = image.maxCoeff() - lo;
  if (!(range > 0.0)) return Signal::Zero(image.rows(), image.cols());
  return (image.array() - lo) / range;
}

std::vector<fs::path> list_images(const fs::path& path) {
  if (fs::is_regular_file(path)) return {path};
  if (!fs::is_directory(path)) throw IoError("no such file or directory: " + path.string());
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(path)) {
    if (!entry.is_regular_file()) continue;
    const std::string ext = lower_extension(entry.path());
    if (ext == ".png" || ext == ".pgm") out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw IoError("no .png or .pgm images in " + path.string());
  return out;
}

// Dictionaries -------------------------------------------------------------------

std::vector<std::uint8_t> encode_dictionary(const Dictionary& dict) {
  std::vector<std::uint8_t> out;
  const std::size_t n = std::size_t(dict.coeffs().size());
  out.reserve(18 + 8 * n);
  for (const char c : {'C', 'S', 'C', 'D'}) out.push_back(std::uint8_t(c));
  put_le<std::uint16_t>(out, kDictionaryFormatVersion);
  put_le<std::uint32_t>(out, std::uint32_t(dict.num_filters()));
  put_le<std::uint32_t>(out, std::uint32_t(dict.side()));
  const std::size_t payload = out.size();
  for (std::size_t i = 0; i < n; ++i)
    put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(dict.coeffs()[Index(i)]));
  const uLong crc = crc32(crc32(0L, Z_NULL, 0), out.data() + payload, uInt(out.size() - payload));
  put_le<std::uint32_t>(out, std::uint32_t(crc));
  return out;
}

Dictionary decode_dictionary(std::span<const std::uint8_t> b) {
  if (b.size() < 18 || std::memcmp(b.data(), "CSCD", 4) != 0)
    throw IoError("not a dictionary file (bad magic)");
  const auto version = get_le<std::uint16_t>(b, 4);
  if (version != kDictionaryFormatVersion)
    throw IoError("unsupported dictionary format version " + std::to_string(version));
  const auto k = get_le<std::uint32_t>(b, 6);
  const auto m = get_le<std::uint32_t>(b, 10);
  if (k == 0 || m == 0 || m % 2 == 0) throw IoError("dictionary header has invalid K or m");
  const std::uint64_t n = std::uint64_t(k) * m * m;
  if (b.size() != 14 + 8 * n + 4) throw IoError("dictionary file has the wrong length");
  const uLong crc = crc32(crc32(0L, Z_NULL, 0), b.data() + 14, uInt(8 * n));
  if (std::uint32_t(crc) != get_le<std::uint32_t>(b, 14 + 8 * n))
    throw IoError("dictionary checksum mismatch");
  Vector coeffs(static_cast<Index>(n));
  for (std::uint64_t i = 0; i < n; ++i)
    coeffs[Index(i)] = std::bit_cast<double>(get_le<std::uint64_t>(b, 14 + 8 * i));
  return Dictionary(int(k), int(m), std::move(coeffs));
}

void write_dictionary(const fs::path& path, const Dictionary& dict) {
  write_bytes(path, encode_dictionary(dict));
}

Dictionary read_dictionary(const fs::path& path) {
  const auto bytes = read_bytes(path);
  return decode_dictionary(bytes);
}

Signal filter_mosaic(const Dictionary& dict) {
  const int k = dict.num_filters();
  const int m = dict.side();
  const int grid = int(std::ceil(std::sqrt(double(k))));
  const int rows = (k + grid - 1) / grid;
  const int cell = m + 1;
  Signal out = Signal::Zero(rows * cell + 1, grid * cell + 1);
  for (int f = 0; f < k; ++f) {
    const auto filt = dict.filter(f);
    const double lo = filt.minCoeff();
    const double range = filt.maxCoeff() - lo;
    const int r0 = (f / grid) * cell + 1;
    const int c0 = (f % grid) * cell + 1;
    for (int a = 0; a < m; ++a)
      for (int b = 0; b < m; ++b)
        out(r0 + a, c0 + b) = range > 0.0 ? (filt[a * m + b] - lo) / range : 0.5;
  }
  return out;
}

// CSV ----------------------------------------------------------------------------

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string trace_to_csv(const TrainTrace& trace) {
  std::string out = std::string(kTraceHeader) + "\n";
  for (const auto& r : trace.rows) {
    out += std::to_string(r.iteration) + "," + format_double(r.wall_seconds) + "," +
           format_double(r.objective) + ",";
    if (r.test_objective) out += format_double(*r.test_objective);
    out += ",";
    if (r.test_psnr_db) out += format_double(*r.test_psnr_db);
    out += "," + format_double(r.nonzero_fraction) + "\n";
  }
  return out;
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false, any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      record.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\r' || c == '\n') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (any || !field.empty()) {
        record.push_back(std::move(field));
        records.push_back(std::move(record));
      }
      record.clear();
      field.clear();
      any = false;
    } else {
      field += c;
      any = true;
    }
  }
  if (quoted) throw IoError("unterminated quoted CSV field");
  if (any || !field.empty()) {
    record.push_back(std::move(field));
    records.push_back(std::move(record));
  }
  return records;
}

TrainTrace trace_from_csv(const std::string& text) {
  const auto records = parse_csv(text);
  if (records.empty()) throw IoError("empty trace CSV");
  std::string header;
  for (std::size_t i = 0; i < records[0].size(); ++i) header += (i ? "," : "") + records[0][i];
  if (header != kTraceHeader) throw IoError("unexpected trace CSV header: " + header);
  TrainTrace trace;
  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto& f = records[i];
    if (f.size() != 6) throw IoError("trace CSV row " + std::to_string(i) + " has the wrong width");
    TraceRow r;
    try {
      r.iteration = std::stoi(f[0]);
      r.wall_seconds = std::stod(f[1]);
      r.objective = std::stod(f[2]);
      r.test_objective = parse_optional(f[3]);
      r.test_psnr_db = parse_optional(f[4]);
      r.nonzero_fraction = std::stod(f[5]);
    } catch (const std::logic_error&) {
      throw IoError("trace CSV row " + std::to_string(i) + " is not numeric");
    }
    trace.rows.push_back(r);
  }
  return trace;
}

void write_text(const fs::path& path, const std::string& text) {
  write_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string read_text(const fs::path& path) {
  const auto b = read_bytes(path);
  return std::string(b.begin(), b.end());
}

std::uint32_t file_crc32(const fs::path& path) {
  const auto b = read_bytes(path);
  return std::uint32_t(crc32(crc32(0L, Z_NULL, 0), b.data(), uInt(b.size())));
}

void write_trace(const fs::path& path, const TrainTrace& trace) {
  write_text(path, trace_to_csv(trace));
}

TrainTrace read_trace(const fs::path& path) { return trace_from_csv(read_text(path)); }

}  // namespace scsc
