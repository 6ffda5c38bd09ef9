#include "ftd/io.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

namespace ftd {
namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw FormatError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw FormatError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out)
    throw FormatError("write failed: " + path.string());
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos)
    return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
bool parse_number(std::string_view tok, T& out) {
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  if (!tok.empty() && tok.front() == '+')
    ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

template <typename T, int N>
bool parse_tuple(const std::string& value, Eigen::Array<T, N, 1>& out) {
  std::istringstream ss(value);
  std::string tok;
  int n = 0;
  while (ss >> tok) {
    if (n >= N || !parse_number(tok, out[n]))
      return false;
    ++n;
  }
  return n == N;
}

struct ParsedRvf {
  RvfHeader header;
  std::size_t payload_offset = 0;
};

ParsedRvf parse_rvf(const std::string& bytes, const std::string& name) {
  ParsedRvf result;
  auto& h = result.header;
  std::map<std::string, std::pair<std::string, int>> fields;
  std::size_t pos = 0;
  int line_no = 0;
  bool terminated = false;
  while (pos < bytes.size()) {
    const std::size_t nl = bytes.find('\n', pos);
    if (nl == std::string::npos)
      break;
    ++line_no;
    const std::string_view raw(bytes.data() + pos, nl - pos);
    pos = nl + 1;
    const std::string line = trim(raw);
    if (line.empty()) {
      terminated = true;
      break;
    }
    const auto colon = line.find(':');
    if (colon == std::string::npos || colon == 0)
      throw FormatError(name + ": line " + std::to_string(line_no) +
                        ": expected 'key: value', got '" + line + "'");
    const std::string key = trim(std::string_view(line).substr(0, colon));
    const std::string value = trim(std::string_view(line).substr(colon + 1));
    if (fields.contains(key))
      throw FormatError(name + ": line " + std::to_string(line_no) + ": duplicate key '" + key +
                        "'");
    fields[key] = {value, line_no};
  }
  if (!terminated)
    throw FormatError(name + ": header not terminated by a blank line");
  result.payload_offset = pos;

  auto require = [&](const std::string& key) -> const std::pair<std::string, int>& {
    auto it = fields.find(key);
    if (it == fields.end())
      throw FormatError(name + ": missing required header key '" + key + "'");
    return it->second;
  };
  auto bad = [&](const std::string& key, const std::pair<std::string, int>& f) {
    return FormatError(name + ": line " + std::to_string(f.second) + ": invalid " + key + " '" +
                       f.first + "'");
  };

  const auto& dims = require("dims");
  if (!parse_tuple(dims.first, h.geometry.dims) || (h.geometry.dims < 1).any())
    throw bad("dims", dims);
  const auto& spacing = require("spacing");
  if (!parse_tuple(spacing.first, h.geometry.spacing) || !(h.geometry.spacing > 0.0).all())
    throw bad("spacing", spacing);
  const auto& origin = require("origin");
  if (!parse_tuple(origin.first, h.geometry.origin) || !h.geometry.origin.allFinite())
    throw bad("origin", origin);
  const auto& dtype = require("dtype");
  if (dtype.first == "f32")
    h.dtype = DType::f32;
  else if (dtype.first == "u8")
    h.dtype = DType::u8;
  else
    throw bad("dtype", dtype);
  const auto& encoding = require("encoding");
  if (encoding.first != "raw")
    throw bad("encoding", encoding);
  if (auto it = fields.find("peaks_per_voxel"); it != fields.end()) {
    if (!parse_number(std::string_view(it->second.first), h.peaks_per_voxel) ||
        h.peaks_per_voxel < 1)
      throw bad("peaks_per_voxel", it->second);
  }
  for (const auto& [key, f] : fields)
    if (key != "dims" && key != "spacing" && key != "origin" && key != "dtype" &&
        key != "encoding" && key != "peaks_per_voxel")
      h.extra[key] = f.first;
  return result;
}

std::string header_text(const RvfHeader& h) {
  const auto& g = h.geometry;
  std::ostringstream ss;
  ss << "dims: " << g.dims[0] << ' ' << g.dims[1] << ' ' << g.dims[2] << '\n';
  ss << "spacing: " << format_real(g.spacing[0]) << ' ' << format_real(g.spacing[1]) << ' '
     << format_real(g.spacing[2]) << '\n';
  ss << "origin: " << format_real(g.origin[0]) << ' ' << format_real(g.origin[1]) << ' '
     << format_real(g.origin[2]) << '\n';
  ss << "dtype: " << (h.dtype == DType::f32 ? "f32" : "u8") << '\n';
  ss << "encoding: raw\n";
  if (h.peaks_per_voxel > 0)
    ss << "peaks_per_voxel: " << h.peaks_per_voxel << '\n';
  for (const auto& [k, v] : h.extra)
    ss << k << ": " << v << '\n';
  ss << '\n';
  return ss.str();
}

void check_payload(std::size_t have, std::size_t want, const std::string& name) {
  if (have != want)
    throw TruncationError(name + ": payload is " + std::to_string(have) + " bytes, header implies " +
                          std::to_string(want));
}

float read_f32le(const char* p) {
  std::uint32_t u;
  std::memcpy(&u, p, 4);
  if constexpr (std::endian::native == std::endian::big)
    u = ((u & 0xffu) << 24) | ((u & 0xff00u) << 8) | ((u & 0xff0000u) >> 8) | (u >> 24);
  return std::bit_cast<float>(u);
}

void append_f32le(std::string& out, float v) {
  auto u = std::bit_cast<std::uint32_t>(v);
  if constexpr (std::endian::native == std::endian::big)
    u = ((u & 0xffu) << 24) | ((u & 0xff00u) << 8) | ((u & 0xff0000u) >> 8) | (u >> 24);
  char b[4];
  std::memcpy(b, &u, 4);
  out.append(b, 4);
}

} // namespace

std::string format_real(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, ptr);
}

RvfHeader read_rvf_header(const std::filesystem::path& path) {
  return parse_rvf(read_file(path), path.string()).header;
}

ScalarVolume load_volume(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  const auto parsed = parse_rvf(bytes, path.string());
  const auto& h = parsed.header;
  if (h.peaks_per_voxel > 0)
    throw FormatError(path.string() + ": peaks file given where a volume was expected");
  const std::size_t n = h.geometry.voxel_count();
  const std::size_t width = h.dtype == DType::f32 ? 4 : 1;
  check_payload(bytes.size() - parsed.payload_offset, n * width, path.string());
  std::vector<float> data(n);
  const char* p = bytes.data() + parsed.payload_offset;
  for (std::size_t i = 0; i < n; ++i)
    data[i] = h.dtype == DType::f32 ? read_f32le(p + 4 * i)
                                    : static_cast<float>(static_cast<unsigned char>(p[i]));
  return ScalarVolume(h.geometry, std::move(data));
}

void save_volume(const std::filesystem::path& path, const ScalarVolume& volume) {
  RvfHeader h;
  h.geometry = volume.geometry();
  h.dtype = DType::f32;
  std::string out = header_text(h);
  out.reserve(out.size() + 4 * volume.size());
  for (float v : volume.data())
    append_f32le(out, v);
  write_file(path, out);
}

Mask load_mask(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  const auto parsed = parse_rvf(bytes, path.string());
  const auto& h = parsed.header;
  if (h.dtype != DType::u8 || h.peaks_per_voxel > 0)
    throw FormatError(path.string() + ": mask must have dtype u8");
  const std::size_t n = h.geometry.voxel_count();
  check_payload(bytes.size() - parsed.payload_offset, n, path.string());
  std::vector<std::uint8_t> data(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto v = static_cast<std::uint8_t>(bytes[parsed.payload_offset + i]);
    if (v > 1)
      throw FormatError(path.string() + ": mask value " + std::to_string(v) + " at voxel " +
                        std::to_string(i) + " is not 0 or 1");
    data[i] = v;
  }
  return Mask(h.geometry, std::move(data));
}

void save_mask(const std::filesystem::path& path, const Mask& mask) {
  RvfHeader h;
  h.geometry = mask.geometry();
  h.dtype = DType::u8;
  std::string out = header_text(h);
  for (auto v : mask.data())
    out.push_back(static_cast<char>(v != 0 ? 1 : 0));
  write_file(path, out);
}

PeaksField load_peaks(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  const auto parsed = parse_rvf(bytes, path.string());
  const auto& h = parsed.header;
  if (h.peaks_per_voxel < 1)
    throw FormatError(path.string() + ": missing required header key 'peaks_per_voxel'");
  if (h.dtype != DType::f32)
    throw FormatError(path.string() + ": peaks must have dtype f32");
  PeaksField peaks(h.geometry, h.peaks_per_voxel);
  auto slots = peaks.slots();
  check_payload(bytes.size() - parsed.payload_offset, slots.size() * 16, path.string());
  const char* p = bytes.data() + parsed.payload_offset;
  for (std::size_t s = 0; s < slots.size(); ++s) {
    const char* q = p + 16 * s;
    slots[s].direction = {read_f32le(q), read_f32le(q + 4), read_f32le(q + 8)};
    slots[s].amplitude = read_f32le(q + 12);
  }
  peaks.validate();
  return peaks;
}

void save_peaks(const std::filesystem::path& path, const PeaksField& peaks) {
  RvfHeader h;
  h.geometry = peaks.geometry();
  h.dtype = DType::f32;
  h.peaks_per_voxel = peaks.peaks_per_voxel();
  std::string out = header_text(h);
  out.reserve(out.size() + 16 * peaks.slots().size());
  for (const Peak& s : peaks.slots()) {
    append_f32le(out, s.direction[0]);
    append_f32le(out, s.direction[1]);
    append_f32le(out, s.direction[2]);
    append_f32le(out, s.amplitude);
  }
  write_file(path, out);
}

void save_tract(const std::filesystem::path& path, const Tract& tract,
                const std::vector<std::string>& comments) {
  std::string out;
  out += "# step " + format_real(tract.step) + "\n";
  for (const auto& c : comments)
    out += "# " + c + "\n";
  bool first = true;
  for (const auto& line : tract.streamlines) {
    if (!first)
      out += '\n';
    first = false;
    for (const auto& p : line) {
      out += format_real(p[0]);
      out += ' ';
      out += format_real(p[1]);
      out += ' ';
      out += format_real(p[2]);
      out += '\n';
    }
  }
  write_file(path, out);
}

Tract load_tract(const std::filesystem::path& path, std::vector<std::string>* comments) {
  const std::string bytes = read_file(path);
  const std::string name = path.string();
  Tract tract;
  bool have_step = false;
  Streamline current;
  std::istringstream in(bytes);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty()) {
      if (!current.empty())
        tract.streamlines.push_back(std::move(current));
      current.clear();
      continue;
    }
    if (line.front() == '#') {
      const std::string body = trim(std::string_view(line).substr(1));
      if (body.rfind("step", 0) == 0 && (body.size() == 4 || body[4] == ' ')) {
        if (!parse_number(std::string_view(trim(std::string_view(body).substr(4))), tract.step))
          throw FormatError(name + ": line " + std::to_string(line_no) + ": invalid step '" +
                            line + "'");
        have_step = true;
      } else if (comments) {
        comments->push_back(body);
      }
      continue;
    }
    std::istringstream ss(line);
    std::string tok;
    Vec3 p;
    int n = 0;
    while (ss >> tok) {
      if (n >= 3 || !parse_number(std::string_view(tok), p[n]))
        throw FormatError(name + ": line " + std::to_string(line_no) +
                          ": expected 'x y z', got '" + line + "'");
      ++n;
    }
    if (n != 3)
      throw FormatError(name + ": line " + std::to_string(line_no) + ": expected 'x y z', got '" +
                        line + "'");
    current.push_back(p);
  }
  if (!current.empty())
    tract.streamlines.push_back(std::move(current));
  if (!have_step)
    throw FormatError(name + ": missing '# step' header line");
  return tract;
}

} // namespace ftd
