// Copyright 2026 The ftrack Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "ftrack/io.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace ftrack {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

namespace {

constexpr char kFeatureMagic[8] = {'F', 'T', 'R', 'K', 'F', 'E', 'A', 'T'};
constexpr char kNormMagic[8] = {'F', 'T', 'R', 'K', 'N', 'O', 'R', 'M'};
constexpr std::uint32_t kFeatureVersion = 1;
constexpr std::uint32_t kNormVersion = 1;

template <typename T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

/// Bounds-checked little-endian reader over a byte buffer.
class ByteReader {
 public:
  ByteReader(const std::string& bytes, std::string what)
      : bytes_(bytes), what_(std::move(what)) {}

  template <typename T>
  T get() {
    T value;
    need(sizeof(T));
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }
  const char* take(std::size_t n) {
    need(n);
    const char* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) {
    if (bytes_.size() - pos_ < n)
      throw Error(Errc::truncated, what_ + ": truncated file");
  }
  const std::string& bytes_;
  std::string what_;
  std::size_t pos_ = 0;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  return out;
}

double parse_double(const std::string& s, const fs::path& path,
                    std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(Errc::generic, path.string() + ":" + std::to_string(line) +
                                   ": not a number: '" + s + "'");
  }
}

std::string fmt_double(double v, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", precision, v);
  return buf;
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

/// Parses the shared leading columns of track and label CSVs.
FormantTrack parse_track_lines(const fs::path& path, bool with_labels) {
  const auto lines = read_lines(path);
  FormantTrack track;
  const std::size_t want = with_labels ? 7 : 5;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string line = trim(lines[i]);
    if (line.empty() || line[0] == '#') continue;
    const auto cells = split_csv(line);
    if (cells.empty() || cells[0] == "frame_index" || cells[0] == "frame")
      continue;
    if (cells.size() < want)
      throw Error(Errc::generic, path.string() + ":" + std::to_string(i + 1) +
                                     ": expected " + std::to_string(want) +
                                     " columns");
    FormantFrame f;
    f.time_s = parse_double(cells[1], path, i + 1);
    for (int k = 0; k < 3; ++k) f.hz[k] = parse_double(cells[2 + k], path, i + 1);
    if (with_labels) {
      f.phone = cells[5];
      f.is_speech = cells[6] == "1" || cells[6] == "true";
    } else {
      f.phone = "";
      f.is_speech = true;
    }
    track.frames.push_back(std::move(f));
  }
  return track;
}

}  // namespace

void write_file_atomic(const fs::path& path, const std::string& bytes) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::io, "cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(Errc::io, "write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec)
    throw Error(Errc::io, "cannot rename onto " + path.string() + ": " +
                              ec.message());
}

std::string read_file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// WAV

AudioClip read_wav(const fs::path& path, bool allow_any_rate) {
  const std::string bytes = read_file_bytes(path);
  ByteReader rd(bytes, path.string());
  const char* riff = rd.take(4);
  rd.get<std::uint32_t>();
  const char* wave = rd.take(4);
  if (std::memcmp(riff, "RIFF", 4) != 0 || std::memcmp(wave, "WAVE", 4) != 0)
    throw Error(Errc::bad_magic, path.string() + ": not a RIFF/WAVE file");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  while (!rd.at_end()) {
    const char* id = rd.take(4);
    const std::uint32_t size = rd.get<std::uint32_t>();
    if (std::memcmp(id, "fmt ", 4) == 0) {
      const char* body = rd.take(size + (size & 1u));
      if (size < 16)
        throw Error(Errc::generic, path.string() + ": short fmt chunk");
      std::memcpy(&format, body, 2);
      std::memcpy(&channels, body + 2, 2);
      std::memcpy(&rate, body + 4, 4);
      std::memcpy(&bits, body + 14, 2);
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      if (!have_fmt)
        throw Error(Errc::generic, path.string() + ": data before fmt chunk");
      if (format != 1 || bits != 16 || channels != 1)
        throw Error(Errc::generic,
                    path.string() + ": only mono 16-bit PCM is supported");
      if (rate != 16000 && !allow_any_rate)
        throw Error(Errc::generic,
                    path.string() + ": sample rate " + std::to_string(rate) +
                        " Hz is not 16000 Hz (resampling is not supported; "
                        "use --allow-any-rate)");
      const char* data = rd.take(size);
      AudioClip clip;
      clip.sample_rate = static_cast<int>(rate);
      clip.samples.resize(size / 2);
      for (std::size_t i = 0; i < clip.samples.size(); ++i) {
        std::int16_t s;
        std::memcpy(&s, data + 2 * i, 2);
        clip.samples[i] = s / 32768.0;
      }
      return clip;
    } else {
      rd.take(size + (size & 1u));
    }
  }
  throw Error(Errc::truncated, path.string() + ": no data chunk");
}

void write_wav(const fs::path& path, const AudioClip& clip) {
  const std::uint32_t data_bytes =
      static_cast<std::uint32_t>(clip.samples.size() * 2);
  std::string out;
  out.reserve(44 + data_bytes);
  out.append("RIFF");
  put<std::uint32_t>(out, 36 + data_bytes);
  out.append("WAVEfmt ");
  put<std::uint32_t>(out, 16);
  put<std::uint16_t>(out, 1);
  put<std::uint16_t>(out, 1);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(clip.sample_rate));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(clip.sample_rate) * 2);
  put<std::uint16_t>(out, 2);
  put<std::uint16_t>(out, 16);
  out.append("data");
  put<std::uint32_t>(out, data_bytes);
  for (double s : clip.samples) {
    const double scaled = std::round(s * 32768.0);
    const auto q = static_cast<std::int16_t>(
        std::clamp(scaled, -32768.0, 32767.0));
    put<std::int16_t>(out, q);
  }
  write_file_atomic(path, out);
}

// ---------------------------------------------------------------------------
// Feature cache and normalization stats

void write_feature_file(const fs::path& path, const FeatureMatrix& features) {
  std::string out;
  out.append(kFeatureMagic, 8);
  put<std::uint32_t>(out, kFeatureVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(features.values.cols()));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(features.values.rows()));
  for (Index t = 0; t < features.values.rows(); ++t)
    for (Index c = 0; c < features.values.cols(); ++c)
      put<float>(out, static_cast<float>(features.values(t, c)));
  for (Index t = 0; t < features.values.rows(); ++t)
    out.push_back(features.mask(t) ? 1 : 0);
  write_file_atomic(path, out);
}

FeatureMatrix read_feature_file(const fs::path& path) {
  const std::string bytes = read_file_bytes(path);
  ByteReader rd(bytes, path.string());
  if (std::memcmp(rd.take(8), kFeatureMagic, 8) != 0)
    throw Error(Errc::bad_magic, path.string() + ": bad magic");
  const auto version = rd.get<std::uint32_t>();
  if (version != kFeatureVersion)
    throw Error(Errc::version_mismatch,
                path.string() + ": unsupported version " +
                    std::to_string(version));
  const auto cols = rd.get<std::uint32_t>();
  const auto rows = rd.get<std::uint64_t>();
  FeatureMatrix fm;
  fm.values.resize(static_cast<Index>(rows), cols);
  for (Index t = 0; t < fm.values.rows(); ++t)
    for (Index c = 0; c < fm.values.cols(); ++c)
      fm.values(t, c) = rd.get<float>();
  fm.mask.resize(static_cast<Index>(rows));
  for (Index t = 0; t < fm.values.rows(); ++t) fm.mask(t) = rd.get<char>() != 0;
  return fm;
}

void write_norm_stats(const fs::path& path, const NormStats& stats) {
  std::string out;
  out.append(kNormMagic, 8);
  put<std::uint32_t>(out, kNormVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(stats.mean.size()));
  for (Index i = 0; i < stats.mean.size(); ++i) put<double>(out, stats.mean(i));
  for (Index i = 0; i < stats.std.size(); ++i) put<double>(out, stats.std(i));
  write_file_atomic(path, out);
}

NormStats read_norm_stats(const fs::path& path) {
  const std::string bytes = read_file_bytes(path);
  ByteReader rd(bytes, path.string());
  if (std::memcmp(rd.take(8), kNormMagic, 8) != 0)
    throw Error(Errc::bad_magic, path.string() + ": bad magic");
  const auto version = rd.get<std::uint32_t>();
  if (version != kNormVersion)
    throw Error(Errc::version_mismatch,
                path.string() + ": unsupported version " +
                    std::to_string(version));
  const auto dim = rd.get<std::uint32_t>();
  NormStats stats;
  stats.mean.resize(dim);
  stats.std.resize(dim);
  for (Index i = 0; i < stats.mean.size(); ++i) stats.mean(i) = rd.get<double>();
  for (Index i = 0; i < stats.std.size(); ++i) stats.std(i) = rd.get<double>();
  return stats;
}

// ---------------------------------------------------------------------------
// CSVs

void write_track_csv(const fs::path& path, const FormantTrack& track) {
  std::string out = "frame_index,time_s,f1_hz,f2_hz,f3_hz\n";
  for (std::size_t i = 0; i < track.frames.size(); ++i) {
    const auto& f = track.frames[i];
    out += std::to_string(i) + "," + fmt_double(f.time_s, 4) + "," +
           fmt_double(f.hz[0], 3) + "," + fmt_double(f.hz[1], 3) + "," +
           fmt_double(f.hz[2], 3) + "\n";
  }
  write_file_atomic(path, out);
}

FormantTrack read_track_csv(const fs::path& path) {
  return parse_track_lines(path, false);
}

void write_label_csv(const fs::path& path, const FormantTrack& track) {
  std::string out =
      "frame_index,time_s,f1_hz,f2_hz,f3_hz,phone_label,is_speech\n";
  for (std::size_t i = 0; i < track.frames.size(); ++i) {
    const auto& f = track.frames[i];
    out += std::to_string(i) + "," + fmt_double(f.time_s, 4) + "," +
           fmt_double(f.hz[0], 3) + "," + fmt_double(f.hz[1], 3) + "," +
           fmt_double(f.hz[2], 3) + "," + f.phone + "," +
           (f.is_speech ? "1" : "0") + "\n";
  }
  write_file_atomic(path, out);
}

FormantTrack read_label_csv(const fs::path& path) {
  return parse_track_lines(path, true);
}

bool has_label_columns(const fs::path& path) {
  for (const auto& raw : read_lines(path)) {
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    return split_csv(line).size() >= 7;
  }
  return false;
}

std::vector<ManifestEntry> read_manifest(const fs::path& path) {
  const auto lines = read_lines(path);
  const fs::path base = path.parent_path();
  std::vector<ManifestEntry> entries;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string line = trim(lines[i]);
    if (line.empty() || line[0] == '#') continue;
    const auto cells = split_csv(line);
    if (cells.size() != 2)
      throw Error(Errc::generic, path.string() + ":" + std::to_string(i + 1) +
                                     ": expected 'audio_path, labels_path'");
    auto resolve = [&](const std::string& p) {
      fs::path q(p);
      return q.is_absolute() ? q : base / q;
    };
    entries.push_back({resolve(cells[0]), resolve(cells[1])});
  }
  return entries;
}

void write_manifest(const fs::path& path,
                    const std::vector<ManifestEntry>& entries) {
  std::string out;
  for (const auto& e : entries)
    out += e.audio.generic_string() + ", " + e.labels.generic_string() + "\n";
  write_file_atomic(path, out);
}

}  // namespace ftrack
