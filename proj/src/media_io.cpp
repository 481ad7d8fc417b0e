#include "egofuse/media_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string>

#include "binary_io.hpp"
#include "egofuse/data_model.hpp"
#include "egofuse/error.hpp"

namespace egofuse {

namespace {

// Next whitespace-delimited PGM header token, skipping '#' comments.
std::string pgm_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  return tok;
}

double bessel_i0(double x) {
  double sum = 1.0, term = 1.0;
  for (int k = 1; k < 64; ++k) {
    term *= (x / (2.0 * k)) * (x / (2.0 * k));
    sum += term;
    if (term < 1e-17 * sum) break;
  }
  return sum;
}

}  // namespace

Image read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open frame: " + path.string());
  if (pgm_token(in) != "P5") throw DataError("not a binary PGM (P5): " + path.string());
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(pgm_token(in));
    h = std::stoi(pgm_token(in));
    maxval = std::stoi(pgm_token(in));
  } catch (const std::exception&) {
    throw DataError("malformed PGM header: " + path.string());
  }
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255)
    throw DataError("unsupported PGM (need 8-bit): " + path.string());
  std::vector<unsigned char> buf(static_cast<std::size_t>(w) * static_cast<std::size_t>(h));
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (static_cast<std::size_t>(in.gcount()) != buf.size()) throw DataError("truncated PGM: " + path.string());
  Image img(h, w);
  const float scale = 255.0f / static_cast<float>(maxval);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) img(y, x) = buf[static_cast<std::size_t>(y) * w + x] * scale;
  return img;
}

void write_pgm(const Image& image, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write frame: " + path.string());
  out << "P5\n" << image.cols() << ' ' << image.rows() << "\n255\n";
  std::vector<unsigned char> buf(static_cast<std::size_t>(image.size()));
  for (Eigen::Index i = 0; i < image.size(); ++i) {
    const float v = std::round(image.data()[i]);
    buf[static_cast<std::size_t>(i)] = static_cast<unsigned char>(v < 0.f ? 0.f : (v > 255.f ? 255.f : v));
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw DataError("cannot write frame: " + path.string());
}

std::vector<Image> read_frames(const std::filesystem::path& dir) {
  std::vector<Image> frames;
  for (const auto& f : list_frame_files(dir)) frames.push_back(read_pgm(f));
  for (const auto& f : frames)
    if (f.rows() != frames.front().rows() || f.cols() != frames.front().cols())
      throw DataError("frame size changes within " + dir.string());
  return frames;
}

AudioClip read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open audio: " + path.string());
  detail::Reader r(in, "truncated WAV: " + path.string());
  char tag[4];
  r.bytes(tag, 4);
  if (std::string(tag, 4) != "RIFF") throw DataError("not a RIFF file: " + path.string());
  r.u32();
  r.bytes(tag, 4);
  if (std::string(tag, 4) != "WAVE") throw DataError("not a WAVE file: " + path.string());

  AudioClip clip;
  int channels = 0, bits = 0;
  bool have_fmt = false;
  for (;;) {
    r.bytes(tag, 4);
    const std::uint32_t size = r.u32();
    const std::string id(tag, 4);
    if (id == "fmt ") {
      std::vector<char> body(size);
      r.bytes(body.data(), size);
      auto le16 = [&](std::size_t o) {
        return static_cast<int>(static_cast<unsigned char>(body[o]) | (static_cast<unsigned char>(body[o + 1]) << 8));
      };
      if (size < 16) throw DataError("bad fmt chunk: " + path.string());
      const int format = le16(0);
      channels = le16(2);
      clip.sample_rate = le16(4) | (le16(6) << 16);
      bits = le16(14);
      if (format != 1 || bits != 16 || channels != 1)
        throw DataError("unsupported WAV (need PCM 16-bit mono): " + path.string());
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw DataError("WAV data before fmt: " + path.string());
      const std::size_t n = size / 2;
      clip.samples.resize(n);
      std::vector<unsigned char> raw(size);
      r.bytes(reinterpret_cast<char*>(raw.data()), size);
      for (std::size_t i = 0; i < n; ++i) {
        const auto v = static_cast<std::int16_t>(raw[2 * i] | (raw[2 * i + 1] << 8));
        clip.samples[i] = v / 32768.0;
      }
      return clip;
    } else {
      std::vector<char> skip(size + (size & 1));
      r.bytes(skip.data(), skip.size());
    }
  }
}

void write_wav(const AudioClip& clip, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write audio: " + path.string());
  const auto n = static_cast<std::uint32_t>(clip.samples.size());
  out.write("RIFF", 4);
  detail::put_u32(out, 36 + 2 * n);
  out.write("WAVEfmt ", 8);
  detail::put_u32(out, 16);
  const std::uint32_t rate = static_cast<std::uint32_t>(clip.sample_rate);
  char fmt[12];
  auto put16 = [&](int o, unsigned v) {
    fmt[o] = static_cast<char>(v & 0xFF);
    fmt[o + 1] = static_cast<char>((v >> 8) & 0xFF);
  };
  put16(0, 1);  // PCM
  put16(2, 1);  // mono
  out.write(fmt, 4);
  detail::put_u32(out, rate);
  detail::put_u32(out, rate * 2);
  put16(0, 2);
  put16(2, 16);
  out.write(fmt, 4);
  out.write("data", 4);
  detail::put_u32(out, 2 * n);
  for (double s : clip.samples) {
    const double q = std::round(std::clamp(s, -1.0, 32767.0 / 32768.0) * 32768.0);
    const auto v = static_cast<std::uint16_t>(static_cast<std::int16_t>(q));
    const char b[2] = {static_cast<char>(v & 0xFF), static_cast<char>(v >> 8)};
    out.write(b, 2);
  }
  if (!out) throw DataError("cannot write audio: " + path.string());
}

std::vector<double> resample(const std::vector<double>& samples, int from_rate, int to_rate) {
  if (from_rate <= 0 || to_rate <= 0) throw DataError("invalid sample rate");
  if (from_rate == to_rate || samples.empty()) return samples;
  const int g = std::gcd(from_rate, to_rate);
  const long up = to_rate / g, down = from_rate / g;
  const double cutoff = 0.5 * std::min(1.0, static_cast<double>(to_rate) / from_rate);  // cycles / input sample
  constexpr int kZeroCrossings = 32;
  constexpr double kBeta = 8.6;
  const double half_width = kZeroCrossings / (2.0 * cutoff);  // in input samples
  const double i0_beta = bessel_i0(kBeta);

  const std::size_t n_out = static_cast<std::size_t>(
      std::floor(static_cast<double>(samples.size()) * up / static_cast<double>(down)));
  const auto n_in = static_cast<long>(samples.size());
  const long reach = static_cast<long>(std::ceil(half_width)) + 1;

  // Output k sits at input position (k*down)/up; its fractional offset takes
  // one of `up` values, so the taps are tabulated once per phase.
  std::vector<std::vector<double>> taps(static_cast<std::size_t>(up));
  for (long phase = 0; phase < up; ++phase) {
    const double frac = static_cast<double>(phase) / static_cast<double>(up);
    auto& row = taps[static_cast<std::size_t>(phase)];
    row.resize(static_cast<std::size_t>(2 * reach + 1));
    for (long j = -reach; j <= reach; ++j) {
      const double x = static_cast<double>(j) - frac;
      const double r = x / half_width;
      double w = 0.0;
      if (std::abs(r) < 1.0) {
        const double window = bessel_i0(kBeta * std::sqrt(1.0 - r * r)) / i0_beta;
        const double arg = 2.0 * cutoff * x;
        const double sinc = std::abs(arg) < 1e-12 ? 1.0 : std::sin(M_PI * arg) / (M_PI * arg);
        w = 2.0 * cutoff * sinc * window;
      }
      row[static_cast<std::size_t>(j + reach)] = w;
    }
  }

  std::vector<double> out(n_out, 0.0);
  for (std::size_t k = 0; k < n_out; ++k) {
    const long num = static_cast<long>(k) * down;
    const long base = num / up;
    const auto& row = taps[static_cast<std::size_t>(num % up)];
    double acc = 0.0;
    for (long j = -reach; j <= reach; ++j) {
      const long i = base + j;
      if (i < 0 || i >= n_in) continue;
      acc += samples[static_cast<std::size_t>(i)] * row[static_cast<std::size_t>(j + reach)];
    }
    out[k] = acc;
  }
  return out;
}

}  // namespace egofuse
