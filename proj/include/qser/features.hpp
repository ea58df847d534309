#pragma once

// Audio to log-mel spectrogram: WAV decode, windowed-sinc resampling to the
// target rate, fixed-length crop/pad, Hann-windowed power STFT (no centre
// padding), HTK-scale triangular filterbank, log10 with a floor.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "qser/error.hpp"
#include "qser/io.hpp"
#include "qser/nn/tensor.hpp"

namespace qser {

struct AudioClip {
  double sample_rate = 0.0;
  std::vector<double> samples;
};

struct MelConfig {
  double target_rate = 22050.0;
  double duration = 3.0;
  std::size_t window = 2048;
  std::size_t hop = 512;
  std::size_t n_mels = 128;
  double fmin = 0.0;
  double fmax = 0.0;  // 0 selects target_rate / 2
  double log_floor = 1e-10;

  double upper_frequency() const { return fmax > 0.0 ? fmax : target_rate / 2.0; }
  std::size_t n_samples() const {
    return static_cast<std::size_t>(std::llround(target_rate * duration));
  }
  std::size_t n_frames() const { return 1 + (n_samples() - window) / hop; }

  void validate() const {
    if (!(target_rate > 0.0) || !std::isfinite(target_rate))
      throw ConfigError("features.target_rate must be > 0");
    if (!(duration > 0.0)) throw ConfigError("features.duration must be > 0");
    if (window == 0 || (window & (window - 1)) != 0)
      throw ConfigError("features.window must be a power of two");
    if (hop == 0 || hop > window) throw ConfigError("features.hop must lie in [1, window]");
    if (n_mels == 0) throw ConfigError("features.n_mels must be >= 1");
    if (!(fmin >= 0.0) || !(upper_frequency() > fmin) || upper_frequency() > target_rate / 2.0)
      throw ConfigError("features.fmin/fmax must satisfy 0 <= fmin < fmax <= target_rate/2");
    if (!(log_floor > 0.0)) throw ConfigError("features.log_floor must be > 0");
    if (n_samples() < window) throw ConfigError("features.duration shorter than one window");
  }
};

// ---------------------------------------------------------------- WAV

inline AudioClip parse_wav(std::span<const std::uint8_t> bytes, const std::string& name) {
  io::Reader r(bytes, name);
  if (r.remaining() < 12) r.fail("file too short for a RIFF header");
  if (r.bytes(4) != "RIFF") r.fail("missing RIFF magic", 0);
  r.u32();
  if (r.bytes(4) != "WAVE") r.fail("missing WAVE tag", 8);

  std::uint16_t format = 0, channels = 0, bits = 0, block_align = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  std::size_t data_pos = 0, data_len = 0;
  bool have_data = false;

  while (r.remaining() >= 8) {
    const std::size_t chunk_at = r.offset();
    const std::string id = r.bytes(4);
    const std::uint32_t len = r.u32();
    const std::size_t body = r.offset();
    if (len > r.remaining()) r.fail("'" + id + "' chunk runs past end of file", chunk_at);
    if (id == "fmt ") {
      if (len < 16) r.fail("fmt chunk shorter than 16 bytes", chunk_at);
      format = r.u16();
      channels = r.u16();
      rate = r.u32();
      r.u32();
      block_align = r.u16();
      bits = r.u16();
      if (format == 0xFFFE) {
        if (len < 40) r.fail("extensible fmt chunk shorter than 40 bytes", chunk_at);
        r.skip(8);  // cbSize, valid bits, channel mask
        format = r.u16();
      }
      have_fmt = true;
    } else if (id == "data") {
      data_pos = body;
      data_len = len;
      have_data = true;
    }
    r.seek(std::min(body + len + (len & 1u), bytes.size()));
    if (have_fmt && have_data) break;
  }
  if (!have_fmt) r.fail("no fmt chunk");
  if (!have_data) r.fail("no data chunk");
  if (channels != 1 && channels != 2)
    r.fail("unsupported channel count " + std::to_string(channels), 22);
  if (rate == 0) r.fail("sample rate is zero", 24);
  const bool pcm16 = format == 1 && bits == 16;
  const bool f32 = format == 3 && bits == 32;
  if (!pcm16 && !f32) {
    r.fail("unsupported encoding (format " + std::to_string(format) + ", " +
               std::to_string(bits) + " bits); need 16-bit PCM or 32-bit float",
           20);
  }
  const std::size_t frame_bytes = static_cast<std::size_t>(channels) * (bits / 8);
  if (block_align != frame_bytes) r.fail("block_align disagrees with channels*bits/8", 32);

  AudioClip clip;
  clip.sample_rate = rate;
  const std::size_t n = data_len / frame_bytes;
  clip.samples.resize(n);
  r.seek(data_pos);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::uint16_t c = 0; c < channels; ++c) {
      const std::size_t at = r.offset();
      const double v = pcm16 ? r.i16() / 32768.0 : static_cast<double>(r.f32());
      if (!std::isfinite(v)) r.fail("non-finite sample", at);
      acc += v;
    }
    clip.samples[i] = std::clamp(acc / channels, -1.0, 1.0);
  }
  return clip;
}

inline AudioClip load_wav(const std::filesystem::path& path) {
  io::Bytes bytes;
  try {
    bytes = io::read_file(path);
  } catch (const IoError& e) {
    throw IngestionError(e.what());
  }
  return parse_wav(bytes, path.string());
}

/// Interleaved channels; samples are clamped to [-1, 1] and quantised.
inline io::Bytes encode_wav_pcm16(const std::vector<std::vector<double>>& channels,
                                  std::uint32_t rate) {
  const auto nch = static_cast<std::uint16_t>(channels.size());
  const std::size_t n = channels.empty() ? 0 : channels[0].size();
  io::Writer w;
  const auto data_len = static_cast<std::uint32_t>(n * nch * 2);
  w.bytes("RIFF");
  w.u32(36 + data_len);
  w.bytes("WAVE");
  w.bytes("fmt ");
  w.u32(16);
  w.u16(1);
  w.u16(nch);
  w.u32(rate);
  w.u32(rate * nch * 2);
  w.u16(static_cast<std::uint16_t>(nch * 2));
  w.u16(16);
  w.bytes("data");
  w.u32(data_len);
  for (std::size_t i = 0; i < n; ++i)
    for (const auto& ch : channels) {
      const double v = std::clamp(ch[i], -1.0, 32767.0 / 32768.0);
      w.i16(static_cast<std::int16_t>(std::lround(v * 32768.0)));
    }
  return std::move(w.data());
}

inline io::Bytes encode_wav_f32(const std::vector<double>& mono, std::uint32_t rate) {
  io::Writer w;
  const auto data_len = static_cast<std::uint32_t>(mono.size() * 4);
  w.bytes("RIFF");
  w.u32(36 + data_len);
  w.bytes("WAVE");
  w.bytes("fmt ");
  w.u32(16);
  w.u16(3);
  w.u16(1);
  w.u32(rate);
  w.u32(rate * 4);
  w.u16(4);
  w.u16(32);
  w.bytes("data");
  w.u32(data_len);
  for (double v : mono) w.f32(static_cast<float>(v));
  return std::move(w.data());
}

// ---------------------------------------------------------------- resampling

namespace detail {

inline double sinc(double x) {
  if (x == 0.0) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

}  // namespace detail

/// Hann-windowed sinc interpolation with 16 zero crossings per side. The
/// cutoff drops to the target Nyquist when downsampling. Each output sample
/// is normalised by its kernel sum, so constants pass through unchanged.
inline AudioClip resample(const AudioClip& clip, double target_rate) {
  if (!(clip.sample_rate > 0.0) || !(target_rate > 0.0))
    throw ConfigError("resample: rates must be > 0");
  if (clip.sample_rate == target_rate) return clip;

  constexpr double kZeros = 16.0;
  const double src = clip.sample_rate;
  const std::size_t n_in = clip.samples.size();
  const auto n_out = static_cast<std::size_t>(std::llround(static_cast<double>(n_in) * target_rate / src));
  const double cutoff = std::min(1.0, target_rate / src);
  const double half = kZeros / cutoff;

  AudioClip out;
  out.sample_rate = target_rate;
  out.samples.assign(n_out, 0.0);
  for (std::size_t j = 0; j < n_out; ++j) {
    const double x = static_cast<double>(j) * src / target_rate;
    const auto lo = static_cast<long long>(std::ceil(x - half));
    const auto hi = static_cast<long long>(std::floor(x + half));
    double acc = 0.0, wsum = 0.0;
    for (long long i = std::max(lo, 0LL); i <= hi && i < static_cast<long long>(n_in); ++i) {
      const double d = x - static_cast<double>(i);
      const double w =
          detail::sinc(cutoff * d) * 0.5 * (1.0 + std::cos(std::numbers::pi * d / half));
      acc += w * clip.samples[static_cast<std::size_t>(i)];
      wsum += w;
    }
    out.samples[j] = wsum != 0.0 ? acc / wsum : 0.0;
  }
  return out;
}

/// Truncates from the end or zero-pads at the end to round(rate * duration).
inline AudioClip fix_length(AudioClip clip, double duration) {
  const auto n = static_cast<std::size_t>(std::llround(clip.sample_rate * duration));
  clip.samples.resize(n, 0.0);
  return clip;
}

// ---------------------------------------------------------------- spectrum

/// In-place iterative radix-2 FFT; size must be a power of two.
inline void fft(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  if (n == 0 || (n & (n - 1)) != 0) throw ConfigError("fft size must be a power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t halfl = len / 2;
    const std::size_t step = n / len;
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < halfl; ++k) {
        const double ang = -2.0 * std::numbers::pi * static_cast<double>(k * step) / static_cast<double>(n);
        const std::complex<double> w(std::cos(ang), std::sin(ang));
        const auto u = a[i + k];
        const auto v = a[i + k + halfl] * w;
        a[i + k] = u + v;
        a[i + k + halfl] = u - v;
      }
    }
  }
}

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

/// n_mels + 2 edge frequencies, equally spaced in mel; filter m peaks at
/// edge m + 1.
inline std::vector<double> mel_edges(const MelConfig& cfg) {
  const double lo = hz_to_mel(cfg.fmin), hi = hz_to_mel(cfg.upper_frequency());
  std::vector<double> edges(cfg.n_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i)
    edges[i] = mel_to_hz(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(cfg.n_mels + 1));
  return edges;
}

inline std::vector<double> mel_centers(const MelConfig& cfg) {
  auto e = mel_edges(cfg);
  return {e.begin() + 1, e.end() - 1};
}

/// Peak-one triangles over FFT bin frequencies; [n_mels][window/2 + 1].
inline std::vector<std::vector<double>> mel_filterbank(const MelConfig& cfg) {
  const auto edges = mel_edges(cfg);
  const std::size_t n_bins = cfg.window / 2 + 1;
  std::vector<std::vector<double>> fb(cfg.n_mels, std::vector<double>(n_bins, 0.0));
  for (std::size_t m = 0; m < cfg.n_mels; ++m) {
    const double l = edges[m], c = edges[m + 1], r = edges[m + 2];
    for (std::size_t k = 0; k < n_bins; ++k) {
      const double f = static_cast<double>(k) * cfg.target_rate / static_cast<double>(cfg.window);
      const double up = (f - l) / (c - l), down = (r - f) / (r - c);
      fb[m][k] = std::max(0.0, std::min(up, down));
    }
  }
  return fb;
}

/// Log-mel spectrogram, [n_mels, n_frames].
inline Tensor mel_spectrogram(const AudioClip& clip, const MelConfig& cfg) {
  cfg.validate();
  if (clip.sample_rate != cfg.target_rate)
    throw ConfigError("mel_spectrogram: clip rate " + std::to_string(clip.sample_rate) +
                      " differs from target " + std::to_string(cfg.target_rate));
  if (clip.samples.size() < cfg.window)
    throw ConfigError("mel_spectrogram: clip shorter than one window");

  const std::size_t n_frames = 1 + (clip.samples.size() - cfg.window) / cfg.hop;
  const std::size_t n_bins = cfg.window / 2 + 1;
  const auto fb = mel_filterbank(cfg);
  std::vector<double> hann(cfg.window);
  for (std::size_t i = 0; i < cfg.window; ++i)
    hann[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                   static_cast<double>(cfg.window));

  Tensor out({cfg.n_mels, n_frames});
  std::vector<std::complex<double>> buf(cfg.window);
  std::vector<double> power(n_bins);
  const double floor_log = std::log10(cfg.log_floor);
  for (std::size_t t = 0; t < n_frames; ++t) {
    const double* frame = clip.samples.data() + t * cfg.hop;
    for (std::size_t i = 0; i < cfg.window; ++i) buf[i] = {frame[i] * hann[i], 0.0};
    fft(buf);
    for (std::size_t k = 0; k < n_bins; ++k) power[k] = std::norm(buf[k]);
    for (std::size_t m = 0; m < cfg.n_mels; ++m) {
      double e = 0.0;
      for (std::size_t k = 0; k < n_bins; ++k) e += fb[m][k] * power[k];
      out[m * n_frames + t] = e > cfg.log_floor ? std::log10(e) : floor_log;
    }
  }
  return out;
}

/// Full pipeline for one file.
inline Tensor extract_features(const std::filesystem::path& wav, const MelConfig& cfg) {
  const AudioClip clip = fix_length(resample(load_wav(wav), cfg.target_rate), cfg.duration);
  return mel_spectrogram(clip, cfg);
}

// ---------------------------------------------------------------- .qft files

inline io::Bytes encode_features(const Tensor& t) {
  if (t.rank() != 2) throw ModelError("feature tensor must be [n_mels, n_frames]");
  io::Writer w;
  w.bytes("QFT1");
  w.u32(static_cast<std::uint32_t>(t.dim(0)));
  w.u32(static_cast<std::uint32_t>(t.dim(1)));
  w.f64s(t.data());
  return std::move(w.data());
}

inline Tensor decode_features(std::span<const std::uint8_t> bytes, const std::string& name) {
  io::Reader r(bytes, name);
  if (r.remaining() < 12 || r.bytes(4) != "QFT1") r.fail("missing QFT1 magic", 0);
  const std::size_t mels = r.u32(), frames = r.u32();
  if (mels == 0 || frames == 0) r.fail("empty feature matrix", 4);
  if (r.remaining() != mels * frames * 8)
    r.fail("payload is " + std::to_string(r.remaining()) + " bytes, expected " +
           std::to_string(mels * frames * 8));
  Tensor t({mels, frames});
  for (auto& v : t.data()) {
    const std::size_t at = r.offset();
    v = r.f64();
    if (!std::isfinite(v)) r.fail("non-finite feature value", at);
  }
  return t;
}

inline void write_features(const std::filesystem::path& path, const Tensor& t) {
  io::write_file(path, encode_features(t));
}

inline Tensor read_features(const std::filesystem::path& path) {
  io::Bytes bytes;
  try {
    bytes = io::read_file(path);
  } catch (const IoError& e) {
    throw IngestionError(e.what());
  }
  return decode_features(bytes, path.string());
}

}  // namespace qser
