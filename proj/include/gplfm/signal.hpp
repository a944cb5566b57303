#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gplfm/structural_model.hpp"

namespace gplfm {

struct SeriesChannel {
  std::string name;
  Quantity quantity = Quantity::Acceleration;
  std::vector<double> values;  ///< SI units; NaN marks a missing sample

  std::size_t missing() const;
};

/// Uniformly sampled multi-channel record.
struct TimeSeriesSet {
  double t0 = 0.0;
  double fs = 1.0;
  std::vector<SeriesChannel> channels;

  std::size_t length() const { return channels.empty() ? 0 : channels.front().values.size(); }
  double dt() const { return 1.0 / fs; }
  /// Index of channel `name`, or -1.
  Index find(std::string_view name) const;
  const SeriesChannel& at(std::string_view name) const;
  /// Throws InvalidInput on unequal lengths, duplicate names or fs <= 0.
  void validate() const;
  /// Channels as rows of a matrix (NaN where missing).
  Matrix matrix() const;
  Matrix matrix(std::span<const std::string> names) const;
  std::size_t missing() const;
};

// ---------------------------------------------------------------------------
// CSV

struct CsvOptions {
  /// When set, the file has no time column and all columns are channels at this rate.
  std::optional<double> fs;
};

/// Header `time,<name>:<quantity>,...`; lines starting with '#' are comments.
/// Empty cells and "nan" become missing samples. Throws ParseError with line numbers.
TimeSeriesSet load_csv(const std::filesystem::path& path, const CsvOptions& opts = {});
TimeSeriesSet parse_csv(std::istream& in, const CsvOptions& opts = {}, const std::string& source = "<stream>");

/// Writes `header_lines` as '#' comments, then the time column and the channels.
void write_csv(const std::filesystem::path& path, const TimeSeriesSet& ts,
               std::span<const std::string> header_lines = {});

// ---------------------------------------------------------------------------
// Filtering

/// Second-order section: b0 + b1 z^-1 + b2 z^-2 over 1 + a1 z^-1 + a2 z^-2.
struct Biquad {
  double b0, b1, b2, a1, a2;
};

enum class FilterBand { LowPass, HighPass };

/// Digital Butterworth design (bilinear transform, prewarped). `order` must be even.
std::vector<Biquad> butterworth(int order, double cutoff_hz, double fs, FilterBand band);

/// Complex frequency response magnitude of a cascade at f_hz.
double sos_gain(std::span<const Biquad> sos, double f_hz, double fs);

/// Forward-backward filtering with odd-extension padding and steady-state initial
/// conditions (constant input gives constant output).
std::vector<double> sosfiltfilt(std::span<const Biquad> sos, std::span<const double> x);

/// Zero-phase 4th-order Butterworth high-pass per channel. Displacement channels are
/// passed through unless `include_displacement`.
TimeSeriesSet highpass(const TimeSeriesSet& ts, double cutoff_hz, bool include_displacement = false);

/// Zero-phase 8th-order Butterworth low-pass at 0.8 * (fs / factor) / 2, then every
/// factor-th sample. An output sample is missing when any input within +-(factor - 1)
/// samples of it was missing.
TimeSeriesSet decimate(const TimeSeriesSet& ts, int factor);

// ---------------------------------------------------------------------------
// Metrics

double rmse(std::span<const double> a, std::span<const double> b);
/// Time Response Assurance Criterion in percent. Throws UndefinedMetric for zero vectors.
double trac(std::span<const double> a, std::span<const double> b);

struct Spectrum {
  std::vector<double> frequency;
  std::vector<double> power;  ///< one-sided density, units^2 / Hz
};

struct WelchOptions {
  std::size_t segment = 1024;
  double overlap = 0.5;
};

/// Welch estimate with a Hann window; mean removed per segment.
Spectrum psd(std::span<const double> x, double fs, const WelchOptions& opts = {});

}  // namespace gplfm
