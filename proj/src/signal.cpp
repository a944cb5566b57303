#include "gplfm/signal.hpp"

#include <charconv>
#include <cmath>
#include <complex>
#include <fstream>
#include <mutex>
#include <numbers>
#include <set>
#include <sstream>

#include <fftw3.h>

#include "gplfm/error.hpp"

namespace gplfm {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, sep)) out.push_back(trim(cur));
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

// "name:quantity" or "name:quantity[unit]"
SeriesChannel parse_channel_header(const std::string& cell, const std::string& where) {
  const auto colon = cell.rfind(':');
  if (colon == std::string::npos || colon == 0)
    throw ParseError(where + ": column header '" + cell + "' must be <name>:<quantity>");
  SeriesChannel ch;
  ch.name = cell.substr(0, colon);
  std::string qty = cell.substr(colon + 1);
  std::string unit;
  if (const auto lb = qty.find('['); lb != std::string::npos) {
    const auto rb = qty.find(']', lb);
    if (rb == std::string::npos) throw ParseError(where + ": unterminated unit in '" + cell + "'");
    unit = qty.substr(lb + 1, rb - lb - 1);
    qty = qty.substr(0, lb);
  }
  try {
    ch.quantity = parse_quantity(trim(qty));
  } catch (const ParseError& e) {
    throw ParseError(where + ": " + e.what());
  }
  if (!unit.empty()) {
    static const std::set<std::string> accel{"m/s^2", "m/s2", "m s^-2"};
    static const std::set<std::string> vel{"m/s", "m s^-1"};
    static const std::set<std::string> disp{"m"};
    const bool ok = (ch.quantity == Quantity::Acceleration && accel.count(unit)) ||
                    (ch.quantity == Quantity::Velocity && vel.count(unit)) ||
                    (ch.quantity == Quantity::Displacement && disp.count(unit));
    if (!ok)
      throw ParseError(where + ": unit '" + unit + "' does not match quantity " +
                       std::string(to_string(ch.quantity)) + " (SI units required)");
  }
  return ch;
}

double parse_cell(const std::string& cell, const std::string& where) {
  if (cell.empty() || cell == "nan" || cell == "NaN" || cell == "NA") return std::nan("");
  double v = 0.0;
  const auto r = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (r.ec != std::errc() || r.ptr != cell.data() + cell.size())
    throw ParseError(where + ": cannot parse number '" + cell + "'");
  return v;
}

std::vector<double> fill_missing(std::span<const double> x) {
  std::vector<double> out(x.begin(), x.end());
  const std::size_t n = out.size();
  std::size_t prev = n;
  for (std::size_t i = 0; i < n; ++i) {
    if (std::isfinite(out[i])) {
      if (prev == n) {
        for (std::size_t j = 0; j < i; ++j) out[j] = out[i];
      } else if (i > prev + 1) {
        for (std::size_t j = prev + 1; j < i; ++j)
          out[j] = out[prev] + (out[i] - out[prev]) * static_cast<double>(j - prev) / static_cast<double>(i - prev);
      }
      prev = i;
    }
  }
  if (prev == n) std::fill(out.begin(), out.end(), 0.0);
  else
    for (std::size_t j = prev + 1; j < n; ++j) out[j] = out[prev];
  return out;
}

// Direct form II transposed with per-section state.
void sosfilt_inplace(std::span<const Biquad> sos, std::vector<double>& x, std::vector<std::array<double, 2>> zi) {
  for (std::size_t s = 0; s < sos.size(); ++s) {
    const Biquad& q = sos[s];
    double z1 = zi[s][0], z2 = zi[s][1];
    for (double& v : x) {
      const double in = v;
      const double out = q.b0 * in + z1;
      z1 = q.b1 * in - q.a1 * out + z2;
      z2 = q.b2 * in - q.a2 * out;
      v = out;
    }
  }
}

// Steady-state section states for a unit step at the cascade input.
std::vector<std::array<double, 2>> sos_zi(std::span<const Biquad> sos) {
  std::vector<std::array<double, 2>> zi(sos.size());
  double level = 1.0;
  for (std::size_t s = 0; s < sos.size(); ++s) {
    const Biquad& q = sos[s];
    const double g = (q.b0 + q.b1 + q.b2) / (1.0 + q.a1 + q.a2);
    const double out = g * level;
    const double z2 = q.b2 * level - q.a2 * out;
    const double z1 = q.b1 * level - q.a1 * out + z2;
    zi[s] = {z1, z2};
    level = out;
  }
  return zi;
}

std::vector<std::array<double, 2>> scaled(std::vector<std::array<double, 2>> zi, double k) {
  for (auto& z : zi) {
    z[0] *= k;
    z[1] *= k;
  }
  return zi;
}

std::mutex& fftw_plan_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

std::size_t SeriesChannel::missing() const {
  std::size_t n = 0;
  for (double v : values) n += std::isfinite(v) ? 0 : 1;
  return n;
}

Index TimeSeriesSet::find(std::string_view name) const {
  for (std::size_t i = 0; i < channels.size(); ++i)
    if (channels[i].name == name) return static_cast<Index>(i);
  return -1;
}

const SeriesChannel& TimeSeriesSet::at(std::string_view name) const {
  const Index i = find(name);
  if (i < 0) throw InvalidInput("no channel named '" + std::string(name) + "'");
  return channels[static_cast<std::size_t>(i)];
}

void TimeSeriesSet::validate() const {
  if (!(fs > 0.0) || !std::isfinite(fs)) throw InvalidInput("time series: fs must be positive");
  std::set<std::string> names;
  for (const auto& c : channels) {
    if (!names.insert(c.name).second) throw InvalidInput("time series: duplicate channel name '" + c.name + "'");
    if (c.values.size() != length()) throw InvalidInput("time series: channels have different lengths");
  }
}

Matrix TimeSeriesSet::matrix() const {
  Matrix m(static_cast<Index>(channels.size()), static_cast<Index>(length()));
  for (std::size_t i = 0; i < channels.size(); ++i)
    for (std::size_t k = 0; k < length(); ++k) m(static_cast<Index>(i), static_cast<Index>(k)) = channels[i].values[k];
  return m;
}

Matrix TimeSeriesSet::matrix(std::span<const std::string> names) const {
  Matrix m(static_cast<Index>(names.size()), static_cast<Index>(length()));
  for (std::size_t i = 0; i < names.size(); ++i) {
    const auto& c = at(names[i]);
    for (std::size_t k = 0; k < length(); ++k) m(static_cast<Index>(i), static_cast<Index>(k)) = c.values[k];
  }
  return m;
}

std::size_t TimeSeriesSet::missing() const {
  std::size_t n = 0;
  for (const auto& c : channels) n += c.missing();
  return n;
}

TimeSeriesSet parse_csv(std::istream& in, const CsvOptions& opts, const std::string& source) {
  TimeSeriesSet ts;
  std::vector<double> times;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  std::size_t ncols = 0;
  const bool has_time = !opts.fs.has_value();

  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = source + ":" + std::to_string(lineno);
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto cells = split(t, ',');
    if (!have_header) {
      std::size_t first = 0;
      if (has_time) {
        if (cells.empty() || (cells[0] != "time" && cells[0] != "t" && cells[0].rfind("time", 0) != 0))
          throw ParseError(where + ": first column must be 'time' (or pass the sampling rate)");
        first = 1;
      }
      for (std::size_t c = first; c < cells.size(); ++c) ts.channels.push_back(parse_channel_header(cells[c], where));
      if (ts.channels.empty()) throw ParseError(where + ": no channel columns");
      ncols = cells.size();
      have_header = true;
      continue;
    }
    if (cells.size() != ncols)
      throw ParseError(where + ": expected " + std::to_string(ncols) + " columns, found " +
                       std::to_string(cells.size()));
    std::size_t first = 0;
    if (has_time) {
      const double tv = parse_cell(cells[0], where);
      if (!std::isfinite(tv)) throw ParseError(where + ": missing time value");
      if (!times.empty() && !(tv > times.back())) throw ParseError(where + ": non-monotonic time column");
      times.push_back(tv);
      first = 1;
    }
    for (std::size_t c = first; c < cells.size(); ++c)
      ts.channels[c - first].values.push_back(parse_cell(cells[c], where));
  }
  if (!have_header) throw ParseError(source + ": no header row");

  if (has_time) {
    if (times.size() < 2) throw ParseError(source + ": need at least two samples to infer the sampling rate");
    const double span = times.back() - times.front();
    const double dt = span / static_cast<double>(times.size() - 1);
    for (std::size_t k = 1; k < times.size(); ++k) {
      const double expected = times.front() + dt * static_cast<double>(k);
      if (std::abs(times[k] - expected) > 1e-3 * dt)
        throw ParseError(source + ": non-uniform time step near sample " + std::to_string(k));
    }
    ts.t0 = times.front();
    ts.fs = 1.0 / dt;
    if (std::abs(ts.fs - std::round(ts.fs)) < 1e-6 * ts.fs) ts.fs = std::round(ts.fs);
  } else {
    if (!(*opts.fs > 0.0)) throw InvalidInput("load_csv: sampling rate must be positive");
    ts.fs = *opts.fs;
  }
  ts.validate();
  return ts;
}

TimeSeriesSet load_csv(const std::filesystem::path& path, const CsvOptions& opts) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path.string() + "'");
  return parse_csv(in, opts, path.string());
}

void write_csv(const std::filesystem::path& path, const TimeSeriesSet& ts, std::span<const std::string> header_lines) {
  ts.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot write '" + path.string() + "'");
  for (const auto& h : header_lines) out << "# " << h << '\n';
  out << "time";
  for (const auto& c : ts.channels) out << ',' << c.name << ':' << to_string(c.quantity);
  out << '\n';
  for (std::size_t k = 0; k < ts.length(); ++k) {
    out << format_double(ts.t0 + static_cast<double>(k) / ts.fs);
    for (const auto& c : ts.channels) out << ',' << format_double(c.values[k]);
    out << '\n';
  }
}

std::vector<Biquad> butterworth(int order, double cutoff_hz, double fs, FilterBand band) {
  if (order < 2 || order % 2 != 0) throw InvalidInput("butterworth: order must be even and >= 2");
  if (!(cutoff_hz > 0.0) || !(cutoff_hz < fs / 2.0))
    throw InvalidInput("butterworth: cutoff must lie strictly between 0 and the Nyquist frequency");
  using C = std::complex<double>;
  const double warped = 2.0 * fs * std::tan(std::numbers::pi * cutoff_hz / fs);
  std::vector<Biquad> sos;
  for (int k = 0; k < order / 2; ++k) {
    const C proto = std::polar(1.0, std::numbers::pi * (2.0 * k + order + 1.0) / (2.0 * order));
    const C s = band == FilterBand::LowPass ? warped * proto : warped / proto;
    const C z = (2.0 * fs + s) / (2.0 * fs - s);
    Biquad q{};
    q.a1 = -2.0 * z.real();
    q.a2 = std::norm(z);
    if (band == FilterBand::LowPass) {
      const double g = (1.0 + q.a1 + q.a2) / 4.0;
      q.b0 = g;
      q.b1 = 2.0 * g;
      q.b2 = g;
    } else {
      const double g = (1.0 - q.a1 + q.a2) / 4.0;
      q.b0 = g;
      q.b1 = -2.0 * g;
      q.b2 = g;
    }
    sos.push_back(q);
  }
  return sos;
}

double sos_gain(std::span<const Biquad> sos, double f_hz, double fs) {
  using C = std::complex<double>;
  const C zinv = std::polar(1.0, -2.0 * std::numbers::pi * f_hz / fs);
  C h = 1.0;
  for (const auto& q : sos) h *= (q.b0 + q.b1 * zinv + q.b2 * zinv * zinv) / (1.0 + q.a1 * zinv + q.a2 * zinv * zinv);
  return std::abs(h);
}

std::vector<double> sosfiltfilt(std::span<const Biquad> sos, std::span<const double> x) {
  const std::size_t n = x.size();
  if (n == 0) return {};
  std::size_t pad = 3 * (2 * sos.size() + 1);
  pad = std::min(pad, n - 1);

  std::vector<double> ext;
  ext.reserve(n + 2 * pad);
  for (std::size_t i = pad; i >= 1; --i) ext.push_back(2.0 * x[0] - x[i]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (std::size_t i = 1; i <= pad; ++i) ext.push_back(2.0 * x[n - 1] - x[n - 1 - i]);

  const auto zi = sos_zi(sos);
  sosfilt_inplace(sos, ext, scaled(zi, ext.front()));
  std::reverse(ext.begin(), ext.end());
  sosfilt_inplace(sos, ext, scaled(zi, ext.front()));
  std::reverse(ext.begin(), ext.end());
  return {ext.begin() + static_cast<std::ptrdiff_t>(pad), ext.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

TimeSeriesSet highpass(const TimeSeriesSet& ts, double cutoff_hz, bool include_displacement) {
  ts.validate();
  if (!(cutoff_hz > 0.0) || !(cutoff_hz < ts.fs / 2.0))
    throw InvalidInput("highpass: cutoff must lie strictly between 0 and the Nyquist frequency");
  const auto sos = butterworth(4, cutoff_hz, ts.fs, FilterBand::HighPass);
  TimeSeriesSet out = ts;
  for (auto& c : out.channels) {
    if (c.quantity == Quantity::Displacement && !include_displacement) continue;
    auto filtered = sosfiltfilt(sos, fill_missing(c.values));
    for (std::size_t k = 0; k < filtered.size(); ++k)
      if (!std::isfinite(c.values[k])) filtered[k] = std::nan("");
    c.values = std::move(filtered);
  }
  return out;
}

TimeSeriesSet decimate(const TimeSeriesSet& ts, int factor) {
  ts.validate();
  if (factor < 2) throw InvalidInput("decimate: factor must be an integer >= 2");
  const double new_fs = ts.fs / factor;
  const auto sos = butterworth(8, 0.8 * new_fs / 2.0, ts.fs, FilterBand::LowPass);
  TimeSeriesSet out;
  out.t0 = ts.t0;
  out.fs = new_fs;
  const std::size_t n = ts.length();
  const std::size_t m = n == 0 ? 0 : (n - 1) / static_cast<std::size_t>(factor) + 1;
  const auto f = static_cast<std::size_t>(factor);
  for (const auto& c : ts.channels) {
    const auto filtered = sosfiltfilt(sos, fill_missing(c.values));
    SeriesChannel d{c.name, c.quantity, std::vector<double>(m)};
    for (std::size_t k = 0; k < m; ++k) {
      const std::size_t centre = k * f;
      const std::size_t lo = centre >= f - 1 ? centre - (f - 1) : 0;
      const std::size_t hi = std::min(n - 1, centre + f - 1);
      bool masked = false;
      for (std::size_t i = lo; i <= hi && !masked; ++i) masked = !std::isfinite(c.values[i]);
      d.values[k] = masked ? std::nan("") : filtered[centre];
    }
    out.channels.push_back(std::move(d));
  }
  return out;
}

double rmse(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) throw InvalidInput("rmse: series must have equal non-zero length");
  double acc = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (!std::isfinite(a[k]) || !std::isfinite(b[k])) continue;
    const double d = b[k] - a[k];
    acc += d * d;
    ++n;
  }
  if (n == 0) throw UndefinedMetric("rmse: no overlapping valid samples");
  return std::sqrt(acc / static_cast<double>(n));
}

double trac(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) throw InvalidInput("trac: series must have equal non-zero length");
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (!std::isfinite(a[k]) || !std::isfinite(b[k])) continue;
    ab += a[k] * b[k];
    aa += a[k] * a[k];
    bb += b[k] * b[k];
  }
  if (!(aa > 0.0) || !(bb > 0.0)) throw UndefinedMetric("trac: undefined for a zero vector");
  return 100.0 * (ab * ab) / (aa * bb);
}

Spectrum psd(std::span<const double> x, double fs, const WelchOptions& opts) {
  if (x.empty()) throw InvalidInput("psd: empty series");
  if (!(fs > 0.0)) throw InvalidInput("psd: fs must be positive");
  if (!(opts.overlap >= 0.0 && opts.overlap < 1.0)) throw InvalidInput("psd: overlap must lie in [0, 1)");
  const std::size_t len = std::min(opts.segment, x.size());
  const std::size_t step = std::max<std::size_t>(1, static_cast<std::size_t>(std::round(len * (1.0 - opts.overlap))));
  const std::size_t bins = len / 2 + 1;

  std::vector<double> window(len);
  double wss = 0.0;
  for (std::size_t i = 0; i < len; ++i) {
    window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(len));
    wss += window[i] * window[i];
  }
  if (len == 1) {
    window[0] = 1.0;
    wss = 1.0;
  }

  double* buf = fftw_alloc_real(len);
  fftw_complex* spec = fftw_alloc_complex(bins);
  fftw_plan plan;
  {
    std::lock_guard lock(fftw_plan_mutex());
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(len), buf, spec, FFTW_ESTIMATE);
  }

  Spectrum out;
  out.frequency.resize(bins);
  out.power.assign(bins, 0.0);
  std::size_t segments = 0;
  for (std::size_t start = 0; start + len <= x.size(); start += step) {
    double mean = 0.0;
    for (std::size_t i = 0; i < len; ++i) mean += x[start + i];
    mean /= static_cast<double>(len);
    for (std::size_t i = 0; i < len; ++i) buf[i] = (x[start + i] - mean) * window[i];
    fftw_execute(plan);
    for (std::size_t b = 0; b < bins; ++b) {
      double p = (spec[b][0] * spec[b][0] + spec[b][1] * spec[b][1]) / (fs * wss);
      if (b != 0 && !(len % 2 == 0 && b == bins - 1)) p *= 2.0;
      out.power[b] += p;
    }
    ++segments;
  }
  for (std::size_t b = 0; b < bins; ++b) {
    out.frequency[b] = static_cast<double>(b) * fs / static_cast<double>(len);
    out.power[b] /= static_cast<double>(segments);
  }
  {
    std::lock_guard lock(fftw_plan_mutex());
    fftw_destroy_plan(plan);
  }
  fftw_free(buf);
  fftw_free(spec);
  return out;
}

}  // namespace gplfm
