#include "rarhsmm/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string_view>

namespace rarhsmm::io {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? comma : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

[[noreturn]] void fail(const std::string& path, std::size_t line, const std::string& what) {
  throw ParseError(path + ":" + std::to_string(line) + ": " + what);
}

double parse_double(std::string_view s, const std::string& path, std::size_t line) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
    fail(path, line, "expected a finite number, got \"" + std::string(s) + "\"");
  return v;
}

int parse_int(std::string_view s, const std::string& path, std::size_t line) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    fail(path, line, "expected an integer, got \"" + std::string(s) + "\"");
  return v;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open file: " + path);
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write file: " + path);
  out.precision(17);
  return out;
}

// Calls on_row(fields, line_no) for every data line; returns the rate header.
template <class OnRow>
std::optional<double> scan(const std::string& path, OnRow on_row) {
  auto in = open_in(path);
  std::optional<double> rate;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = trim(raw);
    if (line.empty()) continue;
    if (line.front() == '#') {
      const std::string_view body = trim(line.substr(1));
      if (body.starts_with("rate=")) {
        const double r = parse_double(trim(body.substr(5)), path, line_no);
        if (!(r > 0.0)) fail(path, line_no, "rate must be > 0");
        rate = r;
      }
      continue;
    }
    on_row(split_fields(line), line_no);
  }
  return rate;
}

double require_rate(const std::optional<double>& rate, const std::string& path) {
  if (!rate) throw ParseError(path + ": missing '# rate=<Hz>' header");
  return *rate;
}

}  // namespace

Signal read_signal(const std::string& path) {
  Signal sig;
  sig.sample_rate = scan(path, [&](const std::vector<std::string_view>& f, std::size_t line) {
    if (f.size() > 2) fail(path, line, "expected one value or time,value");
    sig.samples.push_back(parse_double(f.back(), path, line));
  });
  return sig;
}

Sequence read_sequence(const std::string& path) {
  Signal sig = read_signal(path);
  return Sequence{std::move(sig.samples), require_rate(sig.sample_rate, path)};
}

void write_sequence(const std::string& path, const Sequence& seq) {
  auto out = open_out(path);
  out << "# rate=" << seq.sample_rate << '\n';
  for (double v : seq.samples) out << v << '\n';
}

LabelTrack read_labels(const std::string& path) {
  LabelTrack t;
  const auto rate = scan(path, [&](const std::vector<std::string_view>& f, std::size_t line) {
    t.labels.push_back(parse_int(f.front(), path, line));
  });
  t.sample_rate = require_rate(rate, path);
  return t;
}

void write_labels(const std::string& path, const LabelTrack& track) {
  auto out = open_out(path);
  out << "# rate=" << track.sample_rate << '\n';
  for (int v : track.labels) out << v << '\n';
}

HiddenPath read_truth(const std::string& path) {
  HiddenPath hp;
  scan(path, [&](const std::vector<std::string_view>& f, std::size_t line) {
    if (f.size() < 2) fail(path, line, "expected z,d");
    hp.z.push_back(parse_int(f[0], path, line));
    hp.d.push_back(parse_int(f[1], path, line));
  });
  return hp;
}

void write_truth(const std::string& path, const HiddenPath& hp, double sample_rate) {
  auto out = open_out(path);
  out << "# rate=" << sample_rate << '\n';
  out << "# columns=z,d\n";
  for (std::size_t n = 0; n < hp.z.size(); ++n) out << hp.z[n] << ',' << hp.d[n] << '\n';
}

std::vector<EventAnnotation> read_annotations(const std::string& path) {
  std::vector<EventAnnotation> events;
  scan(path, [&](const std::vector<std::string_view>& f, std::size_t line) {
    if (f.size() < 2 || f.size() > 3)
      fail(path, line, "expected onset,duration[,scorer_id]");
    EventAnnotation ev;
    ev.onset = parse_double(f[0], path, line);
    ev.duration = parse_double(f[1], path, line);
    if (f.size() == 3) ev.scorer_id = parse_int(f[2], path, line);
    if (ev.onset < 0.0 || ev.duration <= 0.0)
      fail(path, line, "onset must be >= 0 and duration > 0");
    events.push_back(ev);
  });
  return events;
}

void write_posteriors(const std::string& path, const Matrix& gamma, double sample_rate) {
  auto out = open_out(path);
  out << "# rate=" << sample_rate << '\n';
  for (Eigen::Index n = 0; n < gamma.rows(); ++n) {
    for (Eigen::Index k = 0; k < gamma.cols(); ++k) out << (k ? "," : "") << gamma(n, k);
    out << '\n';
  }
}

}  // namespace rarhsmm::io
