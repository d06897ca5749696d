#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "fedrd/errors.hpp"

namespace fedrd {

// One right-censored observation: observed time Y = min(T, C), event
// indicator delta (1 = event, 0 = censored), covariate vector x.
struct Subject {
  double time = 0.0;
  int status = 0;
  std::vector<double> covariates;
};

struct SurvivalDataset {
  std::vector<Subject> subjects;
  int p = 0;
  std::string site_id;

  size_t n() const { return subjects.size(); }
};

// Ordered observation times y_(1) <= ... <= y_(n) with Riemann increments
// dy_(i) = y_(i) - y_(i-1), y_(0) = 0. Duplicates are kept (their increment
// is zero) so grid entries align one-to-one with subjects.
struct TimeGrid {
  std::vector<double> times;
  std::vector<double> deltas;

  size_t size() const { return times.size(); }
};

inline TimeGrid build_time_grid(std::vector<double> times) {
  if (times.empty()) throw Error("build_time_grid: empty input");
  for (double t : times)
    if (!(t >= 0.0)) throw Error("build_time_grid: negative or non-finite time");
  std::sort(times.begin(), times.end());
  TimeGrid grid;
  grid.deltas.resize(times.size());
  double prev = 0.0;
  for (size_t i = 0; i < times.size(); ++i) {
    grid.deltas[i] = times[i] - prev;
    prev = times[i];
  }
  grid.times = std::move(times);
  return grid;
}

inline void validate_dataset(const SurvivalDataset& data) {
  if (data.subjects.empty()) throw Error("dataset is empty");
  if (data.p <= 0) throw Error("dataset has no covariates");
  for (const Subject& s : data.subjects) {
    if (!(s.time >= 0.0) || !std::isfinite(s.time)) throw Error("negative or non-finite time");
    if (s.status != 0 && s.status != 1) throw Error("status not in {0,1}");
    if (static_cast<int>(s.covariates.size()) != data.p) throw Error("covariate length mismatch");
    for (double x : s.covariates)
      if (!std::isfinite(x)) throw Error("non-finite covariate");
  }
}

namespace detail {

inline double parse_double(std::string_view tok, const std::string& what, size_t row) {
  double v = 0.0;
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last)
    throw Error("malformed " + what + " at row " + std::to_string(row));
  return v;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  size_t start = 0;
  while (true) {
    size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

inline std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace detail

// Load a dataset from CSV with header `time,status,x1,...,xp`.
// Rows are 1-based including the header, so the first data row is row 2.
inline SurvivalDataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw Error("empty file: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto header = detail::split_csv(line);
  if (header.size() < 3 || header[0] != "time" || header[1] != "status")
    throw Error("bad header (expected time,status,x1,...): " + path);
  SurvivalDataset data;
  data.p = static_cast<int>(header.size()) - 2;

  size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = detail::split_csv(line);
    if (fields.size() != header.size())
      throw Error("wrong field count at row " + std::to_string(row));
    Subject s;
    s.time = detail::parse_double(fields[0], "time", row);
    if (!std::isfinite(s.time)) throw Error("non-finite time at row " + std::to_string(row));
    if (s.time < 0.0) throw Error("negative time at row " + std::to_string(row));
    if (fields[1] == "0")
      s.status = 0;
    else if (fields[1] == "1")
      s.status = 1;
    else
      throw Error("status not in {0,1} at row " + std::to_string(row));
    s.covariates.reserve(data.p);
    for (size_t j = 2; j < fields.size(); ++j) {
      double x = detail::parse_double(fields[j], "covariate", row);
      if (!std::isfinite(x)) throw Error("non-finite covariate at row " + std::to_string(row));
      s.covariates.push_back(x);
    }
    data.subjects.push_back(std::move(s));
  }
  if (data.subjects.empty()) throw Error("no data rows in " + path);
  return data;
}

// Write the same CSV format load_dataset reads. Floats are rendered
// shortest-round-trip so a reload reproduces the dataset exactly.
inline void save_dataset(const SurvivalDataset& data, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write file: " + path);
  out << "time,status";
  for (int j = 1; j <= data.p; ++j) out << ",x" << j;
  out << "\n";
  for (const Subject& s : data.subjects) {
    out << detail::format_double(s.time) << ',' << s.status;
    for (double x : s.covariates) out << ',' << detail::format_double(x);
    out << "\n";
  }
  if (!out) throw Error("write failed: " + path);
}

}  // namespace fedrd
