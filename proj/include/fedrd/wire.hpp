#pragma once

#include <cctype>
#include <charconv>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "fedrd/federation.hpp"

namespace fedrd {

// Canonical text message format, protocol FEDRD/1. Floats are rendered
// shortest-round-trip so decode(encode(m)) reproduces exact bit patterns.
//
//   line 1: FEDRD/1 <MSG_TYPE> study=<id> site=<id> round=<r>
//   line 2: p=<int> n=<int>
//   payload blocks: a tag line (e.g. `times:`) followed by its value lines
//   terminator: single line `end`

enum class MsgType { TIMES, GRID, RISK_AGG, XBAR, CONTRIB_U, SUMMARY_S, FIT };

inline const char* msg_type_name(MsgType t) {
  switch (t) {
    case MsgType::TIMES: return "TIMES";
    case MsgType::GRID: return "GRID";
    case MsgType::RISK_AGG: return "RISK_AGG";
    case MsgType::XBAR: return "XBAR";
    case MsgType::CONTRIB_U: return "CONTRIB_U";
    case MsgType::SUMMARY_S: return "SUMMARY_S";
    case MsgType::FIT: return "FIT";
  }
  return "?";
}

inline MsgType msg_type_from_name(std::string_view s) {
  if (s == "TIMES") return MsgType::TIMES;
  if (s == "GRID") return MsgType::GRID;
  if (s == "RISK_AGG") return MsgType::RISK_AGG;
  if (s == "XBAR") return MsgType::XBAR;
  if (s == "CONTRIB_U") return MsgType::CONTRIB_U;
  if (s == "SUMMARY_S") return MsgType::SUMMARY_S;
  if (s == "FIT") return MsgType::FIT;
  throw WireError("unknown message type: " + std::string(s));
}

struct Envelope {
  MsgType msg_type = MsgType::TIMES;
  std::string study_id;
  std::string site_id;
  int round = 1;
};

// Round each message type belongs to. FIT closes round 3 for the
// unstratified protocol and round 1 for the stratified one.
inline bool round_matches(MsgType t, int round) {
  switch (t) {
    case MsgType::TIMES:
    case MsgType::GRID:
    case MsgType::SUMMARY_S: return round == 1;
    case MsgType::RISK_AGG:
    case MsgType::XBAR: return round == 2;
    case MsgType::CONTRIB_U: return round == 3;
    case MsgType::FIT: return round == 1 || round == 3;
  }
  return false;
}

using Payload = std::variant<SortedTimes, TimeGrid, RiskAggregate, XbarSeries, SiteContributionU,
                             SiteSummaryS, FitResult>;

namespace wire_detail {

inline void append_double(std::string& out, double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ptr);
}

inline void append_row(std::string& out, const Vec& v) {
  for (size_t j = 0; j < v.size(); ++j) {
    if (j) out.push_back(' ');
    append_double(out, v[j]);
  }
  out.push_back('\n');
}

inline void append_mat(std::string& out, const Mat& m) {
  for (int i = 0; i < m.dim(); ++i) {
    for (int j = 0; j < m.dim(); ++j) {
      if (j) out.push_back(' ');
      append_double(out, m(i, j));
    }
    out.push_back('\n');
  }
}

inline void check_id(const std::string& id, const char* what) {
  if (id.empty()) throw WireError(std::string(what) + " id is empty");
  for (char c : id)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.'))
      throw WireError(std::string(what) + " id has invalid character: " + id);
}

struct LineReader {
  std::string_view text;
  size_t pos = 0;
  int lineno = 0;

  bool next(std::string_view& line) {
    if (pos >= text.size()) return false;
    size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) {
      line = text.substr(pos);
      pos = text.size();
    } else {
      line = text.substr(pos, nl - pos);
      pos = nl + 1;
    }
    ++lineno;
    return true;
  }

  std::string_view require(const char* what) {
    std::string_view line;
    if (!next(line)) throw TruncatedPayload(std::string("message ends before ") + what);
    return line;
  }
};

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && line[i] == ' ') ++i;
    size_t start = i;
    while (i < line.size() && line[i] != ' ') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

inline double parse_double(std::string_view tok) {
  double v;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size())
    throw WireError("bad float token: " + std::string(tok));
  return v;
}

inline long parse_long(std::string_view tok) {
  long v;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size())
    throw WireError("bad integer token: " + std::string(tok));
  return v;
}

inline Vec parse_row(std::string_view line, size_t expect, const char* what) {
  auto toks = split_ws(line);
  if (toks.size() != expect)
    throw DimensionMismatch(std::string(what) + ": expected " + std::to_string(expect) +
                            " values, got " + std::to_string(toks.size()));
  Vec v(expect);
  for (size_t j = 0; j < expect; ++j) v[j] = parse_double(toks[j]);
  return v;
}

inline void expect_tag(LineReader& r, const char* tag) {
  std::string_view line = r.require(tag);
  if (line != tag) throw WireError(std::string("expected `") + tag + "`, got: " + std::string(line));
}

inline Mat parse_mat(LineReader& r, int p, const char* what) {
  Mat m(p);
  for (int i = 0; i < p; ++i) {
    Vec row = parse_row(r.require(what), p, what);
    for (int j = 0; j < p; ++j) m(i, j) = row[j];
  }
  return m;
}

inline void append_abc_block(std::string& out, const Mat& a, const Vec& d, const Mat& sigma) {
  out += "A:\n";
  append_mat(out, a);
  out += "D:\n";
  append_row(out, d);
  out += "SIGMA:\n";
  append_mat(out, sigma);
}

}  // namespace wire_detail

inline std::string encode_message(const Envelope& env, const Payload& payload) {
  using namespace wire_detail;
  check_id(env.study_id, "study");
  check_id(env.site_id, "site");
  if (!round_matches(env.msg_type, env.round))
    throw WireError(std::string("message type ") + msg_type_name(env.msg_type) +
                    " not valid in round " + std::to_string(env.round));

  long n = 0;
  int p = 0;
  std::string body;
  switch (env.msg_type) {
    case MsgType::TIMES: {
      const auto* t = std::get_if<SortedTimes>(&payload);
      if (!t) throw WireError("payload does not match TIMES");
      n = static_cast<long>(t->times.size());
      body += "times:\n";
      append_row(body, t->times);
      break;
    }
    case MsgType::GRID: {
      const auto* g = std::get_if<TimeGrid>(&payload);
      if (!g) throw WireError("payload does not match GRID");
      n = static_cast<long>(g->size());
      body += "times:\n";
      append_row(body, g->times);
      body += "deltas:\n";
      append_row(body, g->deltas);
      break;
    }
    case MsgType::RISK_AGG: {
      const auto* a = std::get_if<RiskAggregate>(&payload);
      if (!a) throw WireError("payload does not match RISK_AGG");
      n = static_cast<long>(a->counts.size());
      p = a->xsums.empty() ? 0 : static_cast<int>(a->xsums[0].size());
      body += "counts:\n";
      for (size_t i = 0; i < a->counts.size(); ++i) {
        if (i) body.push_back(' ');
        body += std::to_string(a->counts[i]);
      }
      body.push_back('\n');
      body += "xsums:\n";
      for (const Vec& row : a->xsums) append_row(body, row);
      break;
    }
    case MsgType::XBAR: {
      const auto* x = std::get_if<XbarSeries>(&payload);
      if (!x) throw WireError("payload does not match XBAR");
      n = static_cast<long>(x->grid.size());
      p = x->xbars.empty() ? 0 : static_cast<int>(x->xbars[0].size());
      body += "times:\n";
      append_row(body, x->grid.times);
      body += "deltas:\n";
      append_row(body, x->grid.deltas);
      body += "xbars:\n";
      for (const Vec& row : x->xbars) append_row(body, row);
      break;
    }
    case MsgType::CONTRIB_U: {
      const auto* c = std::get_if<SiteContributionU>(&payload);
      if (!c) throw WireError("payload does not match CONTRIB_U");
      n = c->n_k;
      p = c->a_part.dim();
      append_abc_block(body, c->a_part, c->d_part, c->sigma_part);
      break;
    }
    case MsgType::SUMMARY_S: {
      const auto* s = std::get_if<SiteSummaryS>(&payload);
      if (!s) throw WireError("payload does not match SUMMARY_S");
      n = s->n_k;
      p = s->a_k.dim();
      append_abc_block(body, s->a_k, s->d_k, s->sigma_k);
      break;
    }
    case MsgType::FIT: {
      const auto* f = std::get_if<FitResult>(&payload);
      if (!f) throw WireError("payload does not match FIT");
      n = f->n;
      p = static_cast<int>(f->beta.size());
      body += "beta:\n";
      append_row(body, f->beta);
      body += "cov:\n";
      append_mat(body, f->cov);
      body += "method:\n";
      body += method_name(f->method);
      body.push_back('\n');
      body += "n:\n";
      body += std::to_string(f->n);
      body.push_back('\n');
      break;
    }
  }

  std::string out = "FEDRD/1 ";
  out += msg_type_name(env.msg_type);
  out += " study=" + env.study_id + " site=" + env.site_id +
         " round=" + std::to_string(env.round) + "\n";
  out += "p=" + std::to_string(p) + " n=" + std::to_string(n) + "\n";
  out += body;
  out += "end\n";
  return out;
}

inline std::pair<Envelope, Payload> decode_message(std::string_view bytes) {
  using namespace wire_detail;
  LineReader r{bytes};

  auto header = split_ws(r.require("header"));
  if (header.size() != 5) throw WireError("malformed header line");
  if (header[0] != "FEDRD/1")
    throw VersionMismatch("unsupported protocol version: " + std::string(header[0]));
  Envelope env;
  env.msg_type = msg_type_from_name(header[1]);
  auto field = [&](std::string_view tok, std::string_view key) {
    if (tok.substr(0, key.size()) != key) throw WireError("malformed header field: " + std::string(tok));
    return std::string(tok.substr(key.size()));
  };
  env.study_id = field(header[2], "study=");
  env.site_id = field(header[3], "site=");
  env.round = static_cast<int>(parse_long(field(header[4], "round=")));
  if (!round_matches(env.msg_type, env.round))
    throw WireError(std::string("message type ") + msg_type_name(env.msg_type) +
                    " not valid in round " + std::to_string(env.round));

  auto dims = split_ws(r.require("dimension line"));
  if (dims.size() != 2) throw WireError("malformed dimension line");
  const int p = static_cast<int>(parse_long(field(dims[0], "p=")));
  const long n = parse_long(field(dims[1], "n="));
  if (p < 0 || n < 0) throw DimensionMismatch("negative dimension");

  Payload payload;
  switch (env.msg_type) {
    case MsgType::TIMES: {
      SortedTimes t;
      t.site_id = env.site_id;
      expect_tag(r, "times:");
      t.times = parse_row(r.require("times"), n, "times");
      payload = std::move(t);
      break;
    }
    case MsgType::GRID: {
      TimeGrid g;
      expect_tag(r, "times:");
      g.times = parse_row(r.require("times"), n, "grid times");
      expect_tag(r, "deltas:");
      g.deltas = parse_row(r.require("deltas"), n, "grid deltas");
      payload = std::move(g);
      break;
    }
    case MsgType::RISK_AGG: {
      RiskAggregate a;
      a.site_id = env.site_id;
      expect_tag(r, "counts:");
      auto toks = split_ws(r.require("counts"));
      if (static_cast<long>(toks.size()) != n)
        throw DimensionMismatch("counts: expected " + std::to_string(n) + " values");
      a.counts.resize(n);
      for (long i = 0; i < n; ++i) a.counts[i] = parse_long(toks[i]);
      expect_tag(r, "xsums:");
      a.xsums.reserve(n);
      for (long i = 0; i < n; ++i) a.xsums.push_back(parse_row(r.require("xsums"), p, "xsums"));
      payload = std::move(a);
      break;
    }
    case MsgType::XBAR: {
      XbarSeries x;
      expect_tag(r, "times:");
      x.grid.times = parse_row(r.require("times"), n, "xbar times");
      expect_tag(r, "deltas:");
      x.grid.deltas = parse_row(r.require("deltas"), n, "xbar deltas");
      expect_tag(r, "xbars:");
      x.xbars.reserve(n);
      for (long i = 0; i < n; ++i) x.xbars.push_back(parse_row(r.require("xbars"), p, "xbars"));
      payload = std::move(x);
      break;
    }
    case MsgType::CONTRIB_U: {
      SiteContributionU c;
      c.site_id = env.site_id;
      c.n_k = n;
      expect_tag(r, "A:");
      c.a_part = parse_mat(r, p, "A");
      expect_tag(r, "D:");
      c.d_part = parse_row(r.require("D"), p, "D");
      expect_tag(r, "SIGMA:");
      c.sigma_part = parse_mat(r, p, "SIGMA");
      payload = std::move(c);
      break;
    }
    case MsgType::SUMMARY_S: {
      SiteSummaryS s;
      s.site_id = env.site_id;
      s.n_k = n;
      expect_tag(r, "A:");
      s.a_k = parse_mat(r, p, "A");
      expect_tag(r, "D:");
      s.d_k = parse_row(r.require("D"), p, "D");
      expect_tag(r, "SIGMA:");
      s.sigma_k = parse_mat(r, p, "SIGMA");
      payload = std::move(s);
      break;
    }
    case MsgType::FIT: {
      FitResult f;
      f.n = n;
      expect_tag(r, "beta:");
      f.beta = parse_row(r.require("beta"), p, "beta");
      expect_tag(r, "cov:");
      f.cov = parse_mat(r, p, "cov");
      expect_tag(r, "method:");
      f.method = method_from_name(std::string(r.require("method")));
      expect_tag(r, "n:");
      if (parse_long(r.require("n")) != n) throw DimensionMismatch("n block disagrees with header");
      payload = std::move(f);
      break;
    }
  }

  std::string_view line = r.require("terminator");
  if (line != "end") throw TruncatedPayload("missing `end` terminator");
  if (r.next(line) && !line.empty()) throw WireError("trailing content after `end`");
  return {env, std::move(payload)};
}

}  // namespace fedrd
