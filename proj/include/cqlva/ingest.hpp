#pragma once

// Trace files: one detection per JSONL line or CSV row. Also trace
// concatenation and a seeded synthetic trace generator.
//
// JSONL: {"fid":2,"oid":1,"label":"person","ts":0.07,"bb":[11,20.5,30,20],"fv":[...]}
// CSV:   fid,oid,label,ts,bb_x,bb_y,bb_w,bb_h,fv_0,...,fv_k   (ts may be empty)

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "cqlva/error.hpp"
#include "cqlva/model.hpp"

namespace cqlva {

enum class TraceFormat { Jsonl, Csv };

/// ".csv" selects CSV; anything else is read as JSON Lines.
inline TraceFormat format_for_path(std::string_view path) {
  std::string p = lowercase(path);
  return p.size() >= 4 && p.compare(p.size() - 4, 4, ".csv") == 0 ? TraceFormat::Csv : TraceFormat::Jsonl;
}

struct ReaderOptions {
  double fps = 30;  // ts = fid / fps when a record has no ts
  /// Input boxes use a top-left origin with y growing downwards; convert to
  /// lower-left Cartesian using image_height.
  bool flip_y = false;
  double image_height = 0;
  std::optional<TraceFormat> format;  // unset: from the file extension
};

namespace detail {

[[noreturn]] inline void parse_fail(std::size_t line, const std::string& msg) {
  throw Error(ErrorCode::ParseError, msg, {line, 1});
}

inline double parse_double(std::string_view s, std::size_t line, std::string_view what) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    parse_fail(line, "bad number for " + std::string(what) + ": '" + std::string(s) + "'");
  return v;
}

inline std::int64_t parse_int(std::string_view s, std::size_t line, std::string_view what) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    parse_fail(line, "bad integer for " + std::string(what) + ": '" + std::string(s) + "'");
  return v;
}

inline std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

/// Splits one CSV line; double-quoted fields may contain commas and "" escapes.
inline std::vector<std::string> split_csv(std::string_view line, std::size_t lineno) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false, was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field.push_back(c);
      }
    } else if (c == '"' && field.empty() && !was_quoted) {
      quoted = was_quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
      was_quoted = false;
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  if (quoted) parse_fail(lineno, "unterminated quoted field");
  out.push_back(std::move(field));
  return out;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  return out + "\"";
}

struct RawRecord {
  VTuple t;
  bool has_ts = false;
  std::size_t line = 0;
};

inline RawRecord parse_jsonl_record(const std::string& text, std::size_t line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    parse_fail(line, std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) parse_fail(line, "record is not a JSON object");
  RawRecord r;
  r.line = line;
  auto need = [&](const char* key) -> const nlohmann::json& {
    auto it = j.find(key);
    if (it == j.end()) parse_fail(line, std::string("missing field '") + key + "'");
    return *it;
  };
  const auto& fid = need("fid");
  const auto& oid = need("oid");
  if (!fid.is_number_integer() || !oid.is_number_integer()) parse_fail(line, "fid and oid must be integers");
  r.t.fid = fid.get<std::int64_t>();
  r.t.oid = oid.get<std::int64_t>();
  const auto& label = need("label");
  if (!label.is_string()) parse_fail(line, "label must be a string");
  r.t.label = label.get<std::string>();
  const auto& bb = need("bb");
  if (!bb.is_array() || bb.size() != 4) parse_fail(line, "bb must be an array of 4 numbers");
  double v[4];
  for (std::size_t k = 0; k < 4; ++k) {
    if (!bb[k].is_number()) parse_fail(line, "bb must be an array of 4 numbers");
    v[k] = bb[k].get<double>();
  }
  r.t.bb = {v[0], v[1], v[2], v[3]};
  const auto& fv = need("fv");
  if (!fv.is_array()) parse_fail(line, "fv must be an array of numbers");
  for (const auto& x : fv) {
    if (!x.is_number()) parse_fail(line, "fv must be an array of numbers");
    r.t.fv.values.push_back(x.get<double>());
  }
  if (auto it = j.find("ts"); it != j.end() && !it->is_null()) {
    if (!it->is_number()) parse_fail(line, "ts must be a number");
    r.t.ts = it->get<double>();
    r.has_ts = true;
  }
  return r;
}

inline void check_csv_header(const std::vector<std::string>& h) {
  static const char* fixed[] = {"fid", "oid", "label", "ts", "bb_x", "bb_y", "bb_w", "bb_h"};
  if (h.size() < 9) parse_fail(1, "CSV header needs fid,oid,label,ts,bb_x,bb_y,bb_w,bb_h,fv_0..");
  for (std::size_t k = 0; k < 8; ++k)
    if (lowercase(h[k]) != fixed[k]) parse_fail(1, std::string("CSV header column ") + std::to_string(k + 1) +
                                                       " must be '" + fixed[k] + "'");
  for (std::size_t k = 8; k < h.size(); ++k)
    if (lowercase(h[k]) != "fv_" + std::to_string(k - 8))
      parse_fail(1, "CSV header column " + std::to_string(k + 1) + " must be 'fv_" + std::to_string(k - 8) + "'");
}

inline RawRecord parse_csv_record(const std::vector<std::string>& f, std::size_t ncols, std::size_t line) {
  if (f.size() != ncols)
    parse_fail(line, "expected " + std::to_string(ncols) + " fields, found " + std::to_string(f.size()));
  RawRecord r;
  r.line = line;
  r.t.fid = parse_int(f[0], line, "fid");
  r.t.oid = parse_int(f[1], line, "oid");
  r.t.label = f[2];
  if (!f[3].empty()) {
    r.t.ts = parse_double(f[3], line, "ts");
    r.has_ts = true;
  }
  r.t.bb = {parse_double(f[4], line, "bb_x"), parse_double(f[5], line, "bb_y"), parse_double(f[6], line, "bb_w"),
            parse_double(f[7], line, "bb_h")};
  for (std::size_t k = 8; k < f.size(); ++k) r.t.fv.values.push_back(parse_double(f[k], line, "fv"));
  return r;
}

/// Assigns timestamps, checks order and validity, and sorts rows of a frame by oid.
inline RRelation finish_trace(std::vector<RawRecord> recs, const ReaderOptions& opts, std::string source_id) {
  if (!(opts.fps > 0)) throw Error(ErrorCode::ConfigError, "fps must be positive");
  RRelation rel;
  rel.source_id = std::move(source_id);
  std::optional<std::int64_t> last_fid;
  std::optional<double> last_ts;
  std::set<std::int64_t> oids_in_frame;
  for (auto& r : recs) {
    VTuple& t = r.t;
    if (!r.has_ts) t.ts = static_cast<double>(t.fid) / opts.fps;
    if (opts.flip_y) t.bb.y = opts.image_height - t.bb.y - t.bb.h;
    if (last_fid && t.fid < *last_fid)
      throw Error(ErrorCode::OutOfOrderFrame,
                  "frame " + std::to_string(t.fid) + " after frame " + std::to_string(*last_fid), {r.line, 1});
    if (last_ts && t.ts < *last_ts)
      throw Error(ErrorCode::OutOfOrderFrame, "timestamp decreases at frame " + std::to_string(t.fid), {r.line, 1});
    if (last_fid && t.fid != *last_fid) oids_in_frame.clear();
    if (!oids_in_frame.insert(t.oid).second)
      parse_fail(r.line, "object " + std::to_string(t.oid) + " appears twice in frame " + std::to_string(t.fid));
    if (!rel.schema.fv_dim) rel.schema.fv_dim = t.fv.dim() > 0 ? std::optional(t.fv.dim()) : std::nullopt;
    try {
      validate_tuple(t, rel.schema);
    } catch (const Error& e) {
      throw Error(e.code(), e.message(), {r.line, 1});
    }
    last_fid = t.fid;
    last_ts = t.ts;
    rel.rows.push_back(std::move(t));
  }
  // Frames are contiguous now; order each frame's rows by oid.
  auto frame_less = [](const VTuple& a, const VTuple& b) { return std::tie(a.fid, a.oid) < std::tie(b.fid, b.oid); };
  std::stable_sort(rel.rows.begin(), rel.rows.end(), frame_less);
  return rel;
}

}  // namespace detail

/// Parses trace text. `source_id` only labels the result.
inline RRelation read_trace_text(std::string_view text, TraceFormat format, const ReaderOptions& opts = {},
                                 std::string source_id = {}) {
  std::vector<detail::RawRecord> recs;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  std::size_t ncols = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (format == TraceFormat::Jsonl) {
      recs.push_back(detail::parse_jsonl_record(line, lineno));
      continue;
    }
    auto fields = detail::split_csv(line, lineno);
    if (ncols == 0) {
      if (lineno != 1) detail::parse_fail(lineno, "CSV header must be the first line");
      detail::check_csv_header(fields);
      ncols = fields.size();
      continue;
    }
    recs.push_back(detail::parse_csv_record(fields, ncols, lineno));
  }
  return detail::finish_trace(std::move(recs), opts, std::move(source_id));
}

inline RRelation read_trace(const std::string& path, const ReaderOptions& opts = {}) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::IoError, "cannot open trace " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return read_trace_text(ss.str(), opts.format.value_or(format_for_path(path)), opts, path);
}

/// Serializes every tuple, ts included, at full double precision.
inline std::string write_trace_text(const RRelation& rel, TraceFormat format) {
  std::string out;
  if (format == TraceFormat::Jsonl) {
    for (const auto& t : rel.rows) {
      nlohmann::ordered_json j;
      j["fid"] = t.fid;
      j["oid"] = t.oid;
      j["label"] = t.label;
      j["ts"] = t.ts;
      j["bb"] = {t.bb.x, t.bb.y, t.bb.w, t.bb.h};
      j["fv"] = t.fv.values;
      out += j.dump() + "\n";
    }
    return out;
  }
  std::size_t dim = rel.schema.fv_dim.value_or(rel.rows.empty() ? 1 : rel.rows.front().fv.dim());
  out = "fid,oid,label,ts,bb_x,bb_y,bb_w,bb_h";
  for (std::size_t k = 0; k < dim; ++k) out += ",fv_" + std::to_string(k);
  out += "\n";
  using detail::format_double;
  for (const auto& t : rel.rows) {
    if (t.fv.dim() != dim) throw Error(ErrorCode::SchemaMismatch, "CSV needs one feature-vector dimension");
    out += std::to_string(t.fid) + "," + std::to_string(t.oid) + "," + detail::csv_field(t.label) + "," +
           format_double(t.ts) + "," + format_double(t.bb.x) + "," + format_double(t.bb.y) + "," +
           format_double(t.bb.w) + "," + format_double(t.bb.h);
    for (double v : t.fv.values) out += "," + format_double(v);
    out += "\n";
  }
  return out;
}

inline void write_trace(const RRelation& rel, const std::string& path,
                        std::optional<TraceFormat> format = std::nullopt) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::IoError, "cannot write " + path);
  f << write_trace_text(rel, format.value_or(format_for_path(path)));
}

// -- concatenation ------------------------------------------------------------------

namespace detail {

/// Seconds per frame implied by a trace, if it spans more than one frame.
inline std::optional<double> frame_period(const RRelation& r) {
  if (r.rows.size() < 2) return std::nullopt;
  const VTuple& a = r.rows.front();
  const VTuple& b = r.rows.back();
  if (b.fid == a.fid) return std::nullopt;
  return (b.ts - a.ts) / static_cast<double>(b.fid - a.fid);
}

}  // namespace detail

/// Appends `b` after `a`: b's frames continue from a's last frame and b's
/// oids are shifted by `oid_offset`, which must clear every oid in `a`.
/// Timestamps move by the frame shift times the frame period (taken from
/// `fps` when given, else estimated from a, then b).
inline RRelation concat_traces(const RRelation& a, const RRelation& b, std::int64_t oid_offset,
                               std::optional<double> fps = std::nullopt) {
  if (b.rows.empty()) return a;
  std::int64_t max_oid = -1;
  for (const auto& t : a.rows) max_oid = std::max(max_oid, t.oid);
  if (oid_offset < max_oid + 1)
    throw Error(ErrorCode::SchemaMismatch, "oid offset " + std::to_string(oid_offset) +
                                               " collides with oids up to " + std::to_string(max_oid));
  auto dim_of = [](const RRelation& r) -> std::optional<std::size_t> {
    if (r.schema.fv_dim) return r.schema.fv_dim;
    if (!r.rows.empty()) return r.rows.front().fv.dim();
    return std::nullopt;
  };
  auto da = dim_of(a), db = dim_of(b);
  if (da && db && *da != *db) throw Error(ErrorCode::SchemaMismatch, "traces have different feature dimensions");

  RRelation out = a;
  out.schema.fv_dim = da ? da : db;
  std::int64_t fid_shift = 0;
  double ts_shift = 0;
  if (!a.rows.empty()) {
    const VTuple& last = a.rows.back();
    const VTuple& first = b.rows.front();
    fid_shift = last.fid + 1 - first.fid;
    std::optional<double> period;
    if (fps && *fps > 0) period = 1.0 / *fps;
    if (!period) period = detail::frame_period(a);
    if (!period) period = detail::frame_period(b);
    double step = period.value_or(0) * static_cast<double>(fid_shift);
    ts_shift = std::max(step, last.ts - first.ts);
  }
  for (VTuple t : b.rows) {
    t.fid += fid_shift;
    t.ts += ts_shift;
    t.oid += oid_offset;
    out.rows.push_back(std::move(t));
  }
  return out;
}

// -- synthetic traces ----------------------------------------------------------------

struct SynthObject {
  std::int64_t oid = 1;
  std::string label = "person";
  BoundingBox bb{0, 0, 10, 10};  // position at frame 0
  double vx = 0;                 // pixels per frame
  double vy = 0;
  std::vector<double> fv;  // empty: drawn uniformly from [fv_low, fv_high)
  double noise = 0;        // per-frame uniform noise amplitude on each component
  std::vector<std::pair<std::int64_t, std::int64_t>> intervals;  // [start, end) frames; empty = all
};

struct SynthSpec {
  std::int64_t frames = 100;
  double fps = 30;
  std::size_t fv_dim = 8;
  double fv_low = 0;
  double fv_high = 1;
  std::vector<SynthObject> objects;

  void validate() const {
    auto fail = [](const std::string& m) { throw Error(ErrorCode::SpecError, m); };
    if (frames <= 0) fail("frames must be positive");
    if (!(fps > 0)) fail("fps must be positive");
    if (fv_dim == 0) fail("fv_dim must be at least 1");
    if (!(fv_low < fv_high)) fail("fv_low must be below fv_high");
    std::set<std::int64_t> oids;
    for (const auto& o : objects) {
      std::string who = "object " + std::to_string(o.oid);
      if (o.oid < 0) fail(who + ": oid must be non-negative");
      if (!oids.insert(o.oid).second) fail(who + " is listed twice");
      if (!o.fv.empty() && o.fv.size() != fv_dim) fail(who + ": fv has the wrong dimension");
      if (o.bb.w < 0 || o.bb.h < 0) fail(who + ": negative box size");
      if (o.noise < 0) fail(who + ": negative noise");
      auto iv = o.intervals;
      std::sort(iv.begin(), iv.end());
      for (std::size_t k = 0; k < iv.size(); ++k) {
        if (iv[k].first < 0 || iv[k].second > frames || iv[k].first >= iv[k].second)
          fail(who + ": interval outside [0, frames) or empty");
        if (k > 0 && iv[k].first < iv[k - 1].second) fail(who + ": overlapping intervals");
      }
    }
  }

  /// Tuples generate() will produce.
  std::size_t tuple_count() const {
    std::size_t n = 0;
    for (const auto& o : objects) {
      if (o.intervals.empty()) n += static_cast<std::size_t>(frames);
      for (const auto& [s, e] : o.intervals) n += static_cast<std::size_t>(e - s);
    }
    return n;
  }
};

namespace detail {

/// Uniform double in [0, 1) from the top 53 bits; identical on every platform.
inline double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1p-53; }

}  // namespace detail

/// Deterministic for a fixed seed: base vectors are drawn first (object
/// order), then per-frame noise in (frame, oid) order.
inline RRelation generate(const SynthSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  std::vector<SynthObject> objs = spec.objects;
  std::sort(objs.begin(), objs.end(), [](const auto& a, const auto& b) { return a.oid < b.oid; });
  for (auto& o : objs) {
    if (o.fv.empty())
      for (std::size_t k = 0; k < spec.fv_dim; ++k)
        o.fv.push_back(spec.fv_low + (spec.fv_high - spec.fv_low) * detail::unit(rng));
  }
  auto present = [](const SynthObject& o, std::int64_t f) {
    if (o.intervals.empty()) return true;
    return std::any_of(o.intervals.begin(), o.intervals.end(),
                       [f](const auto& iv) { return iv.first <= f && f < iv.second; });
  };
  RRelation rel;
  rel.schema.fv_dim = spec.fv_dim;
  rel.source_id = "synthetic";
  for (std::int64_t f = 0; f < spec.frames; ++f) {
    for (const auto& o : objs) {
      if (!present(o, f)) continue;
      VTuple t;
      t.fid = f;
      t.oid = o.oid;
      t.label = o.label;
      t.ts = static_cast<double>(f) / spec.fps;
      t.bb = {o.bb.x + o.vx * static_cast<double>(f), o.bb.y + o.vy * static_cast<double>(f), o.bb.w, o.bb.h};
      t.fv.values = o.fv;
      if (o.noise > 0)
        for (double& v : t.fv.values) v += o.noise * (2 * detail::unit(rng) - 1);
      rel.rows.push_back(std::move(t));
    }
  }
  return rel;
}

/// Reads a spec from JSON. Either "objects" (a list) or "object_count"
/// (objects 1..n with labels cycling through "labels", spread-out boxes,
/// drawn vectors, and "noise") must be present.
inline SynthSpec parse_synth_spec(const nlohmann::json& j) {
  auto fail = [](const std::string& m) -> void { throw Error(ErrorCode::SpecError, m); };
  if (!j.is_object()) fail("spec must be a JSON object");
  SynthSpec s;
  try {
    s.frames = j.value("frames", s.frames);
    s.fps = j.value("fps", s.fps);
    s.fv_dim = j.value("fv_dim", s.fv_dim);
    s.fv_low = j.value("fv_low", s.fv_low);
    s.fv_high = j.value("fv_high", s.fv_high);
    if (j.contains("objects")) {
      for (const auto& o : j.at("objects")) {
        SynthObject so;
        so.oid = o.at("oid").get<std::int64_t>();
        so.label = o.value("label", so.label);
        if (o.contains("bb")) {
          auto bb = o.at("bb").get<std::vector<double>>();
          if (bb.size() != 4) fail("object bb needs 4 numbers");
          so.bb = {bb[0], bb[1], bb[2], bb[3]};
        }
        if (o.contains("velocity")) {
          auto v = o.at("velocity").get<std::vector<double>>();
          if (v.size() != 2) fail("velocity needs 2 numbers");
          so.vx = v[0];
          so.vy = v[1];
        }
        if (o.contains("fv")) so.fv = o.at("fv").get<std::vector<double>>();
        so.noise = o.value("noise", 0.0);
        if (o.contains("intervals"))
          for (const auto& iv : o.at("intervals")) {
            auto p = iv.get<std::vector<std::int64_t>>();
            if (p.size() != 2) fail("an interval is [start, end)");
            so.intervals.emplace_back(p[0], p[1]);
          }
        s.objects.push_back(std::move(so));
      }
    } else if (j.contains("object_count")) {
      auto n = j.at("object_count").get<std::int64_t>();
      if (n < 0) fail("object_count must be non-negative");
      std::vector<std::string> labels = j.value("labels", std::vector<std::string>{"person"});
      if (labels.empty()) fail("labels must not be empty");
      double noise = j.value("noise", 0.0);
      for (std::int64_t i = 0; i < n; ++i) {
        SynthObject so;
        so.oid = i + 1;
        so.label = labels[static_cast<std::size_t>(i) % labels.size()];
        so.bb = {40.0 * static_cast<double>(i), 20.0 * static_cast<double>(i % 5), 30, 60};
        so.vx = (i % 2 == 0) ? 1.0 : -1.0;
        so.vy = (i % 3 == 0) ? 0.5 : -0.5;
        so.noise = noise;
        s.objects.push_back(std::move(so));
      }
    } else {
      fail("spec needs \"objects\" or \"object_count\"");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SpecError, std::string("malformed spec: ") + e.what());
  }
  s.validate();
  return s;
}

inline SynthSpec load_synth_spec(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::IoError, "cannot open spec " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SpecError, std::string("spec is not valid JSON: ") + e.what());
  }
  return parse_synth_spec(j);
}

}  // namespace cqlva
