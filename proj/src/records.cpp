#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "invlab/experiments.hpp"

namespace invlab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  return fmt::format("{:.9g}", v);
}

// The value a 9-significant-digit text form reads back as.
double rounded(double v) { return std::isnan(v) ? v : std::stod(num(v)); }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

std::string interpolating_text(const RunRecord& r) {
  if (!r.error.empty()) return "error: " + r.error;
  return r.interpolating ? "true" : "false";
}

// Splits one CSV record starting at `pos`; quoted fields may hold commas,
// doubled quotes and newlines.
bool next_csv_record(const std::string& text, size_t& pos, std::vector<std::string>& fields) {
  fields.clear();
  if (pos >= text.size()) return false;
  std::string cur;
  bool quoted = false;
  while (pos < text.size()) {
    const char ch = text[pos++];
    if (quoted) {
      if (ch == '"') {
        if (pos < text.size() && text[pos] == '"') {
          cur += '"';
          ++pos;
        } else {
          quoted = false;
        }
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (ch == '\n') {
      break;
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  if (quoted) throw InvalidArgument("unterminated quoted CSV field");
  fields.push_back(std::move(cur));
  return true;
}

double parse_num(const std::string& s, const char* what) {
  if (s == "nan") return kNaN;
  try {
    size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::logic_error&) {
  }
  throw InvalidArgument(fmt::format("bad {} value '{}'", what, s));
}

void set_interpolating(RunRecord& r, const std::string& s) {
  if (s == "true") {
    r.interpolating = true;
  } else if (s == "false") {
    r.interpolating = false;
  } else if (s.rfind("error: ", 0) == 0) {
    r.interpolating = false;
    r.error = s.substr(7);
  } else {
    throw InvalidArgument(fmt::format("bad interpolating value '{}'", s));
  }
}

nlohmann::ordered_json json_num(double v) {
  if (std::isnan(v)) return nullptr;
  return rounded(v);
}

double from_json_num(const nlohmann::json& j) { return j.is_null() ? kNaN : j.get<double>(); }

}  // namespace

void write_records(std::ostream& out, const std::vector<RunRecord>& records, RecordFormat format) {
  if (format == RecordFormat::csv) {
    out << kCsvHeader << '\n';
    for (const auto& r : records)
      out << csv_field(r.method) << ',' << r.d << ',' << r.seed << ',' << num(r.train_accuracy)
          << ',' << num(r.robust_accuracy) << ',' << num(r.normalized_margin) << ','
          << num(r.spurious_core_ratio) << ',' << num(r.eopp_gap) << ','
          << csv_field(interpolating_text(r)) << ',' << num(r.wall_time_ms) << '\n';
    return;
  }
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& r : records) {
    nlohmann::ordered_json o;
    o["method"] = r.method;
    o["d"] = r.d;
    o["seed"] = r.seed;
    o["train_acc"] = json_num(r.train_accuracy);
    o["robust_acc"] = json_num(r.robust_accuracy);
    o["margin"] = json_num(r.normalized_margin);
    o["ratio"] = json_num(r.spurious_core_ratio);
    o["eopp_gap"] = json_num(r.eopp_gap);
    if (r.error.empty()) {
      o["interpolating"] = r.interpolating;
    } else {
      o["interpolating"] = interpolating_text(r);
    }
    o["wall_ms"] = json_num(r.wall_time_ms);
    arr.push_back(std::move(o));
  }
  out << arr.dump(1) << '\n';
}

void emit(const std::vector<RunRecord>& records, RecordFormat format, const std::string& path) {
  if (records.empty()) throw InvalidArgument("refusing to write an empty record list");
  std::ostringstream buf;
  write_records(buf, records, format);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(fmt::format("cannot write '{}'", path));
  out << buf.str();
  out.close();
  if (!out) throw Error(fmt::format("failed writing '{}'", path));
}

std::vector<RunRecord> parse_records_csv(const std::string& text) {
  size_t pos = 0;
  std::vector<std::string> f;
  if (!next_csv_record(text, pos, f)) throw InvalidArgument("empty CSV");
  std::string header;
  for (size_t i = 0; i < f.size(); ++i) header += (i ? "," : "") + f[i];
  if (header != kCsvHeader) throw InvalidArgument(fmt::format("unexpected CSV header '{}'", header));
  std::vector<RunRecord> out;
  int line = 1;
  while (next_csv_record(text, pos, f)) {
    ++line;
    if (f.size() == 1 && f[0].empty()) continue;
    if (f.size() != 10)
      throw InvalidArgument(fmt::format("CSV record {} has {} fields, expected 10", line, f.size()));
    RunRecord r;
    r.method = f[0];
    r.d = static_cast<int>(parse_num(f[1], "d"));
    r.seed = std::stoull(f[2]);
    r.train_accuracy = parse_num(f[3], "train_acc");
    r.robust_accuracy = parse_num(f[4], "robust_acc");
    r.normalized_margin = parse_num(f[5], "margin");
    r.spurious_core_ratio = parse_num(f[6], "ratio");
    r.eopp_gap = parse_num(f[7], "eopp_gap");
    set_interpolating(r, f[8]);
    r.wall_time_ms = parse_num(f[9], "wall_ms");
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<RunRecord> parse_records_json(const std::string& text) {
  const auto arr = nlohmann::json::parse(text);
  if (!arr.is_array()) throw InvalidArgument("records JSON must be an array");
  std::vector<RunRecord> out;
  for (const auto& o : arr) {
    RunRecord r;
    r.method = o.at("method").get<std::string>();
    r.d = o.at("d").get<int>();
    r.seed = o.at("seed").get<std::uint64_t>();
    r.train_accuracy = from_json_num(o.at("train_acc"));
    r.robust_accuracy = from_json_num(o.at("robust_acc"));
    r.normalized_margin = from_json_num(o.at("margin"));
    r.spurious_core_ratio = from_json_num(o.at("ratio"));
    r.eopp_gap = from_json_num(o.at("eopp_gap"));
    const auto& interp = o.at("interpolating");
    if (interp.is_boolean()) {
      r.interpolating = interp.get<bool>();
    } else {
      set_interpolating(r, interp.get<std::string>());
    }
    r.wall_time_ms = from_json_num(o.at("wall_ms"));
    out.push_back(std::move(r));
  }
  return out;
}

std::optional<double> median_of(const std::vector<RunRecord>& records, const std::string& method,
                                int d, double RunRecord::*field) {
  std::vector<double> v;
  for (const auto& r : records)
    if (r.method == method && r.d == d && r.error.empty() && !std::isnan(r.*field))
      v.push_back(r.*field);
  if (v.empty()) return std::nullopt;
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace invlab
