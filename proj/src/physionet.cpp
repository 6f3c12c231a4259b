// SPDX-License-Identifier: Apache-2.0
#include "irnn/physionet.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>

#include "irnn/text.hpp"

namespace irnn::data {

namespace {

bool parse_hhmm(std::string_view s, double& hours) {
  s = text::trim(s);
  const auto colon = s.find(':');
  if (colon == std::string_view::npos || colon == 0 || colon + 1 >= s.size()) {
    return false;
  }
  int hh = 0, mm = 0;
  const auto h = s.substr(0, colon);
  const auto m = s.substr(colon + 1);
  auto [p1, e1] = std::from_chars(h.data(), h.data() + h.size(), hh);
  auto [p2, e2] = std::from_chars(m.data(), m.data() + m.size(), mm);
  if (e1 != std::errc() || p1 != h.data() + h.size() || e2 != std::errc() ||
      p2 != m.data() + m.size() || hh < 0 || mm < 0 || mm >= 60) {
    return false;
  }
  hours = hh + mm / 60.0;
  return true;
}

const std::set<std::string>& descriptor_names() {
  static const std::set<std::string> names = {"RecordID", "Age", "Gender",
                                              "Height", "ICUType", "Weight"};
  return names;
}

}  // namespace

PlausibilityTable load_plausibility_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open plausibility table " + path.string());
  }
  PlausibilityTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 || text::trim(line).empty()) {
      continue;
    }
    const auto cols = text::split_csv_line(line);
    PlausibilityRange r;
    if (cols.size() != 3 || !text::parse_double(cols[1], r.min) ||
        !text::parse_double(cols[2], r.max) || r.min > r.max) {
      throw DataError(path.string() + ":" + std::to_string(line_no) +
                      ": expected variable,min,max");
    }
    table[cols[0]] = r;
  }
  return table;
}

PlausibilityTable default_plausibility_table() {
  return load_plausibility_table(std::filesystem::path(IRNN_DATA_DIR) /
                                 "physionet_plausibility.csv");
}

const std::vector<std::string>& physionet_features() {
  static const std::vector<std::string> features = {
      "ALP",     "ALT",      "AST",       "Albumin",  "BUN",      "Bilirubin",
      "Cholesterol", "Creatinine", "DiasABP", "FiO2", "GCS",      "Glucose",
      "HCO3",    "HCT",      "HR",        "K",        "Lactate",  "MAP",
      "MechVent", "Mg",      "NIDiasABP", "NIMAP",    "NISysABP", "Na",
      "PaCO2",   "PaO2",     "Platelets", "RespRate", "SaO2",     "SysABP",
      "Temp",    "Urine",    "WBC",       "pH",       "Age",      "Gender",
      "Height",  "ICUType",  "AdmissionWeight"};
  return features;
}

PhysionetRecord load_physionet_record(const std::filesystem::path& path,
                                      const PlausibilityTable& filters) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open " + path.string());
  }
  PhysionetRecord rec;
  rec.record_id = path.stem().string();
  std::string line;
  std::size_t line_no = 0;
  bool in_descriptors = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) {
      continue;
    }
    const auto cols = text::split_csv_line(line);
    if (line_no == 1 && !cols.empty() && cols[0] == "Time") {
      continue;
    }
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (cols.size() != 3) {
      throw DataError(where + ": expected Time,Parameter,Value");
    }
    double hours = 0.0;
    if (!parse_hhmm(cols[0], hours)) {
      throw DataError(where + ": malformed time '" + cols[0] + "'");
    }
    double value = 0.0;
    if (!text::parse_double(cols[2], value) || !std::isfinite(value)) {
      throw DataError(where + ": invalid value '" + cols[2] + "'");
    }
    std::string name = cols[1];
    if (name.empty()) {
      continue;
    }
    const bool is_descriptor = descriptor_names().count(name) > 0;
    if (in_descriptors && !(is_descriptor && hours == 0.0)) {
      in_descriptors = false;
    }
    if (name == "RecordID") {
      rec.record_id = cols[2];
      continue;
    }
    if (in_descriptors) {
      hours = 0.0;
      if (name == "Weight") {
        name = "AdmissionWeight";
      }
    }
    if (const auto it = filters.find(name); it != filters.end()) {
      if (value < it->second.min || value > it->second.max) {
        ++rec.dropped[name];
        continue;
      }
    }
    rec.events.push_back(EventRecord{rec.record_id, hours, std::move(name), value});
  }
  for (auto& ev : rec.events) {
    ev.sample_id = rec.record_id;
  }
  std::stable_sort(rec.events.begin(), rec.events.end(),
                   [](const EventRecord& a, const EventRecord& b) {
                     return a.time < b.time;
                   });
  return rec;
}

std::unordered_map<std::string, int> load_physionet_outcomes(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open " + path.string());
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw DataError(path.string() + ": empty outcomes file");
  }
  const auto header = text::split_csv_line(line);
  const auto id_col = std::find(header.begin(), header.end(), "RecordID");
  const auto y_col = std::find(header.begin(), header.end(), "In-hospital_death");
  if (id_col == header.end() || y_col == header.end()) {
    throw DataError(path.string() +
                    ":1: expected RecordID and In-hospital_death columns");
  }
  const auto id_idx = static_cast<std::size_t>(id_col - header.begin());
  const auto y_idx = static_cast<std::size_t>(y_col - header.begin());
  std::unordered_map<std::string, int> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) {
      continue;
    }
    const auto cols = text::split_csv_line(line);
    if (cols.size() <= std::max(id_idx, y_idx) ||
        (cols[y_idx] != "0" && cols[y_idx] != "1")) {
      throw DataError(path.string() + ":" + std::to_string(line_no) +
                      ": malformed outcome row");
    }
    out[cols[id_idx]] = cols[y_idx] == "1" ? 1 : 0;
  }
  return out;
}

std::vector<PhysionetRecord> load_physionet_directory(
    const std::filesystem::path& dir, const PlausibilityTable& filters) {
  if (!std::filesystem::is_directory(dir)) {
    throw DataError("not a directory: " + dir.string());
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".txt") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<PhysionetRecord> records;
  records.reserve(files.size());
  for (const auto& f : files) {
    records.push_back(load_physionet_record(f, filters));
  }
  return records;
}

}  // namespace irnn::data
