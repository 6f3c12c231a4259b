// SPDX-License-Identifier: Apache-2.0
#include "irnn/datapipe.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "irnn/text.hpp"

namespace irnn::data {

// ------------------------------------------------------------- CSV I/O

EventDataset load_long_csv(const std::filesystem::path& path,
                           const std::vector<std::string>& features) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open " + path.string());
  }
  EventDataset out;
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) {
    return out;
  }
  ++line_no;
  const auto header = text::split_csv_line(line);
  if (header.size() != 4 || header[0] != "sample_id" || header[1] != "time" ||
      header[2] != "variable" || header[3] != "value") {
    throw DataError(path.string() +
                    ":1: expected header sample_id,time,variable,value");
  }

  std::unordered_map<std::string, std::size_t> group_of;
  std::vector<EventRecord> pending;
  const std::vector<std::string> sorted_features = [&] {
    auto f = features;
    std::sort(f.begin(), f.end());
    return f;
  }();

  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) {
      continue;
    }
    const auto cols = text::split_csv_line(line);
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (cols.size() != 4) {
      throw DataError(where + ": expected 4 columns, got " +
                      std::to_string(cols.size()));
    }
    EventRecord ev;
    ev.sample_id = cols[0];
    ev.variable = cols[2];
    if (ev.sample_id.empty() || ev.variable.empty()) {
      throw DataError(where + ": empty sample_id or variable");
    }
    if (!text::parse_double(cols[1], ev.time) || !std::isfinite(ev.time) ||
        ev.time < 0.0) {
      throw DataError(where + ": invalid time '" + cols[1] + "'");
    }
    if (!text::parse_double(cols[3], ev.value) || !std::isfinite(ev.value)) {
      throw DataError(where + ": invalid value '" + cols[3] + "'");
    }
    if (!sorted_features.empty() &&
        !std::binary_search(sorted_features.begin(), sorted_features.end(),
                            ev.variable)) {
      ++out.unknown_variables[ev.variable];
    }
    auto [it, inserted] = group_of.try_emplace(ev.sample_id, out.samples.size());
    if (inserted) {
      out.samples.push_back(EventGroup{ev.sample_id, {}});
    }
    out.samples[it->second].events.push_back(std::move(ev));
  }
  for (auto& g : out.samples) {
    std::stable_sort(g.events.begin(), g.events.end(),
                     [](const EventRecord& a, const EventRecord& b) {
                       return a.time < b.time;
                     });
  }
  return out;
}

void write_long_csv(const std::filesystem::path& path,
                    std::span<const EventGroup> samples) {
  std::ofstream out(path);
  if (!out) {
    throw DataError("cannot write " + path.string());
  }
  out << "sample_id,time,variable,value\n";
  for (const auto& g : samples) {
    for (const auto& ev : g.events) {
      out << ev.sample_id << ',' << text::format_double(ev.time) << ','
          << ev.variable << ',' << text::format_double(ev.value) << '\n';
    }
  }
}

void write_labels_csv(const std::filesystem::path& path,
                      std::span<const std::string> sample_ids, std::span<const int> labels) {
  if (sample_ids.size() != labels.size()) {
    throw DimensionError("write_labels_csv: id and label counts differ");
  }
  std::ofstream out(path);
  if (!out) {
    throw DataError("cannot write " + path.string());
  }
  out << "sample_id,label\n";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out << sample_ids[i] << ',' << labels[i] << '\n';
  }
}

std::unordered_map<std::string, int> load_labels_csv(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open " + path.string());
  }
  std::unordered_map<std::string, int> labels;
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) {
    return labels;
  }
  ++line_no;
  const auto header = text::split_csv_line(line);
  if (header.size() != 2 || header[0] != "sample_id" || header[1] != "label") {
    throw DataError(path.string() + ":1: expected header sample_id,label");
  }
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) {
      continue;
    }
    const auto cols = text::split_csv_line(line);
    if (cols.size() != 2 || (cols[1] != "0" && cols[1] != "1")) {
      throw DataError(path.string() + ":" + std::to_string(line_no) +
                      ": expected sample_id,{0|1}");
    }
    labels[cols[0]] = cols[1] == "1" ? 1 : 0;
  }
  return labels;
}

std::vector<EventGroup> group_events(std::vector<EventRecord> events) {
  std::vector<EventGroup> groups;
  std::unordered_map<std::string, std::size_t> group_of;
  for (auto& ev : events) {
    auto [it, inserted] = group_of.try_emplace(ev.sample_id, groups.size());
    if (inserted) {
      groups.push_back(EventGroup{ev.sample_id, {}});
    }
    groups[it->second].events.push_back(std::move(ev));
  }
  for (auto& g : groups) {
    std::stable_sort(g.events.begin(), g.events.end(),
                     [](const EventRecord& a, const EventRecord& b) {
                       return a.time < b.time;
                     });
  }
  return groups;
}

// ------------------------------------------------------- normalization

std::size_t NormStats::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (features[i].name == name) {
      return i;
    }
  }
  throw ContractError("feature not in NormStats: " + name);
}

std::vector<std::string> NormStats::names() const {
  std::vector<std::string> n;
  n.reserve(features.size());
  for (const auto& f : features) {
    n.push_back(f.name);
  }
  return n;
}

double sample_skewness(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n < 3) {
    return 0.0;
  }
  const double mean =
      std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);
  double m2 = 0.0, m3 = 0.0;
  for (double v : values) {
    const double d = v - mean;
    m2 += d * d;
    m3 += d * d * d;
  }
  m2 /= static_cast<double>(n);
  m3 /= static_cast<double>(n);
  if (m2 <= 0.0) {
    return 0.0;
  }
  const double g1 = m3 / std::pow(m2, 1.5);
  const double nn = static_cast<double>(n);
  return g1 * std::sqrt(nn * (nn - 1.0)) / (nn - 2.0);
}

NormStats fit_norm_stats(std::span<const EventGroup> train,
                         const std::vector<std::string>& features) {
  if (train.empty()) {
    throw DataError("cannot fit normalization on an empty training set");
  }
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < features.size(); ++i) {
    index.emplace(features[i], i);
  }
  std::vector<std::vector<double>> raw(features.size());
  std::vector<double> max_gap(features.size(), 0.0);
  std::vector<double> last_time(features.size());

  for (const auto& group : train) {
    std::fill(last_time.begin(), last_time.end(),
              std::numeric_limits<double>::quiet_NaN());
    for (const auto& ev : group.events) {
      const auto it = index.find(ev.variable);
      if (it == index.end()) {
        continue;
      }
      const std::size_t d = it->second;
      raw[d].push_back(ev.value);
      if (!std::isnan(last_time[d])) {
        max_gap[d] = std::max(max_gap[d], ev.time - last_time[d]);
      }
      last_time[d] = ev.time;
    }
  }

  NormStats stats;
  stats.features.resize(features.size());
  for (std::size_t d = 0; d < features.size(); ++d) {
    FeatureStats& f = stats.features[d];
    f.name = features[d];
    f.count = raw[d].size();
    f.max_elapsed = std::max(max_gap[d], kMinMaxElapsedHours);
    if (raw[d].empty()) {
      f.observed = false;
      continue;
    }
    f.observed = true;
    f.skew = sample_skewness(raw[d]);
    std::vector<double> v = raw[d];
    if (std::abs(f.skew) > kSkewThreshold) {
      f.apply_log = true;
      const double lo = *std::min_element(v.begin(), v.end());
      f.log_shift = std::max(0.0, -lo) + 1.0;
      for (double& x : v) {
        x = std::log(x + f.log_shift);
      }
    }
    const double n = static_cast<double>(v.size());
    f.mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : v) {
      ss += (x - f.mean) * (x - f.mean);
    }
    const double sd = v.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    f.std = std::max(sd, kStdFloor);
  }
  return stats;
}

double normalize(double raw, const FeatureStats& stats) {
  double v = raw;
  if (stats.apply_log) {
    v = std::log(std::max(raw + stats.log_shift,
                          std::numeric_limits<double>::min()));
  }
  const double z = (v - stats.mean) / stats.std;
  return std::clamp(z, -kClipLimit, kClipLimit);
}

double denormalize(double normalized, const FeatureStats& stats) {
  const double v = normalized * stats.std + stats.mean;
  return stats.apply_log ? std::exp(v) - stats.log_shift : v;
}

// ------------------------------------------------------ sample building

TimeSeriesSample build_sample(std::span<const EventRecord> events,
                              const NormStats& stats, int label,
                              std::size_t max_len,
                              const std::string& sample_id) {
  if (max_len == 0) {
    throw ContractError("max_len must be at least 1");
  }
  const std::size_t D = stats.size();
  std::unordered_map<std::string_view, std::size_t> index;
  for (std::size_t d = 0; d < D; ++d) {
    index.emplace(stats.features[d].name, d);
  }

  struct Obs {
    double time;
    std::size_t feature;
    double value;
  };
  std::vector<Obs> obs;
  obs.reserve(events.size());
  for (const auto& ev : events) {
    const auto it = index.find(ev.variable);
    if (it != index.end()) {
      obs.push_back({ev.time, it->second, ev.value});
    }
  }
  if (obs.empty()) {
    throw DataError("sample '" + sample_id + "' has no events");
  }
  std::stable_sort(obs.begin(), obs.end(),
                   [](const Obs& a, const Obs& b) { return a.time < b.time; });

  std::vector<double> grid;
  for (const auto& o : obs) {
    if (grid.empty() || grid.back() != o.time) {
      grid.push_back(o.time);
    }
  }
  std::size_t first_row = 0;
  if (grid.size() > max_len) {
    first_row = grid.size() - max_len;
  }
  const double cutoff = grid[first_row];

  TimeSeriesSample s;
  s.sample_id = sample_id;
  s.label = label;
  s.features = D;
  s.max_len = max_len;
  s.valid_len = grid.size() - first_row;
  s.times.assign(grid.begin() + static_cast<std::ptrdiff_t>(first_row), grid.end());
  s.values.assign(s.valid_len * D, 0.0);
  s.elapsed.assign(s.valid_len * D, 1.0);
  s.mask.assign(s.valid_len * D, 0);

  const double never = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> last_time(D, never);
  std::vector<double> last_value(D, 0.0);

  auto it = std::find_if(obs.begin(), obs.end(),
                         [&](const Obs& o) { return o.time >= cutoff; });
  for (std::size_t t = 0; t < s.valid_len; ++t) {
    const double now = s.times[t];
    std::uint8_t* m = s.mask.data() + t * D;
    for (; it != obs.end() && it->time == now; ++it) {
      last_value[it->feature] = normalize(it->value, stats.features[it->feature]);
      last_time[it->feature] = now;
      m[it->feature] = 1;
    }
    double* x = s.values.data() + t * D;
    double* e = s.elapsed.data() + t * D;
    for (std::size_t d = 0; d < D; ++d) {
      x[d] = last_value[d];
      if (m[d]) {
        e[d] = 0.0;
      } else if (std::isnan(last_time[d])) {
        e[d] = 1.0;
      } else {
        e[d] = std::min(1.0, (now - last_time[d]) / stats.features[d].max_elapsed);
      }
    }
  }
  return s;
}

std::vector<TimeSeriesSample> build_dataset(
    std::span<const EventGroup> groups,
    const std::unordered_map<std::string, int>& labels, const NormStats& stats,
    std::size_t max_len, std::size_t* skipped) {
  std::vector<TimeSeriesSample> out;
  out.reserve(groups.size());
  std::size_t n_skipped = 0;
  for (const auto& g : groups) {
    const auto it = labels.find(g.sample_id);
    if (it == labels.end()) {
      ++n_skipped;
      continue;
    }
    try {
      out.push_back(build_sample(g.events, stats, it->second, max_len, g.sample_id));
    } catch (const DataError&) {
      ++n_skipped;
    }
  }
  if (skipped != nullptr) {
    *skipped = n_skipped;
  }
  return out;
}

// ----------------------------------------------------------- splitting

std::vector<std::vector<std::size_t>> split(std::span<const int> labels,
                                            std::span<const double> fractions,
                                            std::uint64_t seed) {
  if (fractions.empty()) {
    throw ContractError("split needs at least one fraction");
  }
  double total = 0.0;
  for (double f : fractions) {
    if (!(f > 0.0)) {
      throw ContractError("split fractions must be positive");
    }
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw ContractError("split fractions must sum to 1");
  }

  std::vector<std::vector<std::size_t>> parts(fractions.size());
  std::mt19937_64 rng(seed);
  for (int cls : {0, 1}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] != 0 && labels[i] != 1) {
        throw ContractError("labels must be 0 or 1");
      }
      if (labels[i] == cls) {
        members.push_back(i);
      }
    }
    std::shuffle(members.begin(), members.end(), rng);

    // Largest-remainder apportionment of this class over the partitions.
    const double n = static_cast<double>(members.size());
    std::vector<std::size_t> counts(fractions.size());
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t k = 0; k < fractions.size(); ++k) {
      const double exact = fractions[k] * n;
      counts[k] = static_cast<std::size_t>(std::floor(exact));
      assigned += counts[k];
      remainders.emplace_back(exact - std::floor(exact), k);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t r = 0; assigned < members.size(); ++r, ++assigned) {
      ++counts[remainders[r % remainders.size()].second];
    }

    std::size_t pos = 0;
    for (std::size_t k = 0; k < fractions.size(); ++k) {
      if (counts[k] == 0) {
        throw DataError("class " + std::to_string(cls) +
                        " is absent from partition " + std::to_string(k));
      }
      parts[k].insert(parts[k].end(), members.begin() + static_cast<std::ptrdiff_t>(pos),
                      members.begin() + static_cast<std::ptrdiff_t>(pos + counts[k]));
      pos += counts[k];
    }
  }
  for (auto& p : parts) {
    std::sort(p.begin(), p.end());
  }
  return parts;
}

SampleRefs select(std::span<const TimeSeriesSample> samples,
                  std::span<const std::size_t> indices) {
  SampleRefs out;
  out.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= samples.size()) {
      throw ContractError("sample index out of range");
    }
    out.push_back(&samples[i]);
  }
  return out;
}

SampleRefs all_of(std::span<const TimeSeriesSample> samples) {
  SampleRefs out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    out.push_back(&s);
  }
  return out;
}

}  // namespace irnn::data
