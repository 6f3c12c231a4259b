// SPDX-License-Identifier: Apache-2.0
//
// Long-format event streams -> aligned (values, elapsed, mask) grids.
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "irnn/errors.hpp"

namespace irnn::data {

inline constexpr double kClipLimit = 4.0;
inline constexpr double kSkewThreshold = 3.0;
inline constexpr double kStdFloor = 1e-6;
inline constexpr double kMinMaxElapsedHours = 1.0;
inline constexpr std::size_t kDefaultMaxLen = 150;

struct EventRecord {
  std::string sample_id;
  double time = 0.0;  // hours since sample start
  std::string variable;
  double value = 0.0;
};

/// All events of one sample, sorted by time (stable for equal times).
struct EventGroup {
  std::string sample_id;
  std::vector<EventRecord> events;
};

struct EventDataset {
  std::vector<EventGroup> samples;  // in order of first appearance
  /// Variables not in the caller's feature list, with occurrence counts.
  std::map<std::string, std::size_t> unknown_variables;
};

/// Reads `sample_id,time,variable,value`. When `features` is non-empty,
/// rows naming other variables are kept but counted in unknown_variables.
EventDataset load_long_csv(const std::filesystem::path& path,
                           const std::vector<std::string>& features = {});

void write_long_csv(const std::filesystem::path& path,
                    std::span<const EventGroup> samples);

void write_labels_csv(const std::filesystem::path& path,
                      std::span<const std::string> sample_ids, std::span<const int> labels);

/// Reads `sample_id,label` with label in {0,1}.
std::unordered_map<std::string, int> load_labels_csv(
    const std::filesystem::path& path);

/// Groups a flat event list by sample_id and sorts each group by time.
std::vector<EventGroup> group_events(std::vector<EventRecord> events);

struct FeatureStats {
  std::string name;
  bool observed = false;
  std::size_t count = 0;
  double skew = 0.0;
  bool apply_log = false;
  double log_shift = 0.0;
  double mean = 0.0;
  double std = 1.0;
  double max_elapsed = kMinMaxElapsedHours;
};

struct NormStats {
  static constexpr int kSchemaVersion = 1;
  std::vector<FeatureStats> features;

  std::size_t size() const { return features.size(); }
  std::size_t index_of(const std::string& name) const;
  std::vector<std::string> names() const;
};

/// Adjusted Fisher-Pearson sample skewness G1; 0 for fewer than 3 values
/// or zero variance.
double sample_skewness(std::span<const double> values);

/// Fits per-feature statistics on training events only.
NormStats fit_norm_stats(std::span<const EventGroup> train,
                         const std::vector<std::string>& features);

/// Optional log transform, z-score, clip to [-4, 4].
double normalize(double raw, const FeatureStats& stats);
/// Inverse of normalize for values strictly inside the clip range.
double denormalize(double normalized, const FeatureStats& stats);

/// One sample on its own distinct-time grid. Only the first valid_len rows
/// are stored; rows valid_len..max_len-1 are implicit all-zero padding and
/// the accessors return 0 for them.
struct TimeSeriesSample {
  std::string sample_id;
  int label = 0;
  std::size_t features = 0;
  std::size_t max_len = 0;
  std::size_t valid_len = 0;
  std::vector<double> times;          // valid_len, hours
  std::vector<double> values;         // valid_len x features
  std::vector<double> elapsed;        // valid_len x features, in [0,1]
  std::vector<std::uint8_t> mask;     // valid_len x features

  double value(std::size_t t, std::size_t d) const {
    return t < valid_len ? values[t * features + d] : 0.0;
  }
  double elapsed_at(std::size_t t, std::size_t d) const {
    return t < valid_len ? elapsed[t * features + d] : 0.0;
  }
  bool observed(std::size_t t, std::size_t d) const {
    return t < valid_len && mask[t * features + d] != 0;
  }
  std::span<const double> value_row(std::size_t t) const {
    return {values.data() + t * features, features};
  }
  std::span<const double> elapsed_row(std::size_t t) const {
    return {elapsed.data() + t * features, features};
  }
  std::span<const std::uint8_t> mask_row(std::size_t t) const {
    return {mask.data() + t * features, features};
  }
};

/// Builds the (x, delta, m) grids for one sample. Events must be sorted by
/// time; variables outside `stats` are ignored.
TimeSeriesSample build_sample(std::span<const EventRecord> events,
                              const NormStats& stats, int label,
                              std::size_t max_len,
                              const std::string& sample_id = {});

/// Builds every group that has a label. Groups with no usable events are
/// skipped and counted in `skipped` when given.
std::vector<TimeSeriesSample> build_dataset(
    std::span<const EventGroup> groups,
    const std::unordered_map<std::string, int>& labels, const NormStats& stats,
    std::size_t max_len, std::size_t* skipped = nullptr);

/// Stratified random partition of sample indices. Fractions must be
/// positive and sum to 1; every partition must receive both classes.
std::vector<std::vector<std::size_t>> split(std::span<const int> labels,
                                            std::span<const double> fractions,
                                            std::uint64_t seed);

using SampleRefs = std::vector<const TimeSeriesSample*>;

SampleRefs select(std::span<const TimeSeriesSample> samples,
                  std::span<const std::size_t> indices);
SampleRefs all_of(std::span<const TimeSeriesSample> samples);

}  // namespace irnn::data
