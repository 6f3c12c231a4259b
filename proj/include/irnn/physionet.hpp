// SPDX-License-Identifier: Apache-2.0
//
// PhysioNet/CinC Challenge 2012 record loader.
#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "irnn/datapipe.hpp"

namespace irnn::data {

struct PlausibilityRange {
  double min = 0.0;
  double max = 0.0;
};

/// Inclusive per-variable [min, max] bounds. Variables without an entry
/// are not filtered.
using PlausibilityTable = std::map<std::string, PlausibilityRange>;

/// Reads `variable,min,max`.
PlausibilityTable load_plausibility_table(const std::filesystem::path& path);

/// The table shipped in data/physionet_plausibility.csv.
PlausibilityTable default_plausibility_table();

/// The 39 modelled variables, descriptors included.
const std::vector<std::string>& physionet_features();

struct PhysionetRecord {
  std::string record_id;
  std::vector<EventRecord> events;  // sorted by time
  std::map<std::string, std::size_t> dropped;  // plausibility rejects
};

/// Parses one `Time,Parameter,Value` record file. HH:MM times become
/// fractional hours. The leading descriptor block (Age, Gender, Height,
/// ICUType, Weight) is emitted at t=0 with Weight renamed to
/// AdmissionWeight. The sample id is the RecordID line when present, else
/// the file stem.
PhysionetRecord load_physionet_record(const std::filesystem::path& path,
                                      const PlausibilityTable& filters);

/// Reads the outcomes file (RecordID,...,In-hospital_death).
std::unordered_map<std::string, int> load_physionet_outcomes(
    const std::filesystem::path& path);

/// Loads every *.txt record in a directory, sorted by file name.
std::vector<PhysionetRecord> load_physionet_directory(
    const std::filesystem::path& dir, const PlausibilityTable& filters);

}  // namespace irnn::data
