#pragma once

// Experiment orchestration: config documents, named pipelines, sweeps and run records.

#include "reslab/model.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace reslab::experiment {

inline constexpr const char* kArtifactVersion = "0.1.0";

const std::vector<std::string>& experiment_names();

struct ExperimentConfig {
    model::ModelSpec model;
    std::string experiment;
    nlohmann::json parameters;  // complete: defaults filled in for every key of the experiment
    std::string output_dir = "out";
};

// Validates the whole document (unknown keys, types, ranges) before anything runs.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig parse_config_file(const std::filesystem::path& path);

// Canonical form: every key present, keys sorted.
nlohmann::json to_json(const ExperimentConfig& config);
std::string canonical_dump(const ExperimentConfig& config);
std::string config_hash(const ExperimentConfig& config);

struct OutputFile {
    std::string path;  // relative to the output directory
    std::string sha256;
};

struct RunRecord {
    std::string config_hash;
    std::string artifact_version = kArtifactVersion;
    std::string experiment;
    double wall_time = 0.0;
    std::filesystem::path output_dir;
    std::vector<OutputFile> outputs;
    nlohmann::json results;  // flat map of scalar results
    bool passed = true;      // false only for a failing selfcheck
};

struct RunOptions {
    int jobs = 1;
    std::optional<std::filesystem::path> output_dir;  // overrides the config's output_dir
};

// Writes the experiment's CSVs, summary.json (deterministic) and run_record.json.
RunRecord run(const ExperimentConfig& config, const RunOptions& options = {});

struct SweepEntry {
    std::string value;
    std::string status;  // ok | validation | numerical | error
    std::string message;
    RunRecord record;
};

// Sets `axis` (a dotted path into parameters, or "model.<path>") to each value; when the axis
// names a list parameter `<axis>_list` the value becomes a one-element list. Failed values are
// recorded and the remaining values still run. Writes sweep.csv into the output directory.
std::vector<SweepEntry> sweep(const ExperimentConfig& config, const std::string& axis,
                              const std::vector<double>& values, const RunOptions& options = {});

// Applies one sweep value to a copy of the config (validated again).
ExperimentConfig with_axis_value(const ExperimentConfig& config, const std::string& axis, double value);

} // namespace reslab::experiment
