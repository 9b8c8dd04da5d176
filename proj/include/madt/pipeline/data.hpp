#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "madt/ndgrad/tensor.hpp"
#include "madt/statemat/state_matrix.hpp"

namespace madt::pipeline {

/// A full multivariate series: T rows (time) by n columns (sensors).
struct Series {
    std::vector<std::string> sensor_names;
    nd::Matrix values;
    std::optional<std::vector<int>> labels;

    std::size_t length() const noexcept { return values.rows(); }
    std::size_t sensors() const noexcept { return values.cols(); }
};

inline constexpr const char* kLabelColumn = "label";

/// Reads a header row of sensor names (an optional trailing `label` column)
/// and one numeric row per timestep. With `require_labels` a missing label
/// column is an error.
Series load_csv(const std::filesystem::path& path, bool require_labels = false);
Series parse_csv(const std::string& text, bool require_labels = false);

void save_csv(const std::filesystem::path& path, const Series& s);
std::string format_csv(const Series& s);

/// Rows [begin, end) as a new series, labels included.
Series slice(const Series& s, std::size_t begin, std::size_t end);

struct NormStats {
    std::vector<double> mean;
    std::vector<double> std;
};

/// Per-sensor mean and population std. Constant sensors get std 1.
NormStats fit_normalization(const nd::Matrix& values);
nd::Matrix apply_normalization(const nd::Matrix& values, const NormStats& stats);

/// ⌊T/w⌋ contiguous, non-overlapping windows; the remainder is dropped.
std::vector<statemat::TimeWindow> make_windows(const nd::Matrix& values, std::size_t w);

}  // namespace madt::pipeline
