#pragma once

#include <cstddef>

#include "madt/ndgrad/tensor.hpp"

namespace madt::statemat {

/// One w×n slice of a normalized series: rows are timesteps, columns sensors.
struct TimeWindow {
    nd::Matrix values;
    std::size_t start_index = 0;

    std::size_t length() const noexcept { return values.rows(); }
    std::size_t sensors() const noexcept { return values.cols(); }

    /// Throws InputError unless w > 1, n > 1 and every entry is finite.
    void validate() const;
};

struct StateMatrixPair {
    nd::Matrix temporal;  // w×w
    nd::Matrix spatial;   // n×n
    double tau_t = 1;
    double tau_s = 1;
};

/// T_ij = (x_i · x_j) / tau_t over timestep vectors. Exactly symmetric.
nd::Matrix temporal_state_matrix(const TimeWindow& win, double tau_t);

/// S_ij = (x^i · x^j) / tau_s over sensor series. Exactly symmetric.
nd::Matrix spatial_state_matrix(const TimeWindow& win, double tau_s);

/// Both matrices; non-positive tau selects the defaults tau_t = n, tau_s = w.
StateMatrixPair build_state_matrices(const TimeWindow& win, double tau_t = 0, double tau_s = 0);

}  // namespace madt::statemat
