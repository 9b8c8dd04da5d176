#include "madt/statemat/state_matrix.hpp"

#include <cmath>
#include <string>

namespace madt::statemat {
namespace {

// Gram matrix of the rows of m, scaled by 1/tau; fills the upper triangle
// and mirrors it so the result is bit-symmetric.
nd::Matrix scaled_row_gram(const nd::Matrix& m, double tau) {
    const std::size_t r = m.rows();
    nd::Matrix out(r, r);
    for (std::size_t i = 0; i < r; ++i) {
        const auto a = m.row(i);
        for (std::size_t j = i; j < r; ++j) {
            const auto b = m.row(j);
            double s = 0;
            for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
            out(i, j) = s / tau;
            out(j, i) = out(i, j);
        }
    }
    return out;
}

void require_positive(const char* name, double tau) {
    if (!(tau > 0) || !std::isfinite(tau))
        throw ParameterError(std::string(name) + " must be positive and finite, got " + std::to_string(tau));
}

}  // namespace

void TimeWindow::validate() const {
    if (values.rows() < 2 || values.cols() < 2)
        throw InputError("time window must be at least 2x2, got " + values.shape_str());
    for (double v : values.data())
        if (!std::isfinite(v)) throw InputError("time window starting at " + std::to_string(start_index) + " has non-finite entries");
}

nd::Matrix temporal_state_matrix(const TimeWindow& win, double tau_t) {
    require_positive("tau_t", tau_t);
    return scaled_row_gram(win.values, tau_t);
}

nd::Matrix spatial_state_matrix(const TimeWindow& win, double tau_s) {
    require_positive("tau_s", tau_s);
    return scaled_row_gram(win.values.transposed(), tau_s);
}

StateMatrixPair build_state_matrices(const TimeWindow& win, double tau_t, double tau_s) {
    StateMatrixPair pair;
    pair.tau_t = tau_t > 0 ? tau_t : double(win.sensors());
    pair.tau_s = tau_s > 0 ? tau_s : double(win.length());
    pair.temporal = temporal_state_matrix(win, pair.tau_t);
    pair.spatial = spatial_state_matrix(win, pair.tau_s);
    return pair;
}

}  // namespace madt::statemat
