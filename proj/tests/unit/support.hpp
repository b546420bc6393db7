#pragma once

#include "reslab/model.hpp"

namespace reslab::testing {

// 2 levels, 8 geometric modes, n_max = 2: dim 2 * 45 = 90.
inline model::ModelSpec small_spec(std::size_t modes = 8, int n_max = 2) {
    auto s = model::default_spec();
    s.grid.count = modes;
    s.n_max = n_max;
    return s;
}

inline model::ModelPtr small_model(std::size_t modes = 8, int n_max = 2) {
    return model::make_model(small_spec(modes, n_max));
}

inline double max_abs(const SpMat& m) {
    double s = 0.0;
    for (int k = 0; k < m.outerSize(); ++k)
        for (SpMat::InnerIterator it(m, k); it; ++it) s = std::max(s, std::abs(it.value()));
    return s;
}

} // namespace reslab::testing
