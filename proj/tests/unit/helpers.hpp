#pragma once

#include "backfire/feature_lab.hpp"

#include <string>
#include <utility>
#include <vector>

namespace testutil {

// Entity-major panel with `n_entities` x `n_periods` rows starting 2024-06-01.
inline backfire::features::FeatureMatrix make_panel(int n_entities, int n_periods) {
    using namespace backfire;
    features::FeatureMatrix fm;
    for (int e = 0; e < n_entities; ++e) fm.entities.push_back("e" + std::to_string(e));
    const Date start(2024, 6, 1);
    for (int e = 0; e < n_entities; ++e)
        for (int t = 0; t < n_periods; ++t) fm.keys.push_back({e, start + t});
    const Index n = static_cast<Index>(fm.keys.size());
    fm.values.resize(n, 0);
    fm.missing.resize(n, 0);
    return fm;
}

inline backfire::features::FeatureMatrix make_series(const std::vector<std::pair<std::string, backfire::Vector>>& cols) {
    auto fm = make_panel(1, static_cast<int>(cols.front().second.size()));
    for (const auto& [name, v] : cols) fm.add_column(name, v);
    return fm;
}

}  // namespace testutil
