#pragma once

#include <string>

#include "gcps/dsl.hpp"
#include "gcps/model.hpp"

inline std::string model_path(const std::string& name) { return std::string(GCPS_MODELS_DIR) + "/" + name; }

inline gcps::GcpsModel preset(const std::string& name) { return gcps::load_model(model_path(name)); }

/// One-symbol configuration with the given cell counts (environment row empty).
inline gcps::Configuration cells(std::initializer_list<std::int64_t> counts) {
    gcps::Configuration u(counts.size(), 1);
    std::size_t c = 1;
    for (auto v : counts) u.set(c++, 0, v);
    return u;
}

/// One-symbol rule (tok,i)(tok,j) -> (tok,k)(tok,l).
inline gcps::Rule move(std::size_t i, std::size_t j, std::size_t k, std::size_t l, double c = 1.0) {
    gcps::Rule r;
    r.i = i;
    r.j = j;
    r.k = k;
    r.l = l;
    r.constant = c;
    return r;
}
