#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "gcps/model.hpp"
#include "gcps/odelimit.hpp"

namespace gcps {

/// Parses the line-oriented model format:
///
///     # comment
///     @name <text>
///     @description <text>
///     @alphabet <id>+
///     @env <id>*
///     @cells <n> [label=index ...]
///     @output <cell>
///     @init <cell>: <obj>=<count> ...
///     rule [<id>:] (<obj>,<cell>)(<obj>,<cell>) -> (<obj>,<cell>)(<obj>,<cell>) [@ <float>]
///
/// Directives may appear in any order; `@alphabet` and `@cells` are required.
/// A cell is an index or a label. The result is validated; every error is a
/// ParseError carrying a 1-based line and column.
GcpsModel parse_model(std::string_view text);

/// Reads and parses a model file. Missing files raise ModelError.
GcpsModel load_model(const std::filesystem::path& path);

/// Canonical text: fixed directive order, rules in declaration order, every
/// constant written out. parse_model(serialize_model(m)) == m.
std::string serialize_model(const GcpsModel& m);

/// As above with the @init block taken from `init` instead of m.initial.
std::string serialize_model(const GcpsModel& m, const Configuration& init);

/// JSON `{"n": N, "a": [{i,j,k,value}], "b": [{i,j,value}], "linear": [{i,j,value}]}`
/// with 1-based indices; `linear` is optional. Negative a or b is rejected.
OdeSystem parse_ode_system(std::string_view json_text);
std::string serialize_ode_system(const OdeSystem& s);

struct ProtocolDocument {
    PopulationProtocol protocol;
    std::map<std::string, std::int64_t> input;  // optional initial input multiset
};

/// JSON `{"states", "inputs", "init_map", "output_map", "delta": [[q1,q2,q1p,q2p,rate?]],
/// "input"?: {symbol: count}}`.
ProtocolDocument parse_protocol(std::string_view json_text);
std::string serialize_protocol(const ProtocolDocument& doc);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace gcps
