#include "gcps/dsl.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <optional>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "gcps/engine.hpp"
#include "gcps/error.hpp"

namespace gcps {

namespace {

struct Pos {
    std::size_t line = 1;
    std::size_t column = 1;
};

struct Token {
    std::string text;
    Pos pos;
};

/// Character cursor over one line.
class LineCursor {
public:
    LineCursor(std::string_view text, std::size_t line) : text_(text), line_(line) {}

    void skip_space() {
        while (i_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[i_]))) ++i_;
    }
    bool at_end() {
        skip_space();
        return i_ >= text_.size();
    }
    Pos pos() const { return {line_, i_ + 1}; }

    [[noreturn]] void fail(const std::string& msg) const { throw ParseError(line_, i_ + 1, msg); }

    bool accept(char c) {
        skip_space();
        if (i_ < text_.size() && text_[i_] == c) {
            ++i_;
            return true;
        }
        return false;
    }
    void expect(char c) {
        if (!accept(c)) fail(std::string("expected '") + c + "'");
    }
    bool accept(std::string_view s) {
        skip_space();
        if (text_.substr(i_, s.size()) == s) {
            i_ += s.size();
            return true;
        }
        return false;
    }
    bool peek(char c) {
        skip_space();
        return i_ < text_.size() && text_[i_] == c;
    }

    static bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
    static bool ident_char(char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
    }

    Token identifier() {
        skip_space();
        const auto start = pos();
        if (i_ >= text_.size() || !ident_start(text_[i_])) fail("expected an identifier");
        const auto from = i_;
        while (i_ < text_.size() && ident_char(text_[i_])) ++i_;
        return {std::string(text_.substr(from, i_ - from)), start};
    }

    /// Identifier or unsigned integer.
    Token word() {
        skip_space();
        const auto start = pos();
        const auto from = i_;
        while (i_ < text_.size() && ident_char(text_[i_])) ++i_;
        if (from == i_) fail("expected a name or a number");
        return {std::string(text_.substr(from, i_ - from)), start};
    }

    /// Everything up to the end of the line, trimmed.
    std::string rest() {
        skip_space();
        auto s = text_.substr(i_);
        i_ = text_.size();
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
        return std::string(s);
    }

    std::int64_t integer() {
        skip_space();
        std::int64_t v = 0;
        auto [p, ec] = std::from_chars(text_.data() + i_, text_.data() + text_.size(), v);
        if (ec != std::errc() || p == text_.data() + i_) fail("expected an integer");
        i_ = static_cast<std::size_t>(p - text_.data());
        return v;
    }

    double real() {
        skip_space();
        double v = 0;
        auto [p, ec] = std::from_chars(text_.data() + i_, text_.data() + text_.size(), v);
        if (ec != std::errc() || p == text_.data() + i_) fail("expected a number");
        i_ = static_cast<std::size_t>(p - text_.data());
        return v;
    }

private:
    std::string_view text_;
    std::size_t line_;
    std::size_t i_ = 0;
};

struct Slot {
    Token object;
    Token cell;
};

struct RuleLine {
    std::string id;
    Slot lhs[2];
    Slot rhs[2];
    double constant = 1.0;
    Pos pos;
};

struct InitLine {
    Token cell;
    std::vector<std::pair<Token, std::int64_t>> counts;
};

struct Document {
    std::optional<std::string> name, description;
    std::optional<std::vector<Token>> alphabet;
    std::optional<std::vector<Token>> env;
    std::optional<std::int64_t> n_cells;
    Pos cells_pos;
    std::vector<std::pair<Token, std::int64_t>> labels;
    std::optional<Token> output;
    std::vector<InitLine> inits;
    std::vector<RuleLine> rules;
};

Slot parse_slot(LineCursor& cur) {
    cur.expect('(');
    Slot s;
    s.object = cur.identifier();
    cur.expect(',');
    s.cell = cur.word();
    cur.expect(')');
    return s;
}

template <typename T>
void set_once(std::optional<T>& field, T value, const LineCursor& cur, std::string_view what) {
    if (field) cur.fail("duplicate " + std::string(what) + " directive");
    field = std::move(value);
}

void parse_line(std::string_view raw, std::size_t line_no, Document& doc) {
    auto hash = raw.find('#');
    const auto text = hash == std::string_view::npos ? raw : raw.substr(0, hash);
    LineCursor cur(text, line_no);
    if (cur.at_end()) return;

    if (cur.accept('@')) {
        const auto directive = cur.identifier();
        const auto& d = directive.text;
        if (d == "name") {
            set_once(doc.name, cur.rest(), cur, "@name");
        } else if (d == "description") {
            set_once(doc.description, cur.rest(), cur, "@description");
        } else if (d == "alphabet" || d == "env") {
            std::vector<Token> ids;
            while (!cur.at_end()) ids.push_back(cur.identifier());
            if (d == "alphabet") {
                if (ids.empty()) cur.fail("@alphabet needs at least one object");
                set_once(doc.alphabet, std::move(ids), cur, "@alphabet");
            } else {
                set_once(doc.env, std::move(ids), cur, "@env");
            }
        } else if (d == "cells") {
            doc.cells_pos = cur.pos();
            set_once(doc.n_cells, cur.integer(), cur, "@cells");
            while (!cur.at_end()) {
                auto label = cur.identifier();
                cur.expect('=');
                doc.labels.emplace_back(std::move(label), cur.integer());
            }
        } else if (d == "output") {
            set_once(doc.output, cur.word(), cur, "@output");
            if (!cur.at_end()) cur.fail("unexpected text after @output");
        } else if (d == "init") {
            InitLine init;
            init.cell = cur.word();
            cur.expect(':');
            while (!cur.at_end()) {
                auto obj = cur.identifier();
                cur.expect('=');
                init.counts.emplace_back(std::move(obj), cur.integer());
            }
            doc.inits.push_back(std::move(init));
        } else {
            throw ParseError(directive.pos.line, directive.pos.column, "unknown directive @" + d);
        }
        return;
    }

    RuleLine rule;
    rule.pos = cur.pos();
    const auto keyword = cur.identifier();
    if (keyword.text != "rule")
        throw ParseError(keyword.pos.line, keyword.pos.column,
                         "expected a directive or 'rule', found '" + keyword.text + "'");
    if (!cur.peek('(')) {
        rule.id = cur.identifier().text;
        cur.expect(':');
    }
    rule.lhs[0] = parse_slot(cur);
    rule.lhs[1] = parse_slot(cur);
    if (!cur.accept("->")) cur.fail("expected '->'");
    rule.rhs[0] = parse_slot(cur);
    rule.rhs[1] = parse_slot(cur);
    if (cur.accept('@')) rule.constant = cur.real();
    if (!cur.at_end()) cur.fail("unexpected text after rule");
    doc.rules.push_back(std::move(rule));
}

[[noreturn]] void fail_at(const Pos& p, const std::string& msg) {
    throw ParseError(p.line, p.column, msg);
}

GcpsModel resolve(const Document& doc, std::size_t last_line) {
    if (!doc.alphabet) fail_at({last_line, 1}, "missing @alphabet directive");
    if (!doc.n_cells) fail_at({last_line, 1}, "missing @cells directive");
    if (*doc.n_cells < 1) fail_at(doc.cells_pos, "the number of cells must be at least 1");

    GcpsModel m;
    m.name = doc.name.value_or("");
    m.description = doc.description.value_or("");
    for (const auto& t : *doc.alphabet) {
        if (m.object_index(t.text)) fail_at(t.pos, "object '" + t.text + "' declared twice");
        m.alphabet.push_back(t.text);
    }
    m.env.assign(m.alphabet.size(), false);
    if (doc.env)
        for (const auto& t : *doc.env) {
            auto o = m.object_index(t.text);
            if (!o) fail_at(t.pos, "environment object '" + t.text + "' is not in the alphabet");
            m.env[*o] = true;
        }
    m.n_cells = static_cast<std::size_t>(*doc.n_cells);
    m.cell_labels.assign(m.n_cells + 1, "");
    for (const auto& [label, index] : doc.labels) {
        if (index < 0 || static_cast<std::size_t>(index) > m.n_cells)
            fail_at(label.pos, "label '" + label.text + "' maps to a cell outside 0.." +
                                   std::to_string(m.n_cells));
        if (m.cell_index(label.text)) fail_at(label.pos, "cell label '" + label.text + "' declared twice");
        if (!m.cell_labels[static_cast<std::size_t>(index)].empty())
            fail_at(label.pos, "cell " + std::to_string(index) + " already has a label");
        m.cell_labels[static_cast<std::size_t>(index)] = label.text;
    }

    auto cell_of = [&](const Token& t) -> std::size_t {
        if (std::isdigit(static_cast<unsigned char>(t.text[0]))) {
            std::size_t v = 0;
            auto [p, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
            if (ec != std::errc() || p != t.text.data() + t.text.size())
                fail_at(t.pos, "malformed cell index '" + t.text + "'");
            if (v > m.n_cells)
                fail_at(t.pos, "cell " + t.text + " outside 0.." + std::to_string(m.n_cells));
            return v;
        }
        auto c = m.cell_index(t.text);
        if (!c) fail_at(t.pos, "undeclared cell label '" + t.text + "'");
        return *c;
    };
    auto object_of = [&](const Token& t) -> std::size_t {
        auto o = m.object_index(t.text);
        if (!o) fail_at(t.pos, "undeclared object '" + t.text + "'");
        return *o;
    };

    if (doc.output) m.output_cell = cell_of(*doc.output);
    if (doc.output && m.output_cell == kEnvironment)
        fail_at(doc.output->pos, "the output cell cannot be the environment");

    m.initial.assign(m.n_cells, std::vector<std::int64_t>(m.alphabet.size(), 0));
    for (const auto& init : doc.inits) {
        const auto c = cell_of(init.cell);
        if (c == kEnvironment) fail_at(init.cell.pos, "the environment has no initial multiset");
        for (const auto& [obj, count] : init.counts) {
            if (count < 0) fail_at(obj.pos, "negative count");
            m.initial[c - 1][object_of(obj)] += count;
        }
    }

    for (const auto& line : doc.rules) {
        Rule r;
        r.id = line.id;
        r.a = object_of(line.lhs[0].object);
        r.i = cell_of(line.lhs[0].cell);
        r.b = object_of(line.lhs[1].object);
        r.j = cell_of(line.lhs[1].cell);
        if (object_of(line.rhs[0].object) != r.a || object_of(line.rhs[1].object) != r.b)
            fail_at(line.rhs[0].object.pos,
                    "objects only move: the right side must name the left side's objects in order");
        r.k = cell_of(line.rhs[0].cell);
        r.l = cell_of(line.rhs[1].cell);
        r.constant = line.constant;
        m.rules.push_back(std::move(r));
    }

    for (const auto& v : validate_model(m)) {
        const Pos p = v.rule ? doc.rules[*v.rule].pos : Pos{1, 1};
        fail_at(p, v.reason);
    }
    return m;
}

}  // namespace

GcpsModel parse_model(std::string_view text) {
    Document doc;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        auto line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        parse_line(line, ++line_no, doc);
        start = end + 1;
    }
    return resolve(doc, line_no);
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ModelError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

GcpsModel load_model(const std::filesystem::path& path) {
    return parse_model(read_text_file(path));
}

std::string serialize_model(const GcpsModel& m, const Configuration& init) {
    require_valid(m);
    check_dimensions(m, init);
    std::string out;
    if (!m.name.empty()) out += "@name " + m.name + "\n";
    if (!m.description.empty()) out += "@description " + m.description + "\n";
    out += "@alphabet";
    for (const auto& o : m.alphabet) out += " " + o;
    out += "\n@env";
    for (std::size_t o = 0; o < m.n_objects(); ++o)
        if (m.is_env(o)) out += " " + m.alphabet[o];
    out += "\n@cells " + std::to_string(m.n_cells);
    for (std::size_t c = 0; c < m.cell_labels.size(); ++c)
        if (!m.cell_labels[c].empty()) out += " " + m.cell_labels[c] + "=" + std::to_string(c);
    out += "\n@output " + m.cell_name(m.output_cell) + "\n";
    for (std::size_t c = 1; c <= m.n_cells; ++c) {
        std::string counts;
        for (std::size_t o = 0; o < m.n_objects(); ++o)
            if (auto v = init.count(c, o); v != 0) counts += " " + m.alphabet[o] + "=" + std::to_string(v);
        if (!counts.empty()) out += "@init " + m.cell_name(c) + ":" + counts + "\n";
    }
    if (!m.rules.empty()) out += "\n";
    for (const auto& r : m.rules) {
        out += "rule ";
        if (!r.id.empty()) out += r.id + ": ";
        auto slot = [&](std::size_t obj, std::size_t cell) {
            return "(" + m.alphabet[obj] + "," + m.cell_name(cell) + ")";
        };
        out += slot(r.a, r.i) + slot(r.b, r.j) + " -> " + slot(r.a, r.k) + slot(r.b, r.l);
        out += " @ " + format_double(r.constant) + "\n";
    }
    return out;
}

std::string serialize_model(const GcpsModel& m) {
    return serialize_model(m, m.initial_configuration());
}

// -- JSON formats -------------------------------------------------------------

namespace {

using nlohmann::json;

json parse_json(std::string_view text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        std::size_t line = 1, col = 1;
        for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw ParseError(line, col, "malformed JSON");
    }
}

template <typename F>
auto with_schema_errors(F&& f) {
    try {
        return f();
    } catch (const json::exception& e) {
        throw ModelError(std::string("unexpected JSON shape: ") + e.what());
    }
}

}  // namespace

OdeSystem parse_ode_system(std::string_view json_text) {
    const auto doc = parse_json(json_text);
    return with_schema_errors([&] {
        OdeSystem s;
        const auto n = doc.at("n").get<std::int64_t>();
        if (n < 0) throw ModelError("n must be >= 0");
        s.n_vars = static_cast<std::size_t>(n);
        auto index = [&](const json& e, const char* key) {
            const auto v = e.at(key).get<std::int64_t>();
            if (v < 1 || v > n)
                throw ModelError(std::string("index ") + key + "=" + std::to_string(v) +
                                 " outside 1.." + std::to_string(n));
            return static_cast<std::size_t>(v);
        };
        for (const auto& e : doc.value("a", json::array())) {
            const double v = e.at("value").get<double>();
            if (v < 0.0) throw ModelError("a coefficients must be >= 0");
            if (v != 0.0) s.a[{index(e, "i"), index(e, "j"), index(e, "k")}] += v;
        }
        for (const auto& e : doc.value("b", json::array())) {
            const double v = e.at("value").get<double>();
            if (v < 0.0) throw ModelError("b coefficients must be >= 0");
            if (v != 0.0) s.b[{index(e, "i"), index(e, "j")}] += v;
        }
        for (const auto& e : doc.value("linear", json::array())) {
            const double v = e.at("value").get<double>();
            if (v != 0.0) s.linear[{index(e, "i"), index(e, "j")}] += v;
        }
        return s;
    });
}

std::string serialize_ode_system(const OdeSystem& s) {
    json doc;
    doc["n"] = s.n_vars;
    doc["a"] = json::array();
    for (const auto& [key, v] : s.a)
        if (v != 0.0) doc["a"].push_back({{"i", key[0]}, {"j", key[1]}, {"k", key[2]}, {"value", v}});
    doc["b"] = json::array();
    for (const auto& [key, v] : s.b)
        if (v != 0.0) doc["b"].push_back({{"i", key.first}, {"j", key.second}, {"value", v}});
    if (!s.linear.empty()) {
        doc["linear"] = json::array();
        for (const auto& [key, v] : s.linear)
            doc["linear"].push_back({{"i", key.first}, {"j", key.second}, {"value", v}});
    }
    return doc.dump(2) + "\n";
}

ProtocolDocument parse_protocol(std::string_view json_text) {
    const auto doc = parse_json(json_text);
    return with_schema_errors([&] {
        ProtocolDocument out;
        auto& p = out.protocol;
        p.states = doc.at("states").get<std::vector<std::string>>();
        p.inputs = doc.at("inputs").get<std::vector<std::string>>();
        auto state = [&](const std::string& name) {
            auto q = p.state_index(name);
            if (!q) throw ModelError("unknown state '" + name + "'");
            return *q;
        };
        const auto& init = doc.at("init_map");
        for (const auto& in : p.inputs) {
            if (!init.contains(in)) throw ModelError("init_map is not total: missing '" + in + "'");
            p.init_map.push_back(state(init.at(in).get<std::string>()));
        }
        const auto& output = doc.at("output_map");
        for (const auto& q : p.states) {
            if (!output.contains(q)) throw ModelError("output_map is not total: missing '" + q + "'");
            p.output_map.push_back(output.at(q).get<int>());
        }
        for (const auto& t : doc.at("delta")) {
            if (t.size() != 4 && t.size() != 5)
                throw ModelError("delta entries are [q1, q2, q1', q2'] with an optional rate");
            Interaction x;
            x.q1 = state(t[0].get<std::string>());
            x.q2 = state(t[1].get<std::string>());
            x.q1p = state(t[2].get<std::string>());
            x.q2p = state(t[3].get<std::string>());
            if (t.size() == 5) x.rate = t[4].get<double>();
            p.delta.push_back(x);
        }
        if (doc.contains("input"))
            out.input = doc.at("input").get<std::map<std::string, std::int64_t>>();
        require_valid(p);
        return out;
    });
}

std::string serialize_protocol(const ProtocolDocument& d) {
    const auto& p = d.protocol;
    require_valid(p);
    json doc;
    doc["states"] = p.states;
    doc["inputs"] = p.inputs;
    doc["init_map"] = json::object();
    for (std::size_t s = 0; s < p.inputs.size(); ++s) doc["init_map"][p.inputs[s]] = p.states[p.init_map[s]];
    doc["output_map"] = json::object();
    for (std::size_t q = 0; q < p.states.size(); ++q) doc["output_map"][p.states[q]] = p.output_map[q];
    doc["delta"] = json::array();
    for (const auto& t : p.delta)
        doc["delta"].push_back({p.states[t.q1], p.states[t.q2], p.states[t.q1p], p.states[t.q2p], t.rate});
    if (!d.input.empty()) doc["input"] = d.input;
    return doc.dump(2) + "\n";
}

}  // namespace gcps
