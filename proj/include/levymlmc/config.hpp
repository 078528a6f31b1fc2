#pragma once

// INI experiment configuration: flat sections, unknown keys rejected, errors
// reported with the line of the offending key.

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/algorithm/string.hpp>
#include <boost/lexical_cast.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "levymlmc/jump_measure.hpp"

namespace levymlmc {

using Schema = std::map<std::string, std::set<std::string>>;

inline const Schema& experiment_schema() {
    static const Schema s = {
        {"experiment", {"kind", "experiments", "seed", "threads", "out"}},
        {"model", {"margins", "copula_theta", "copula_eta"}},
        {"grid", {"h", "R", "mass_ratio", "sampler", "state_cap", "panels"}},
        {"payoff",
         {"type", "strike", "spot", "rate", "maturity", "n_obs", "drift", "z0", "eps_scale", "observations"}},
        {"mc", {"paths"}},
        {"mlmc",
         {"eps", "eps_list", "levels", "paths", "pilot", "min_levels", "max_levels", "D_B", "verify_coupling",
          "theta_stat"}},
        {"credit", {"product", "recovery", "rate", "maturity", "spreads_bps", "paths", "pilot", "control_variates"}},
        {"fmm", {"tenor", "R0", "sigma", "strike", "discount", "eps_scale", "method", "paths"}},
        {"coupling", {"tol"}},
    };
    return s;
}

class ConfigFile {
  public:
    static ConfigFile parse(const std::string& text, const std::string& name = "<config>",
                            const Schema& schema = experiment_schema()) {
        ConfigFile c;
        c.name_ = name;
        c.text_ = text;
        std::istringstream in(text);
        try {
            boost::property_tree::read_ini(in, c.tree_);
        } catch (const boost::property_tree::ini_parser_error& e) {
            throw ConfigError(name + ":" + std::to_string(e.line()) + ": " + e.message());
        }
        c.index_lines();
        for (const auto& [section, body] : c.tree_) {
            const auto it = schema.find(section);
            if (body.empty() && !body.data().empty())
                c.fail(section, "top-level key '" + section + "' outside any section");
            if (it == schema.end()) c.fail(section, "unknown section [" + section + "]");
            for (const auto& [key, v] : body)
                if (!it->second.count(key)) c.fail(section + "." + key, "unknown key '" + key + "' in [" + section + "]");
        }
        return c;
    }

    static ConfigFile load(const std::string& path, const Schema& schema = experiment_schema()) {
        std::ifstream f(path);
        if (!f) throw ConfigError("cannot open config file " + path);
        std::stringstream ss;
        ss << f.rdbuf();
        return parse(ss.str(), path, schema);
    }

    const std::string& name() const { return name_; }
    const std::string& text() const { return text_; }
    const boost::property_tree::ptree& tree() const { return tree_; }

    bool has(const std::string& key) const { return tree_.get_optional<std::string>(key).has_value(); }

    void set(const std::string& key, const std::string& value) { tree_.put(key, value); }

    std::string str(const std::string& key, const std::string& def) const {
        const auto v = tree_.get_optional<std::string>(key);
        return v ? boost::trim_copy(*v) : def;
    }

    std::string str(const std::string& key) const {
        if (!has(key)) throw ConfigError(name_ + ": missing required key '" + key + "'");
        return str(key, "");
    }

    template <class T>
    T get(const std::string& key, T def) const {
        if (!has(key)) return def;
        return convert<T>(key, str(key));
    }

    template <class T>
    T get(const std::string& key) const {
        return convert<T>(key, str(key));
    }

    bool flag(const std::string& key, bool def) const {
        if (!has(key)) return def;
        const std::string v = boost::to_lower_copy(str(key));
        if (v == "true" || v == "yes" || v == "1" || v == "on") return true;
        if (v == "false" || v == "no" || v == "0" || v == "off") return false;
        fail(key, "expected a boolean, got '" + v + "'");
    }

    /// Comma-separated list.
    template <class T>
    std::vector<T> list(const std::string& key) const {
        std::vector<T> out;
        if (!has(key)) return out;
        std::vector<std::string> parts;
        const std::string v = str(key);
        if (v.empty()) return out;
        boost::split(parts, v, boost::is_any_of(","));
        for (auto& p : parts) out.push_back(convert<T>(key, boost::trim_copy(p)));
        return out;
    }

    /// Canonical INI text; parsing it again gives the same tree.
    std::string serialize() const {
        std::ostringstream os;
        boost::property_tree::write_ini(os, tree_);
        return os.str();
    }

    int line_of(const std::string& key) const {
        const auto it = lines_.find(key);
        return it == lines_.end() ? 0 : it->second;
    }

    [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
        const int line = line_of(key);
        throw ConfigError(name_ + (line ? ":" + std::to_string(line) : std::string()) + ": " + msg);
    }

  private:
    template <class T>
    T convert(const std::string& key, const std::string& v) const {
        try {
            return boost::lexical_cast<T>(v);
        } catch (const boost::bad_lexical_cast&) {
            fail(key, "cannot read '" + v + "' for key '" + key + "'");
        }
    }

    void index_lines() {
        std::istringstream in(text_);
        std::string line, section;
        int n = 0;
        while (std::getline(in, line)) {
            ++n;
            const std::string t = boost::trim_copy(line);
            if (t.empty() || t[0] == ';' || t[0] == '#') continue;
            if (t.front() == '[' && t.back() == ']') {
                section = boost::trim_copy(t.substr(1, t.size() - 2));
                lines_.emplace(section, n);
                continue;
            }
            const auto eq = t.find('=');
            if (eq == std::string::npos) continue;
            const std::string key = boost::trim_copy(t.substr(0, eq));
            lines_.emplace(section.empty() ? key : section + "." + key, n);
        }
    }

    std::string name_;
    std::string text_;
    boost::property_tree::ptree tree_;
    std::map<std::string, int> lines_;
};

// ----------------------------------------------------------------------------
// Margin descriptions: a catalog name or "kind key=value ...".

inline LevyModel1D margin_from_catalog(const std::string& name) {
    if (name == "hem") return LevyModel1D::hem({3.0, 0.6, 20.0, 25.0, 0.05});
    if (name == "vg") return LevyModel1D::vg({0.1, 0.06, 0.1});
    if (name == "cgmy02") return LevyModel1D::cgmy({1.23, 15.0, 20.0, 0.2});
    if (name == "cgmy04") return LevyModel1D::cgmy({0.70, 15.0, 20.0, 0.4});
    if (name == "cgmy11") return LevyModel1D::cgmy({0.025, 2.0, 4.0, 1.1});
    if (name == "cgmy15") return LevyModel1D::cgmy({0.007, 2.0, 4.0, 1.5});
    throw ConfigError("unknown model '" + name + "' (catalog: hem, vg, cgmy02, cgmy04, cgmy11, cgmy15)");
}

inline LevyModel1D parse_margin(const std::string& spec) {
    std::vector<std::string> tok;
    const std::string s = boost::trim_copy(spec);
    boost::split(tok, s, boost::is_any_of(" \t"), boost::token_compress_on);
    if (tok.empty() || tok[0].empty()) throw ConfigError("empty margin description");
    if (tok.size() == 1) return margin_from_catalog(tok[0]);
    std::map<std::string, double> kv;
    std::string base;
    for (std::size_t i = 1; i < tok.size(); ++i) {
        const auto eq = tok[i].find('=');
        if (eq == std::string::npos) {
            if (i == 1) {
                base = tok[i];
                continue;
            }
            throw ConfigError("margin parameter '" + tok[i] + "' needs key=value");
        }
        try {
            kv[tok[i].substr(0, eq)] = std::stod(tok[i].substr(eq + 1));
        } catch (const std::exception&) {
            throw ConfigError("cannot read margin parameter '" + tok[i] + "'");
        }
    }
    auto take = [&](const std::string& k, std::optional<double> def = {}) {
        const auto it = kv.find(k);
        if (it == kv.end()) {
            if (def) return *def;
            throw ConfigError("margin '" + tok[0] + "' needs parameter " + k);
        }
        const double v = it->second;
        kv.erase(it);
        return v;
    };
    LevyModel1D m = LevyModel1D::hem({1, 0.5, 1, 1, 0});
    if (tok[0] == "hem") {
        HemParams p{take("lambda"), take("p"), take("eta1"), take("eta2"), take("sigma", 0.0)};
        m = LevyModel1D::hem(p);
    } else if (tok[0] == "vg") {
        m = LevyModel1D::vg({take("sigma"), take("nu"), take("theta")});
    } else if (tok[0] == "cgmy") {
        m = LevyModel1D::cgmy({take("c"), take("g"), take("m"), take("y")});
    } else {
        throw ConfigError("unknown margin kind '" + tok[0] + "' (hem, vg, cgmy)");
    }
    if (!base.empty()) throw ConfigError("unexpected token '" + base + "' in margin description");
    if (!kv.empty()) throw ConfigError("unknown parameter '" + kv.begin()->first + "' for margin " + tok[0]);
    return m;
}

/// Margins separated by ';', joined by a Clayton copula when there are several.
inline JumpMeasure measure_from_config(const ConfigFile& c) {
    std::vector<std::string> parts;
    const std::string s = c.str("model.margins");
    boost::split(parts, s, boost::is_any_of(";"));
    std::vector<LevyModel1D> margins;
    try {
        for (const auto& p : parts)
            if (!boost::trim_copy(p).empty()) margins.push_back(parse_margin(p));
    } catch (const ConfigError& e) {
        c.fail("model.margins", e.what());
    }
    if (margins.empty()) c.fail("model.margins", "no margins given");
    if (margins.size() == 1) {
        if (c.has("model.copula_theta")) c.fail("model.copula_theta", "a copula needs at least two margins");
        return JumpMeasure(margins[0]);
    }
    const double theta = c.get<double>("model.copula_theta");
    const double eta = c.get<double>("model.copula_eta");
    try {
        return JumpMeasure(CopulaMeasure(ClaytonCopula(theta, eta, margins.size()), margins));
    } catch (const std::invalid_argument& e) {
        c.fail("model.copula_theta", e.what());
    }
}

/// FNV-1a of the configuration text, printed in CSV metadata.
inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace levymlmc
