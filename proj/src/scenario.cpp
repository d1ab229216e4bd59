#include "lobmfg/scenario.hpp"

#include "lobmfg/frontiers.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace lobmfg {

using nlohmann::json;

namespace {

AgentClass make_class(const std::string& label, double q, double lambda, double lambda_minus,
                      double cost) {
    return AgentClass{label, q, lambda, lambda_minus, cost};
}

Scenario one_class(const std::string& name, double q, double lambda, double lambda_minus,
                   double cost, double grid_max) {
    Scenario s;
    s.name = name;
    s.config.fair_price = 100.0;
    s.config.market_depth = 2.0;
    s.config.grid_max = grid_max;
    s.config.classes = {make_class("II", q, lambda, lambda_minus, cost)};
    return s;
}

Scenario two_class(const std::string& name, AgentClass ii, AgentClass hft, double grid_max) {
    Scenario s;
    s.name = name;
    s.config.fair_price = 100.0;
    s.config.market_depth = 2.0;
    s.config.grid_max = grid_max;
    s.config.classes = {std::move(ii), std::move(hft)};
    return s;
}

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    if (!obj.is_object()) throw ConfigError(where + " must be an object");
    for (const auto& item : obj.items())
        if (!allowed.count(item.key()))
            throw ConfigError("unknown key '" + item.key() + "' in " + where);
}

double number(const json& obj, const std::string& key, const std::string& where) {
    const auto it = obj.find(key);
    if (it == obj.end()) throw ConfigError("missing key '" + key + "' in " + where);
    if (!it->is_number()) throw ConfigError("'" + key + "' in " + where + " must be a number");
    return it->get<double>();
}

double number_or(const json& obj, const std::string& key, double fallback, const std::string& where) {
    return obj.contains(key) ? number(obj, key, where) : fallback;
}

std::uint64_t count_or(const json& obj, const std::string& key, std::uint64_t fallback,
                       const std::string& where) {
    const auto it = obj.find(key);
    if (it == obj.end()) return fallback;
    if (!it->is_number_unsigned())
        throw ConfigError("'" + key + "' in " + where + " must be a nonnegative integer");
    return it->get<std::uint64_t>();
}

}  // namespace

std::vector<std::string> preset_names() {
    return {"test1", "test2", "test3", "test4", "test5", "test6", "test6-text"};
}

Scenario preset(const std::string& name) {
    if (name == "test1") return one_class(name, 1.0, 1.0, 0.2, 2.5e-3, 100.0);
    if (name == "test2") return one_class(name, 0.25, 1.0, 0.2, 1e-2, 25.0);
    if (name == "test3") return one_class(name, 1.0, 1.0, 0.2, 1e-2, 100.0);
    if (name == "test4") return one_class(name, 1.0, 0.5, 0.5, 2.5e-3, 100.0);
    if (name == "test5")
        return two_class(name, make_class("II", 1.0, 0.5, 0.5, 2.5e-3),
                         make_class("HFT", 0.25, 4.0, 0.0, 1e-2), 40.0);
    if (name == "test6")
        return two_class(name, make_class("II", 1.0, 0.6, 0.4, 2.5e-3),
                         make_class("HFT", 0.25, 3.6, 0.4, 1e-2), 40.0);
    if (name == "test6-text")
        return two_class(name, make_class("II", 1.0, 3.6, 0.4, 2.5e-3),
                         make_class("HFT", 0.25, 0.6, 0.4, 1e-2), 40.0);
    std::string known;
    for (const auto& n : preset_names()) known += (known.empty() ? "" : ", ") + n;
    throw ConfigError("unknown preset '" + name + "' (known: " + known + ")");
}

Scenario scenario_from_json(const json& doc) {
    check_keys(doc, {"name", "fair_price", "market_depth", "grid_max", "classes", "solver", "seed",
                     "events", "frontier_step"},
               "scenario");
    Scenario s;
    if (doc.contains("name")) {
        if (!doc["name"].is_string()) throw ConfigError("'name' must be a string");
        s.name = doc["name"].get<std::string>();
    }
    s.config.fair_price = number_or(doc, "fair_price", s.config.fair_price, "scenario");
    s.config.market_depth = number_or(doc, "market_depth", s.config.market_depth, "scenario");
    s.config.grid_max = number(doc, "grid_max", "scenario");
    s.seed = count_or(doc, "seed", s.seed, "scenario");
    s.events = count_or(doc, "events", s.events, "scenario");
    s.frontier_step = number_or(doc, "frontier_step", s.frontier_step, "scenario");
    if (!(s.frontier_step > 0.0)) throw ConfigError("frontier_step must be positive");

    const auto classes = doc.find("classes");
    if (classes == doc.end() || !classes->is_array())
        throw ConfigError("'classes' must be an array of agent classes");
    for (std::size_t c = 0; c < classes->size(); ++c) {
        const json& k = (*classes)[c];
        const std::string where = "classes[" + std::to_string(c) + "]";
        check_keys(k, {"label", "order_size", "sor_intensity", "nonsor_intensity", "waiting_cost"},
                   where);
        AgentClass a;
        a.label = k.value("label", "class" + std::to_string(c + 1));
        a.order_size = number(k, "order_size", where);
        a.sor_intensity = number(k, "sor_intensity", where);
        a.nonsor_intensity = number_or(k, "nonsor_intensity", 0.0, where);
        a.waiting_cost = number(k, "waiting_cost", where);
        s.config.classes.push_back(a);
    }
    if (doc.contains("solver")) {
        const json& sv = doc["solver"];
        check_keys(sv, {"tolerance", "max_iterations", "relaxation", "cycle_window"}, "solver");
        s.config.solver.tolerance = number_or(sv, "tolerance", s.config.solver.tolerance, "solver");
        s.config.solver.max_iterations =
            count_or(sv, "max_iterations", s.config.solver.max_iterations, "solver");
        s.config.solver.relaxation = number_or(sv, "relaxation", s.config.solver.relaxation, "solver");
        s.config.solver.cycle_window =
            count_or(sv, "cycle_window", s.config.solver.cycle_window, "solver");
    }
    s.config.validate();
    return s;
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
    }
    return scenario_from_json(doc);
}

json scenario_to_json(const Scenario& s) {
    json classes = json::array();
    for (const auto& c : s.config.classes)
        classes.push_back({{"label", c.label},
                           {"order_size", c.order_size},
                           {"sor_intensity", c.sor_intensity},
                           {"nonsor_intensity", c.nonsor_intensity},
                           {"waiting_cost", c.waiting_cost}});
    return {{"name", s.name},
            {"fair_price", s.config.fair_price},
            {"market_depth", s.config.market_depth},
            {"grid_max", s.config.grid_max},
            {"classes", classes},
            {"solver",
             {{"tolerance", s.config.solver.tolerance},
              {"max_iterations", s.config.solver.max_iterations},
              {"relaxation", s.config.solver.relaxation},
              {"cycle_window", s.config.solver.cycle_window}}},
            {"seed", s.seed},
            {"events", s.events},
            {"frontier_step", s.frontier_step}};
}

double suggested_grid_max(const MarketConfig& config) {
    double target = 40.0 * config.max_order_size();
    for (std::size_t c = 0; c < config.classes.size(); ++c) {
        if (!(config.classes[c].nonsor_intensity > 0.0)) continue;
        target = std::max(target, 2.0 * x0_star(FirstOrderParams::from(config, c)));
    }
    const double h = config.grid_step();
    return std::ceil(target / h - 1e-9) * h;
}

ValidationReport validate_scenario(const Scenario& s) {
    ValidationReport r;
    try {
        s.config.validate();
    } catch (const ConfigError& e) {
        r.valid = false;
        r.errors.push_back(e.what());
        return r;
    }
    const MarketConfig& cfg = s.config;
    for (std::size_t c = 0; c < cfg.classes.size(); ++c) {
        const AgentClass& a = cfg.classes[c];
        if (a.nonsor_intensity > 0.0) {
            const double star = x0_star(FirstOrderParams::from(cfg, c));
            r.x0_star.push_back(star);
            std::ostringstream os;
            os << "class '" << a.label << "': first-order diagonal switch x0* = " << star;
            r.notes.push_back(os.str());
        } else {
            r.x0_star.push_back(std::numeric_limits<double>::quiet_NaN());
            r.notes.push_back("class '" + a.label +
                              "': no non-SOR flow, the first-order boundaries are not defined");
        }
        if (a.sor_intensity == 0.0)
            r.warnings.push_back("class '" + a.label + "' has no routing choice (sor_intensity = 0)");
    }
    // consumption must be able to keep up with the SOR supply for the queues to stay bounded
    double nonsor = 0.0;
    for (const auto& a : cfg.classes) nonsor += a.nonsor_intensity;
    if (nonsor == 0.0)
        r.warnings.push_back(
            "no class has non-SOR flow: liquidity is consumed only by routing choices");
    r.suggested_grid_max = suggested_grid_max(cfg);
    if (cfg.grid_max < r.suggested_grid_max - 1e-9) {
        std::ostringstream os;
        os << "grid_max " << cfg.grid_max << " is below the suggested " << r.suggested_grid_max
           << " (twice the largest x0*); the queue cap may distort the boundaries and the measure";
        r.warnings.push_back(os.str());
    }
    const std::size_t n = cfg.lattice().n;
    if (cfg.classes.size() * n * n > 200000) {
        std::ostringstream os;
        os << "lattice has " << n << " x " << n << " nodes per class; solving may take minutes";
        r.warnings.push_back(os.str());
    }
    return r;
}

ValidationReport validate_document(const json& doc) {
    try {
        return validate_scenario(scenario_from_json(doc));
    } catch (const ConfigError& e) {
        ValidationReport r;
        r.valid = false;
        r.errors.push_back(e.what());
        return r;
    }
}

json report_to_json(const ValidationReport& r) {
    json x0 = json::array();
    for (double v : r.x0_star) x0.push_back(std::isfinite(v) ? json(v) : json(nullptr));
    return {{"valid", r.valid},         {"errors", r.errors},
            {"warnings", r.warnings},   {"notes", r.notes},
            {"x0_star", x0},            {"suggested_grid_max", r.suggested_grid_max}};
}

}  // namespace lobmfg
