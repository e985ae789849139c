#pragma once

// On-disk instance format. A UTF-8 JSON document with top-level keys:
//   "space"    one of
//              {"metric": {"points": [...], "dist": [[...]]}}
//              {"hst": {"nodes": [...], "edges": [{"child","parent","len_exp"}],
//                       "leaves": {point: leaf}}}
//              {"pages": {"names": [...]}}
//   "k"        integer >= 1
//   "start"    list of k positions (node ids for hst, point/page names otherwise)
//   "requests" list of {"id","leaf","arrival","segments":[[offset,slope],...],
//              "deadline": optional}
// All numbers are strings ("1.25" or "3/17") so values round-trip exactly.

#include "osd/instance.hpp"

#include <json.hpp>

#include <map>
#include <string>

namespace osd {

struct SyntaxError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct SchemaError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct InvariantViolation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

inline Rat json_rat(const nlohmann::json& j, const std::string& field) {
    if (j.is_string()) {
        try {
            return rat_from_string(j.get<std::string>());
        } catch (const ParseError& e) {
            throw SchemaError(field + ": " + e.what());
        }
    }
    if (j.is_number_integer()) return Rat(j.get<long long>());
    throw SchemaError(field + ": numbers must be decimal or fraction strings");
}

inline nlohmann::json rat_json(const Rat& r) { return rat_to_string(r); }

}  // namespace detail

inline Instance parse_instance(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw SyntaxError(e.what());
    }
    auto need = [&](const nlohmann::json& o, const char* key) -> const nlohmann::json& {
        if (!o.contains(key)) throw SchemaError(std::string("missing field '") + key + "'");
        return o.at(key);
    };

    Instance inst;
    const auto& space = need(j, "space");
    std::map<std::string, int> name_to_loc;
    if (space.contains("metric")) {
        inst.kind = SpaceKind::MetricSpace;
        const auto& m = space.at("metric");
        Metric metric;
        for (const auto& p : need(m, "points")) metric.points.push_back(p.get<std::string>());
        for (const auto& row : need(m, "dist")) {
            metric.dist.emplace_back();
            for (const auto& x : row) metric.dist.back().push_back(detail::json_rat(x, "dist"));
        }
        for (int i = 0; i < metric.size(); ++i) name_to_loc[metric.points[i]] = i;
        inst.metric = std::move(metric);
    } else if (space.contains("hst")) {
        inst.kind = SpaceKind::Tree;
        const auto& h = space.at("hst");
        std::vector<int> ids;
        for (const auto& n : need(h, "nodes")) ids.push_back(n.get<int>());
        std::map<int, int> dense;
        for (size_t i = 0; i < ids.size(); ++i) {
            if (dense.count(ids[i])) throw SchemaError("duplicate node id");
            dense[ids[i]] = static_cast<int>(i);
        }
        Hst t;
        t.parent.assign(ids.size(), -1);
        t.len_exp.assign(ids.size(), 0);
        std::vector<bool> has_parent(ids.size(), false);
        for (const auto& e : need(h, "edges")) {
            auto itc = dense.find(need(e, "child").get<int>());
            auto itp = dense.find(need(e, "parent").get<int>());
            if (itc == dense.end() || itp == dense.end())
                throw SchemaError("edge references unknown node");
            int exp = need(e, "len_exp").get<int>();
            if (exp < 0) throw SchemaError("len_exp must be >= 0");
            t.parent[itc->second] = itp->second;
            t.len_exp[itc->second] = exp;
            has_parent[itc->second] = true;
        }
        int roots = 0;
        for (size_t i = 0; i < ids.size(); ++i)
            if (!has_parent[i]) {
                t.root = static_cast<int>(i);
                ++roots;
            }
        if (roots != 1) throw SchemaError("tree must have exactly one root");
        try {
            t.finalize();
        } catch (const NonTree& e) {
            throw SchemaError(e.what());
        }
        if (h.contains("leaves"))
            for (auto it = h.at("leaves").begin(); it != h.at("leaves").end(); ++it) {
                auto itn = dense.find(it.value().get<int>());
                if (itn == dense.end()) throw SchemaError("leaf map references unknown node");
                t.leaf_of_point[it.key()] = itn->second;
            }
        for (size_t i = 0; i < ids.size(); ++i) name_to_loc[std::to_string(ids[i])] = static_cast<int>(i);
        inst.tree = std::move(t);
    } else if (space.contains("pages")) {
        inst.kind = SpaceKind::Pages;
        for (const auto& p : need(space.at("pages"), "names"))
            inst.pages.push_back(p.get<std::string>());
        for (size_t i = 0; i < inst.pages.size(); ++i) name_to_loc[inst.pages[i]] = static_cast<int>(i);
    } else {
        throw SchemaError("space must be one of metric/hst/pages");
    }

    inst.k = need(j, "k").get<int>();
    if (inst.k < 1) throw SchemaError("k must be >= 1");

    auto resolve = [&](const nlohmann::json& v, const char* what) -> int {
        std::string key = v.is_string() ? v.get<std::string>() : std::to_string(v.get<long long>());
        auto it = name_to_loc.find(key);
        if (it == name_to_loc.end())
            throw InvariantViolation(std::string(what) + " references unknown location '" + key + "'");
        return it->second;
    };
    for (const auto& s : need(j, "start")) inst.start.push_back(resolve(s, "start"));

    for (const auto& rj : need(j, "requests")) {
        Request r;
        r.id = need(rj, "id").get<int>();
        r.where = resolve(need(rj, "leaf"), "request");
        r.arrival = detail::json_rat(need(rj, "arrival"), "arrival");
        for (const auto& seg : need(rj, "segments")) {
            if (!seg.is_array() || seg.size() != 2) throw SchemaError("segment must be [offset, slope]");
            r.penalty.segments.push_back(
                {detail::json_rat(seg[0], "offset"), detail::json_rat(seg[1], "slope")});
        }
        if (rj.contains("deadline") && !rj.at("deadline").is_null())
            r.penalty.deadline = detail::json_rat(rj.at("deadline"), "deadline");
        inst.requests.push_back(std::move(r));
    }
    inst.sort_requests();

    auto problems = inst.check();
    if (!problems.empty()) throw InvariantViolation(problems.front());
    return inst;
}

inline std::string serialize_instance(const Instance& inst) {
    nlohmann::json j;
    auto loc_name = [&](int loc) -> nlohmann::json {
        switch (inst.kind) {
            case SpaceKind::Tree: return std::to_string(loc);
            case SpaceKind::MetricSpace: return inst.metric->points[loc];
            case SpaceKind::Pages: return inst.pages[loc];
        }
        return loc;
    };
    if (inst.kind == SpaceKind::MetricSpace) {
        nlohmann::json m;
        m["points"] = inst.metric->points;
        for (const auto& row : inst.metric->dist) {
            nlohmann::json r = nlohmann::json::array();
            for (const auto& x : row) r.push_back(detail::rat_json(x));
            m["dist"].push_back(r);
        }
        j["space"]["metric"] = m;
    } else if (inst.kind == SpaceKind::Tree) {
        const Hst& t = *inst.tree;
        nlohmann::json h;
        for (int v = 0; v < t.size(); ++v) h["nodes"].push_back(v);
        h["edges"] = nlohmann::json::array();
        for (int v = 0; v < t.size(); ++v)
            if (v != t.root)
                h["edges"].push_back({{"child", v}, {"parent", t.parent[v]}, {"len_exp", t.len_exp[v]}});
        if (!t.leaf_of_point.empty()) {
            nlohmann::json lm = nlohmann::json::object();
            for (const auto& [p, leaf] : t.leaf_of_point) lm[p] = leaf;
            h["leaves"] = lm;
        }
        j["space"]["hst"] = h;
    } else {
        j["space"]["pages"]["names"] = inst.pages;
    }
    j["k"] = inst.k;
    j["start"] = nlohmann::json::array();
    for (int s : inst.start) j["start"].push_back(loc_name(s));
    j["requests"] = nlohmann::json::array();
    for (const auto& r : inst.requests) {
        nlohmann::json rj;
        rj["id"] = r.id;
        rj["leaf"] = loc_name(r.where);
        rj["arrival"] = detail::rat_json(r.arrival);
        rj["segments"] = nlohmann::json::array();
        for (const auto& seg : r.penalty.segments)
            rj["segments"].push_back({detail::rat_json(seg.offset), detail::rat_json(seg.slope)});
        if (r.penalty.deadline) rj["deadline"] = detail::rat_json(*r.penalty.deadline);
        j["requests"].push_back(rj);
    }
    return j.dump(2) + "\n";
}

}  // namespace osd
