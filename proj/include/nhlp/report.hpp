#pragma once

#include <map>

#include <json.hpp>

#include "core.hpp"

namespace nhlp {

struct VerificationReport {
    std::string lemma;
    std::map<std::string, double> measured_constants;
    nlohmann::json worst_witness = nlohmann::json::object();
    bool pass = true;
    std::map<std::string, double> tolerances;
    std::vector<std::string> notes;

    void set(const std::string& key, double v) { measured_constants[key] = v; }
    double get(const std::string& key) const { return measured_constants.at(key); }

    void fail(const std::string& note) {
        pass = false;
        notes.push_back(note);
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["lemma"] = lemma;
        j["measured_constants"] = measured_constants;
        j["worst_witness"] = worst_witness;
        j["pass"] = pass;
        j["tolerances"] = tolerances;
        if (!notes.empty()) j["notes"] = notes;
        return j;
    }
};

}  // namespace nhlp
