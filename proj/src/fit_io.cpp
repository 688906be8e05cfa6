#include "icgkit/fit_io.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "icgkit/common.hpp"
#include "icgkit/error.hpp"

namespace icgkit {

Json params_to_json(const KineticParams& p) {
    return Json{{"D", json_number(p.damping)},     {"tau_s", json_number(p.tau_s)},
                {"tau_i_s", json_number(p.tau_i_s)}, {"K", json_number(p.gain)},
                {"b", json_number(p.background)},  {"t0_s", json_number(p.delay_s)}};
}

KineticParams params_from_json(const Json& j) {
    reject_unknown_keys(j, {"D", "tau_s", "tau_i_s", "K", "b", "t0_s"}, "kinetic parameters");
    KineticParams p;
    try {
        p.damping = j.at("D").get<double>();
        p.tau_s = j.at("tau_s").get<double>();
        p.tau_i_s = j.at("tau_i_s").get<double>();
        p.gain = j.at("K").get<double>();
        p.background = j.value("b", 0.0);
        p.delay_s = j.value("t0_s", 0.0);
        p.validate();
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("kinetic parameters: ") + e.what());
    } catch (const DomainError& e) {
        throw ConfigError(e.what());
    }
    return p;
}

FitRun fit_curves(const CurveSet& curves, const FitConfig& config) {
    std::vector<const std::pair<const CurveKey, TimeSeries>*> items;
    for (const auto& kv : curves) items.push_back(&kv);
    std::vector<std::optional<FitResult>> results(items.size());
    std::vector<std::string> errors(items.size());
    parallel_for(items.size(), [&](std::size_t i) {
        try {
            results[i] = fit(items[i]->second, config);
        } catch (const DomainError& e) {
            errors[i] = e.what();
        }
    });
    FitRun run;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (results[i]) {
            run.fits.emplace(items[i]->first, *results[i]);
        } else {
            run.failures.push_back({items[i]->first, "curve " + to_string(items[i]->first) + ": " + errors[i]});
        }
    }
    return run;
}

Json fits_to_json(const FitRun& run) {
    std::map<CurveKey, Json> records;
    for (const auto& [k, f] : run.fits) {
        Json r = params_to_json(f.params);
        r["patient_id"] = k.patient_id;
        r["roi_id"] = k.roi_id;
        r["rmse"] = json_number(f.rmse);
        r["n_iterations"] = f.n_iterations;
        r["converged"] = f.converged;
        r["truncation_time_s"] = json_number(f.truncation_time_s);
        records.emplace(k, std::move(r));
    }
    for (const auto& f : run.failures) {
        records.emplace(f.key, Json{{"patient_id", f.key.patient_id}, {"roi_id", f.key.roi_id}, {"error", f.error}});
    }
    Json arr = Json::array();
    for (auto& [k, r] : records) arr.push_back(std::move(r));
    return arr;
}

FitRun fits_from_json(const Json& j) {
    FitRun run;
    std::set<CurveKey> seen;
    try {
        if (!j.is_array()) throw FormatError("fits file must hold an array of fit records");
        for (const auto& f : j) {
            CurveKey key{f.at("patient_id").get<std::string>(), f.at("roi_id").get<std::string>()};
            if (!seen.insert(key).second) throw FormatError("duplicate fit for curve " + to_string(key));
            if (f.contains("error")) {
                reject_unknown_keys(f, {"patient_id", "roi_id", "error"}, "failed fit record");
                run.failures.push_back({key, f.at("error").get<std::string>()});
                continue;
            }
            reject_unknown_keys(f, {"patient_id", "roi_id", "D", "tau_s", "tau_i_s", "K", "b", "t0_s", "rmse",
                                    "n_iterations", "converged", "truncation_time_s"},
                                "fit record");
            Json params = Json::object();
            for (const char* name : {"D", "tau_s", "tau_i_s", "K", "b", "t0_s"}) {
                if (f.contains(name)) params[name] = f.at(name);
            }
            FitResult r;
            r.params = params_from_json(params);
            r.rmse = json_to_double(f.at("rmse"));
            r.n_iterations = f.value("n_iterations", 0);
            r.converged = f.value("converged", false);
            if (f.contains("truncation_time_s")) r.truncation_time_s = json_to_double(f.at("truncation_time_s"));
            run.fits.emplace(key, r);
        }
    } catch (const Json::exception& e) {
        throw FormatError(std::string("fits file: ") + e.what());
    } catch (const ConfigError& e) {
        throw FormatError(std::string("fits file: ") + e.what());
    }
    return run;
}

void save_fits(const std::filesystem::path& path, const FitRun& run) { write_json_file(path, fits_to_json(run)); }

FitRun load_fits(const std::filesystem::path& path) {
    try {
        return fits_from_json(read_json_file(path));
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

Json fit_diff_report(const FitTable& a, const FitTable& b) {
    static const char* names[] = {"D", "tau_s", "tau_i_s", "K", "b", "t0_s"};
    auto values = [](const KineticParams& p) {
        return std::array<double, 6>{p.damping, p.tau_s, p.tau_i_s, p.gain, p.background, p.delay_s};
    };
    std::array<double, 6> worst{};
    Json rows = Json::array();
    std::size_t n = 0;
    for (const auto& [k, fa] : a) {
        auto it = b.find(k);
        if (it == b.end()) continue;
        ++n;
        const auto va = values(fa.params);
        const auto vb = values(it->second.params);
        Json row{{"patient_id", k.patient_id}, {"roi_id", k.roi_id}};
        for (int i = 0; i < 6; ++i) {
            const double rel = va[i] != 0.0 ? std::abs(vb[i] - va[i]) / std::abs(va[i]) : std::abs(vb[i]);
            worst[i] = std::max(worst[i], rel);
            row[names[i]] = {{"a", json_number(va[i])}, {"b", json_number(vb[i])}, {"rel_diff", json_number(rel)}};
        }
        rows.push_back(row);
    }
    Json max_rel;
    for (int i = 0; i < 6; ++i) max_rel[names[i]] = json_number(worst[i]);
    return Json{{"n_compared", n}, {"max_rel_diff", max_rel}, {"curves", rows}};
}

}  // namespace icgkit
