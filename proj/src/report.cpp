#include "fliptrace/report.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fliptrace {

using nlohmann::json;

json fault_to_json(const FaultSpec& fault) {
    json j;
    j["index"] = fault.instr_index;
    j["target"] = fault.target_result ? "result" : ("operand:" + std::to_string(fault.operand_slot));
    j["bit"] = fault.bit;
    return j;
}

FaultSpec fault_from_json(const json& j) {
    FaultSpec f;
    f.instr_index = j.at("index").get<uint64_t>();
    f.bit = j.at("bit").get<uint32_t>();
    std::string target = j.at("target").get<std::string>();
    if (target == "result") {
        f.target_result = true;
    } else if (target.rfind("operand:", 0) == 0) {
        f.target_result = false;
        f.operand_slot = static_cast<uint32_t>(std::stoul(target.substr(8)));
    } else {
        throw std::runtime_error("bad fault target '" + target + "'");
    }
    return f;
}

json analysis_to_json(const AnalysisReport& report) {
    const Trace& ft = report.faulty_trace;
    json j;
    j["schema"] = "fliptrace-analysis";
    char hash[20];
    std::snprintf(hash, sizeof hash, "%016llx",
                  static_cast<unsigned long long>(report.program_hash));
    j["program_hash"] = hash;
    j["fault"] = fault_to_json(report.fault);
    j["manifestation"] = manifestation_name(report.manifestation);
    if (report.faulty_status == RunStatus::trapped) j["trap_reason"] = report.trap_reason;
    j["value_compare_degraded"] = report.value_compare_degraded;
    if (report.divergence_start) j["divergence_start"] = *report.divergence_start;
    if (report.reconvergence) j["reconvergence"] = *report.reconvergence;

    json drops = json::array();
    for (const auto& dp : report.drop_points) {
        json d;
        d["index"] = dp.index;
        d["src_line"] = dp.src_line;
        json dying = json::array();
        for (const auto& death : dp.dying) {
            json dd;
            dd["location"] = ft.location_name(death.loc);
            dd["cause"] = death.cause == DeathCause::disuse ? "disuse" : "clean_overwrite";
            dying.push_back(std::move(dd));
        }
        d["dying"] = std::move(dying);
        drops.push_back(std::move(d));
    }
    j["drop_points"] = std::move(drops);

    json regions = json::array();
    for (const auto& rr : report.regions) {
        json r;
        r["region_id"] = rr.instance.region_id;
        r["synthetic"] = rr.instance.synthetic;
        r["ordinal"] = rr.instance.ordinal;
        r["span"] = {rr.instance.first, rr.instance.last};
        auto locs = [&](const std::set<Location>& s) {
            json a = json::array();
            for (const auto& loc : s) a.push_back(ft.location_name(loc));
            return a;
        };
        r["inputs"] = locs(rr.interface.inputs);
        r["outputs"] = locs(rr.interface.outputs);
        r["internals"] = locs(rr.interface.internals);
        switch (rr.verdict.kind) {
        case ResilienceCase::not_resilient: r["verdict"] = "not_resilient"; break;
        case ResilienceCase::case1: r["verdict"] = "case1"; break;
        case ResilienceCase::case2: r["verdict"] = "case2"; break;
        }
        if (rr.verdict.boundary_unaligned) r["boundary_unaligned"] = true;
        if (!rr.verdict.corrupted_inputs.empty()) {
            json a = json::array();
            for (const auto& loc : rr.verdict.corrupted_inputs) a.push_back(ft.location_name(loc));
            r["corrupted_inputs"] = std::move(a);
        }
        if (!rr.verdict.corrupted_outputs.empty()) {
            json a = json::array();
            for (const auto& loc : rr.verdict.corrupted_outputs) a.push_back(ft.location_name(loc));
            r["corrupted_outputs"] = std::move(a);
        }
        if (!rr.verdict.magnitude_evidence.empty()) {
            json a = json::array();
            for (const auto& mc : rr.verdict.magnitude_evidence) {
                json m;
                m["location"] = ft.location_name(mc.loc);
                m["before"] = mc.before;
                m["after"] = mc.after;
                a.push_back(std::move(m));
            }
            r["magnitude_evidence"] = std::move(a);
        }
        regions.push_back(std::move(r));
    }
    j["regions"] = std::move(regions);

    json patterns = json::array();
    for (const auto& pi : report.patterns) {
        json p;
        p["kind"] = pattern_name(pi.kind);
        p["region_id"] = pi.region_id;
        p["instance_ordinal"] = pi.instance_ordinal;
        p["anchor_indices"] = pi.anchor_indices;
        p["src_lines"] = pi.src_lines;
        p["note"] = pi.note;
        p["evidence"] = {
            {"kind", pi.evidence == EvidenceKind::drop_point ? "drop_point"
                                                             : "magnitude_decrease"},
            {"index", pi.evidence_index},
        };
        patterns.push_back(std::move(p));
    }
    j["patterns"] = std::move(patterns);

    j["acl_counts"] = report.acl.counts;
    return j;
}

json campaign_to_json(const CampaignResult& result, const SamplePlan& plan,
                      const std::string& scope_text) {
    json j;
    j["schema"] = "fliptrace-campaign";
    j["scope"] = scope_text;
    json p;
    p["confidence"] = plan.confidence;
    p["z"] = plan.z;
    p["margin"] = plan.margin;
    p["p"] = plan.p;
    p["n"] = plan.n;
    if (!plan.infinite_population) p["population"] = plan.population_size;
    j["plan"] = std::move(p);
    j["population_sites"] = result.population;
    j["seed"] = result.seed;
    j["with_replacement"] = result.with_replacement;
    j["tests"] = result.tests;
    j["tallies"] = {
        {"verification_success", result.tally_success},
        {"verification_failed", result.tally_failed},
        {"crashed", result.tally_crashed},
    };
    j["success_rate"] = result.success_rate;
    json log = json::array();
    for (const auto& rec : result.log) {
        json e;
        e["index"] = rec.site.index;
        e["target"] = rec.site.result ? "result" : ("operand:" + std::to_string(rec.site.slot));
        e["bit"] = rec.site.bit;
        e["outcome"] = manifestation_name(rec.outcome);
        log.push_back(std::move(e));
    }
    j["faults"] = std::move(log);
    return j;
}

json model_fit_to_json(const RegressionModel& model, double r2) {
    json j;
    j["schema"] = "fliptrace-model";
    j["estimator"] = model.ridge_lambda > 0 ? "ridge" : "ols";
    j["ridge_lambda"] = model.ridge_lambda;
    j["note"] = "least-squares estimate; pass --ridge to regularize";
    j["r_squared"] = r2;
    json beta;
    for (size_t k = 0; k < kFeatureCount; ++k) beta[kFeatureNames[k]] = model.beta[k];
    j["beta"] = std::move(beta);
    j["intercept"] = model.intercept;
    j["training_set"] = model.training_set;
    return j;
}

json model_eval_to_json(const EvalReport& report) {
    json j;
    j["schema"] = "fliptrace-model-eval";
    j["r_squared_in_sample"] = report.r_squared_in_sample;
    json rows = json::array();
    for (const auto& ev : report.per_row) {
        json r;
        r["name"] = ev.name;
        r["measured_sr"] = ev.measured;
        r["predicted_sr_raw"] = ev.predicted_raw;
        r["predicted_sr"] = ev.predicted;
        r["relative_error"] = ev.relative_error;
        rows.push_back(std::move(r));
    }
    j["per_row"] = std::move(rows);
    j["mean_error_excluding"] = report.mean_error_excluding;
    json coeffs;
    for (size_t k = 0; k < kFeatureCount; ++k) coeffs[kFeatureNames[k]] = report.std_coeffs[k];
    j["std_coeffs"] = std::move(coeffs);
    auto order = importance_order(report.std_coeffs);
    json imp = json::array();
    for (size_t k : order) imp.push_back(kFeatureNames[k]);
    j["importance_order"] = std::move(imp);
    if (!report.warnings.empty()) j["warnings"] = report.warnings;
    return j;
}

std::string feature_csv(const std::string& name, const FeatureVector& fv, bool header) {
    std::ostringstream out;
    if (header) {
        out << "name";
        for (const char* col : kFeatureNames) out << "," << col;
        out << ",total_instructions\n";
    }
    out << name;
    char buf[32];
    for (size_t k = 0; k < kFeatureCount; ++k) {
        std::snprintf(buf, sizeof buf, "%.9g", fv.rates[k]);
        out << "," << buf;
    }
    out << "," << fv.total_dynamic_instructions << "\n";
    return out.str();
}

namespace {

std::string summarize_campaign(const json& j, const std::string& format) {
    std::ostringstream out;
    const auto& t = j.at("tallies");
    if (format == "csv") {
        out << "tests,verification_success,verification_failed,crashed,success_rate\n";
        out << j.at("tests").get<uint64_t>() << ","
            << t.at("verification_success").get<uint64_t>() << ","
            << t.at("verification_failed").get<uint64_t>() << ","
            << t.at("crashed").get<uint64_t>() << ","
            << j.at("success_rate").get<double>() << "\n";
        return out.str();
    }
    out << "campaign over " << j.at("scope").get<std::string>() << "\n";
    out << "  tests:                 " << j.at("tests").get<uint64_t>() << "\n";
    out << "  verification success:  " << t.at("verification_success").get<uint64_t>() << "\n";
    out << "  verification failed:   " << t.at("verification_failed").get<uint64_t>() << "\n";
    out << "  crashed:               " << t.at("crashed").get<uint64_t>() << "\n";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", j.at("success_rate").get<double>());
    out << "  success rate:          " << buf << "\n";
    return out.str();
}

std::string summarize_model_eval(const json& j, const std::string& format) {
    std::ostringstream out;
    char buf[64];
    if (format == "csv") {
        out << "name,measured_sr,predicted_sr,relative_error\n";
        for (const auto& r : j.at("per_row")) {
            std::snprintf(buf, sizeof buf, "%s,%.3f,%.3f,%.3f",
                          r.at("name").get<std::string>().c_str(),
                          r.at("measured_sr").get<double>(),
                          r.at("predicted_sr").get<double>(),
                          r.at("relative_error").get<double>());
            out << buf << "\n";
        }
        return out.str();
    }
    std::snprintf(buf, sizeof buf, "%.4f", j.at("r_squared_in_sample").get<double>());
    out << "in-sample R^2: " << buf << "\n";
    out << "leave-one-out predictions:\n";
    for (const auto& r : j.at("per_row")) {
        std::snprintf(buf, sizeof buf, "  %-8s measured %.3f predicted %.3f err %5.1f%%",
                      r.at("name").get<std::string>().c_str(),
                      r.at("measured_sr").get<double>(), r.at("predicted_sr").get<double>(),
                      100.0 * r.at("relative_error").get<double>());
        out << buf << "\n";
    }
    if (j.contains("importance_order")) {
        out << "importance order:";
        for (const auto& n : j.at("importance_order")) out << " " << n.get<std::string>();
        out << "\n";
    }
    return out.str();
}

std::string summarize_analysis(const json& j, const std::string& format) {
    std::ostringstream out;
    if (format == "csv") {
        out << "index,count\n";
        const auto& counts = j.at("acl_counts");
        for (size_t i = 0; i < counts.size(); ++i) {
            out << i << "," << counts[i].get<uint32_t>() << "\n";
        }
        return out.str();
    }
    out << "manifestation: " << j.at("manifestation").get<std::string>() << "\n";
    out << "drop points: " << j.at("drop_points").size() << "\n";
    out << "pattern instances: " << j.at("patterns").size() << "\n";
    for (const auto& p : j.at("patterns")) {
        out << "  " << p.at("kind").get<std::string>() << " @ lines [";
        bool first = true;
        for (const auto& l : p.at("src_lines")) {
            if (!first) out << ",";
            out << l.get<uint32_t>();
            first = false;
        }
        out << "] " << p.at("note").get<std::string>() << "\n";
    }
    return out.str();
}

} // namespace

std::string summarize_report(const json& j, const std::string& format) {
    if (!j.contains("schema") || !j.at("schema").is_string()) {
        throw std::runtime_error("report has no schema field");
    }
    std::string schema = j.at("schema").get<std::string>();
    if (schema == "fliptrace-campaign") return summarize_campaign(j, format);
    if (schema == "fliptrace-model-eval") return summarize_model_eval(j, format);
    if (schema == "fliptrace-model") return j.dump(2) + "\n";
    if (schema == "fliptrace-analysis") return summarize_analysis(j, format);
    throw std::runtime_error("unknown report schema '" + schema + "'");
}

void write_file_atomic(const std::string& path, const std::string& contents) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp);
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out) throw std::runtime_error("write failed: " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        throw std::runtime_error("cannot rename " + tmp + " to " + path);
    }
}

} // namespace fliptrace
