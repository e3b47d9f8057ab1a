#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "fliptrace/analysis.hpp"
#include "fliptrace/report.hpp"

using namespace fliptrace;
using nlohmann::json;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitGoldenFailure = 3;
constexpr int kExitDegraded = 4;

struct GlobalOpts {
    uint64_t seed = 1;
    int jobs = 1;
    bool strict = false;
    std::string format = "json";
    std::string config_path;
    AnalysisConfig analysis;
};

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void load_config(GlobalOpts& g) {
    if (g.config_path.empty()) return;
    std::istringstream in(slurp(g.config_path));
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        size_t eq = line.find('=');
        if (eq == std::string::npos) {
            if (line.find_first_not_of(" \t\r") != std::string::npos) {
                throw UsageError(g.config_path + ":" + std::to_string(line_no) +
                                 ": expected key = value");
            }
            continue;
        }
        auto trim = [](std::string s) {
            size_t a = s.find_first_not_of(" \t\r");
            size_t b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key == "budget") {
            g.analysis.budget = std::stoull(value);
        } else if (key == "verify_tol") {
            g.analysis.verify_tol = std::stod(value);
        } else if (key == "repeated_add_min_updates") {
            g.analysis.detectors.repeated_add_min_updates =
                static_cast<uint32_t>(std::stoul(value));
            g.analysis.structural.repeated_add_min_updates =
                g.analysis.detectors.repeated_add_min_updates;
        } else if (key == "chunk_region") {
            g.analysis.structural.chunk_region = std::stoi(value);
        } else {
            throw UsageError(g.config_path + ": unknown config key '" + key + "'");
        }
    }
}

Program load_program(const std::string& path) {
    return parse_program(slurp(path));
}

Value value_from_json(const json& v) {
    if (v.is_number_integer() || v.is_number_unsigned()) {
        return Value::of_i64(v.get<int64_t>());
    }
    if (v.is_number_float()) return Value::of_f64(v.get<double>());
    if (v.is_object()) {
        if (v.contains("i64")) return Value::of_i64(v.at("i64").get<int64_t>());
        if (v.contains("f64")) return Value::of_f64(v.at("f64").get<double>());
        if (v.contains("bits")) {
            uint64_t bits = std::stoull(v.at("bits").get<std::string>(), nullptr, 0);
            ValueTag tag = v.value("tag", std::string("f64")) == "i64" ? ValueTag::int64
                                                                       : ValueTag::float64;
            return Value::from_bits(tag, bits);
        }
    }
    throw UsageError("bad input value: " + v.dump());
}

InputMap load_input(const std::string& path) {
    InputMap input;
    if (path.empty()) return input;
    json j = json::parse(slurp(path));
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& name = it.key();
        if (name.size() > 2 && name.rfind("M[", 0) == 0 && name.back() == ']') {
            uint64_t cell = std::stoull(name.substr(2, name.size() - 3));
            input[Location::make_mem(cell)] = value_from_json(it.value());
        } else {
            throw UsageError("input locations must be memory cells (M[k]): " + name);
        }
    }
    return input;
}

FaultSpec fault_from_flags(uint64_t index, const std::string& target, uint32_t bit) {
    FaultSpec f;
    f.instr_index = index;
    f.bit = bit;
    if (target == "result") {
        f.target_result = true;
    } else if (target.rfind("operand:", 0) == 0) {
        f.target_result = false;
        f.operand_slot = static_cast<uint32_t>(std::stoul(target.substr(8)));
    } else {
        throw UsageError("bad --target (want result or operand:K): " + target);
    }
    return f;
}

TargetScope scope_from_text(const std::string& text) {
    TargetScope scope;
    std::vector<std::string> parts;
    std::string cur;
    for (char c : text) {
        if (c == ':') {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    parts.push_back(cur);
    auto parse_locs = [](const std::string& s) {
        if (s == "inputs") return ScopeLocs::inputs;
        if (s == "internals") return ScopeLocs::internals;
        if (s == "both") return ScopeLocs::both;
        throw UsageError("bad scope location class: " + s);
    };
    if (parts[0] == "program") {
        scope.kind = ScopeKind::whole_program;
        if (parts.size() > 1) scope.locs = parse_locs(parts[1]);
        if (parts.size() > 2) throw UsageError("bad scope: " + text);
    } else if (parts[0] == "region") {
        scope.kind = ScopeKind::region_instance;
        if (parts.size() < 2) throw UsageError("scope region needs an id: " + text);
        scope.region_id = std::stoi(parts[1]);
        size_t next = 2;
        if (parts.size() > next && !parts[next].empty() &&
            (std::isdigit(static_cast<unsigned char>(parts[next][0])))) {
            scope.ordinal = static_cast<uint32_t>(std::stoul(parts[next]));
            ++next;
        }
        if (parts.size() > next) scope.locs = parse_locs(parts[next]);
        if (parts.size() > next + 1) throw UsageError("bad scope: " + text);
    } else {
        throw UsageError("bad scope (want program[:...] or region:ID[:ORD][:...]): " + text);
    }
    return scope;
}

int cmd_trace(const GlobalOpts& g, const std::string& program_path,
              const std::string& input_path, const std::string& out_path,
              const std::string& jsonl_path) {
    Program program = load_program(program_path);
    InputMap input = load_input(input_path);
    ExecOptions opts;
    opts.budget = g.analysis.budget;
    RunOutcome out = execute(program, input, std::nullopt, opts);
    if (out.status != RunStatus::completed) {
        std::cerr << "golden run "
                  << (out.status == RunStatus::hung ? "hung" : "trapped: " + out.trap_reason)
                  << "\n";
        return kExitGoldenFailure;
    }
    std::ostringstream buf;
    write_trace(out.trace, buf);
    write_file_atomic(out_path, buf.str());
    if (!jsonl_path.empty()) {
        std::ostringstream jb;
        write_trace_jsonl(out.trace, jb);
        write_file_atomic(jsonl_path, jb.str());
    }
    std::cerr << "traced " << out.trace.size() << " instructions\n";
    return 0;
}

int cmd_inject(const GlobalOpts& g, const std::string& program_path,
               const std::string& input_path, const FaultSpec& fault,
               const std::string& out_path, const std::string& trace_out) {
    Program program = load_program(program_path);
    InputMap input = load_input(input_path);
    RunOutcome golden = golden_run(program, input, g.analysis.budget);
    Manifestation m =
        classify_injection(program, input, golden, fault, g.analysis.budget);

    ExecOptions opts;
    opts.budget = g.analysis.budget;
    opts.expected_outputs = &golden.outputs;
    RunOutcome faulty = execute(program, input, fault, opts);

    json j;
    j["schema"] = "fliptrace-injection";
    j["fault"] = fault_to_json(fault);
    j["manifestation"] = manifestation_name(m);
    j["status"] = faulty.status == RunStatus::completed ? "completed"
                  : faulty.status == RunStatus::hung    ? "hung"
                                                        : "trapped";
    if (faulty.status == RunStatus::trapped) j["trap_reason"] = faulty.trap_reason;
    j["instructions"] = faulty.instruction_count;
    if (out_path.empty()) {
        std::cout << j.dump(2) << "\n";
    } else {
        write_file_atomic(out_path, j.dump(2) + "\n");
    }
    if (!trace_out.empty()) {
        std::ostringstream buf;
        write_trace(faulty.trace, buf);
        write_file_atomic(trace_out, buf.str());
    }
    return 0;
}

int cmd_analyze(const GlobalOpts& g, const std::string& program_path,
                const std::string& input_path, const FaultSpec& fault,
                const std::string& out_path, const std::string& acl_csv,
                const std::string& dot_path) {
    Program program = load_program(program_path);
    InputMap input = load_input(input_path);
    AnalysisReport report;
    try {
        report = run_analysis(program, input, fault, g.analysis);
    } catch (const std::runtime_error& e) {
        std::cerr << "analyze: " << e.what() << "\n";
        return kExitGoldenFailure;
    }
    json j = analysis_to_json(report);
    write_file_atomic(out_path, j.dump(2) + "\n");
    if (!acl_csv.empty()) {
        std::ostringstream buf;
        acl_to_csv(report.acl, report.faulty_trace, buf);
        write_file_atomic(acl_csv, buf.str());
    }
    if (!dot_path.empty()) {
        // One graph per real region instance of the faulty run.
        std::ostringstream buf;
        for (const auto& rr : report.regions) {
            if (rr.instance.synthetic) continue;
            Dddg graph = build_dddg(report.faulty_trace, rr.instance);
            buf << "// region " << rr.instance.region_id << " instance "
                << rr.instance.ordinal << "\n";
            dddg_to_dot(graph, report.faulty_trace, buf);
        }
        write_file_atomic(dot_path, buf.str());
    }
    if (g.strict && report.value_compare_degraded) {
        std::cerr << "analysis degraded: control flow diverged\n";
        return kExitDegraded;
    }
    return 0;
}

int cmd_campaign(const GlobalOpts& g, const std::string& program_path,
                 const std::string& input_path, const std::string& scope_text,
                 double confidence, double margin, double p, std::optional<double> z,
                 bool exhaustive, const std::string& out_path) {
    Program program = load_program(program_path);
    InputMap input = load_input(input_path);
    TargetScope scope = scope_from_text(scope_text);
    CampaignOptions opts;
    opts.budget = g.analysis.budget;
    opts.jobs = g.jobs;

    CampaignResult result;
    SamplePlan plan;
    try {
        if (exhaustive) {
            result = run_exhaustive(program, input, scope, opts);
            plan.infinite_population = false;
            plan.population_size = result.population;
            plan.n = result.tests;
        } else {
            RunOutcome golden = golden_run(program, input, opts.budget);
            uint64_t population =
                enumerate_target_slots(golden.trace, scope).size() * 64;
            plan = sample_size(population, confidence, margin, p, z);
            result = run_campaign(program, input, plan, scope, g.seed, opts);
        }
    } catch (const EmptyPopulation& e) {
        std::cerr << "campaign: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::runtime_error& e) {
        std::cerr << "campaign: " << e.what() << "\n";
        return kExitGoldenFailure;
    }
    json j = campaign_to_json(result, plan, scope_text);
    if (out_path.empty()) {
        std::cout << j.dump(2) << "\n";
    } else {
        write_file_atomic(out_path, j.dump(2) + "\n");
    }
    std::cerr << "success rate " << result.success_rate << " over " << result.tests
              << " tests\n";
    return 0;
}

int cmd_features(const GlobalOpts& g, const std::string& program_path,
                 const std::string& input_path, const std::string& name,
                 const std::string& out_path) {
    Program program = load_program(program_path);
    InputMap input = load_input(input_path);
    RunOutcome golden;
    try {
        golden = golden_run(program, input, g.analysis.budget);
    } catch (const std::runtime_error& e) {
        std::cerr << "features: " << e.what() << "\n";
        return kExitGoldenFailure;
    }
    FeatureVector fv = structural_features(golden.trace, g.analysis.structural);
    std::string row_name = name.empty() ? program_path : name;
    std::string csv = feature_csv(row_name, fv, true);
    if (out_path.empty()) {
        std::cout << csv;
    } else {
        write_file_atomic(out_path, csv);
    }
    return 0;
}

int cmd_model(const GlobalOpts&, const std::string& action, const std::string& data_path,
              double ridge, const std::string& out_path) {
    std::ifstream in(data_path);
    if (!in) throw UsageError("cannot open dataset: " + data_path);
    auto rows = load_rows_csv(in);
    json j;
    if (action == "fit") {
        RegressionModel model = fit(rows, ridge);
        j = model_fit_to_json(model, r_squared(model, rows));
    } else if (action == "loo" || action == "importance") {
        EvalReport report = loo_evaluate(rows, ridge);
        j = model_eval_to_json(report);
    } else {
        throw UsageError("model action must be fit, loo, or importance");
    }
    if (out_path.empty()) {
        std::cout << j.dump(2) << "\n";
    } else {
        write_file_atomic(out_path, j.dump(2) + "\n");
    }
    return 0;
}

int cmd_report(const GlobalOpts& g, const std::string& in_path) {
    json j = json::parse(slurp(in_path));
    std::cout << summarize_report(j, g.format == "csv" ? "csv" : "text");
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"trace-based error-propagation analysis toolkit"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may follow the subcommand

    GlobalOpts g;
    app.add_option("--seed", g.seed, "RNG seed");
    app.add_option("--jobs", g.jobs, "worker parallelism");
    app.add_flag("--strict", g.strict, "fail on degraded analysis");
    app.add_option("--format", g.format, "output format: json|csv")
        ->check(CLI::IsMember({"json", "csv", "text"}));
    app.add_option("--config", g.config_path, "key=value config file");
    app.add_option("--budget", g.analysis.budget, "instruction budget");

    std::string program_path, input_path, out_path, jsonl_path, acl_csv, dot_path;
    std::string trace_out, scope_text = "program:both", data_path, name, model_action;
    uint64_t fault_index = 0;
    std::string fault_target = "result";
    uint32_t fault_bit = 0;
    double confidence = 0.95, margin = 0.03, p = 0.5, ridge = 0.0;
    std::optional<double> custom_z;
    bool exhaustive = false;

    auto* trace_cmd = app.add_subcommand("trace", "run a program and write its trace");
    trace_cmd->add_option("--program", program_path)->required();
    trace_cmd->add_option("--input", input_path);
    trace_cmd->add_option("--out", out_path)->required();
    trace_cmd->add_option("--jsonl", jsonl_path);

    auto* inject_cmd = app.add_subcommand("inject", "run one fault injection");
    inject_cmd->add_option("--program", program_path)->required();
    inject_cmd->add_option("--input", input_path);
    inject_cmd->add_option("--index", fault_index)->required();
    inject_cmd->add_option("--target", fault_target);
    inject_cmd->add_option("--bit", fault_bit)->required();
    inject_cmd->add_option("--out", out_path);
    inject_cmd->add_option("--trace-out", trace_out);

    auto* analyze_cmd = app.add_subcommand("analyze", "differential analysis of one fault");
    analyze_cmd->add_option("--program", program_path)->required();
    analyze_cmd->add_option("--input", input_path);
    analyze_cmd->add_option("--index", fault_index)->required();
    analyze_cmd->add_option("--target", fault_target);
    analyze_cmd->add_option("--bit", fault_bit)->required();
    analyze_cmd->add_option("--out", out_path)->required();
    analyze_cmd->add_option("--acl-csv", acl_csv);
    analyze_cmd->add_option("--dot", dot_path);

    auto* campaign_cmd = app.add_subcommand("campaign", "statistical fault-injection campaign");
    campaign_cmd->add_option("--program", program_path)->required();
    campaign_cmd->add_option("--input", input_path);
    campaign_cmd->add_option("--scope", scope_text);
    campaign_cmd->add_option("--confidence", confidence);
    campaign_cmd->add_option("--margin", margin);
    campaign_cmd->add_option("--p", p);
    campaign_cmd->add_option("--z", [&custom_z](const std::vector<std::string>& vals) {
        custom_z = std::stod(vals[0]);
        return true;
    }, "custom z value");
    campaign_cmd->add_flag("--exhaustive", exhaustive);
    campaign_cmd->add_option("--out", out_path);

    auto* features_cmd = app.add_subcommand("features", "structural pattern rates");
    features_cmd->add_option("--program", program_path)->required();
    features_cmd->add_option("--input", input_path);
    features_cmd->add_option("--name", name);
    features_cmd->add_option("--out", out_path);
    features_cmd->add_option("--chunk-region", [&g](const std::vector<std::string>& vals) {
        g.analysis.structural.chunk_region = std::stoi(vals[0]);
        return true;
    }, "region id used for dead-location chunking");

    auto* model_cmd = app.add_subcommand("model", "fit and evaluate the prediction model");
    model_cmd->add_option("action", model_action, "fit|loo|importance")->required();
    model_cmd->add_option("--data", data_path)->required();
    model_cmd->add_option("--ridge", ridge);
    model_cmd->add_option("--out", out_path);

    auto* report_cmd = app.add_subcommand("report", "summarize a machine report");
    report_cmd->add_option("--in", data_path)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        load_config(g);
        g.analysis.jobs = g.jobs;
        FaultSpec fault;
        if (*inject_cmd || *analyze_cmd) {
            fault = fault_from_flags(fault_index, fault_target, fault_bit);
        }
        if (*trace_cmd) return cmd_trace(g, program_path, input_path, out_path, jsonl_path);
        if (*inject_cmd) {
            return cmd_inject(g, program_path, input_path, fault, out_path, trace_out);
        }
        if (*analyze_cmd) {
            return cmd_analyze(g, program_path, input_path, fault, out_path, acl_csv, dot_path);
        }
        if (*campaign_cmd) {
            return cmd_campaign(g, program_path, input_path, scope_text, confidence, margin, p,
                                custom_z, exhaustive, out_path);
        }
        if (*features_cmd) return cmd_features(g, program_path, input_path, name, out_path);
        if (*model_cmd) return cmd_model(g, model_action, data_path, ridge, out_path);
        if (*report_cmd) return cmd_report(g, data_path);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const TraceFormatError& e) {
        std::cerr << "trace error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}
