// Copyright 2026 The qrev Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// qrev command-line driver. Exit codes: 0 success, 2 configuration error,
// 3 recovery failure, 4 training divergence, 1 anything else.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "qrev/config.hpp"
#include "qrev/recovery.hpp"
#include "qrev/report.hpp"

namespace fs = std::filesystem;
using namespace qrev;
using config::json;

namespace {

std::string read_file(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot read '" + path + "'");
    }
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void write_file(const fs::path &path, const std::string &text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot write '" + path.string() + "'");
    }
    out << text;
}

/// Drops leading '#' provenance lines that artifact writers prepend.
std::string strip_provenance(const std::string &text) {
    std::size_t pos = 0;
    while (pos < text.size() && text[pos] == '#') {
        std::size_t nl = text.find('\n', pos);
        pos = nl == std::string::npos ? text.size() : nl + 1;
    }
    return text.substr(pos);
}

std::string template_slug(const RotationTemplate &t) {
    std::string s = join_kinds(t);
    std::replace(s.begin(), s.end(), ',', '-');
    return s;
}

/// Resolved configuration plus the output layout of one invocation.
struct Run {
    config::RunConfig rc;
    std::string hash;
    fs::path out;
    fs::path artifacts;

    std::string provenance() const {
        return "# qrev config_hash=" + hash + " seed=" + std::to_string(rc.seed) + "\n";
    }
    void artifact(const std::string &name, const std::string &body) const {
        write_file(artifacts / name, provenance() + body);
    }
};

struct CommonOptions {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string out;
};

Run open_run(const CommonOptions &o) {
    json doc = json::object();
    if (!o.config_path.empty()) {
        doc = json::parse(read_file(o.config_path), nullptr, false);
        if (doc.is_discarded()) {
            throw ConfigError("'" + o.config_path + "' is not valid JSON");
        }
    }
    std::vector<std::string> overrides = o.overrides;
    if (!o.out.empty()) {
        overrides.push_back("out=" + json(o.out).dump());
    }
    Run run;
    run.rc = config::resolve(doc, overrides);
    run.hash = config::hash_hex(config::config_hash(run.rc.resolved));
    run.out = run.rc.out;
    run.artifacts = run.out / "artifacts";
    fs::create_directories(run.artifacts);
    write_file(run.out / "config.resolved", run.rc.resolved.dump(2) + "\n");
    return run;
}

void add_common(CLI::App *cmd, CommonOptions &o) {
    cmd->add_option("-c,--config", o.config_path, "JSON configuration file");
    cmd->add_option("--set", o.overrides, "Override a field: dotted.path=value (repeatable)");
    cmd->add_option("-o,--out", o.out, "Output directory (overrides 'out')");
}

RotationTemplate template_or_default(const std::string &text, const Run &run) {
    if (text.empty()) {
        return run.rc.eval.spec.rotations;
    }
    RotationTemplate t;
    try {
        t = split_kinds(text);
        validate_template(t);
    } catch (const Error &e) {
        throw ConfigError(std::string("--template: ") + e.what());
    }
    return t;
}

std::string input_or_artifact(const std::string &given, const Run &run, const std::string &name) {
    return given.empty() ? (run.artifacts / name).string() : given;
}

Lut lut_for(const std::string &path, const Run &run) {
    if (!path.empty()) {
        return parse_lut(strip_provenance(read_file(path)));
    }
    return build_eval_lut(run.rc.eval);
}

std::string params_text(const ParamVector &p) {
    std::ostringstream out;
    for (std::size_t i = 0; i < p.size(); ++i) {
        out << i << " " << format_double(p[i]) << "\n";
    }
    return out.str();
}

std::string model_text(const RecoveryModel &m) {
    std::ostringstream out;
    out << "template " << join_kinds(m.templ) << "\n" << nn::save(m.net);
    return out.str();
}

RecoveryModel parse_model(const std::string &text) {
    std::string body = strip_provenance(text);
    std::size_t nl = body.find('\n');
    if (body.rfind("template ", 0) != 0 || nl == std::string::npos) {
        throw FormatError("model file: missing template line");
    }
    RecoveryModel m;
    m.templ = split_kinds(body.substr(9, nl - 9));
    m.net = nn::load(body.substr(nl + 1));
    return m;
}

// ---------------------------------------------------------------------------
// Subcommands.
// ---------------------------------------------------------------------------

int cmd_train_qnn(const CommonOptions &o) {
    Run run = open_run(o);
    const auto &e = run.rc.eval;
    Dataset data = config::load_data(run.rc, e.spec.n_qubits);
    Split split = split_dataset(data, e.eval_fraction, run.rc.seed);
    TrainedQnn q = train_qnn(e.spec, split.train, e.qnn_epochs, e.qnn_lr, run.rc.seed, run.rc.workers);
    run.artifact("qnn.circuit", serialize(bind(q.ansatz, q.params)));
    run.artifact("qnn.ansatz", serialize(q.ansatz));
    run.artifact("qnn.params", params_text(q.params));
    std::ostringstream log;
    log << "epoch,loss,accuracy\n";
    for (std::size_t i = 0; i < q.log.size(); ++i) {
        log << i + 1 << "," << report::num(q.log[i].loss) << "," << report::num(q.log[i].accuracy) << "\n";
    }
    run.artifact("qnn_log.csv", log.str());
    std::cout << "trained " << e.spec.param_count() << " parameters; eval accuracy "
              << accuracy(q, split.eval, run.rc.workers) << "\n";
    return 0;
}

int cmd_transpile(const CommonOptions &o, const std::string &circuit_path) {
    Run run = open_run(o);
    Circuit c = parse_circuit(read_file(input_or_artifact(circuit_path, run, "qnn.circuit")));
    TranspileResult r = transpile(c, run.rc.eval.transpile);
    run.artifact("transpiled.circuit", serialize(r.circuit));
    std::cout << "transpiled " << c.size() << " gates into " << r.circuit.size() << "\n";
    return 0;
}

int cmd_build_lut(const CommonOptions &o) {
    Run run = open_run(o);
    Lut lut = build_eval_lut(run.rc.eval);
    run.artifact("lut.txt", serialize(lut));
    std::cout << "LUT with " << lut.entries.size() << " signatures from " << lut.templates.size() << " templates\n";
    return 0;
}

int cmd_recover_structure(const CommonOptions &o, const std::string &circuit_path, const std::string &lut_path) {
    Run run = open_run(o);
    Circuit victim = parse_circuit(read_file(input_or_artifact(circuit_path, run, "transpiled.circuit")));
    RecoveredStructure rs = recover_structure(victim, lut_for(lut_path, run));
    run.artifact("structure.txt", serialize(rs));
    run.artifact("recovered.ansatz", serialize(rs.ansatz));
    std::cout << "recovered " << rs.segments.size() << " segments, " << rs.ansatz.param_count() << " parameters\n";
    return 0;
}

int cmd_gen_dataset(const CommonOptions &o, const std::string &templ_text) {
    Run run = open_run(o);
    RotationTemplate t = template_or_default(templ_text, run);
    ParamDataset ds = gen_dataset(t, run.rc.eval.step, run.rc.workers);
    run.artifact("dataset_" + template_slug(t) + ".txt", save_dataset(ds));
    std::cout << ds.x.rows() << " samples for " << join_kinds(t) << "; " << ds.duplicate_x
              << " rows share an input with a different target\n";
    return 0;
}

int cmd_train_ae(const CommonOptions &o, const std::string &templ_text, const std::string &dataset_path) {
    Run run = open_run(o);
    RotationTemplate t = template_or_default(templ_text, run);
    Stopwatch watch;
    ParamDataset ds = dataset_path.empty() ? gen_dataset(t, run.rc.eval.step, run.rc.workers)
                                           : load_dataset(strip_provenance(read_file(dataset_path)));
    if (ds.templ != t && !templ_text.empty()) {
        throw ConfigError("--template does not match the dataset's template " + join_kinds(ds.templ));
    }
    double dataset_seconds = watch.seconds();
    RecoveryModel m = train_recovery_model(ds, run.rc.eval.ae);
    m.dataset_seconds = dataset_seconds;
    run.artifact("ae_" + template_slug(ds.templ) + ".txt", model_text(m));
    std::ostringstream trace;
    trace << "epoch,train_loss,val_loss,val_mae\n";
    for (std::size_t i = 0; i < m.trace.val_mae.size(); ++i) {
        trace << i + 1 << "," << report::num(m.trace.train_loss[i]) << "," << report::num(m.trace.val_loss[i]) << ","
              << report::num(m.trace.val_mae[i]) << "\n";
    }
    run.artifact("ae_" + template_slug(ds.templ) + "_trace.csv", trace.str());
    write_file(run.out / "timings.json",
               json{{"dataset_s", m.dataset_seconds}, {"training_s", m.training_seconds}}.dump(2) + "\n");
    std::cout << "held-out mean wrapped error " << m.heldout_error << " rad\n";
    return 0;
}

int cmd_recover_params(const CommonOptions &o, const std::string &method_text, const std::string &circuit_path,
                       const std::string &lut_path, const std::string &models_dir) {
    Run run = open_run(o);
    Method method = method_text.empty() ? run.rc.methods.front() : method_from_name(method_text);
    Circuit victim = parse_circuit(read_file(input_or_artifact(circuit_path, run, "transpiled.circuit")));
    RecoveredStructure rs = recover_structure(victim, lut_for(lut_path, run));
    ParamVector p;
    json timings;
    Stopwatch watch;
    if (method == Method::autoencoder) {
        ModelSet models;
        fs::path dir = models_dir.empty() ? run.artifacts : fs::path(models_dir);
        for (const auto &s : rs.segments) {
            if (models.count(s.templ)) {
                continue;
            }
            fs::path file = dir / ("ae_" + template_slug(s.templ) + ".txt");
            if (fs::exists(file)) {
                models.emplace(s.templ, parse_model(read_file(file.string())));
            }
        }
        auto [ds, tr] = ensure_models(rs, models, run.rc.eval.step, run.rc.eval.ae, run.rc.workers);
        watch = Stopwatch();
        p = recover_params_ae(rs, models);
        timings = {{"dataset_s", ds}, {"training_s", tr}, {"recovery_s", watch.seconds()}};
    } else {
        BruteForceOptions bo;
        bo.step = run.rc.eval.step;
        bo.scope = run.rc.eval.bf_scope;
        bo.transpile = run.rc.eval.transpile;
        bo.workers = run.rc.workers;
        BruteForceResult r = recover_params_bf(rs, victim, bo);
        p = r.params;
        timings = {{"recovery_s", watch.seconds()}, {"candidates", r.candidates}};
    }
    run.artifact("params.txt", params_text(p));
    run.artifact("recovered.circuit", serialize(bind(rs.ansatz, p)));
    write_file(run.out / "timings.json", timings.dump(2) + "\n");
    std::cout << "recovered " << p.size() << " parameters with " << method_name(method) << "\n";
    return 0;
}

int cmd_evaluate(const CommonOptions &o) {
    Run run = open_run(o);
    ModelSet models;
    std::string csv = std::string(report::kRecoveryHeader) + "\n";
    json rows = json::array(), timings = json::array();
    for (const AnsatzSpec &spec : run.rc.shapes) {
        EvalConfig e = run.rc.eval;
        e.spec = spec;
        Dataset data = config::load_data(run.rc, spec.n_qubits);
        Lut lut = build_eval_lut(e);
        for (Method m : run.rc.methods) {
            RecoveryReport r = evaluate(e, data, m, &models, &lut);
            csv += report::csv_row(r, run.hash, run.rc.seed) + "\n";
            rows.push_back(report::to_json(r));
            json t = report::times_json(r.times);
            t["classifier"] = r.classifier();
            t["method"] = method_name(m);
            timings.push_back(t);
            std::cout << r.classifier() << " " << method_name(m) << ": param error " << r.param_mean_error
                      << ", acc " << r.accuracy_original << " -> " << r.accuracy_recovered << " -> "
                      << r.acc_after_retraining << "\n";
        }
    }
    for (const auto &[templ, m] : models) {
        run.artifact("ae_" + template_slug(templ) + ".txt", model_text(m));
    }
    write_file(run.out / "report.csv", csv);
    json doc = {{"config_hash", run.hash}, {"seed", run.rc.seed}, {"config", run.rc.resolved}, {"rows", rows}};
    write_file(run.out / "report.json", doc.dump(2) + "\n");
    write_file(run.out / "timings.json", json{{"config_hash", run.hash}, {"rows", timings}}.dump(2) + "\n");
    return 0;
}

int cmd_bench(const CommonOptions &o) {
    Run run = open_run(o);
    Dataset data = config::load_data(run.rc, run.rc.eval.spec.n_qubits);
    ModelSet models;
    auto rows = bench_countermeasures(run.rc.eval, data, run.rc.countermeasures, run.rc.methods, &models);
    std::string csv = std::string(report::kCountermeasureHeader) + "\n";
    std::string tcsv = "dummy_qubits,extra_layers,method,structure_s,dataset_s,ae_training_s,recovery_s,total_s\n";
    json out = json::array(), timings = json::array();
    for (const auto &r : rows) {
        csv += report::csv_row(r, run.hash, run.rc.seed) + "\n";
        out.push_back(report::to_json(r));
        json t = report::times_json(r.times);
        t["dummy_qubits"] = r.cm.dummy_qubits;
        t["extra_layers"] = r.cm.extra_layers;
        t["method"] = method_name(r.method);
        timings.push_back(t);
        tcsv += std::to_string(r.cm.dummy_qubits) + "," + std::to_string(r.cm.extra_layers) + "," +
                std::string(method_name(r.method)) + "," + report::num(r.times.structure) + "," +
                report::num(r.times.dataset) + "," + report::num(r.times.ae_training) + "," +
                report::num(r.times.recovery) + "," + report::num(r.times.structure + r.times.parameter_recovery()) +
                "\n";
        std::cout << "d=" << r.cm.dummy_qubits << " e=" << r.cm.extra_layers << " " << method_name(r.method) << ": "
                  << r.times.structure + r.times.parameter_recovery() << " s\n";
    }
    write_file(run.out / "report.csv", csv);
    json doc = {{"config_hash", run.hash}, {"seed", run.rc.seed}, {"config", run.rc.resolved}, {"rows", out}};
    write_file(run.out / "report.json", doc.dump(2) + "\n");
    write_file(run.out / "timings.json", json{{"config_hash", run.hash}, {"rows", timings}}.dump(2) + "\n");
    write_file(run.out / "timings.csv", tcsv);
    return 0;
}

int cmd_report(const std::vector<std::string> &inputs, const std::string &out) {
    std::vector<report::MergeInput> parts;
    for (const auto &dir : inputs) {
        json doc = json::parse(read_file((fs::path(dir) / "report.json").string()), nullptr, false);
        if (doc.is_discarded() || !doc.contains("config")) {
            throw FormatError(dir + "/report.json is not a qrev report");
        }
        parts.push_back({dir, read_file((fs::path(dir) / "report.csv").string()), doc["config"]});
    }
    std::string merged = report::merge(parts);
    fs::create_directories(out);
    write_file(fs::path(out) / "report.csv", merged);
    std::cout << "merged " << parts.size() << " reports\n";
    return 0;
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"qrev: recover structure and parameters of transpiled variational classifiers"};
    app.require_subcommand(1);
    CommonOptions common;
    std::string circuit, lut, templ, dataset, method, models, report_out = "report";
    std::vector<std::string> inputs;

    auto *train_qnn_cmd = app.add_subcommand("train-qnn", "Train the victim classifier");
    auto *transpile_cmd = app.add_subcommand("transpile", "Transpile a bound circuit");
    auto *lut_cmd = app.add_subcommand("build-lut", "Build the signature lookup table");
    auto *structure_cmd = app.add_subcommand("recover-structure", "Recover the rotation structure");
    auto *dataset_cmd = app.add_subcommand("gen-ae-dataset", "Generate an autoencoder dataset");
    auto *train_ae_cmd = app.add_subcommand("train-ae", "Train a parameter-recovery autoencoder");
    auto *params_cmd = app.add_subcommand("recover-params", "Recover parameters of a transpiled circuit");
    auto *eval_cmd = app.add_subcommand("evaluate", "Run the full recovery pipeline and report errors");
    auto *bench_cmd = app.add_subcommand("bench-countermeasures", "Time recovery under countermeasures");
    auto *report_cmd = app.add_subcommand("report", "Merge report.csv files of prior runs");
    for (auto *cmd : {train_qnn_cmd, transpile_cmd, lut_cmd, structure_cmd, dataset_cmd, train_ae_cmd, params_cmd,
                      eval_cmd, bench_cmd}) {
        add_common(cmd, common);
    }
    transpile_cmd->add_option("--circuit", circuit, "Bound circuit (default: artifacts/qnn.circuit)");
    for (auto *cmd : {structure_cmd, params_cmd}) {
        cmd->add_option("--circuit", circuit, "Transpiled circuit (default: artifacts/transpiled.circuit)");
        cmd->add_option("--lut", lut, "LUT file (default: built from the configuration)");
    }
    for (auto *cmd : {dataset_cmd, train_ae_cmd}) {
        cmd->add_option("--template", templ, "Rotation ordering, e.g. rx,ry,rz (default: ansatz.rotations)");
    }
    train_ae_cmd->add_option("--dataset", dataset, "Dataset file (default: generate)");
    params_cmd->add_option("--method", method, "ae or brute (default: first of recovery.methods)")
        ->check(CLI::IsMember({"ae", "brute"}));
    params_cmd->add_option("--models", models, "Directory holding ae_<template>.txt (default: artifacts)");
    report_cmd->add_option("inputs", inputs, "Run directories to merge")->required();
    report_cmd->add_option("-o,--out", report_out, "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*train_qnn_cmd) return cmd_train_qnn(common);
        if (*transpile_cmd) return cmd_transpile(common, circuit);
        if (*lut_cmd) return cmd_build_lut(common);
        if (*structure_cmd) return cmd_recover_structure(common, circuit, lut);
        if (*dataset_cmd) return cmd_gen_dataset(common, templ);
        if (*train_ae_cmd) return cmd_train_ae(common, templ, dataset);
        if (*params_cmd) return cmd_recover_params(common, method, circuit, lut, models);
        if (*eval_cmd) return cmd_evaluate(common);
        if (*bench_cmd) return cmd_bench(common);
        if (*report_cmd) return cmd_report(inputs, report_out);
    } catch (const ConfigError &e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const ParseError &e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return 2;
    } catch (const FormatError &e) {
        std::cerr << "format error: " << e.what() << "\n";
        return 2;
    } catch (const UnmatchedSegment &e) {
        std::cerr << "recovery failed: " << e.what() << "\n";
        return 3;
    } catch (const AmbiguousSegment &e) {
        std::cerr << "recovery failed: " << e.what() << "\n";
        return 3;
    } catch (const StructureMismatch &e) {
        std::cerr << "recovery failed: " << e.what() << "\n";
        return 3;
    } catch (const TrainingDiverged &e) {
        std::cerr << "training diverged: " << e.what() << "\n";
        return 4;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
