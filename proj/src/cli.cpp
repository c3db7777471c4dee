#include "avqe/cli.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "avqe/errors.hpp"
#include "avqe/monitor.hpp"
#include "json.hpp"

namespace avqe::cli {

namespace {

namespace fs = std::filesystem;

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string hash_hex(std::uint64_t h) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string sanitize_id(const std::string& id) {
    std::string out;
    for (char c : id) {
        out.push_back(std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
    }
    return out;
}

std::string json_escape(const std::string& s) {
    std::string out;
    for (unsigned char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            default:
                if (c < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof(buf), "\\u%04x", c);
                    out += buf;
                } else {
                    out.push_back(static_cast<char>(c));
                }
        }
    }
    return out;
}

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

void ensure_out_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create output directory '" + dir + "': " + ec.message());
}

std::vector<std::string> split_top_level(const std::string& list) {
    std::vector<std::string> parts;
    std::string cur;
    int depth = 0;
    for (char c : list) {
        if (c == '(') ++depth;
        if (c == ')') --depth;
        if (c == ',' && depth == 0) {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    parts.push_back(cur);
    for (auto& s : parts) {
        const auto b = s.find_first_not_of(" \t");
        const auto e = s.find_last_not_of(" \t");
        s = (b == std::string::npos) ? std::string() : s.substr(b, e - b + 1);
    }
    parts.erase(std::remove(parts.begin(), parts.end(), std::string()), parts.end());
    return parts;
}

}  // namespace

std::vector<ModelSpec> parse_model_specs(const std::string& list) {
    std::vector<ModelSpec> specs;
    for (const std::string& token : split_top_level(list)) {
        ModelSpec spec;
        spec.id = token;
        if (token == "mlp") {
            spec.kind = ModelSpec::Kind::narx;
            spec.d_u = 0;
            spec.d_y = 0;
        } else if (token == "ols") {
            spec.kind = ModelSpec::Kind::ols;
        } else if (token == "rf") {
            spec.kind = ModelSpec::Kind::rf;
        } else if (token == "bagging") {
            spec.kind = ModelSpec::Kind::bagging;
        } else if (token == "oracle") {
            spec.kind = ModelSpec::Kind::oracle;
        } else if (token.rfind("narx(", 0) == 0 && token.back() == ')') {
            const std::string inner = token.substr(5, token.size() - 6);
            const auto comma = inner.find(',');
            if (comma == std::string::npos) {
                throw DataError("model spec '" + token + "': expected narx(d_u,d_y)");
            }
            try {
                spec.kind = ModelSpec::Kind::narx;
                spec.d_u = std::stoul(inner.substr(0, comma));
                spec.d_y = std::stoul(inner.substr(comma + 1));
            } catch (const std::exception&) {
                throw DataError("model spec '" + token + "': lags must be non-negative integers");
            }
        } else {
            throw DataError("unknown model spec '" + token +
                            "' (expected narx(d_u,d_y), mlp, ols, rf, bagging)");
        }
        specs.push_back(spec);
    }
    if (specs.empty()) throw DataError("empty --models list");
    return specs;
}

NarxTrainOutcome train_narx_on_records(const FeatureSchema& schema,
                                       const std::vector<QosRecord>& records,
                                       const std::vector<std::size_t>& fit_rows,
                                       const NarxTrainSpec& spec, std::uint64_t seed) {
    schema.validate();
    const Normalizer norm = fit_normalizer(records, fit_rows);
    const auto norm_records = apply_normalizer(norm, records);
    const auto samples = make_lagged(norm_records, spec.d_u, spec.d_y, LoopMode::open);

    std::vector<std::size_t> pool;  // positions into samples
    {
        std::vector<bool> allowed(records.size(), false);
        for (std::size_t r : fit_rows) allowed.at(r) = true;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            if (allowed[samples[i].origin]) pool.push_back(i);
        }
    }
    if (pool.size() < 2) {
        throw DataError("train: only " + std::to_string(pool.size()) +
                        " usable samples after lagging; need at least 2");
    }
    auto [train_pos, val_pos] = split_train_val(pool, derive_seed(seed, "split"));
    std::vector<LaggedSample> train_samples, val_samples;
    for (std::size_t i : train_pos) train_samples.push_back(samples[i]);
    for (std::size_t i : val_pos) val_samples.push_back(samples[i]);

    NarxTopology topo;
    topo.p = schema.names.size();
    topo.d_u = spec.d_u;
    topo.d_y = spec.d_y;
    topo.hidden = spec.hidden == 0 ? topo.p : spec.hidden;

    NarxModel model = init_model(topo, derive_seed(seed, "init"));
    model.schema = schema;
    model.normalizer = norm;
    model.seed = seed;

    auto [trained_model, report] = train(std::move(model), train_samples, val_samples, spec.train);
    NarxTrainOutcome outcome{std::move(trained_model), std::move(report), {}};
    for (std::size_t i : pool) outcome.used_origins.push_back(samples[i].origin);
    return outcome;
}

NarxCvModel::NarxCvModel(FeatureSchema schema, NarxTrainSpec spec, std::uint64_t seed,
                         std::string id)
    : schema_(std::move(schema)), spec_(spec), seed_(seed), id_(std::move(id)) {}

FoldResult NarxCvModel::run_fold(const std::vector<QosRecord>& records, const FoldPlan& plan,
                                 std::size_t fold, LoopMode mode) {
    const auto fit_rows = plan.train_ordinals(fold);
    const auto outcome = train_narx_on_records(
        schema_, records, fit_rows, spec_, derive_seed(seed_, "fold:" + std::to_string(fold)));
    const NarxModel& model = outcome.model;

    std::vector<bool> in_test(records.size(), false);
    for (std::size_t o : plan.test_ordinals(fold)) in_test[o] = true;

    FoldResult result;
    result.train_origins = outcome.used_origins;

    const std::size_t warm = std::max(spec_.d_u, spec_.d_y);
    if (mode == LoopMode::open) {
        const auto norm_records = apply_normalizer(model.normalizer, records);
        const auto samples = make_lagged(norm_records, spec_.d_u, spec_.d_y, LoopMode::open);
        for (const auto& s : samples) {
            if (!in_test[s.origin]) continue;
            const double e = forward_sample(model, s.input);
            result.predictions.push_back(
                clip(model.normalizer.denormalize_target(e), kMosMin, kMosMax));
            result.eval_origins.push_back(s.origin);
        }
    } else {
        const ForwardTrace trace = forward_closed_loop(model, records);
        for (std::size_t i = 0; i < trace.estimates.size(); ++i) {
            const std::size_t o = trace.first_ordinal + i;
            if (o < warm || !in_test[o]) continue;  // same eligibility as open loop
            result.predictions.push_back(trace.estimates[i]);
            result.eval_origins.push_back(o);
        }
    }
    return result;
}

BaselineCvModel::BaselineCvModel(ModelSpec::Kind kind, ForestConfig forest, std::uint64_t seed,
                                 std::string id)
    : kind_(kind), forest_(forest), seed_(seed), id_(std::move(id)) {}

FoldResult BaselineCvModel::run_fold(const std::vector<QosRecord>& records, const FoldPlan& plan,
                                     std::size_t fold, LoopMode) {
    const auto samples = make_lagged(records, 0, 0, LoopMode::open);
    std::vector<bool> in_test(records.size(), false);
    for (std::size_t o : plan.test_ordinals(fold)) in_test[o] = true;

    std::vector<LaggedSample> train_samples, test_samples;
    for (const auto& s : samples) {
        (in_test[s.origin] ? test_samples : train_samples).push_back(s);
    }

    FoldResult result;
    for (const auto& s : train_samples) result.train_origins.push_back(s.origin);
    for (const auto& s : test_samples) result.eval_origins.push_back(s.origin);

    if (kind_ == ModelSpec::Kind::ols) {
        const LinearModel model = fit_ols(train_samples);
        result.predictions = predict(model, test_samples);
    } else {
        ForestConfig cfg = forest_;
        cfg.seed = derive_seed(seed_, "fold:" + std::to_string(fold));
        if (kind_ == ModelSpec::Kind::bagging && cfg.m_try == 0) {
            cfg.m_try = records.front().features.size();
        }
        const ForestModel model = fit_forest(train_samples, cfg);
        result.predictions = predict(model, test_samples);
    }
    return result;
}

FoldResult OracleCvModel::run_fold(const std::vector<QosRecord>& records, const FoldPlan& plan,
                                   std::size_t fold, LoopMode) {
    FoldResult result;
    for (std::size_t o : plan.test_ordinals(fold)) {
        const auto& mos = records[o].mos;
        if (!mos) throw DataError("oracle model: record " + std::to_string(o) + " has no MOS");
        result.predictions.push_back(*mos);
        result.eval_origins.push_back(o);
    }
    return result;
}

std::unique_ptr<CvModel> build_cv_model(const ModelSpec& spec, const FeatureSchema& schema,
                                        const NarxTrainSpec& narx_defaults,
                                        std::uint64_t root_seed) {
    const std::uint64_t model_seed = derive_seed(root_seed, "model:" + spec.id);
    switch (spec.kind) {
        case ModelSpec::Kind::narx: {
            NarxTrainSpec ns = narx_defaults;
            ns.d_u = spec.d_u;
            ns.d_y = spec.d_y;
            return std::make_unique<NarxCvModel>(schema, ns, model_seed, spec.id);
        }
        case ModelSpec::Kind::ols:
            return std::make_unique<BaselineCvModel>(spec.kind, ForestConfig{}, model_seed, spec.id);
        case ModelSpec::Kind::rf: {
            ForestConfig cfg;  // m_try -> ceil(p/3)
            return std::make_unique<BaselineCvModel>(spec.kind, cfg, model_seed, spec.id);
        }
        case ModelSpec::Kind::bagging: {
            ForestConfig cfg;  // m_try resolved to p at fold time
            return std::make_unique<BaselineCvModel>(spec.kind, cfg, model_seed, spec.id);
        }
        case ModelSpec::Kind::oracle:
            return std::make_unique<OracleCvModel>();
    }
    throw DataError("unreachable model kind");
}

FeatureSchema resolve_schema(const SchemaSource& source) {
    if (source.schema_path && source.features_csv) {
        throw DataError("give either --schema or --features, not both");
    }
    FeatureSchema schema;
    if (source.schema_path) {
        schema = load_schema_file(*source.schema_path);
    } else if (source.features_csv) {
        for (const auto& name : split_top_level(*source.features_csv)) schema.names.push_back(name);
        schema.target = source.target;
    } else {
        schema = inrs_default_schema();
        schema.target = source.target;
    }
    schema.validate();
    return schema;
}

void write_schema_file(const FeatureSchema& schema, const std::string& path,
                       const std::string& config_echo) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << "{\n  \"features\": [";
    for (std::size_t i = 0; i < schema.names.size(); ++i) {
        if (i) out << ", ";
        out << "\"" << json_escape(schema.names[i]) << "\"";
    }
    out << "],\n  \"target\": \"" << json_escape(schema.target) << "\",\n";
    out << "  \"config\": \"" << json_escape(config_echo) << "\"\n}\n";
}

FeatureSchema load_schema_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open schema file '" + path + "'");
    FeatureSchema schema;
    try {
        nlohmann::json doc = nlohmann::json::parse(in);
        for (const auto& name : doc.at("features")) schema.names.push_back(name.get<std::string>());
        schema.target = doc.at("target").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError("schema file '" + path + "': " + e.what());
    }
    schema.validate();
    return schema;
}

int cmd_synth(std::size_t n, std::uint64_t seed, double noise_sd, const std::string& out_path) {
    const auto records = synth_narx_series(n, seed, noise_sd);
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + out_path + "'");
    out << "u1,u2,mos\n";
    for (const auto& rec : records) {
        out << fmt17(rec.features[0]) << "," << fmt17(rec.features[1]) << "," << fmt17(*rec.mos)
            << "\n";
    }
    std::cout << "wrote " << records.size() << " records to " << out_path << "\n";
    return 0;
}

int cmd_select_features(const std::string& data_path, const std::string& target, std::size_t top_k,
                        std::uint64_t seed, const std::string& out_dir) {
    const std::string echo = "cmd=select-features data=" + data_path + " target=" + target +
                             " top_k=" + std::to_string(top_k) + " seed=" + std::to_string(seed);
    auto [schema, records] = load_csv_all(data_path, target);
    ForestConfig cfg;
    cfg.seed = derive_seed(seed, "select");
    const ImportanceRanking ranking = rank_features(schema, records, cfg);
    if (top_k == 0 || top_k > schema.names.size()) {
        throw DataError("select_features: top_k=" + std::to_string(top_k) + " outside [1," +
                        std::to_string(schema.names.size()) + "]");
    }
    FeatureSchema selected;
    selected.target = schema.target;
    selected.names.assign(ranking.names.begin(),
                          ranking.names.begin() + static_cast<std::ptrdiff_t>(top_k));

    ensure_out_dir(out_dir);
    write_schema_file(selected, (fs::path(out_dir) / "schema.json").string(), echo);
    write_importance_csv(ranking, (fs::path(out_dir) / "importance.csv").string(), echo);
    std::cout << "selected " << top_k << " of " << schema.names.size() << " columns:\n";
    for (std::size_t i = 0; i < top_k; ++i) {
        std::printf("  %2zu. %-24s %.6f\n", i + 1, ranking.names[i].c_str(), ranking.scores[i]);
    }
    return 0;
}

namespace {

std::string train_echo(const std::string& cmd, const std::string& data_path,
                       const FeatureSchema& schema, const NarxTrainSpec& spec, std::uint64_t seed,
                       const std::optional<std::string>& order_by) {
    std::ostringstream os;
    os << "cmd=" << cmd << " data=" << data_path << " features=" << join(schema.names, ",")
       << " target=" << schema.target << " du=" << spec.d_u << " dy=" << spec.d_y
       << " hidden=" << (spec.hidden == 0 ? schema.names.size() : spec.hidden)
       << " max_epochs=" << spec.train.max_epochs << " patience=" << spec.train.patience
       << " mu0=" << spec.train.mu0 << " seed=" << seed
       << " order_by=" << order_by.value_or("(file)");
    return os.str();
}

}  // namespace

int cmd_train(const std::string& data_path, const SchemaSource& schema_source,
              const NarxTrainSpec& spec, std::uint64_t seed,
              const std::optional<std::string>& order_by, const std::string& out_dir) {
    const FeatureSchema schema = resolve_schema(schema_source);
    const auto records = load_csv(data_path, schema, order_by);
    std::vector<std::size_t> all_rows(records.size());
    std::iota(all_rows.begin(), all_rows.end(), 0);

    const std::string echo = train_echo("train", data_path, schema, spec, seed, order_by);
    auto outcome = train_narx_on_records(schema, records, all_rows, spec, seed);

    const ForwardTrace trace = forward_open_loop(outcome.model, records);
    std::vector<double> targets;
    targets.reserve(trace.estimates.size());
    for (std::size_t i = 0; i < trace.estimates.size(); ++i) {
        targets.push_back(*records[trace.first_ordinal + i].mos);
    }
    outcome.model.meta.final_train_mse = mse(trace.estimates, targets);
    outcome.model.meta.config = echo;

    ensure_out_dir(out_dir);
    save_model(outcome.model, (fs::path(out_dir) / "model.json").string());
    write_train_report_csv(outcome.report, (fs::path(out_dir) / "train_report.csv").string(), echo);

    std::printf("trained %zu epochs (best epoch %zu, stop: %s)\n", outcome.report.stopping_epoch,
                outcome.report.best_epoch, outcome.report.stop_reason.c_str());
    std::printf("best validation mse (normalized): %.6g\n", outcome.report.best_val_mse);
    std::printf("open-loop mse over %s: %.6g\n", data_path.c_str(),
                outcome.model.meta.final_train_mse);
    return 0;
}

int cmd_predict(const std::string& model_path, const std::string& data_path, LoopMode mode,
                const std::optional<std::string>& order_by, const std::string& out_path) {
    const NarxModel model = load_model(model_path);
    if (model.schema.names.empty()) {
        throw DataError("model file carries no schema; cannot map CSV columns");
    }
    const auto records = load_csv(data_path, model.schema, order_by);
    const ForwardTrace trace = mode == LoopMode::open ? forward_open_loop(model, records)
                                                      : forward_closed_loop(model, records);
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + out_path + "'");
    out << "# cmd=predict model=" << model_path << " data=" << data_path
        << " loop=" << loop_mode_name(mode) << " order_by=" << order_by.value_or("(file)") << "\n";
    out << "ordinal,estimate\n";
    for (std::size_t i = 0; i < trace.estimates.size(); ++i) {
        out << (trace.first_ordinal + i) << "," << fmt17(trace.estimates[i]) << "\n";
    }
    std::cout << "wrote " << trace.estimates.size() << " estimates to " << out_path << "\n";
    return 0;
}

int cmd_cv(const std::string& data_path, const SchemaSource& schema_source,
           const std::string& models_list, std::size_t folds, std::uint64_t seed,
           const NarxTrainSpec& narx_defaults, LoopMode mode,
           const std::optional<std::string>& order_by, const std::string& out_dir) {
    const FeatureSchema schema = resolve_schema(schema_source);
    const auto records = load_csv(data_path, schema, order_by);
    const auto specs = parse_model_specs(models_list);

    const FoldPlan plan = make_folds(records.size(), folds, derive_seed(seed, "folds"));
    const std::string plan_hex = hash_hex(fold_plan_hash(plan));

    std::ostringstream echo_os;
    echo_os << "cmd=cv data=" << data_path << " features=" << join(schema.names, ",")
            << " target=" << schema.target << " models=" << models_list << " folds=" << folds
            << " seed=" << seed << " loop=" << loop_mode_name(mode)
            << " max_epochs=" << narx_defaults.train.max_epochs
            << " patience=" << narx_defaults.train.patience
            << " hidden=" << narx_defaults.hidden
            << " order_by=" << order_by.value_or("(file)") << " plan_hash=" << plan_hex;
    const std::string echo = echo_os.str();

    ensure_out_dir(out_dir);
    write_fold_plan(plan, (fs::path(out_dir) / "fold_plan.csv").string());

    struct Row {
        std::string id;
        bool ok = false;
        std::string status = "ok";
        EvalReport report;
    };
    std::vector<Row> rows;
    for (const auto& spec : specs) {
        Row row;
        row.id = spec.id;
        try {
            auto model = build_cv_model(spec, schema, narx_defaults, seed);
            row.report = evaluate_cv(*model, records, plan, mode);
            row.ok = true;
            write_eval_report_csv(row.report,
                                  (fs::path(out_dir) / ("cv_" + sanitize_id(spec.id) + ".csv")).string(),
                                  echo + " model=" + spec.id);
        } catch (const std::exception& e) {
            row.status = e.what();
            std::replace(row.status.begin(), row.status.end(), ',', ';');
            std::replace(row.status.begin(), row.status.end(), '\n', ' ');
        }
        rows.push_back(std::move(row));
    }

    {
        std::ofstream out(fs::path(out_dir) / "comparison.csv", std::ios::binary);
        if (!out) throw DataError("cannot write comparison.csv");
        out << "# " << echo << "\n";
        out << "model,mode,mse,rmse,pearson,plan_hash,status\n";
        for (const auto& row : rows) {
            if (row.ok) {
                out << row.id << "," << loop_mode_name(mode) << "," << fmt17(row.report.aggregate.mse)
                    << "," << fmt17(row.report.aggregate.rmse) << ","
                    << fmt17(row.report.aggregate.pearson) << "," << plan_hex << ",ok\n";
            } else {
                out << row.id << "," << loop_mode_name(mode) << ",nan,nan,nan," << plan_hex << ","
                    << row.status << "\n";
            }
        }
    }

    {
        std::ofstream out(fs::path(out_dir) / "summary.json", std::ios::binary);
        if (!out) throw DataError("cannot write summary.json");
        out << "{\n  \"config\": \"" << json_escape(echo) << "\",\n";
        out << "  \"plan_hash\": \"" << plan_hex << "\",\n  \"models\": [\n";
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const auto& row = rows[i];
            out << "    {\"model\": \"" << json_escape(row.id) << "\", \"mode\": \""
                << loop_mode_name(mode) << "\", \"status\": \"" << json_escape(row.status) << "\"";
            if (row.ok) {
                out << ", \"mse\": " << fmt17(row.report.aggregate.mse)
                    << ", \"rmse\": " << fmt17(row.report.aggregate.rmse)
                    << ", \"pearson\": " << fmt17(row.report.aggregate.pearson) << ", \"folds\": [";
                for (std::size_t f = 0; f < row.report.folds.size(); ++f) {
                    const auto& fm = row.report.folds[f];
                    if (f) out << ", ";
                    out << "{\"fold\": " << fm.fold << ", \"n\": " << fm.n
                        << ", \"mse\": " << fmt17(fm.mse) << ", \"rmse\": " << fmt17(fm.rmse)
                        << ", \"pearson\": " << fmt17(fm.pearson) << "}";
                }
                out << "]";
            }
            out << "}" << (i + 1 < rows.size() ? "," : "") << "\n";
        }
        out << "  ]\n}\n";
    }

    std::printf("%-14s %-6s %10s %10s %10s  %s\n", "Model", "Mode", "MSE", "RMSE", "Pearson R",
                "Status");
    bool all_ok = true;
    for (const auto& row : rows) {
        if (row.ok) {
            std::printf("%-14s %-6s %10.4f %10.4f %10.4f  ok\n", row.id.c_str(),
                        loop_mode_name(mode).c_str(), row.report.aggregate.mse,
                        row.report.aggregate.rmse, row.report.aggregate.pearson);
        } else {
            all_ok = false;
            std::printf("%-14s %-6s %10s %10s %10s  %s\n", row.id.c_str(),
                        loop_mode_name(mode).c_str(), "-", "-", "-", row.status.c_str());
        }
    }
    std::printf("fold plan %s over %zu records, k=%zu\n", plan_hex.c_str(), records.size(),
                plan.k);
    return all_ok ? 0 : 3;
}

int cmd_monitor(const std::string& model_path, const std::string& input_path,
                const std::string& output_path, LoopMode mode) {
    return run_stream_file(model_path, input_path, output_path, mode);
}

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"NARX-based no-reference audiovisual quality estimation"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic 2-feature fixture CSV");
    std::size_t synth_n = 2000;
    std::uint64_t synth_seed = 1;
    double synth_noise = 0.05;
    std::string synth_out = "synth.csv";
    synth->add_option("--n", synth_n, "series length");
    synth->add_option("--seed", synth_seed, "generator seed");
    synth->add_option("--noise-sd", synth_noise, "Gaussian noise standard deviation");
    synth->add_option("--out", synth_out, "output CSV path");

    // select-features
    auto* select = app.add_subcommand("select-features",
                                      "rank columns by forest importance and keep the top k");
    std::string sel_data, sel_target = "mos", sel_out = ".";
    std::size_t sel_topk = 9;
    std::uint64_t sel_seed = 1;
    select->add_option("--data", sel_data, "input CSV")->required();
    select->add_option("--target", sel_target, "target column name");
    select->add_option("--top-k", sel_topk, "number of columns to keep");
    select->add_option("--seed", sel_seed, "forest seed");
    select->add_option("--out", sel_out, "output directory");

    // shared train/cv knobs
    std::string data_path, schema_path, features_csv, target = "mos", order_by, out_dir = ".";
    std::size_t du = 3, dy = 3, hidden = 0, folds = 5, max_epochs = 300, patience = 30;
    std::uint64_t seed = 1;
    std::string loop = "open";

    auto add_schema_flags = [&](CLI::App* cmd) {
        cmd->add_option("--schema", schema_path, "schema JSON from select-features");
        cmd->add_option("--features", features_csv, "comma-separated feature columns");
        cmd->add_option("--target", target, "target column name");
        cmd->add_option("--order-by", order_by, "sort records by this column before lagging");
    };
    auto add_train_flags = [&](CLI::App* cmd) {
        cmd->add_option("--max-epochs", max_epochs, "training epoch cap");
        cmd->add_option("--patience", patience, "epochs without validation improvement");
        cmd->add_option("--hidden", hidden, "hidden nodes (default: one per feature)");
        cmd->add_option("--seed", seed, "root seed");
    };

    auto* train_cmd = app.add_subcommand("train", "train a NARX model on a CSV");
    train_cmd->add_option("--data", data_path, "input CSV")->required();
    add_schema_flags(train_cmd);
    train_cmd->add_option("--du", du, "input lag count");
    train_cmd->add_option("--dy", dy, "output feedback lag count");
    add_train_flags(train_cmd);
    train_cmd->add_option("--out", out_dir, "output directory");

    auto* predict_cmd = app.add_subcommand("predict", "run a trained model over a CSV");
    std::string model_path, predict_out = "estimates.csv";
    predict_cmd->add_option("--model", model_path, "model JSON from train")->required();
    predict_cmd->add_option("--data", data_path, "input CSV")->required();
    predict_cmd->add_option("--loop", loop, "open or closed");
    predict_cmd->add_option("--order-by", order_by, "sort records by this column");
    predict_cmd->add_option("--out", predict_out, "output CSV path");

    auto* cv_cmd = app.add_subcommand("cv", "cross-validated model comparison on shared folds");
    std::string models_list = "narx(3,0),narx(3,3),narx(4,4),mlp,ols,rf,bagging";
    cv_cmd->add_option("--data", data_path, "input CSV")->required();
    add_schema_flags(cv_cmd);
    cv_cmd->add_option("--models", models_list, "comma-separated model specs");
    cv_cmd->add_option("--folds", folds, "fold count k");
    cv_cmd->add_option("--loop", loop, "open or closed evaluation");
    add_train_flags(cv_cmd);
    cv_cmd->add_option("--out", out_dir, "output directory");

    auto* monitor_cmd = app.add_subcommand("monitor", "stream records, emit MOS estimates live");
    std::string mon_in = "-", mon_out = "-";
    std::string mon_loop = "closed";
    monitor_cmd->add_option("--model", model_path, "model JSON from train")->required();
    monitor_cmd->add_option("--data", mon_in, "input stream path, - for stdin");
    monitor_cmd->add_option("--out", mon_out, "output path, - for stdout");
    monitor_cmd->add_option("--loop", mon_loop, "open or closed");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        SchemaSource schema_source;
        if (!schema_path.empty()) schema_source.schema_path = schema_path;
        if (!features_csv.empty()) schema_source.features_csv = features_csv;
        schema_source.target = target;
        std::optional<std::string> order =
            order_by.empty() ? std::nullopt : std::optional<std::string>(order_by);

        NarxTrainSpec spec;
        spec.d_u = du;
        spec.d_y = dy;
        spec.hidden = hidden;
        spec.train.max_epochs = max_epochs;
        spec.train.patience = std::min(patience, max_epochs);

        if (*synth) return cmd_synth(synth_n, synth_seed, synth_noise, synth_out);
        if (*select) return cmd_select_features(sel_data, sel_target, sel_topk, sel_seed, sel_out);
        if (*train_cmd) return cmd_train(data_path, schema_source, spec, seed, order, out_dir);
        if (*predict_cmd) {
            return cmd_predict(model_path, data_path, parse_loop_mode(loop), order, predict_out);
        }
        if (*cv_cmd) {
            return cmd_cv(data_path, schema_source, models_list, folds, seed, spec,
                          parse_loop_mode(loop), order, out_dir);
        }
        if (*monitor_cmd) {
            return cmd_monitor(model_path, mon_in, mon_out, parse_loop_mode(mon_loop));
        }
        return 1;
    } catch (const NumericError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }
}

}  // namespace avqe::cli
