#include "avqe/narx.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "avqe/errors.hpp"
#include "json.hpp"

namespace avqe {

namespace {

// 17 significant decimal digits round-trip any finite double exactly.
std::string fmt_double(double v) {
    if (!std::isfinite(v)) return "null";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string json_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size() + 2);
    for (unsigned char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case '\t': out += "\\t"; break;
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

void write_double_array(std::ostream& os, const std::vector<double>& v) {
    os << "[";
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) os << ", ";
        os << fmt_double(v[i]);
    }
    os << "]";
}

double json_to_double(const nlohmann::json& j, const std::string& what) {
    if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
    if (!j.is_number()) throw ModelFormatError("malformed model file: " + what + " is not a number");
    return j.get<double>();
}

std::vector<double> json_to_vector(const nlohmann::json& j, const std::string& what) {
    if (!j.is_array()) throw ModelFormatError("malformed model file: " + what + " is not an array");
    std::vector<double> out;
    out.reserve(j.size());
    for (const auto& e : j) out.push_back(json_to_double(e, what));
    return out;
}

constexpr int kFormatVersion = 1;
constexpr const char* kGeneratorName = "splitmix64";

}  // namespace

void NarxTopology::validate() const {
    if (p < 1) throw DataError("topology: need at least one exogenous feature");
    if (hidden < 1) throw DataError("topology: need at least one hidden node");
}

std::size_t NarxModel::weight_count() const {
    return topology.hidden * topology.input_width() + topology.hidden + topology.hidden + 1;
}

std::vector<double> NarxModel::flatten() const {
    std::vector<double> theta;
    theta.reserve(weight_count());
    theta.insert(theta.end(), w1.data().begin(), w1.data().end());
    theta.insert(theta.end(), b1.begin(), b1.end());
    theta.insert(theta.end(), w2.begin(), w2.end());
    theta.push_back(b2);
    return theta;
}

void NarxModel::unflatten(std::span<const double> theta) {
    if (theta.size() != weight_count()) {
        throw DataError("unflatten: expected " + std::to_string(weight_count()) +
                        " parameters, got " + std::to_string(theta.size()));
    }
    std::size_t pos = 0;
    for (double& w : w1.data()) w = theta[pos++];
    for (double& v : b1) v = theta[pos++];
    for (double& v : w2) v = theta[pos++];
    b2 = theta[pos];
}

NarxModel init_model(const NarxTopology& topology, std::uint64_t seed) {
    topology.validate();
    NarxModel m;
    m.topology = topology;
    m.seed = seed;
    const std::size_t width = topology.input_width();
    m.w1 = Matrix(topology.hidden, width);
    m.b1.assign(topology.hidden, 0.0);
    m.w2.assign(topology.hidden, 0.0);
    m.b2 = 0.0;
    Rng rng(seed);
    const double lim1 = 1.0 / std::sqrt(static_cast<double>(width));
    for (double& w : m.w1.data()) w = rng.uniform(-lim1, lim1);
    const double lim2 = 1.0 / std::sqrt(static_cast<double>(topology.hidden));
    for (double& w : m.w2) w = rng.uniform(-lim2, lim2);
    m.normalizer = identity_normalizer(topology.p);
    return m;
}

double forward_sample(const NarxModel& model, std::span<const double> input) {
    const std::size_t width = model.topology.input_width();
    if (input.size() != width) {
        throw DataError("forward_sample: input length " + std::to_string(input.size()) +
                        " does not match network width " + std::to_string(width));
    }
    double y = model.b2;
    for (std::size_t k = 0; k < model.topology.hidden; ++k) {
        double z = model.b1[k];
        for (std::size_t j = 0; j < width; ++j) z += model.w1(k, j) * input[j];
        y += model.w2[k] * std::tanh(z);
    }
    return y;
}

namespace {

ForwardTrace forward_loop(const NarxModel& model, const std::vector<QosRecord>& records,
                          LoopMode mode) {
    const auto& topo = model.topology;
    if (!records.empty() && records.front().features.size() != topo.p) {
        throw DataError("forward pass: record feature count " +
                        std::to_string(records.front().features.size()) +
                        " does not match model p=" + std::to_string(topo.p));
    }
    const std::size_t first =
        mode == LoopMode::open ? std::max(topo.d_u, topo.d_y) : topo.d_u;

    std::vector<std::vector<double>> feats(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        feats[i] = model.normalizer.transform_features(records[i].features);
    }

    ForwardTrace trace;
    trace.first_ordinal = first;
    if (records.size() <= first) return trace;
    trace.estimates.reserve(records.size() - first);

    std::vector<double> est_norm(records.size(), 0.0);
    std::vector<double> x;
    for (std::size_t n = first; n < records.size(); ++n) {
        x.clear();
        for (std::size_t lag = 0; lag <= topo.d_u; ++lag) {
            const auto& f = feats[n - lag];
            x.insert(x.end(), f.begin(), f.end());
        }
        for (std::size_t j = 1; j <= topo.d_y; ++j) {
            const std::ptrdiff_t m = static_cast<std::ptrdiff_t>(n) - static_cast<std::ptrdiff_t>(j);
            if (mode == LoopMode::open) {
                const auto& mos = records[static_cast<std::size_t>(m)].mos;
                if (!mos) {
                    throw DataError("open-loop pass: record " + std::to_string(m) +
                                    " is missing ground-truth MOS");
                }
                x.push_back(model.normalizer.normalize_target(*mos));
            } else {
                // midpoint seed before the first emission
                x.push_back(m >= static_cast<std::ptrdiff_t>(first)
                                ? est_norm[static_cast<std::size_t>(m)]
                                : 0.0);
            }
        }
        const double e = forward_sample(model, x);
        est_norm[n] = e;
        trace.estimates.push_back(clip(model.normalizer.denormalize_target(e), kMosMin, kMosMax));
    }
    return trace;
}

}  // namespace

ForwardTrace forward_open_loop(const NarxModel& model, const std::vector<QosRecord>& records) {
    return forward_loop(model, records, LoopMode::open);
}

ForwardTrace forward_closed_loop(const NarxModel& model, const std::vector<QosRecord>& records) {
    return forward_loop(model, records, LoopMode::closed);
}

double mlp_forward(const NarxModel& model, const std::vector<double>& raw_features) {
    const auto& topo = model.topology;
    if (topo.d_u != 0 || topo.d_y != 0) {
        throw DataError("mlp_forward: only valid for d_u = d_y = 0");
    }
    const std::vector<double> x = model.normalizer.transform_features(raw_features);
    double y = model.b2;
    for (std::size_t k = 0; k < topo.hidden; ++k) {
        double z = model.b1[k];
        for (std::size_t j = 0; j < x.size(); ++j) z += model.w1(k, j) * x[j];
        y += model.w2[k] * std::tanh(z);
    }
    return clip(model.normalizer.denormalize_target(y), kMosMin, kMosMax);
}

Matrix jacobian(const NarxModel& model, const std::vector<LaggedSample>& samples) {
    const auto& topo = model.topology;
    const std::size_t width = topo.input_width();
    const std::size_t nw = model.weight_count();
    Matrix jac(samples.size(), nw);
    const std::size_t off_b1 = topo.hidden * width;
    const std::size_t off_w2 = off_b1 + topo.hidden;
    const std::size_t off_b2 = off_w2 + topo.hidden;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& x = samples[i].input;
        if (x.size() != width) {
            throw DataError("jacobian: sample " + std::to_string(i) + " has input length " +
                            std::to_string(x.size()) + ", expected " + std::to_string(width));
        }
        for (std::size_t k = 0; k < topo.hidden; ++k) {
            double z = model.b1[k];
            for (std::size_t j = 0; j < width; ++j) z += model.w1(k, j) * x[j];
            const double t = std::tanh(z);
            const double s = model.w2[k] * (1.0 - t * t);
            for (std::size_t j = 0; j < width; ++j) jac(i, k * width + j) = s * x[j];
            jac(i, off_b1 + k) = s;
            jac(i, off_w2 + k) = t;
        }
        jac(i, off_b2) = 1.0;
    }
    return jac;
}

void save_model(const NarxModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path + "'");
    const auto& topo = model.topology;
    out << "{\n";
    out << "  \"format_version\": " << kFormatVersion << ",\n";
    out << "  \"generator\": \"" << kGeneratorName << "\",\n";
    out << "  \"schema\": {\"features\": [";
    for (std::size_t i = 0; i < model.schema.names.size(); ++i) {
        if (i) out << ", ";
        out << "\"" << json_escape(model.schema.names[i]) << "\"";
    }
    out << "], \"target\": \"" << json_escape(model.schema.target) << "\"},\n";
    out << "  \"topology\": {\"p\": " << topo.p << ", \"d_u\": " << topo.d_u
        << ", \"d_y\": " << topo.d_y << ", \"hidden\": " << topo.hidden << "},\n";
    out << "  \"normalizer\": {\"feature_min\": ";
    write_double_array(out, model.normalizer.feature_min());
    out << ", \"feature_max\": ";
    write_double_array(out, model.normalizer.feature_max());
    out << ", \"target_min\": " << fmt_double(model.normalizer.target_min())
        << ", \"target_max\": " << fmt_double(model.normalizer.target_max()) << "},\n";
    out << "  \"weights\": {\n    \"w1\": [\n";
    for (std::size_t k = 0; k < topo.hidden; ++k) {
        std::vector<double> row(topo.input_width());
        for (std::size_t j = 0; j < row.size(); ++j) row[j] = model.w1(k, j);
        out << "      ";
        write_double_array(out, row);
        out << (k + 1 < topo.hidden ? ",\n" : "\n");
    }
    out << "    ],\n    \"b1\": ";
    write_double_array(out, model.b1);
    out << ",\n    \"w2\": ";
    write_double_array(out, model.w2);
    out << ",\n    \"b2\": " << fmt_double(model.b2) << "\n  },\n";
    out << "  \"seed\": " << model.seed << ",\n";
    out << "  \"training\": {\"epochs_run\": " << model.meta.epochs_run
        << ", \"best_epoch\": " << model.meta.best_epoch
        << ", \"best_val_mse\": " << fmt_double(model.meta.best_val_mse)
        << ", \"final_train_mse\": " << fmt_double(model.meta.final_train_mse)
        << ", \"config\": \"" << json_escape(model.meta.config) << "\"}\n";
    out << "}\n";
    if (!out) throw DataError("write failed for '" + path + "'");
}

NarxModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ModelFormatError("malformed model file '" + path + "': " + e.what());
    }

    try {
        if (!doc.contains("format_version") || !doc["format_version"].is_number_integer()) {
            throw ModelFormatError("malformed model file: missing format_version");
        }
        if (doc["format_version"].get<int>() != kFormatVersion) {
            throw ModelVersionError("model file version " + doc["format_version"].dump() +
                                    " not supported (expected " + std::to_string(kFormatVersion) + ")");
        }
        if (!doc.contains("generator") || doc["generator"] != kGeneratorName) {
            throw ModelFormatError("malformed model file: unknown generator");
        }

        NarxModel m;
        const auto& sj = doc.at("schema");
        for (const auto& name : sj.at("features")) m.schema.names.push_back(name.get<std::string>());
        m.schema.target = sj.at("target").get<std::string>();

        const auto& tj = doc.at("topology");
        m.topology.p = tj.at("p").get<std::size_t>();
        m.topology.d_u = tj.at("d_u").get<std::size_t>();
        m.topology.d_y = tj.at("d_y").get<std::size_t>();
        m.topology.hidden = tj.at("hidden").get<std::size_t>();
        m.topology.validate();

        const auto& nj = doc.at("normalizer");
        m.normalizer = Normalizer(json_to_vector(nj.at("feature_min"), "feature_min"),
                                  json_to_vector(nj.at("feature_max"), "feature_max"),
                                  json_to_double(nj.at("target_min"), "target_min"),
                                  json_to_double(nj.at("target_max"), "target_max"));

        const auto& wj = doc.at("weights");
        const std::size_t width = m.topology.input_width();
        const std::size_t hidden = m.topology.hidden;
        if (!wj.at("w1").is_array() || wj.at("w1").size() != hidden) {
            throw ModelShapeError("model file shape inconsistency: w1 must have " +
                                  std::to_string(hidden) + " rows");
        }
        m.w1 = Matrix(hidden, width);
        for (std::size_t k = 0; k < hidden; ++k) {
            const auto row = json_to_vector(wj.at("w1")[k], "w1 row");
            if (row.size() != width) {
                throw ModelShapeError("model file shape inconsistency: w1 row " +
                                      std::to_string(k) + " has " + std::to_string(row.size()) +
                                      " entries, expected " + std::to_string(width));
            }
            for (std::size_t j = 0; j < width; ++j) m.w1(k, j) = row[j];
        }
        m.b1 = json_to_vector(wj.at("b1"), "b1");
        m.w2 = json_to_vector(wj.at("w2"), "w2");
        if (m.b1.size() != hidden || m.w2.size() != hidden) {
            throw ModelShapeError("model file shape inconsistency: b1/w2 must have " +
                                  std::to_string(hidden) + " entries");
        }
        m.b2 = json_to_double(wj.at("b2"), "b2");

        if (m.normalizer.feature_count() != m.topology.p) {
            throw ModelShapeError("model file shape inconsistency: normalizer covers " +
                                  std::to_string(m.normalizer.feature_count()) +
                                  " features, topology has " + std::to_string(m.topology.p));
        }
        if (!m.schema.names.empty() && m.schema.names.size() != m.topology.p) {
            throw ModelShapeError("model file shape inconsistency: schema lists " +
                                  std::to_string(m.schema.names.size()) +
                                  " features, topology has " + std::to_string(m.topology.p));
        }
        for (double w : m.flatten()) {
            if (!std::isfinite(w)) throw ModelFormatError("malformed model file: non-finite weight");
        }

        m.seed = doc.at("seed").get<std::uint64_t>();
        const auto& mj = doc.at("training");
        m.meta.epochs_run = mj.at("epochs_run").get<std::size_t>();
        m.meta.best_epoch = mj.at("best_epoch").get<std::size_t>();
        m.meta.best_val_mse = json_to_double(mj.at("best_val_mse"), "best_val_mse");
        m.meta.final_train_mse = json_to_double(mj.at("final_train_mse"), "final_train_mse");
        m.meta.config = mj.at("config").get<std::string>();
        return m;
    } catch (const ModelVersionError&) {
        throw;
    } catch (const ModelShapeError&) {
        throw;
    } catch (const ModelFormatError&) {
        throw;
    } catch (const nlohmann::json::exception& e) {
        throw ModelFormatError("malformed model file '" + path + "': " + e.what());
    }
}

void DelayBuffer::push_input(std::vector<double> features) {
    if (input_lags_ == 0) return;
    inputs_.push_front(std::move(features));
    while (inputs_.size() > input_lags_) inputs_.pop_back();
}

void DelayBuffer::push_output(double y) {
    if (output_lags_ == 0) return;
    outputs_.push_front(y);
    while (outputs_.size() > output_lags_) outputs_.pop_back();
}

}  // namespace avqe
