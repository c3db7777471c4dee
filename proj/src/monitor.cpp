#include "avqe/monitor.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <vector>

#include "avqe/errors.hpp"

namespace avqe {

namespace {

std::string canon(const std::string& s) {
    std::string out;
    for (unsigned char c : s) {
        if (std::isspace(c)) continue;
        out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    for (char c : line) {
        if (c == ',') {
            cells.push_back(cell);
            cell.clear();
        } else if (c != '\r' && c != '"') {
            cell.push_back(c);
        }
    }
    cells.push_back(cell);
    for (auto& s : cells) {
        const auto b = s.find_first_not_of(" \t");
        const auto e = s.find_last_not_of(" \t");
        s = (b == std::string::npos) ? std::string() : s.substr(b, e - b + 1);
    }
    return cells;
}

bool parse_double(const std::string& cell, double& out) {
    if (cell.empty()) return false;
    char* end = nullptr;
    out = std::strtod(cell.c_str(), &end);
    return end == cell.c_str() + cell.size() && std::isfinite(out);
}

struct ColumnMap {
    std::vector<std::size_t> feature_cols;
    std::optional<std::size_t> target_col;
};

}  // namespace

MonitorSession::MonitorSession(NarxModel model, LoopMode mode, double tick_seconds)
    : model_(std::move(model)),
      mode_(mode),
      tick_seconds_(tick_seconds),
      buffer_(model_.topology.d_u, model_.topology.d_y) {}

std::size_t MonitorSession::warmup_length() const {
    return mode_ == LoopMode::open ? std::max(model_.topology.d_u, model_.topology.d_y)
                                   : model_.topology.d_u;
}

std::optional<double> MonitorSession::ingest(const QosRecord& record) {
    const auto& topo = model_.topology;
    if (record.features.size() != topo.p) {
        throw DataError("ingest: record carries " + std::to_string(record.features.size()) +
                        " features, model expects " + std::to_string(topo.p));
    }
    if (mode_ == LoopMode::open && topo.d_y > 0 && !record.mos) {
        throw DataError("ingest: open-loop session requires ground-truth MOS on every record");
    }

    std::vector<double> feats = model_.normalizer.transform_features(record.features);

    std::optional<double> emitted;
    double est_norm = 0.0;
    if (seen_ >= warmup_length()) {
        std::vector<double> x;
        x.reserve(topo.input_width());
        x.insert(x.end(), feats.begin(), feats.end());
        for (std::size_t lag = 1; lag <= topo.d_u; ++lag) {
            const auto& past = buffer_.inputs()[lag - 1];  // newest first
            x.insert(x.end(), past.begin(), past.end());
        }
        for (std::size_t j = 1; j <= topo.d_y; ++j) {
            // closed loop: records before the first emission contributed a
            // midpoint 0, so shorter histories read as 0 as well
            x.push_back(j <= buffer_.outputs().size() ? buffer_.outputs()[j - 1] : 0.0);
        }
        est_norm = forward_sample(model_, x);
        emitted = clip(model_.normalizer.denormalize_target(est_norm), kMosMin, kMosMax);
    }

    buffer_.push_input(std::move(feats));
    if (topo.d_y > 0) {
        if (mode_ == LoopMode::open) {
            buffer_.push_output(model_.normalizer.normalize_target(*record.mos));
        } else {
            buffer_.push_output(emitted ? est_norm : 0.0);
        }
    }
    ++seen_;
    return emitted;
}

int run_stream(const NarxModel& model, std::istream& in, std::ostream& out,
               std::ostream& diagnostics, LoopMode mode) {
    const std::size_t p = model.schema.names.size();
    if (p != model.topology.p) {
        throw DataError("run_stream: model schema lists " + std::to_string(p) +
                        " features, topology expects " + std::to_string(model.topology.p));
    }

    MonitorSession session(model, mode);

    ColumnMap cols;
    bool header_resolved = false;
    std::size_t line_no = 0;
    std::size_t next_ordinal = 0;
    char buf[64];
    std::string line;

    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto cells = split_line(line);

        if (!header_resolved) {
            header_resolved = true;
            bool all_numeric = true;
            double tmp;
            for (const auto& c : cells) {
                if (!parse_double(c, tmp)) {
                    all_numeric = false;
                    break;
                }
            }
            if (!all_numeric) {
                // header row: map model schema columns by name
                for (const auto& name : model.schema.names) {
                    bool found = false;
                    for (std::size_t i = 0; i < cells.size(); ++i) {
                        if (canon(cells[i]) == canon(name)) {
                            cols.feature_cols.push_back(i);
                            found = true;
                            break;
                        }
                    }
                    if (!found) {
                        throw DataError("stream header is missing column '" + name + "'");
                    }
                }
                for (std::size_t i = 0; i < cells.size(); ++i) {
                    if (canon(cells[i]) == canon(model.schema.target)) cols.target_col = i;
                }
                if (mode == LoopMode::open && model.topology.d_y > 0 && !cols.target_col) {
                    throw DataError("open-loop stream needs the target column '" +
                                    model.schema.target + "'");
                }
                continue;  // header consumed
            }
            // headerless: schema order, optional trailing MOS column
            if (cells.size() != p && cells.size() != p + 1) {
                throw DataError("headerless stream row has " + std::to_string(cells.size()) +
                                " cells; model expects " + std::to_string(p) + " features");
            }
            for (std::size_t i = 0; i < p; ++i) cols.feature_cols.push_back(i);
            if (cells.size() == p + 1) cols.target_col = p;
            if (mode == LoopMode::open && model.topology.d_y > 0 && !cols.target_col) {
                throw DataError("open-loop stream needs a trailing MOS column");
            }
        }

        QosRecord rec;
        rec.ordinal = next_ordinal;
        rec.features.reserve(p);
        bool ok = true;
        std::string why;
        for (std::size_t i = 0; i < p && ok; ++i) {
            const std::size_t ci = cols.feature_cols[i];
            double v;
            if (ci >= cells.size() || !parse_double(cells[ci], v)) {
                ok = false;
                why = "bad value for column '" + model.schema.names[i] + "'";
            } else {
                rec.features.push_back(v);
            }
        }
        if (ok && cols.target_col && *cols.target_col < cells.size() &&
            !cells[*cols.target_col].empty()) {
            double v;
            if (!parse_double(cells[*cols.target_col], v)) {
                ok = false;
                why = "bad MOS value";
            } else if (v < kMosMin || v > kMosMax) {
                ok = false;
                why = "MOS outside [1,5]";
            } else {
                rec.mos = v;
            }
        }
        if (ok && mode == LoopMode::open && model.topology.d_y > 0 && !rec.mos) {
            ok = false;
            why = "missing MOS required in open loop";
        }
        if (!ok) {
            diagnostics << "line " << line_no << ": " << why << "\n";
            continue;
        }

        const auto estimate = session.ingest(rec);
        if (estimate) {
            std::snprintf(buf, sizeof(buf), "%zu,%.4f\n", rec.ordinal, *estimate);
            out << buf;
            out.flush();
        }
        ++next_ordinal;
    }
    return 0;
}

int run_stream_file(const std::string& model_path, const std::string& input_path,
                    const std::string& output_path, LoopMode mode) {
    const NarxModel model = load_model(model_path);

    std::ifstream file_in;
    std::istream* in = &std::cin;
    if (input_path != "-") {
        file_in.open(input_path);
        if (!file_in) throw DataError("cannot open '" + input_path + "'");
        in = &file_in;
    }
    std::ofstream file_out;
    std::ostream* out = &std::cout;
    if (output_path != "-") {
        file_out.open(output_path, std::ios::binary);
        if (!file_out) throw DataError("cannot write '" + output_path + "'");
        out = &file_out;
    }
    return run_stream(model, *in, *out, std::cerr, mode);
}

}  // namespace avqe
