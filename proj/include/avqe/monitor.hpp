#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include "avqe/narx.hpp"

namespace avqe {

/// Streaming inference over periodic QoS reports: one ingest per tick,
/// delay buffers bounded by the model's lags. In closed loop the feedback
/// slots take the session's own prior estimates (midpoint-seeded during
/// warm-up) and emission starts at record d_u; in open loop ground-truth MOS
/// is required and emission starts at max(d_u, d_y).
class MonitorSession {
public:
    MonitorSession(NarxModel model, LoopMode mode, double tick_seconds = 5.0);

    /// Returns the clipped MOS estimate once warm-up is satisfied.
    std::optional<double> ingest(const QosRecord& record);

    std::size_t records_seen() const { return seen_; }
    std::size_t warmup_length() const;
    double tick_seconds() const { return tick_seconds_; }
    const DelayBuffer& buffer() const { return buffer_; }
    const NarxModel& model() const { return model_; }

private:
    NarxModel model_;
    LoopMode mode_;
    double tick_seconds_;
    DelayBuffer buffer_;
    std::size_t seen_ = 0;
};

/// Reads newline-delimited CSV records (header optional, auto-detected),
/// writes one `ordinal,estimate` line per emitted estimate with 4 decimal
/// places, flushing after each line. Malformed lines go to the diagnostics
/// stream and processing continues; schema-level mismatches abort.
int run_stream(const NarxModel& model, std::istream& in, std::ostream& out,
               std::ostream& diagnostics, LoopMode mode);

int run_stream_file(const std::string& model_path, const std::string& input_path,
                    const std::string& output_path, LoopMode mode);

}  // namespace avqe
