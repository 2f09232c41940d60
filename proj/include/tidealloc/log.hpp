#pragma once

#include <functional>
#include <string>

namespace tidealloc {

enum class LogLevel { debug, info, warning, error };

using LogSink = std::function<void(LogLevel, const std::string&)>;

/// Replaces the process-wide sink (stderr by default). Returns the previous sink.
LogSink set_log_sink(LogSink sink);

void log_message(LogLevel level, const std::string& message);
inline void log_info(const std::string& message) { log_message(LogLevel::info, message); }
inline void log_warning(const std::string& message) { log_message(LogLevel::warning, message); }

}  // namespace tidealloc
