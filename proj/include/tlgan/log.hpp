#pragma once

#include <functional>
#include <string>

namespace tlgan {

/// Warnings go to stderr by default; set_warning_sink replaces the sink
/// (tests install a counter, the CLI keeps stderr). Pass nullptr to
/// restore the default.
void log_warning(const std::string& message);

using WarningSink = std::function<void(const std::string&)>;
void set_warning_sink(WarningSink sink);

}  // namespace tlgan
