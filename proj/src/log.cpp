#include "tlgan/log.hpp"

#include <iostream>

namespace tlgan {

namespace {
void stderr_sink(const std::string& message) { std::cerr << "[warn] " << message << "\n"; }
WarningSink g_sink = stderr_sink;
}  // namespace

void log_warning(const std::string& message) { g_sink(message); }

void set_warning_sink(WarningSink sink) { g_sink = sink ? std::move(sink) : WarningSink(stderr_sink); }

}  // namespace tlgan
