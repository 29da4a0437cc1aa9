#include "lrdspec/log.hpp"

#include <iostream>
#include <mutex>

namespace lrdspec {

namespace {

std::mutex& sink_mutex() {
    static std::mutex m;
    return m;
}

WarningSink& sink_ref() {
    static WarningSink sink = [](const std::string& msg) { std::cerr << "warning: " << msg << '\n'; };
    return sink;
}

}  // namespace

void set_warning_sink(WarningSink sink) {
    std::lock_guard lock(sink_mutex());
    sink_ref() = std::move(sink);
}

void warn(const std::string& message) {
    std::lock_guard lock(sink_mutex());
    if (sink_ref()) sink_ref()(message);
}

ScopedWarningSink::ScopedWarningSink(WarningSink sink) {
    std::lock_guard lock(sink_mutex());
    previous_ = std::exchange(sink_ref(), std::move(sink));
}

ScopedWarningSink::~ScopedWarningSink() {
    std::lock_guard lock(sink_mutex());
    sink_ref() = std::move(previous_);
}

}  // namespace lrdspec
