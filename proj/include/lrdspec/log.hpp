#pragma once

#include <functional>
#include <string>

namespace lrdspec {

/// Advisory warnings (regime conditions, clamped estimates, budgets). By
/// default they go to stderr; tests and tools may redirect or silence them.
using WarningSink = std::function<void(const std::string&)>;

void set_warning_sink(WarningSink sink);
void warn(const std::string& message);

/// Restores the previous sink on destruction.
class ScopedWarningSink {
public:
    explicit ScopedWarningSink(WarningSink sink);
    ~ScopedWarningSink();
    ScopedWarningSink(const ScopedWarningSink&) = delete;
    ScopedWarningSink& operator=(const ScopedWarningSink&) = delete;

private:
    WarningSink previous_;
};

}  // namespace lrdspec
