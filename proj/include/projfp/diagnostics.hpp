#pragma once

#include <functional>
#include <iostream>
#include <mutex>
#include <string>
#include <string_view>
#include <utility>

namespace projfp {

using WarningHandler = std::function<void(std::string_view)>;

namespace detail {
struct WarningSink {
  std::mutex mutex;
  WarningHandler handler = [](std::string_view msg) {
    std::cerr << "projfp warning: " << msg << '\n';
  };
};
inline WarningSink& warning_sink() {
  static WarningSink sink;
  return sink;
}
}  // namespace detail

/// Replace the process-wide warning handler; returns the previous one.
inline WarningHandler set_warning_handler(WarningHandler handler) {
  auto& sink = detail::warning_sink();
  std::lock_guard lock(sink.mutex);
  return std::exchange(sink.handler, std::move(handler));
}

inline void warn(std::string_view message) {
  auto& sink = detail::warning_sink();
  std::lock_guard lock(sink.mutex);
  if (sink.handler) sink.handler(message);
}

}  // namespace projfp
