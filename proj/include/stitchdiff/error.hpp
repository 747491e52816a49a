#pragma once

#include <stdexcept>
#include <string>

namespace stitchdiff {

/// Error categories surfaced by the library. Each maps to one failure
/// contract (empty mask, shape mismatch, bad config, ...), so tests and the
/// CLI can branch on the code instead of parsing messages.
enum class Errc {
    empty_mask,
    shape_mismatch,
    config,
    state,
    range,
    input,
    placement,
    coverage,
    too_small,
    io,
};

inline const char* errc_name(Errc c) {
    switch (c) {
        case Errc::empty_mask: return "empty_mask";
        case Errc::shape_mismatch: return "shape_mismatch";
        case Errc::config: return "config";
        case Errc::state: return "state";
        case Errc::range: return "range";
        case Errc::input: return "input";
        case Errc::placement: return "placement";
        case Errc::coverage: return "coverage";
        case Errc::too_small: return "too_small";
        case Errc::io: return "io";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, Errc code, const std::string& what) {
    if (!cond) fail(code, what);
}

}  // namespace stitchdiff
