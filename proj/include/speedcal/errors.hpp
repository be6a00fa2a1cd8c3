#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace speedcal {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// geometry
struct TooFewPoints : Error { using Error::Error; };
struct DegenerateConfiguration : Error { using Error::Error; };
struct PointAtInfinity : Error { using Error::Error; };
struct InsufficientSegments : Error { using Error::Error; };
struct NonPositivePixelLength : Error { using Error::Error; };

// trajectory
struct EmptyInput : Error { using Error::Error; };
struct DuplicateFrame : Error { using Error::Error; };

// fatal parse error for config/artifact files; carries the offending line
struct FormatError : Error {
    FormatError(std::size_t line_no, const std::string& msg)
        : Error("line " + std::to_string(line_no) + ": " + msg), line(line_no) {}
    explicit FormatError(const std::string& msg) : Error(msg), line(0) {}
    std::size_t line;
};

// speed
struct NonPositiveWindow : Error { using Error::Error; };

// ghr
struct SpacingTooSmall : Error { using Error::Error; };
struct EpisodeTooShort : Error { using Error::Error; };
struct NoUsableEpisodes : Error { using Error::Error; };
struct InvalidDuration : Error { using Error::Error; };

// metrics
struct NoOverlap : Error { using Error::Error; };
struct InsufficientData : Error { using Error::Error; };

// synthgen
struct SpecError : Error { using Error::Error; };

// cli / session config
struct ConfigError : Error { using Error::Error; };

}  // namespace speedcal
