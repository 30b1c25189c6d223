#pragma once

#include <stdexcept>
#include <string>

namespace logokit {

// Base for everything thrown by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct LoadError : Error { using Error::Error; };             // missing/unreadable file
struct ValidationError : Error { using Error::Error; };       // schema or config violation
struct IntegrityError : Error { using Error::Error; };        // dangling refs, checksum mismatch
struct DomainError : Error { using Error::Error; };           // value outside numeric domain
struct ShapeError : Error { using Error::Error; };
struct ContrastError : Error { using Error::Error; };
struct PlacementError : Error { using Error::Error; };
struct ScaleError : Error { using Error::Error; };
struct TokenizationError : Error { using Error::Error; };
struct RegistrationError : Error { using Error::Error; };
struct CriticError : Error { using Error::Error; };
struct BackendError : Error { using Error::Error; };
struct CapabilityError : Error { using Error::Error; };
struct TemplateError : Error { using Error::Error; };
struct PhaseOrderingError : Error { using Error::Error; };

}  // namespace logokit
