#pragma once

#include <stdexcept>
#include <string>

namespace phishtriage {

// Base for all library errors. CLI maps InputError -> exit 2 and
// BackendError -> exit 3.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// --- input / contract errors (exit 2) ---

class InputError : public Error {
public:
    using Error::Error;
};

class UnparseableMessage : public InputError {
public:
    using InputError::InputError;
};

class UnsupportedFormat : public InputError {
public:
    using InputError::InputError;
};

class EmptyBody : public InputError {
public:
    using InputError::InputError;
};

class EmptySentence : public InputError {
public:
    using InputError::InputError;
};

class NoSentences : public InputError {
public:
    using InputError::InputError;
};

class CorpusNotFound : public InputError {
public:
    using InputError::InputError;
};

class InvalidPolicy : public InputError {
public:
    using InputError::InputError;
};

class InsufficientCorpus : public InputError {
public:
    using InputError::InputError;
};

class IndexMismatch : public InputError {
public:
    using InputError::InputError;
};

class UnknownLabel : public InputError {
public:
    explicit UnknownLabel(const std::string& label)
        : InputError("unknown label: " + label), label_(label) {}
    const std::string& label() const { return label_; }

private:
    std::string label_;
};

class UnpopulatedPredictions : public InputError {
public:
    using InputError::InputError;
};

// Malformed config/data file (lexicon, rules, baseline, report JSON).
class SchemaError : public InputError {
public:
    using InputError::InputError;
};

// --- backend / transport errors (exit 3) ---

class BackendError : public Error {
public:
    using Error::Error;
};

class BackendUnavailable : public BackendError {
public:
    using BackendError::BackendError;
};

class BackendTimeout : public BackendError {
public:
    using BackendError::BackendError;
};

class ProtocolError : public BackendError {
public:
    using BackendError::BackendError;
};

// A backend returned a schema-valid message whose content violates the
// consuming module's contract. `reason` is a stable machine-readable code
// (e.g. "sum_out_of_tolerance", "unregistered_tag", "span_out_of_bounds").
class BackendViolation : public BackendError {
public:
    BackendViolation(const std::string& reason, const std::string& detail)
        : BackendError(reason + ": " + detail), reason_(reason) {}
    const std::string& reason() const { return reason_; }

private:
    std::string reason_;
};

// Error response sent by a remote backend ({"error":{code,message}}).
class RemoteBackendError : public BackendError {
public:
    RemoteBackendError(const std::string& code, const std::string& message)
        : BackendError("backend error " + code + ": " + message), code_(code) {}
    const std::string& code() const { return code_; }

private:
    std::string code_;
};

}  // namespace phishtriage
