#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace conftree {

// Root of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

// A training label that is not part of the class subset being fitted.
class InvalidLabel : public Error {
public:
    using Error::Error;
};

// Feature dimension or layer shape mismatch.
class ShapeError : public Error {
public:
    using Error::Error;
};

class EmptyClassError : public Error {
public:
    EmptyClassError(int label, const std::string& what) : Error(what), label_(label) {}
    int label() const noexcept { return label_; }

private:
    int label_;
};

class EmptyDatasetError : public Error {
public:
    using Error::Error;
};

// A confusion set larger than the packing size limit.
class InfeasibleSetError : public Error {
public:
    InfeasibleSetError(std::size_t set_index, const std::string& what)
        : Error(what), set_index_(set_index) {}
    std::size_t set_index() const noexcept { return set_index_; }

private:
    std::size_t set_index_;
};

class InstanceTooLarge : public Error {
public:
    using Error::Error;
};

// Malformed text input. `location` is a row number, byte offset or JSON
// pointer depending on the source; it is also embedded in what().
class ParseError : public Error {
public:
    ParseError(std::string location, std::string message)
        : Error(location.empty() ? message : location + ": " + message),
          location_(std::move(location)),
          message_(std::move(message)) {}
    const std::string& location() const noexcept { return location_; }
    const std::string& message() const noexcept { return message_; }

private:
    std::string location_;
    std::string message_;
};

// Binary container violations (IDX magic, header counts).
class FormatError : public Error {
public:
    using Error::Error;
};

class StratificationError : public Error {
public:
    using Error::Error;
};

}  // namespace conftree
