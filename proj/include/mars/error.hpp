#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace mars {

// Base of every error raised by the library. `kind()` is a stable short tag
// used by the CLI to map failures onto exit codes.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
    virtual const char* kind() const noexcept { return "error"; }
};

class DimensionError : public Error {
public:
    DimensionError(std::size_t expected, std::size_t got, const std::string& context)
        : Error(context + ": dimension mismatch (expected " + std::to_string(expected) +
                ", got " + std::to_string(got) + ")"),
          expected_(expected), got_(got) {}
    const char* kind() const noexcept override { return "dimension"; }
    std::size_t expected() const noexcept { return expected_; }
    std::size_t got() const noexcept { return got_; }

private:
    std::size_t expected_;
    std::size_t got_;
};

class EmptyInputError : public Error {
public:
    explicit EmptyInputError(const std::string& what) : Error(what) {}
    const char* kind() const noexcept override { return "empty_input"; }
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(what) {}
    const char* kind() const noexcept override { return "config"; }
};

// Non-finite loss or gradient during training.
class DivergenceError : public Error {
public:
    explicit DivergenceError(std::size_t step)
        : Error("training diverged: non-finite loss or gradient at step " + std::to_string(step)),
          step_(step) {}
    const char* kind() const noexcept override { return "divergence"; }
    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

class AugmentError : public Error {
public:
    AugmentError(const std::string& tuple_id, const std::string& reason)
        : Error("augmentation failed for tuple '" + tuple_id + "': " + reason), tuple_id_(tuple_id) {}
    const char* kind() const noexcept override { return "augment"; }
    const std::string& tuple_id() const noexcept { return tuple_id_; }

private:
    std::string tuple_id_;
};

// Malformed dataset content. `line()` is 1-based, 0 when not line-specific.
class DataError : public Error {
public:
    DataError(const std::string& path, std::size_t line, const std::string& reason)
        : Error(path + (line > 0 ? ":" + std::to_string(line) : std::string()) + ": " + reason),
          line_(line) {}
    const char* kind() const noexcept override { return "data"; }
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class IoError : public Error {
public:
    IoError(const std::string& path, const std::string& reason)
        : Error(path + ": " + reason), path_(path) {}
    const char* kind() const noexcept override { return "io"; }
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

// A precondition of the mixture curvature bound (margin regime or feature diversity) does not hold.
class AssumptionError : public Error {
public:
    AssumptionError(std::string inequality, std::vector<std::string> offending_ids)
        : Error(describe(inequality, offending_ids)),
          inequality_(std::move(inequality)), offending_ids_(std::move(offending_ids)) {}
    const char* kind() const noexcept override { return "assumption"; }
    const std::string& inequality() const noexcept { return inequality_; }
    const std::vector<std::string>& offending_ids() const noexcept { return offending_ids_; }

private:
    static std::string describe(const std::string& inequality, const std::vector<std::string>& ids) {
        std::string msg = "assumption violated: " + inequality;
        if (!ids.empty()) {
            msg += " (offending tuples:";
            const std::size_t shown = ids.size() < 8 ? ids.size() : 8;
            for (std::size_t i = 0; i < shown; ++i) msg += " " + ids[i];
            if (ids.size() > shown) msg += " ... +" + std::to_string(ids.size() - shown) + " more";
            msg += ")";
        }
        return msg;
    }

    std::string inequality_;
    std::vector<std::string> offending_ids_;
};

}  // namespace mars
