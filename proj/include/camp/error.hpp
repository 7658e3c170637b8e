#pragma once

#include <stdexcept>
#include <string>

namespace camp {

// Root of every error the library throws. Callers that only care about
// "something in camp failed" catch this.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class UnrecognizedVoteToken : public Error {
public:
    explicit UnrecognizedVoteToken(const std::string& token)
        : Error("unrecognized vote token: '" + token + "'"), token_(token) {}
    const std::string& token() const noexcept { return token_; }

private:
    std::string token_;
};

class EmptyColumn : public Error {
public:
    EmptyColumn() : Error("vote column is empty") {}
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

class SchemaError : public Error {
public:
    using Error::Error;
};

// Provider layer.
class ProviderError : public Error {
public:
    using Error::Error;
};

class ProviderExhausted : public ProviderError {
public:
    using ProviderError::ProviderError;
};

class AuthError : public ProviderError {
public:
    using ProviderError::ProviderError;
};

class MalformedProviderResponse : public ProviderError {
public:
    using ProviderError::ProviderError;
};

class MockNoMatch : public ProviderError {
public:
    using ProviderError::ProviderError;
};

// Agent reply parsing.
class ParseFailure : public Error {
public:
    using Error::Error;
};

class JudgeParseFailure : public ParseFailure {
public:
    using ParseFailure::ParseFailure;
};

// Prompt rendering.
class TemplateError : public Error {
public:
    using Error::Error;
};

// Data preparation.
class PoolExhausted : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class UnknownCase : public Error {
public:
    using Error::Error;
};

}  // namespace camp
