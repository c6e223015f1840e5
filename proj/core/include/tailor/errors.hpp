// SPDX-FileCopyrightText: (c) 2026 tailor contributors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace tailor {

// Root of the project exception hierarchy. Every failure the library raises
// derives from Error so callers can catch one type at the boundary.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Caller passed arguments that violate a documented precondition, or a config
// file is structurally invalid. Maps to process exit code 2.
class PreconditionViolation : public Error {
public:
    using Error::Error;
};

class ConfigError : public PreconditionViolation {
public:
    using PreconditionViolation::PreconditionViolation;
};

class IoError : public Error {
public:
    using Error::Error;
};

// Endpoint unreachable or still failing after the retry budget. Exit code 3.
class BackendUnavailable : public Error {
public:
    using Error::Error;
};

// Endpoint answered with a payload we cannot interpret. Exit code 3.
class MalformedResponse : public Error {
public:
    using Error::Error;
};

class FixtureParseError : public MalformedResponse {
public:
    using MalformedResponse::MalformedResponse;
};

// Data-shape failures: the inputs were readable but statistically unusable.
// All map to exit code 4.
class DegenerateData : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public DegenerateData {
public:
    using DegenerateData::DegenerateData;
};

class DegenerateMatrix : public DegenerateData {
public:
    using DegenerateData::DegenerateData;
};

class InsufficientItems : public DegenerateData {
public:
    using DegenerateData::DegenerateData;
};

class InsufficientDrafts : public DegenerateData {
public:
    using DegenerateData::DegenerateData;
};

class QuartilesDegenerate : public DegenerateData {
public:
    using DegenerateData::DegenerateData;
};

class InsufficientDemoPool : public DegenerateData {
public:
    using DegenerateData::DegenerateData;
};

class MixedQuestionIds : public DegenerateData {
public:
    using DegenerateData::DegenerateData;
};

class MissingScoreSet : public DegenerateData {
public:
    using DegenerateData::DegenerateData;
};

class NonFiniteInput : public PreconditionViolation {
public:
    using PreconditionViolation::PreconditionViolation;
};

// Exit code a CLI process should use for a given failure.
//   2 = bad config or precondition, 3 = backend trouble, 4 = degenerate data.
int exit_code_for(const std::exception& e);

}  // namespace tailor
