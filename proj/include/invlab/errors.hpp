// Copyright (C) 2026 The invlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace invlab {

// Invalid constructor / operation parameter. The message names the field.
class ParameterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class IndexError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A caller violated an interface contract (unsupported conditioning, missing
// ground truth, non-scalar tape output, ...).
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InversionError : public NumericError {
public:
    InversionError(const std::string& what, int timestep, int round, double l_ref, double l_fix)
        : NumericError(what), timestep_(timestep), round_(round), l_ref_(l_ref), l_fix_(l_fix) {}

    int timestep() const noexcept { return timestep_; }
    int round() const noexcept { return round_; }
    double l_ref() const noexcept { return l_ref_; }
    double l_fix() const noexcept { return l_fix_; }

private:
    int timestep_;
    int round_;
    double l_ref_;
    double l_fix_;
};

class TrainingError : public NumericError {
public:
    TrainingError(const std::string& what, int epoch) : NumericError(what), epoch_(epoch) {}
    int epoch() const noexcept { return epoch_; }

private:
    int epoch_;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class FileError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace invlab
