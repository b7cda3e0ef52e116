#pragma once

#include <stdexcept>
#include <string>

namespace lesionkit {

//! Base error for all library failures.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

//! Bad user input: unreadable files, malformed rows, domain violations.
//! The CLI maps this to exit code 2.
class InputError : public Error
{
public:
  using Error::Error;
};

} // namespace lesionkit
