#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace lesionkit::csv {

using Row = std::vector<std::string>;

//! Parsed CSV document. `line_numbers[i]` is the 1-based source line of
//! `rows[i]`, for error messages.
struct Document
{
  Row header;
  std::vector<Row> rows;
  std::vector<std::size_t> line_numbers;
};

// Minimal RFC 4180 reader: quoted fields, doubled quotes, CRLF tolerated.
// Blank lines and lines starting with '#' are skipped.
Document parse(std::string_view text);
Document read_file(const std::filesystem::path& path);

//! Reads the file and checks the header matches `expected` exactly.
Document read_with_header(const std::filesystem::path& path,
                          const std::vector<std::string>& expected);

std::string escape(std::string_view field);
std::string join(const Row& fields);

//! Shortest round-trip decimal representation.
std::string format_double(double value);
//! Strict parse of a whole field; throws InputError naming `what`.
double parse_double(std::string_view field, std::string_view what);

std::string read_text(const std::filesystem::path& path);
std::vector<unsigned char> read_bytes(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);

} // namespace lesionkit::csv
