#include "lesionkit/csv.hpp"
#include "lesionkit/error.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace lesionkit::csv {

Document
parse(std::string_view text)
{
  Document doc;
  std::size_t line = 1;
  std::size_t pos = 0;
  bool have_header = false;

  while (pos < text.size()) {
    std::size_t row_line = line;
    // skip blank and comment lines
    if (text[pos] == '\n' || text[pos] == '\r' || text[pos] == '#') {
      while (pos < text.size() && text[pos] != '\n')
        ++pos;
      ++pos;
      ++line;
      continue;
    }

    Row row;
    std::string field;
    bool in_quotes = false;
    for (;;) {
      if (pos >= text.size()) {
        if (in_quotes)
          throw InputError("csv: unterminated quoted field at line " +
                           std::to_string(row_line));
        row.push_back(std::move(field));
        break;
      }
      char c = text[pos++];
      if (in_quotes) {
        if (c == '"') {
          if (pos < text.size() && text[pos] == '"') {
            field.push_back('"');
            ++pos;
          } else {
            in_quotes = false;
          }
        } else {
          if (c == '\n')
            ++line;
          field.push_back(c);
        }
      } else if (c == '"') {
        in_quotes = true;
      } else if (c == ',') {
        row.push_back(std::move(field));
        field.clear();
      } else if (c == '\r') {
        // tolerated before '\n'
      } else if (c == '\n') {
        ++line;
        row.push_back(std::move(field));
        break;
      } else {
        field.push_back(c);
      }
    }

    if (!have_header) {
      doc.header = std::move(row);
      have_header = true;
    } else {
      doc.rows.push_back(std::move(row));
      doc.line_numbers.push_back(row_line);
    }
  }
  return doc;
}

std::string
read_text(const std::filesystem::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw InputError("cannot open file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad())
    throw InputError("read failure: " + path.string());
  return ss.str();
}

std::vector<unsigned char>
read_bytes(const std::filesystem::path& path)
{
  std::string text = read_text(path);
  return { text.begin(), text.end() };
}

void
write_text(const std::filesystem::path& path, std::string_view text)
{
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw InputError("cannot write file: " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out)
    throw Error("write failure: " + path.string());
}

Document
read_file(const std::filesystem::path& path)
{
  return parse(read_text(path));
}

Document
read_with_header(const std::filesystem::path& path,
                 const std::vector<std::string>& expected)
{
  Document doc = read_file(path);
  if (doc.header != expected) {
    std::string want;
    for (std::size_t i = 0; i < expected.size(); ++i)
      want += (i ? "," : "") + expected[i];
    throw InputError(path.string() + ": expected header `" + want + "`");
  }
  for (std::size_t i = 0; i < doc.rows.size(); ++i) {
    if (doc.rows[i].size() != expected.size())
      throw InputError(path.string() + ": line " +
                       std::to_string(doc.line_numbers[i]) + ": expected " +
                       std::to_string(expected.size()) + " columns, got " +
                       std::to_string(doc.rows[i].size()));
  }
  return doc;
}

std::string
escape(std::string_view field)
{
  if (field.find_first_of(",\"\n\r") == std::string_view::npos)
    return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"')
      out += "\"\"";
    else
      out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string
join(const Row& fields)
{
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i)
      out.push_back(',');
    out += escape(fields[i]);
  }
  return out;
}

std::string
format_double(double value)
{
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

double
parse_double(std::string_view field, std::string_view what)
{
  double value = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  if (first != last && *first == '+')
    ++first;
  auto res = std::from_chars(first, last, value);
  if (field.empty() || res.ec != std::errc() || res.ptr != last)
    throw InputError(std::string(what) + ": not a number: \"" +
                     std::string(field) + "\"");
  return value;
}

} // namespace lesionkit::csv
