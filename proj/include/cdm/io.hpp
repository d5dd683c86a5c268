#pragma once

#include <filesystem>
#include <istream>
#include <stdexcept>
#include <string>

#include "cdm/ideal_response.hpp"
#include "cdm/latent.hpp"

namespace cdm {

// Malformed file contents (bad tokens, ragged rows, empty files).
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Headerless CSV of 0/1 integers; blank lines are ignored, CRLF accepted.
BinaryMatrix parse_binary_csv(std::istream& in, const std::string& source);
BinaryMatrix read_binary_csv(const std::filesystem::path& path);

QMatrix read_qmatrix(const std::filesystem::path& path);
ResponseMatrix read_responses(const std::filesystem::path& path);

// One row per item type, 2^m probabilities per row (rows may differ in length).
GdinaTable parse_gdina_table(std::istream& in, const std::string& source);
GdinaTable read_gdina_table(const std::filesystem::path& path);

void write_binary_csv(const BinaryMatrix& m, std::ostream& out);

// Writes via a sibling temporary file and renames it into place, so readers
// never observe a partially written file.
void write_file_atomically(const std::filesystem::path& path,
                           const std::string& contents);

}  // namespace cdm
