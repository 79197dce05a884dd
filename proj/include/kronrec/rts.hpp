#pragma once

// Text serialization of return sets.
//
//   RTS v1 <n_lo> <n_hi> <count>
//   # provenance line (optional, repeatable)
//   <hex run lengths, space separated, alternating, starting with a run of zeros>

#include "kronrec/orbit.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>

namespace kronrec {

void write_rts(std::ostream& out, const ReturnSet& R);
std::string to_rts(const ReturnSet& R);
/// Throws kronrec::Error on malformed input or a count mismatch.
ReturnSet read_rts(std::istream& in);
ReturnSet parse_rts(const std::string& text);

void save_rts(const std::filesystem::path& path, const ReturnSet& R);
ReturnSet load_rts(const std::filesystem::path& path);

/// One integer per line; blank lines and '#' comments are skipped. The window
/// defaults to [min, max] of the listed integers.
ReturnSet read_integer_list(std::istream& in, std::optional<Window> window = std::nullopt);

}  // namespace kronrec
