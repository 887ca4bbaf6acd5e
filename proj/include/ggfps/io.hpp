#pragma once

#include "ggfps/dataset.hpp"

#include <json.hpp>

#include <iosfwd>
#include <string>

namespace ggfps {

/// CSV with header `id,label,grad_norm,x0,...,x{d-1}`; 17 significant digits.
/// The atom layout of molecular sets is not representable in CSV; use JSON.
void write_labeled_set_csv(std::ostream& out, const LabeledSet& set);
LabeledSet read_labeled_set_csv(std::istream& in);

/// {"ids", "labels", "grad_norms", "descriptors", "atom_species"}
nlohmann::json to_json(const LabeledSet& set);
LabeledSet labeled_set_from_json(const nlohmann::json& doc);

/// Picks the format from the extension (.json, otherwise CSV).
LabeledSet load_labeled_set(const std::string& path);
void save_labeled_set(const std::string& path, const LabeledSet& set);

/// Writes `content` to `path`, throwing IoError when the file cannot be written.
void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

/// Dumps a JSON document with a trailing newline; doubles at full precision.
std::string dump_json(const nlohmann::json& doc);

/// Quotes a CSV cell when it contains a comma, a quote or a newline.
std::string csv_cell(const std::string& text);

} // namespace ggfps
