#include "ggfps/io.hpp"

#include "ggfps/errors.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace ggfps {

namespace {

std::vector<std::string> split_csv_line(const std::string& line)
{
  std::vector<std::string> out;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cell));
      cell.clear();
    } else if (c != '\r') {
      cell += c;
    }
  }
  out.push_back(std::move(cell));
  return out;
}

double to_double(const std::string& s, std::size_t line)
{
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw ConfigError("csv line " + std::to_string(line) + ": '" + s + "' is not a number");
  return v;
}

bool ends_with(const std::string& s, const std::string& suffix)
{
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

} // namespace

std::string csv_cell(const std::string& text)
{
  if (text.find_first_of(",\"\n") == std::string::npos)
    return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"')
      out += '"';
    out += c;
  }
  out += '"';
  return out;
}

void write_labeled_set_csv(std::ostream& out, const LabeledSet& set)
{
  set.validate();
  out << "id,label,grad_norm";
  for (std::size_t c = 0; c < set.dim(); ++c)
    out << ",x" << c;
  out << '\n';
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    out << csv_cell(set.ids[i]) << ',' << format_double(set.labels[r]) << ','
        << format_double(set.gradient_norms[r]);
    for (Eigen::Index c = 0; c < set.descriptors.cols(); ++c)
      out << ',' << format_double(set.descriptors(r, c));
    out << '\n';
  }
}

LabeledSet read_labeled_set_csv(std::istream& in)
{
  std::string line;
  if (!std::getline(in, line))
    throw ConfigError("csv: missing header");
  const auto header = split_csv_line(line);
  if (header.size() < 3 || header[0] != "id" || header[1] != "label" || header[2] != "grad_norm")
    throw ConfigError("csv: header must start with id,label,grad_norm");
  const std::size_t d = header.size() - 3;
  for (std::size_t c = 0; c < d; ++c)
    if (header[c + 3] != "x" + std::to_string(c))
      throw ConfigError("csv: descriptor column " + std::to_string(c) + " must be named x" +
                        std::to_string(c));

  std::vector<std::string> ids;
  std::vector<double> labels, norms, values;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r")
      continue;
    auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw ConfigError("csv line " + std::to_string(line_no) + ": expected " +
                        std::to_string(header.size()) + " cells");
    ids.push_back(cells[0]);
    labels.push_back(to_double(cells[1], line_no));
    norms.push_back(to_double(cells[2], line_no));
    for (std::size_t c = 0; c < d; ++c)
      values.push_back(to_double(cells[c + 3], line_no));
  }

  LabeledSet set;
  const auto n = static_cast<Eigen::Index>(ids.size());
  set.ids = std::move(ids);
  set.labels = Eigen::Map<const Vector>(labels.data(), n);
  set.gradient_norms = Eigen::Map<const Vector>(norms.data(), n);
  set.descriptors = Eigen::Map<const Matrix>(values.data(), n, static_cast<Eigen::Index>(d));
  set.validate();
  return set;
}

nlohmann::json to_json(const LabeledSet& set)
{
  set.validate();
  nlohmann::json doc;
  doc["ids"] = set.ids;
  doc["labels"] = std::vector<double>(set.labels.begin(), set.labels.end());
  doc["grad_norms"] = std::vector<double>(set.gradient_norms.begin(), set.gradient_norms.end());
  auto rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < set.descriptors.rows(); ++i)
    rows.push_back(std::vector<double>(set.descriptors.row(i).begin(), set.descriptors.row(i).end()));
  doc["descriptors"] = std::move(rows);
  doc["atom_species"] = set.atom_species;
  return doc;
}

LabeledSet labeled_set_from_json(const nlohmann::json& doc)
{
  LabeledSet set;
  set.ids = doc.at("ids").get<std::vector<std::string>>();
  const auto labels = doc.at("labels").get<std::vector<double>>();
  const auto norms = doc.at("grad_norms").get<std::vector<double>>();
  const auto rows = doc.at("descriptors").get<std::vector<std::vector<double>>>();
  const auto n = static_cast<Eigen::Index>(labels.size());
  set.labels = Eigen::Map<const Vector>(labels.data(), n);
  set.gradient_norms = Eigen::Map<const Vector>(norms.data(), static_cast<Eigen::Index>(norms.size()));
  const auto d = rows.empty() ? Eigen::Index{0} : static_cast<Eigen::Index>(rows.front().size());
  set.descriptors.resize(static_cast<Eigen::Index>(rows.size()), d);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (static_cast<Eigen::Index>(rows[i].size()) != d)
      throw ConfigError("json: descriptor rows have unequal lengths");
    for (Eigen::Index c = 0; c < d; ++c)
      set.descriptors(static_cast<Eigen::Index>(i), c) = rows[i][static_cast<std::size_t>(c)];
  }
  if (doc.contains("atom_species"))
    set.atom_species = doc.at("atom_species").get<std::vector<int>>();
  set.validate();
  return set;
}

std::string read_text_file(const std::string& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content)
{
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw IoError("cannot write '" + path + "'");
  out << content;
  if (!out)
    throw IoError("failed writing '" + path + "'");
}

std::string dump_json(const nlohmann::json& doc)
{
  return doc.dump(2) + "\n";
}

LabeledSet load_labeled_set(const std::string& path)
{
  const std::string text = read_text_file(path);
  try {
    if (ends_with(path, ".json"))
      return labeled_set_from_json(nlohmann::json::parse(text));
    std::istringstream in(text);
    return read_labeled_set_csv(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("'" + path + "': " + e.what());
  }
}

void save_labeled_set(const std::string& path, const LabeledSet& set)
{
  if (ends_with(path, ".json")) {
    write_text_file(path, dump_json(to_json(set)));
    return;
  }
  std::ostringstream out;
  write_labeled_set_csv(out, set);
  write_text_file(path, out.str());
}

} // namespace ggfps
