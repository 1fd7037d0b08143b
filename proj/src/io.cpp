#include "ncreg/io.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "ncreg/parallel.hpp"

namespace ncreg {

namespace {

struct Token {
  std::string text;
  int line;
  int column;
};

// Whitespace (and optionally comma) separated tokens, one vector per
// non-empty line.
std::vector<std::vector<Token>> tokenize(const std::string& text, bool commas) {
  std::vector<std::vector<Token>> rows;
  int line = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    ++line;
    std::vector<Token> row;
    std::size_t i = pos;
    while (i < end) {
      const char ch = text[i];
      if (ch == ' ' || ch == '\t' || ch == '\r' || (commas && ch == ',')) {
        ++i;
        continue;
      }
      const std::size_t start = i;
      while (i < end && text[i] != ' ' && text[i] != '\t' && text[i] != '\r' && !(commas && text[i] == ',')) ++i;
      row.push_back({text.substr(start, i - start), line, static_cast<int>(start - pos) + 1});
    }
    if (!row.empty()) rows.push_back(std::move(row));
    pos = end + 1;
  }
  return rows;
}

bool parse_double(const std::string& s, double& v) {
  if (s.empty()) return false;
  errno = 0;
  char* end = nullptr;
  v = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size() && errno != ERANGE && std::isfinite(v);
}

double token_value(const Token& t, const std::string& file) {
  double v;
  if (!parse_double(t.text, v)) throw TextTableError(file, t.line, t.column, "'" + t.text + "' is not a finite number");
  return v;
}

std::string trim(const std::string& s) {
  const std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::string format_number(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

const char* to_string(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::Internal:
      return "internal";
    case ErrorCategory::Usage:
      return "usage";
    case ErrorCategory::Config:
      return "config";
    case ErrorCategory::Input:
      return "input";
    case ErrorCategory::Output:
      return "output";
  }
  return "unknown";
}

TextTableError::TextTableError(const std::string& file, int line, int column, const std::string& what)
    : std::runtime_error(file + (line > 0 ? ":" + std::to_string(line) : "") +
                         (column > 0 ? ":" + std::to_string(column) : "") + ": " + what),
      line_(line),
      column_(column) {}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CliError(ErrorCategory::Input, "cannot open '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

GradientScheme parse_gradient_table(const std::string& bvals_text, const std::string& bvecs_text,
                                    std::vector<std::string>* warnings, const std::string& bvals_name,
                                    const std::string& bvecs_name) {
  const auto warn = [&](const std::string& w) {
    if (warnings) warnings->push_back(w);
  };

  std::vector<double> b;
  for (const auto& row : tokenize(bvals_text, false))
    for (const Token& t : row) b.push_back(token_value(t, bvals_name));
  if (b.empty()) throw TextTableError(bvals_name, 0, 0, "no b-values");
  const int n = static_cast<int>(b.size());

  const auto rows = tokenize(bvecs_text, false);
  std::vector<std::vector<double>> vals;
  for (const auto& row : rows) {
    std::vector<double> r;
    for (const Token& t : row) r.push_back(token_value(t, bvecs_name));
    vals.push_back(std::move(r));
  }

  GradientScheme s;
  s.b = Eigen::Map<const Vec>(b.data(), n);
  s.g = Mat::Zero(n, 3);
  const bool fsl = vals.size() == 3 && vals[0].size() == vals[1].size() && vals[1].size() == vals[2].size();
  bool transposed = !fsl && !vals.empty();
  for (const auto& r : vals) transposed = transposed && r.size() == 3;
  if (fsl) {
    const int cols = static_cast<int>(vals[0].size());
    if (cols != n) {
      throw TextTableError(bvecs_name, 0, 0,
                           std::to_string(n) + " b-values but " + std::to_string(cols) + " bvec columns");
    }
    for (int k = 0; k < 3; ++k)
      for (int i = 0; i < n; ++i) s.g(i, k) = vals[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)];
  } else if (transposed) {
    if (static_cast<int>(vals.size()) != n) {
      throw TextTableError(bvecs_name, 0, 0,
                           std::to_string(n) + " b-values but " + std::to_string(vals.size()) + " bvec rows");
    }
    warn(bvecs_name + ": read as " + std::to_string(n) + " rows of 3 (transposed FSL layout)");
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < 3; ++k) s.g(i, k) = vals[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
  } else {
    std::string shape;
    for (const auto& r : vals) shape += (shape.empty() ? "" : ", ") + std::to_string(r.size());
    throw TextTableError(bvecs_name, 0, 0,
                         "expected 3 rows of " + std::to_string(n) + " values, found " +
                             std::to_string(vals.size()) + " rows of lengths (" + shape + ")");
  }

  for (int i = 0; i < n; ++i) {
    if (s.b(i) < 0.0) {
      throw TextTableError(bvals_name, 0, 0, "b-value " + std::to_string(i + 1) + " is negative (" + format_number(s.b(i)) + ")");
    }
    if (s.b(i) == 0.0) continue;
    const double norm = s.g.row(i).norm();
    if (norm == 0.0) {
      warn("measurement " + std::to_string(i + 1) + ": b = " + format_number(s.b(i)) +
           " with a zero direction, treated as b = 0");
      s.b(i) = 0.0;
      continue;
    }
    if (std::abs(norm - 1.0) > 1e-3) {
      warn("measurement " + std::to_string(i + 1) + ": direction norm " + format_number(norm) + " normalized to 1");
    }
    s.g.row(i) /= norm;
  }
  return s;
}

GradientScheme read_gradient_table(const std::string& bvals_path, const std::string& bvecs_path,
                                   std::vector<std::string>* warnings) {
  return parse_gradient_table(read_text_file(bvals_path), read_text_file(bvecs_path), warnings, bvals_path,
                              bvecs_path);
}

int CsvTable::column(const std::string& name) const {
  for (std::size_t j = 0; j < header.size(); ++j)
    if (header[j] == name) return static_cast<int>(j);
  return -1;
}

CsvTable parse_csv_table(const std::string& text, const std::string& name) {
  std::vector<std::string> lines;
  std::vector<int> numbers;
  {
    std::istringstream in(text);
    std::string line;
    int k = 0;
    while (std::getline(in, line)) {
      ++k;
      if (trim(line).empty() || trim(line)[0] == '#') continue;
      lines.push_back(line);
      numbers.push_back(k);
    }
  }
  if (lines.empty()) throw TextTableError(name, 0, 0, "empty table");
  CsvTable t;
  {
    std::stringstream ss(lines[0]);
    std::string cell;
    while (std::getline(ss, cell, ',')) t.header.push_back(trim(cell));
  }
  const int cols = static_cast<int>(t.header.size());
  t.values.resize(static_cast<Eigen::Index>(lines.size() - 1), cols);
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const std::string& line = lines[r];
    int c = 0;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      const std::string cell = line.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
      if (c >= cols) {
        throw TextTableError(name, numbers[r], static_cast<int>(start) + 1,
                             "more than " + std::to_string(cols) + " fields");
      }
      double v;
      if (!parse_double(trim(cell), v)) {
        throw TextTableError(name, numbers[r], static_cast<int>(start) + 1,
                             "'" + trim(cell) + "' is not a finite number");
      }
      t.values(static_cast<Eigen::Index>(r - 1), c++) = v;
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (c != cols) {
      throw TextTableError(name, numbers[r], 0,
                           std::to_string(c) + " fields, header has " + std::to_string(cols));
    }
  }
  return t;
}

CsvTable read_csv_table(const std::string& path) { return parse_csv_table(read_text_file(path), path); }

NoiseModel RunConfig::noise_model() const {
  try {
    return parse_noise_model(model, coils);
  } catch (const std::exception& e) {
    throw CliError(ErrorCategory::Config, std::string("model: ") + e.what());
  }
}

int RunConfig::resolved_workers() const { return workers > 0 ? workers : default_workers(); }

namespace {

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const std::string& expected) {
  throw CliError(ErrorCategory::Config, "config key '" + key + "': '" + value + "' is not " + expected);
}

long long to_integer(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  char* end = nullptr;
  errno = 0;
  const long long x = std::strtoll(v.c_str(), &end, 10);
  if (v.empty() || end != v.c_str() + v.size() || errno == ERANGE) bad_value(key, value, "an integer");
  return x;
}

int to_int(const std::string& key, const std::string& value) {
  const long long x = to_integer(key, value);
  if (x < -2147483647LL || x > 2147483647LL) bad_value(key, value, "a 32-bit integer");
  return static_cast<int>(x);
}

double to_double(const std::string& key, const std::string& value) {
  double v;
  if (!parse_double(trim(value), v)) bad_value(key, value, "a finite number");
  return v;
}

bool to_bool(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  if (v == "on" || v == "true" || v == "1" || v == "yes") return true;
  if (v == "off" || v == "false" || v == "0" || v == "no") return false;
  bad_value(key, value, "on/off");
}

std::vector<double> to_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  std::stringstream ss(value);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(to_double(key, cell));
  if (out.empty()) bad_value(key, value, "a comma-separated list of numbers");
  return out;
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"input.volume", [](RunConfig& c, const std::string&, const std::string& v) { c.volume = trim(v); }},
      {"input.bvals", [](RunConfig& c, const std::string&, const std::string& v) { c.bvals = trim(v); }},
      {"input.bvecs", [](RunConfig& c, const std::string&, const std::string& v) { c.bvecs = trim(v); }},
      {"input.mask", [](RunConfig& c, const std::string&, const std::string& v) { c.mask = trim(v); }},
      {"input.series", [](RunConfig& c, const std::string&, const std::string& v) { c.series = trim(v); }},
      {"input.voxel",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         const std::vector<double> ijk = to_list(k, v);
         if (ijk.size() != 3) bad_value(k, v, "three indices i,j,k");
         std::array<int, 3> idx{};
         for (int d = 0; d < 3; ++d) {
           if (ijk[static_cast<std::size_t>(d)] != std::floor(ijk[static_cast<std::size_t>(d)]))
             bad_value(k, v, "three integer indices");
           idx[static_cast<std::size_t>(d)] = static_cast<int>(ijk[static_cast<std::size_t>(d)]);
         }
         c.voxel = idx;
       }},
      {"model.family",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         const std::string f = trim(v);
         if (f != "rician" && f != "ncchi" && f != "gaussian") bad_value(k, v, "one of rician, ncchi, gaussian");
         c.model = f;
       }},
      {"model.coils", [](RunConfig& c, const std::string& k, const std::string& v) { c.coils = to_int(k, v); }},
      {"model.hetero", [](RunConfig& c, const std::string& k, const std::string& v) { c.hetero = to_bool(k, v); }},
      {"prior.d", [](RunConfig& c, const std::string& k, const std::string& v) { c.prior_d = to_double(k, v); }},
      {"prior.c", [](RunConfig& c, const std::string& k, const std::string& v) { c.prior_c = to_double(k, v); }},
      {"prior.pi", [](RunConfig& c, const std::string& k, const std::string& v) { c.prior_pi = to_double(k, v); }},
      {"sampler.iters",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.sampler.n_iter = to_int(k, v); }},
      {"sampler.burn",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.sampler.n_burn = to_int(k, v); }},
      {"sampler.newton_steps",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.sampler.newton_steps = to_int(k, v); }},
      {"sampler.t_dof",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.sampler.t_dof = to_double(k, v); }},
      {"sampler.vs_subset",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.sampler.vs_subset_size = to_int(k, v); }},
      {"run.seed",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         const long long s = to_integer(k, v);
         if (s < 0) bad_value(k, v, "a non-negative integer");
         c.seed = static_cast<std::uint64_t>(s);
       }},
      {"run.workers", [](RunConfig& c, const std::string& k, const std::string& v) { c.workers = to_int(k, v); }},
      {"run.out", [](RunConfig& c, const std::string&, const std::string& v) { c.out = trim(v); }},
      {"dti.b0_threshold",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.b0_threshold = to_double(k, v); }},
      {"fmri.datasets",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.fmri_datasets = to_int(k, v); }},
      {"fmri.snr", [](RunConfig& c, const std::string& k, const std::string& v) { c.fmri_snr = to_list(k, v); }},
      {"fmri.thresholds",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.fmri_thresholds = to_list(k, v); }},
      {"fmri.variable_selection",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.fmri_variable_selection = to_bool(k, v); }},
      {"compare.max_voxels",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.max_voxels = to_int(k, v); }},
  };
  return table;
}

}  // namespace

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
  const auto it = setters().find(key);
  if (it == setters().end()) throw CliError(ErrorCategory::Config, "unknown config key '" + key + "'");
  it->second(cfg, key, value);
  cfg.explicitly_set.insert(key);
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, fn] : setters()) k.push_back(name);
    return k;
  }();
  return keys;
}

RunConfig load_run_config(const std::string& path) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(path, tree);
  } catch (const pt::ini_parser_error& e) {
    throw CliError(ErrorCategory::Config, e.what());
  }
  RunConfig cfg;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw CliError(ErrorCategory::Config, path + ": key '" + section + "' is outside a [section]");
    }
    for (const auto& [key, leaf] : body) apply_setting(cfg, section + "." + key, leaf.data());
  }
  return cfg;
}

RunConfig resolve_run_config(const std::string& config_path,
                             const std::vector<std::pair<std::string, std::string>>& overrides) {
  RunConfig cfg = config_path.empty() ? RunConfig{} : load_run_config(config_path);
  for (const auto& [key, value] : overrides) apply_setting(cfg, key, value);
  return cfg;
}

}  // namespace ncreg
