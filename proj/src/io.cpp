#include "bmcmc/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace bmcmc::io {

namespace {

std::string describe(const std::string& source, std::size_t line, const std::string& message) {
  if (line == 0) return source + ": " + message;
  return source + ":" + std::to_string(line) + ": " + message;
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <typename T>
std::optional<T> parse_number(std::string_view s) {
  T value{};
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, value);
  if (ec != std::errc{} || ptr != end || s.empty()) return std::nullopt;
  return value;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), 0, "cannot open file");
  return in;
}

}  // namespace

ParseError::ParseError(std::string source, std::size_t line, const std::string& message)
    : std::runtime_error(describe(source, line, message)), source_(std::move(source)), line_(line) {}

std::string format_double(double x) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ec == std::errc{} ? ptr : buf);
}

RatingMatrix parse_counts_csv(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t line_no = 0;
  std::size_t n_responses = 0;
  std::vector<std::int64_t> counts;
  std::size_t n_rows = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = trim(line);
    if (text.empty()) continue;
    const auto fields = split(text, ',');
    if (!have_header) {
      if (fields.size() < 3 || fields[0] != "stimulus") {
        throw ParseError(source, line_no, "expected header 'stimulus,r1,...,r{M+1}' with M >= 1");
      }
      for (std::size_t i = 1; i < fields.size(); ++i) {
        if (fields[i] != "r" + std::to_string(i)) {
          throw ParseError(source, line_no,
                           "header column " + std::to_string(i + 1) + " should be r" + std::to_string(i));
        }
      }
      n_responses = fields.size() - 1;
      have_header = true;
      continue;
    }
    if (fields.size() != n_responses + 1) {
      throw ParseError(source, line_no,
                       "expected " + std::to_string(n_responses + 1) + " fields, found " +
                           std::to_string(fields.size()));
    }
    const auto stimulus = parse_number<std::int64_t>(fields[0]);
    if (!stimulus || *stimulus != static_cast<std::int64_t>(n_rows + 1)) {
      throw ParseError(source, line_no, "stimulus index should be " + std::to_string(n_rows + 1));
    }
    for (std::size_t i = 1; i < fields.size(); ++i) {
      const auto c = parse_number<std::int64_t>(fields[i]);
      if (!c || *c < 0) {
        throw ParseError(source, line_no,
                         "count '" + std::string(fields[i]) + "' is not a non-negative integer");
      }
      counts.push_back(*c);
    }
    ++n_rows;
  }
  if (!have_header) throw ParseError(source, 0, "empty counts file");
  if (n_rows == 0) throw ParseError(source, 0, "no stimulus rows");
  try {
    return RatingMatrix(n_rows, n_responses, std::move(counts));
  } catch (const std::invalid_argument& e) {
    throw ParseError(source, 0, e.what());
  }
}

RatingMatrix read_counts_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_counts_csv(in, path.string());
}

void write_counts_csv(std::ostream& out, const RatingMatrix& data) {
  out << "stimulus";
  for (std::size_t i = 0; i < data.n_responses(); ++i) out << ",r" << i + 1;
  out << '\n';
  for (std::size_t h = 0; h < data.n_stimuli(); ++h) {
    out << h + 1;
    for (std::size_t i = 0; i < data.n_responses(); ++i) out << ',' << data.count(h, i);
    out << '\n';
  }
}

namespace {

struct Entry {
  double value;
  bool free;
  std::size_t line;
};

// "muS[3]" -> ("muS", 3)
std::optional<std::pair<std::string, std::size_t>> split_name(std::string_view name) {
  const auto open = name.find('[');
  if (open == std::string_view::npos || name.back() != ']') return std::nullopt;
  const auto index = parse_number<std::size_t>(name.substr(open + 1, name.size() - open - 2));
  if (!index || *index == 0) return std::nullopt;
  std::string block(name.substr(0, open));
  if (block != "muS" && block != "sigS" && block != "muC" && block != "sigC") return std::nullopt;
  return std::pair{block, *index};
}

}  // namespace

CJParameters parse_parameter_file(std::istream& in, const std::string& source) {
  std::map<std::string, std::map<std::size_t, Entry>> blocks;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view text = line;
    if (const auto hash = text.find('#'); hash != std::string_view::npos) text = text.substr(0, hash);
    text = trim(text);
    if (text.empty()) continue;
    std::istringstream fields{std::string(text)};
    std::string name;
    std::string value_text;
    std::string status;
    std::string extra;
    fields >> name >> value_text >> status;
    if (status.empty() || (fields >> extra)) {
      throw ParseError(source, line_no, "expected 'name value free|fixed'");
    }
    const auto key = split_name(name);
    if (!key) {
      throw ParseError(source, line_no,
                       "unknown parameter '" + name + "' (expected muS[h], sigS[h], muC[i], sigC[i])");
    }
    const auto value = parse_number<double>(value_text);
    if (!value || !std::isfinite(*value)) {
      throw ParseError(source, line_no, "value '" + value_text + "' is not a finite number");
    }
    if (status != "free" && status != "fixed") {
      throw ParseError(source, line_no, "status '" + status + "' should be free or fixed");
    }
    const auto [block, index] = *key;
    if ((key->first == "sigS" || key->first == "sigC") && *value <= 0.0) {
      throw ParseError(source, line_no, name + " must be positive");
    }
    auto& slot = blocks[block];
    if (const auto it = slot.find(index); it != slot.end()) {
      throw ParseError(source, line_no,
                       name + " already given on line " + std::to_string(it->second.line));
    }
    slot.emplace(index, Entry{*value, status == "free", line_no});
  }

  auto count_of = [&](const std::string& block) -> std::size_t {
    const auto it = blocks.find(block);
    if (it == blocks.end() || it->second.empty()) return 0;
    return it->second.rbegin()->first;
  };
  const std::size_t n = count_of("muS");
  const std::size_t m = count_of("muC");
  if (n == 0) throw ParseError(source, 0, "no muS entries");
  if (m == 0) throw ParseError(source, 0, "no muC entries");
  if (count_of("sigS") > n) throw ParseError(source, 0, "sigS index beyond the last muS");
  if (count_of("sigC") > m) throw ParseError(source, 0, "sigC index beyond the last muC");

  CJParameters p;
  p.signal_means.assign(n, 0.0);
  p.signal_sigmas.assign(n, 1.0);
  p.criterion_means.assign(m, 0.0);
  p.criterion_sigmas.assign(m, 1.0);
  p.free_mask.assign(p.size(), false);
  auto fill = [&](const std::string& block, std::vector<double>& values, std::size_t offset,
                  bool required) {
    const auto& entries = blocks[block];
    for (std::size_t k = 1; k <= values.size(); ++k) {
      const auto it = entries.find(k);
      if (it == entries.end()) {
        if (required) throw ParseError(source, 0, "missing " + block + "[" + std::to_string(k) + "]");
        continue;
      }
      values[k - 1] = it->second.value;
      p.free_mask[offset + k - 1] = it->second.free;
    }
  };
  fill("muS", p.signal_means, 0, true);
  fill("sigS", p.signal_sigmas, n, false);
  fill("muC", p.criterion_means, 2 * n, true);
  fill("sigC", p.criterion_sigmas, 2 * n + m, false);
  return p;
}

CJParameters read_parameter_file(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_parameter_file(in, path.string());
}

void write_parameter_file(std::ostream& out, const CJParameters& params) {
  const auto flat = params.flatten();
  for (std::size_t k = 0; k < flat.size(); ++k) {
    out << params.name(k) << ' ' << format_double(flat[k]) << ' '
        << (params.free_mask[k] ? "free" : "fixed") << '\n';
  }
}

CJParameters adapt_to_variant(CJParameters params, ModelVariant variant) {
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (!is_model_parameter(params, variant, k)) params.free_mask[k] = false;
  }
  return params;
}

void write_samples_csv(std::ostream& out, std::span<const ParameterPoint> samples,
                       std::span<const std::string> names) {
  out << "index,log_density";
  for (const auto& n : names) out << ',' << n;
  out << '\n';
  for (std::size_t s = 0; s < samples.size(); ++s) {
    out << s << ',' << format_double(samples[s].log_density);
    for (double v : samples[s].values) out << ',' << format_double(v);
    out << '\n';
  }
}

void write_trace_csv(std::ostream& out, std::span<const StepRecord> trace) {
  out << "iteration,log_density,lambda,temperature,accepted\n";
  for (const auto& r : trace) {
    out << r.iteration << ',' << format_double(r.log_density) << ',' << format_double(r.lambda)
        << ',' << format_double(r.temperature) << ',' << (r.accepted ? 1 : 0) << '\n';
  }
}

std::filesystem::path sidecar_path(const std::filesystem::path& counts_path) {
  auto p = counts_path;
  p.replace_extension(".json");
  return p;
}

std::string simulation_sidecar_json(const SimulationRecord& record) {
  nlohmann::ordered_json j;
  j["variant"] = std::string(to_string(record.variant));
  j["seed"] = record.seed;
  j["trials_per_stimulus"] = record.trials;
  j["n_stimuli"] = record.generating.n_stimuli();
  j["n_criteria"] = record.generating.n_criteria();
  auto& gen = j["generating"];
  gen = nlohmann::ordered_json::array();
  const auto flat = record.generating.flatten();
  for (std::size_t k = 0; k < flat.size(); ++k) {
    gen.push_back({{"name", record.generating.name(k)},
                   {"value", flat[k]},
                   {"free", static_cast<bool>(record.generating.free_mask[k])}});
  }
  return j.dump(2) + "\n";
}

std::optional<SimulationRecord> read_simulation_sidecar(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) return std::nullopt;
  auto in = open_input(path);
  try {
    const auto j = nlohmann::json::parse(in);
    SimulationRecord r;
    const auto variant = parse_variant(j.at("variant").get<std::string>());
    if (!variant) throw ParseError(path.string(), 0, "unknown variant");
    r.variant = *variant;
    r.seed = j.at("seed").get<std::uint64_t>();
    r.trials = j.at("trials_per_stimulus").get<std::int64_t>();
    std::ostringstream text;
    for (const auto& e : j.at("generating")) {
      text << e.at("name").get<std::string>() << ' ' << format_double(e.at("value").get<double>())
           << ' ' << (e.at("free").get<bool>() ? "free" : "fixed") << '\n';
    }
    std::istringstream back(text.str());
    r.generating = parse_parameter_file(back, path.string());
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string(), 0, e.what());
  }
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

}  // namespace bmcmc::io
