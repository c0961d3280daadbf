#include "rmlab/jsonl.hpp"

#include <fstream>
#include <unordered_set>

#include "json.hpp"

namespace rmlab {

namespace {

using nlohmann::json;

std::string where(const std::string& path, int line) {
  return path + ":" + std::to_string(line);
}

// Validates one parsed line against a closed field set, with typed accessors
// that name the offending field on error.
class Fields {
 public:
  Fields(const json& j, const std::string& path, int line)
      : j_(j), path_(path), line_(line) {
    if (!j.is_object()) throw DataError(where(path, line) + ": record is not a JSON object");
  }

  std::string str(const char* key) {
    mark(key);
    const json& v = fetch(key);
    if (!v.is_string()) throw bad(key, "a string");
    return v.get<std::string>();
  }

  double number(const char* key) {
    mark(key);
    const json& v = fetch(key);
    if (!v.is_number()) throw bad(key, "a number");
    return v.get<double>();
  }

  int bit(const char* key) {
    mark(key);
    const json& v = fetch(key);
    if (!v.is_number_integer()) throw bad(key, "an integer");
    const int b = v.get<int>();
    if (b != 0 && b != 1) throw bad(key, "0 or 1");
    return b;
  }

  std::vector<double> number_array(const char* key) {
    mark(key);
    const json& v = fetch(key);
    if (!v.is_array()) throw bad(key, "an array of numbers");
    std::vector<double> out;
    out.reserve(v.size());
    for (const auto& e : v) {
      if (!e.is_number()) throw bad(key, "an array of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

  // Leftover keys: rejected in strict mode, otherwise returned as a compact
  // JSON object dump (empty string when there are none).
  std::string finish(bool strict) {
    json extra = json::object();
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (known_.count(it.key())) continue;
      if (strict)
        throw DataError(where(path_, line_) + ": unknown field \"" + it.key() + "\"");
      extra[it.key()] = it.value();
    }
    return extra.empty() ? std::string() : extra.dump();
  }

  int line() const { return line_; }
  const std::string& path() const { return path_; }

 private:
  const json& fetch(const char* key) {
    auto it = j_.find(key);
    if (it == j_.end())
      throw DataError(where(path_, line_) + ": missing field \"" + key + "\"");
    return *it;
  }
  DataError bad(const char* key, const char* expect) {
    return DataError(where(path_, line_) + ": field \"" + key + "\" must be " + expect);
  }
  void mark(const char* key) { known_.insert(key); }

  const json& j_;
  const std::string& path_;
  int line_;
  std::unordered_set<std::string> known_;
};

template <class Fn>
auto read_records(const std::string& path, Fn&& convert) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::vector<decltype(convert(std::declval<Fields&>()))> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError(where(path, lineno) + ": malformed JSON: " + e.what());
    }
    Fields f(j, path, lineno);
    out.push_back(convert(f));
  }
  return out;
}

// Re-attaches preserved unknown fields; schema keys win on collision.
void merge_extra(json& j, const std::string& extra) {
  if (extra.empty()) return;
  json e = json::parse(extra);
  for (auto it = e.begin(); it != e.end(); ++it)
    if (!j.contains(it.key())) j[it.key()] = it.value();
}

void write_lines(const std::string& path, const std::vector<json>& lines) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  for (const auto& j : lines) out << j.dump() << "\n";
  if (!out) throw DataError("write failed for " + path);
}

// Wraps enum parsing so the error carries file position and field name.
template <class Fn>
auto parse_enum(Fields& f, const char* key, Fn&& parse, const std::string& text) {
  try {
    return parse(text);
  } catch (const DataError& e) {
    throw DataError(where(f.path(), f.line()) + ": field \"" + key + "\": " + e.what());
  }
}

}  // namespace

std::vector<SyntheticSample> read_samples(const std::string& path, bool strict) {
  return read_records(path, [&](Fields& f) {
    SyntheticSample s;
    s.sample_id = f.str("sample_id");
    s.prompt_id = f.str("prompt_id");
    s.dimension = f.str("dimension");
    s.latent_quality = f.number("latent_quality");
    s.shortcut = f.bit("shortcut");
    s.features = f.number_array("features");
    s.split = parse_enum(f, "split", split_from_name, f.str("split"));
    s.extra = f.finish(strict);
    return s;
  });
}

void write_samples(const std::string& path, const std::vector<SyntheticSample>& samples) {
  std::vector<json> lines;
  lines.reserve(samples.size());
  for (const auto& s : samples) {
    json j;
    j["sample_id"] = s.sample_id;
    j["prompt_id"] = s.prompt_id;
    j["dimension"] = s.dimension;
    j["latent_quality"] = s.latent_quality;
    j["shortcut"] = s.shortcut;
    j["features"] = s.features;
    j["split"] = split_name(s.split);
    merge_extra(j, s.extra);
    lines.push_back(std::move(j));
  }
  write_lines(path, lines);
}

std::vector<AnnotationRecord> read_annotations(const std::string& path, bool strict) {
  return read_records(path, [&](Fields& f) {
    AnnotationRecord r;
    r.sample_id = f.str("sample_id");
    r.annotator_id = f.str("annotator_id");
    r.dimension = f.str("dimension");
    r.verdict = parse_enum(f, "verdict", verdict_from_name, f.str("verdict"));
    r.extra = f.finish(strict);
    return r;
  });
}

void write_annotations(const std::string& path, const std::vector<AnnotationRecord>& records) {
  std::vector<json> lines;
  lines.reserve(records.size());
  for (const auto& r : records) {
    json j;
    j["sample_id"] = r.sample_id;
    j["annotator_id"] = r.annotator_id;
    j["dimension"] = r.dimension;
    j["verdict"] = verdict_name(r.verdict);
    merge_extra(j, r.extra);
    lines.push_back(std::move(j));
  }
  write_lines(path, lines);
}

std::vector<PreferencePair> read_pairs(const std::string& path, bool strict) {
  return read_records(path, [&](Fields& f) {
    PreferencePair p;
    p.id_i = f.str("id_i");
    p.id_j = f.str("id_j");
    p.relation = parse_enum(f, "relation", relation_from_name, f.str("relation"));
    p.pairing = parse_enum(f, "pairing", pairing_from_name, f.str("pairing"));
    p.extra = f.finish(strict);
    return p;
  });
}

void write_pairs(const std::string& path, const std::vector<PreferencePair>& pairs) {
  std::vector<json> lines;
  lines.reserve(pairs.size());
  for (const auto& p : pairs) {
    json j;
    j["id_i"] = p.id_i;
    j["id_j"] = p.id_j;
    j["relation"] = relation_name(p.relation);
    j["pairing"] = pairing_name(p.pairing);
    merge_extra(j, p.extra);
    lines.push_back(std::move(j));
  }
  write_lines(path, lines);
}

}  // namespace rmlab
