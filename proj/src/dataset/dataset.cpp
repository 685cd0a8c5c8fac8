#include "dataset/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "common/error.hpp"
#include "common/image.hpp"

namespace ieqa::dataset {

using nlohmann::json;

std::string_view to_string(PromptType t) {
  switch (t) {
    case PromptType::style: return "style";
    case PromptType::semantic: return "semantic";
    case PromptType::structural: return "structural";
  }
  return "";
}

std::optional<PromptType> parse_prompt_type(std::string_view s) {
  if (s == "style") return PromptType::style;
  if (s == "semantic") return PromptType::semantic;
  if (s == "structural") return PromptType::structural;
  return std::nullopt;
}

std::string_view to_string(Paradigm p) {
  return p == Paradigm::instruction_based ? "instruction_based" : "description_based";
}

std::optional<Paradigm> parse_paradigm(std::string_view s) {
  if (s == "instruction_based") return Paradigm::instruction_based;
  if (s == "description_based") return Paradigm::description_based;
  return std::nullopt;
}

std::filesystem::path CaseSet::resolve(const std::string& ref) const {
  std::filesystem::path p(ref);
  return p.is_absolute() ? p : base_dir / p;
}

const EditCase* CaseSet::find(std::string_view case_id) const {
  auto it = std::lower_bound(cases.begin(), cases.end(), case_id,
                             [](const EditCase& c, std::string_view id) { return c.case_id < id; });
  if (it != cases.end() && it->case_id == case_id) return &*it;
  // not canonical yet; fall back to a scan
  auto lin = std::find_if(cases.begin(), cases.end(), [&](const EditCase& c) { return c.case_id == case_id; });
  return lin == cases.end() ? nullptr : &*lin;
}

void CaseSet::canonicalize() {
  std::stable_sort(cases.begin(), cases.end(),
                   [](const EditCase& a, const EditCase& b) { return a.case_id < b.case_id; });
}

std::string to_string(const Violation& v) { return v.case_id + ": " + v.rule; }

ImageProbe default_probe() { return [](const std::filesystem::path& p) { return image_io::is_decodable(p); }; }

std::vector<Violation> validate_caseset(const CaseSet& cs, const ImageProbe& probe) {
  std::vector<Violation> out;
  std::set<std::string> seen;
  std::set<std::string> reported_dupes;
  for (const auto& c : cs.cases) {
    if (c.case_id.empty()) out.push_back({c.case_id, "empty case_id"});
    if (!seen.insert(c.case_id).second && reported_dupes.insert(c.case_id).second)
      out.push_back({c.case_id, "duplicate case_id"});
    if (c.prompt.empty()) out.push_back({c.case_id, "empty prompt"});
    if (c.editing_method.empty()) out.push_back({c.case_id, "empty editing_method"});
    if (probe) {
      if (c.source_image.empty() || !probe(cs.resolve(c.source_image)) || c.edited_image.empty() ||
          !probe(cs.resolve(c.edited_image)))
        out.push_back({c.case_id, "unresolvable image"});
    }
  }
  std::set<std::string> method_names;
  for (const auto& m : cs.methods) {
    if (!method_names.insert(m.name).second) out.push_back({"method:" + m.name, "duplicate method name"});
  }
  return out;
}

namespace {

std::string require_string(const json& obj, const char* key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string())
    throw ParseError("manifest line " + std::to_string(line) + ": missing string field '" + key + "'");
  return it->get<std::string>();
}

const std::set<std::string>& case_fields() {
  static const std::set<std::string> f{"case_id",   "source_image",   "edited_image", "prompt",
                                       "prompt_type", "editing_method", "content_tags"};
  return f;
}

EditCase parse_case(const json& rec, std::size_t line) {
  if (!rec.is_object()) throw ParseError("manifest line " + std::to_string(line) + ": record is not an object");
  for (const auto& [key, _] : rec.items()) {
    if (!case_fields().count(key))
      throw ParseError("manifest line " + std::to_string(line) + ": unknown field '" + key + "'");
  }
  EditCase c;
  c.case_id = require_string(rec, "case_id", line);
  c.source_image = require_string(rec, "source_image", line);
  c.edited_image = require_string(rec, "edited_image", line);
  c.prompt = require_string(rec, "prompt", line);
  c.editing_method = require_string(rec, "editing_method", line);
  const auto type = require_string(rec, "prompt_type", line);
  auto parsed = parse_prompt_type(type);
  if (!parsed)
    throw ParseError("manifest line " + std::to_string(line) + ": prompt_type '" + type +
                     "' is not one of style/semantic/structural");
  c.prompt_type = *parsed;
  if (auto it = rec.find("content_tags"); it != rec.end()) {
    if (!it->is_array()) throw ParseError("manifest line " + std::to_string(line) + ": content_tags must be a list");
    for (const auto& tag : *it) {
      if (!tag.is_string()) throw ParseError("manifest line " + std::to_string(line) + ": content tag is not a string");
      c.content_tags.push_back(tag.get<std::string>());
    }
  }
  return c;
}

MethodInfo parse_method(const json& m) {
  MethodInfo info;
  if (!m.is_object() || !m.contains("name") || !m["name"].is_string())
    throw ParseError("manifest header: method entries need a name");
  info.name = m["name"].get<std::string>();
  info.zero_shot = m.value("zero_shot", false);
  auto paradigm = parse_paradigm(m.value("paradigm", std::string("instruction_based")));
  if (!paradigm) throw ParseError("manifest header: unknown paradigm for method " + info.name);
  info.paradigm = *paradigm;
  info.backbone_version = m.value("backbone_version", std::string());
  return info;
}

}  // namespace

CaseSet parse_manifest(std::string_view text, const std::filesystem::path& base_dir, const LoadOptions& opts) {
  CaseSet cs;
  cs.base_dir = base_dir;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError("manifest line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!have_header) {
      if (!rec.is_object()) throw ParseError("manifest header is not an object");
      cs.name = require_string(rec, "name", lineno);
      cs.version = require_string(rec, "version", lineno);
      cs.created = require_string(rec, "created", lineno);
      if (auto it = rec.find("methods"); it != rec.end()) {
        for (const auto& m : *it) cs.methods.push_back(parse_method(m));
      }
      have_header = true;
      continue;
    }
    cs.cases.push_back(parse_case(rec, lineno));
  }
  if (!have_header) throw ParseError("manifest has no header record");
  cs.canonicalize();

  auto violations = validate_caseset(cs, opts.check_images ? default_probe() : ImageProbe{});
  if (!violations.empty()) {
    std::vector<std::string> details;
    for (const auto& v : violations) details.push_back(to_string(v));
    std::string msg = "manifest failed validation (" + std::to_string(violations.size()) + " violations): ";
    for (std::size_t i = 0; i < details.size() && i < 5; ++i) msg += (i ? "; " : "") + details[i];
    throw ValidationError(msg, std::move(details));
  }
  return cs;
}

CaseSet load_manifest(const std::filesystem::path& path, const LoadOptions& opts) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open manifest: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_manifest(buf.str(), path.parent_path(), opts);
}

std::string serialize_manifest(const CaseSet& cs) {
  // ordered_json keeps field order stable for diff-friendly output
  using ojson = nlohmann::ordered_json;
  std::string out;
  ojson header;
  header["name"] = cs.name;
  header["version"] = cs.version;
  header["created"] = cs.created;
  if (!cs.methods.empty()) {
    ojson methods = ojson::array();
    for (const auto& m : cs.methods) {
      ojson jm;
      jm["name"] = m.name;
      jm["zero_shot"] = m.zero_shot;
      jm["paradigm"] = std::string(to_string(m.paradigm));
      jm["backbone_version"] = m.backbone_version;
      methods.push_back(std::move(jm));
    }
    header["methods"] = std::move(methods);
  }
  out += header.dump() + "\n";
  for (const auto& c : cs.cases) {
    ojson rec;
    rec["case_id"] = c.case_id;
    rec["source_image"] = c.source_image;
    rec["edited_image"] = c.edited_image;
    rec["prompt"] = c.prompt;
    rec["prompt_type"] = std::string(to_string(c.prompt_type));
    rec["editing_method"] = c.editing_method;
    rec["content_tags"] = c.content_tags;
    out += rec.dump() + "\n";
  }
  return out;
}

void write_manifest(const CaseSet& cs, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write manifest: " + path.string());
  out << serialize_manifest(cs);
}

}  // namespace ieqa::dataset
