#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ieqa::dataset {

/// Editing-prompt taxonomy: color/texture/ambiance changes, object-level
/// content changes, and geometry/pose/motion changes.
enum class PromptType { style, semantic, structural };

std::string_view to_string(PromptType t);
std::optional<PromptType> parse_prompt_type(std::string_view s);

enum class Paradigm { instruction_based, description_based };

std::string_view to_string(Paradigm p);
std::optional<Paradigm> parse_paradigm(std::string_view s);

struct EditCase {
  std::string case_id;
  std::string source_image;  // relative to the manifest directory unless absolute
  std::string edited_image;
  std::string prompt;
  PromptType prompt_type = PromptType::style;
  std::string editing_method;
  std::vector<std::string> content_tags;

  bool operator==(const EditCase&) const = default;
};

struct MethodInfo {
  std::string name;
  bool zero_shot = false;
  Paradigm paradigm = Paradigm::instruction_based;
  std::string backbone_version;

  bool operator==(const MethodInfo&) const = default;
};

struct CaseSet {
  std::string name;
  std::string version;
  std::string created;
  std::vector<MethodInfo> methods;
  std::vector<EditCase> cases;  // canonical order: ascending case_id
  std::filesystem::path base_dir;  // where relative image references resolve

  std::filesystem::path resolve(const std::string& ref) const;
  const EditCase* find(std::string_view case_id) const;

  /// Sorts cases by case_id (stable, so duplicates keep file order).
  void canonicalize();

  bool operator==(const CaseSet& o) const {
    return name == o.name && version == o.version && created == o.created &&
           methods == o.methods && cases == o.cases;
  }
};

struct Violation {
  std::string case_id;
  std::string rule;

  bool operator==(const Violation&) const = default;
};

std::string to_string(const Violation& v);

/// Returns true when the referenced image exists and decodes.
using ImageProbe = std::function<bool(const std::filesystem::path&)>;

ImageProbe default_probe();

/// Checks every EditCase/MethodInfo invariant. Empty result iff valid.
/// Pass an empty probe to skip image resolution checks.
std::vector<Violation> validate_caseset(const CaseSet& cs, const ImageProbe& probe = default_probe());

struct LoadOptions {
  bool check_images = true;
};

/// Reads a JSON-lines manifest: one header object, then one record per case.
/// Throws ParseError on malformed input and ValidationError (details = one
/// line per violation) when invariants fail.
CaseSet load_manifest(const std::filesystem::path& path, const LoadOptions& opts = {});

CaseSet parse_manifest(std::string_view text, const std::filesystem::path& base_dir,
                       const LoadOptions& opts = {});

std::string serialize_manifest(const CaseSet& cs);
void write_manifest(const CaseSet& cs, const std::filesystem::path& path);

}  // namespace ieqa::dataset
