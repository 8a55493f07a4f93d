#ifndef PROPAFF_JSON_IO_HPP
#define PROPAFF_JSON_IO_HPP

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "propaff/ext_affine.hpp"

namespace propaff {

// Small ordered JSON value. Output is deterministic: keys keep insertion
// order and doubles print with 17 significant digits (round-trip exact),
// locale-independent.
class Json {
 public:
  Json() : value_(nullptr) {}
  Json(std::nullptr_t) : value_(nullptr) {}
  Json(bool b) : value_(b) {}
  Json(double d) : value_(d) {}
  Json(int i) : value_(static_cast<std::int64_t>(i)) {}
  Json(std::int64_t i) : value_(i) {}
  Json(std::uint64_t i) : value_(static_cast<std::int64_t>(i)) {}
  Json(const char* s) : value_(std::string(s)) {}
  Json(std::string s) : value_(std::move(s)) {}

  static Json object() {
    Json j;
    j.value_ = ObjectStore{};
    return j;
  }
  static Json array() {
    Json j;
    j.value_ = ArrayStore{};
    return j;
  }

  Json& set(const std::string& key, Json value);
  Json& push(Json value);

  bool is_object() const { return std::holds_alternative<ObjectStore>(value_); }
  bool is_array() const { return std::holds_alternative<ArrayStore>(value_); }
  bool is_number() const;
  bool is_string() const { return std::holds_alternative<std::string>(value_); }
  bool has(const std::string& key) const;

  const Json& at(const std::string& key) const;  // throws Error if missing
  const Json& at(size_t i) const;
  size_t size() const;

  double as_double() const;
  std::int64_t as_int() const;
  bool as_bool() const;
  const std::string& as_string() const;

  std::string dump(int indent = 0) const;
  static Json parse(const std::string& text);  // throws Error on malformed input

 private:
  using ArrayStore = std::vector<Json>;
  using ObjectStore = std::vector<std::pair<std::string, Json>>;
  std::variant<std::nullptr_t, bool, std::int64_t, double, std::string, ArrayStore,
               ObjectStore>
      value_;
  void dump_to(std::string& out, int indent, int depth) const;
};

std::string format_double(double v);

Json to_json(const VectorXd& v);
Json to_json(const MatrixXd& m);  // row-major nested arrays
VectorXd vector_from_json(const Json& j);
MatrixXd matrix_from_json(const Json& j);

// {"defining": [[...]], "translation": [...]} with translation in adapted
// g coordinates; validates group membership on input.
Json map_to_json(const LieModel& model, const ExtAffineMap& g);
ExtAffineMap map_from_json(const LieModel& model, const Json& j);

Json model_descriptor(const LieModel& model);
LieModel model_from_descriptor(const Json& j);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace propaff

#endif
