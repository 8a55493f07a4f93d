#include "propaff/json_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace propaff {

std::string format_double(double v) {
  if (!std::isfinite(v)) throw Error("refusing to serialize a non-finite number");
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

Json& Json::set(const std::string& key, Json value) {
  auto& obj = std::get<ObjectStore>(value_);
  obj.emplace_back(key, std::move(value));
  return *this;
}

Json& Json::push(Json value) {
  std::get<ArrayStore>(value_).push_back(std::move(value));
  return *this;
}

bool Json::is_number() const {
  return std::holds_alternative<double>(value_) ||
         std::holds_alternative<std::int64_t>(value_);
}

bool Json::has(const std::string& key) const {
  if (!is_object()) return false;
  for (const auto& [k, v] : std::get<ObjectStore>(value_))
    if (k == key) return true;
  return false;
}

const Json& Json::at(const std::string& key) const {
  if (!is_object()) throw Error("json: not an object");
  for (const auto& [k, v] : std::get<ObjectStore>(value_))
    if (k == key) return v;
  throw Error("json: missing key '" + key + "'");
}

const Json& Json::at(size_t i) const {
  const auto& arr = std::get<ArrayStore>(value_);
  if (i >= arr.size()) throw Error("json: index out of range");
  return arr[i];
}

size_t Json::size() const {
  if (is_array()) return std::get<ArrayStore>(value_).size();
  if (is_object()) return std::get<ObjectStore>(value_).size();
  throw Error("json: size of a scalar");
}

double Json::as_double() const {
  if (std::holds_alternative<double>(value_)) return std::get<double>(value_);
  if (std::holds_alternative<std::int64_t>(value_))
    return static_cast<double>(std::get<std::int64_t>(value_));
  throw Error("json: not a number");
}

std::int64_t Json::as_int() const {
  if (std::holds_alternative<std::int64_t>(value_)) return std::get<std::int64_t>(value_);
  if (std::holds_alternative<double>(value_)) {
    const double d = std::get<double>(value_);
    if (d != std::floor(d)) throw Error("json: not an integer");
    return static_cast<std::int64_t>(d);
  }
  throw Error("json: not a number");
}

bool Json::as_bool() const {
  if (!std::holds_alternative<bool>(value_)) throw Error("json: not a bool");
  return std::get<bool>(value_);
}

const std::string& Json::as_string() const {
  if (!is_string()) throw Error("json: not a string");
  return std::get<std::string>(value_);
}

namespace {

void escape_to(std::string& out, const std::string& s) {
  out += '"';
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof(buf), "\\u%04x", c);
          out += buf;
        } else {
          out += c;
        }
    }
  }
  out += '"';
}

void newline_indent(std::string& out, int indent, int depth) {
  if (indent <= 0) return;
  out += '\n';
  out.append(static_cast<size_t>(indent) * depth, ' ');
}

}  // namespace

void Json::dump_to(std::string& out, int indent, int depth) const {
  if (std::holds_alternative<std::nullptr_t>(value_)) {
    out += "null";
  } else if (std::holds_alternative<bool>(value_)) {
    out += std::get<bool>(value_) ? "true" : "false";
  } else if (std::holds_alternative<std::int64_t>(value_)) {
    out += std::to_string(std::get<std::int64_t>(value_));
  } else if (std::holds_alternative<double>(value_)) {
    out += format_double(std::get<double>(value_));
  } else if (std::holds_alternative<std::string>(value_)) {
    escape_to(out, std::get<std::string>(value_));
  } else if (std::holds_alternative<ArrayStore>(value_)) {
    const auto& arr = std::get<ArrayStore>(value_);
    out += '[';
    for (size_t i = 0; i < arr.size(); ++i) {
      if (i) out += indent > 0 ? ", " : ",";
      arr[i].dump_to(out, 0, depth + 1);
    }
    out += ']';
  } else {
    const auto& obj = std::get<ObjectStore>(value_);
    out += '{';
    for (size_t i = 0; i < obj.size(); ++i) {
      if (i) out += ',';
      newline_indent(out, indent, depth + 1);
      escape_to(out, obj[i].first);
      out += indent > 0 ? ": " : ":";
      obj[i].second.dump_to(out, indent, depth + 1);
    }
    newline_indent(out, indent, depth);
    out += '}';
  }
}

std::string Json::dump(int indent) const {
  std::string out;
  dump_to(out, indent, 0);
  return out;
}

namespace {

Json convert(const nlohmann::json& j) {
  switch (j.type()) {
    case nlohmann::json::value_t::null: return Json(nullptr);
    case nlohmann::json::value_t::boolean: return Json(j.get<bool>());
    case nlohmann::json::value_t::number_integer:
    case nlohmann::json::value_t::number_unsigned:
      return Json(j.get<std::int64_t>());
    case nlohmann::json::value_t::number_float: return Json(j.get<double>());
    case nlohmann::json::value_t::string: return Json(j.get<std::string>());
    case nlohmann::json::value_t::array: {
      Json out = Json::array();
      for (const auto& item : j) out.push(convert(item));
      return out;
    }
    case nlohmann::json::value_t::object: {
      Json out = Json::object();
      for (auto it = j.begin(); it != j.end(); ++it) out.set(it.key(), convert(it.value()));
      return out;
    }
    default: throw Error("json: unsupported value type");
  }
}

}  // namespace

Json Json::parse(const std::string& text) {
  nlohmann::json parsed;
  try {
    parsed = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw Error(std::string("json parse error: ") + e.what());
  }
  return convert(parsed);
}

Json to_json(const VectorXd& v) {
  Json arr = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push(Json(v(i)));
  return arr;
}

Json to_json(const MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push(Json(m(i, j)));
    rows.push(std::move(row));
  }
  return rows;
}

VectorXd vector_from_json(const Json& j) {
  if (!j.is_array()) throw Error("json: expected an array of numbers");
  VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j.at(i).as_double();
  return v;
}

MatrixXd matrix_from_json(const Json& j) {
  if (!j.is_array() || j.size() == 0) throw Error("json: expected a nested array");
  const size_t rows = j.size();
  const size_t cols = j.at(size_t{0}).size();
  MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (size_t i = 0; i < rows; ++i) {
    const Json& row = j.at(i);
    if (row.size() != cols) throw Error("json: ragged matrix");
    for (size_t c = 0; c < cols; ++c)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = row.at(c).as_double();
  }
  return m;
}

Json map_to_json(const LieModel& model, const ExtAffineMap& g) {
  if (!g.defining) throw Error("map_to_json: missing defining witness");
  Json out = Json::object();
  out.set("defining", to_json(*g.defining));
  out.set("translation", to_json(g.trans));
  return out;
}

ExtAffineMap map_from_json(const LieModel& model, const Json& j) {
  const MatrixXd h = matrix_from_json(j.at("defining"));
  if (h.rows() != model.def_dim || h.cols() != model.def_dim)
    throw DomainError("map json: defining matrix has wrong size");
  VectorXd v = VectorXd::Zero(model.dim_g);
  if (j.has("translation")) {
    v = vector_from_json(j.at("translation"));
    if (v.size() != model.dim_g) throw DomainError("map json: translation has wrong size");
  }
  return ExtAffineMap::from_defining(model, h, v);  // membership checked here
}

Json model_descriptor(const LieModel& model) {
  Json out = Json::object();
  out.set("family", family_name(model.family));
  out.set("n", std::int64_t{static_cast<std::int64_t>(model.n)});
  return out;
}

LieModel model_from_descriptor(const Json& j) {
  return LieModel::build(family_from_name(j.at("family").as_string()),
                         static_cast<int>(j.at("n").as_int()));
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write file: " + path);
  out << content;
}

}  // namespace propaff
