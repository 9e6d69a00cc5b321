#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace cylab::report {

/// Order-preserving JSON value with deterministic serialization: keys appear
/// in insertion order and doubles are rendered locale-independently with 17
/// significant digits.  Identical content produces identical bytes.
class Json {
 public:
  static Json object() { return Json(Object{}); }
  static Json array() { return Json(Array{}); }
  static Json number(double v);
  static Json integer(std::int64_t v) { return Json(v); }
  static Json boolean(bool v) { return Json(v); }
  static Json string(std::string v) { return Json(std::move(v)); }
  static Json null() { return Json(nullptr); }

  Json& set(std::string key, Json value);
  Json& push(Json value);

  std::string dump(int indent = 2) const;

 private:
  struct Object;
  struct Array;
  using Value = std::variant<std::nullptr_t, bool, std::int64_t, double, std::string,
                             std::shared_ptr<Object>, std::shared_ptr<Array>>;
  struct Object {
    std::vector<std::pair<std::string, Json>> members;
  };
  struct Array {
    std::vector<Json> items;
  };

  template <class T>
  explicit Json(T v) : value_(std::move(v)) {}
  explicit Json(Object o) : value_(std::make_shared<Object>(std::move(o))) {}
  explicit Json(Array a) : value_(std::make_shared<Array>(std::move(a))) {}

  void write(std::string& out, int indent, int depth) const;

  Value value_;
};

void write_text(const std::filesystem::path& path, const std::string& content);

}  // namespace cylab::report
