#include "cylab/report.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "cylab/ioutil.hpp"

namespace cylab::report {

Json Json::number(double v) {
  if (!std::isfinite(v)) throw std::invalid_argument("report: non-finite number");
  return Json(v);
}

Json& Json::set(std::string key, Json value) {
  auto* obj = std::get_if<std::shared_ptr<Object>>(&value_);
  if (!obj) throw std::logic_error("report: set() on a non-object");
  (*obj)->members.emplace_back(std::move(key), std::move(value));
  return *this;
}

Json& Json::push(Json value) {
  auto* arr = std::get_if<std::shared_ptr<Array>>(&value_);
  if (!arr) throw std::logic_error("report: push() on a non-array");
  (*arr)->items.push_back(std::move(value));
  return *this;
}

namespace {

void escape_into(std::string& out, const std::string& s) {
  out += '"';
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
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

void pad(std::string& out, int indent, int depth) {
  if (indent <= 0) return;
  out += '\n';
  out.append(static_cast<std::size_t>(indent) * depth, ' ');
}

}  // namespace

void Json::write(std::string& out, int indent, int depth) const {
  if (std::holds_alternative<std::nullptr_t>(value_)) {
    out += "null";
  } else if (const auto* b = std::get_if<bool>(&value_)) {
    out += *b ? "true" : "false";
  } else if (const auto* i = std::get_if<std::int64_t>(&value_)) {
    out += io::fmt_int(*i);
  } else if (const auto* d = std::get_if<double>(&value_)) {
    out += io::fmt17(*d);
  } else if (const auto* s = std::get_if<std::string>(&value_)) {
    escape_into(out, *s);
  } else if (const auto* obj = std::get_if<std::shared_ptr<Object>>(&value_)) {
    if ((*obj)->members.empty()) {
      out += "{}";
      return;
    }
    out += '{';
    bool first = true;
    for (const auto& [key, value] : (*obj)->members) {
      if (!first) out += ',';
      first = false;
      pad(out, indent, depth + 1);
      escape_into(out, key);
      out += indent > 0 ? ": " : ":";
      value.write(out, indent, depth + 1);
    }
    pad(out, indent, depth);
    out += '}';
  } else if (const auto* arr = std::get_if<std::shared_ptr<Array>>(&value_)) {
    if ((*arr)->items.empty()) {
      out += "[]";
      return;
    }
    out += '[';
    bool first = true;
    for (const auto& item : (*arr)->items) {
      if (!first) out += ',';
      first = false;
      pad(out, indent, depth + 1);
      item.write(out, indent, depth + 1);
    }
    pad(out, indent, depth);
    out += ']';
  }
}

std::string Json::dump(int indent) const {
  std::string out;
  write(out, indent, 0);
  out += '\n';
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << content;
}

}  // namespace cylab::report
