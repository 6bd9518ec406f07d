#pragma once

#include <cstdio>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "ljgibbs.h"

namespace cli {

// Exit codes: 0 ok, 2 usage/input, 3 numerical, 4 border/geometry.
inline constexpr int kUsage = 2;
inline constexpr int kNumerical = 3;
inline constexpr int kGeometry = 4;

// Thrown by subcommand bodies; main converts it to the process code.
struct Exit {
  int code;
};

inline int exit_code_for(int rc) {
  switch (rc) {
    case LJG_OK: return 0;
    case LJG_ERROR_GEOMETRY: return kGeometry;
    case LJG_ERROR_NUMERICAL: return kNumerical;
    case LJG_ERROR_INTERNAL: return kNumerical;
    default: return kUsage;  // invalid argument, malformed or unreadable files
  }
}

inline void check(int rc) {
  if (rc == LJG_OK) return;
  std::fprintf(stderr, "error: %s\n", ljg_last_error());
  throw Exit{exit_code_for(rc)};
}

[[noreturn]] inline void usage_error(const std::string& msg) {
  std::fprintf(stderr, "error: %s\n", msg.c_str());
  throw Exit{kUsage};
}

inline std::vector<double> parse_doubles(const std::string& s,
                                         const char* what) {
  std::vector<double> out;
  size_t pos = 0;
  while (pos <= s.size()) {
    size_t comma = s.find(',', pos);
    std::string tok = s.substr(pos, comma == std::string::npos ? std::string::npos
                                                               : comma - pos);
    try {
      size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      usage_error(std::string(what) + ": expected comma-separated numbers, got '" +
                  s + "'");
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

// "x_min,x_max,y_min,y_max"
inline ljg_window parse_window_arg(const std::string& s) {
  auto v = parse_doubles(s, "--window");
  if (v.size() != 4)
    usage_error("--window: expected x_min,x_max,y_min,y_max, got '" + s + "'");
  return {v[0], v[1], v[2], v[3]};
}

inline std::string join_path(const std::string& dir, const std::string& name) {
  if (dir.empty() || dir == ".") return name;
  if (!name.empty() && name.front() == '/') return name;
  return dir.back() == '/' ? dir + name : dir + "/" + name;
}

// <stem>.csv -> <stem>.window.json
inline std::string sidecar_for(const std::string& csv_path) {
  const std::string suffix = ".csv";
  if (csv_path.size() > suffix.size() &&
      csv_path.compare(csv_path.size() - suffix.size(), suffix.size(),
                       suffix) == 0)
    return csv_path.substr(0, csv_path.size() - suffix.size()) +
           ".window.json";
  return csv_path + ".window.json";
}

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) usage_error("cannot open '" + path + "' for writing");
  out << text;
  if (!out) usage_error("write to '" + path + "' failed");
}

struct GlobalOpts {
  std::string out_dir = ".";
};

// Owns a C-string returned by the library.
struct CString {
  char* s = nullptr;
  ~CString() { ljg_string_free(s); }
  std::string str() const { return s ? s : ""; }
};

inline constexpr uint64_t kSeedStride = 0x9E3779B97F4A7C15ull;

}  // namespace cli
