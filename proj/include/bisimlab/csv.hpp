#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "bisimlab/common.hpp"

namespace bisimlab {

// Shortest round-trippable decimal form; deterministic for a given build.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  // Prefer the shorter %.15g / %.16g form when it round-trips exactly.
  for (int prec = 15; prec <= 16; ++prec) {
    char shorter[40];
    std::snprintf(shorter, sizeof(shorter), "%.*g", prec, v);
    double back = 0.0;
    std::sscanf(shorter, "%lf", &back);
    if (back == v || (v != v && back != back)) return shorter;
  }
  return buf;
}

class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header) : out_(path) {
    if (!out_) throw Error("IoError", "cannot open " + path);
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (i) out_ << ',';
      out_ << header[i];
    }
    out_ << '\n';
  }

  void field(double v) {
    sep();
    out_ << format_double(v);
  }
  void field(long long v) {
    sep();
    out_ << v;
  }
  void field(std::size_t v) {
    sep();
    out_ << v;
  }
  void field(int v) {
    sep();
    out_ << v;
  }
  void field(const std::string& v) {
    sep();
    out_ << v;
  }

  void end_row() {
    out_ << '\n';
    first_ = true;
  }

  void flush() { out_.flush(); }

 private:
  void sep() {
    if (!first_) out_ << ',';
    first_ = false;
  }

  std::ofstream out_;
  bool first_ = true;
};

}  // namespace bisimlab
