#pragma once

#include <cmath>
#include <cstdio>
#include <limits>
#include <istream>
#include <ostream>
#include <string>

#include <json.hpp>

#include "kaczmarz/solvers.hpp"

namespace kaczmarz {

namespace detail {

inline std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

// One row per iteration, floats at 17 significant digits so the file
// round-trips doubles exactly.
inline void write_trace_csv(const IterationTrace& trace, std::ostream& out) {
  out << "k,index,epsilon,iset_size,beta,rse,res_norm_sq\n";
  for (const TraceRow& row : trace.rows) {
    out << row.k << ',' << row.chosen_index << ','
        << detail::fmt17(row.epsilon) << ',' << row.index_set_size << ','
        << detail::fmt17(row.beta) << ',' << detail::fmt17(row.rse) << ','
        << detail::fmt17(row.res_norm_sq) << '\n';
  }
}

struct RunSummary {
  std::string variant;
  std::uint64_t seed = 0;
  std::size_t iters = 0;
  double cpu_seconds = 0.0;
  double final_rse = std::numeric_limits<double>::quiet_NaN();
};

inline RunSummary summarize(const IterationTrace& trace) {
  return {std::string(variant_name(trace.variant)), trace.seed,
          trace.iterations, trace.cpu_seconds, trace.final_rse};
}

// Field order is part of the format; nan serializes as null.
inline void write_summary_json(const RunSummary& s, std::ostream& out) {
  nlohmann::ordered_json j;
  j["variant"] = s.variant;
  j["seed"] = s.seed;
  j["iters"] = s.iters;
  j["cpu_seconds"] = s.cpu_seconds;
  if (std::isnan(s.final_rse))
    j["final_rse"] = nullptr;
  else
    j["final_rse"] = s.final_rse;
  out << j.dump(2) << "\n";
}

inline RunSummary read_summary_json(std::istream& in) {
  nlohmann::json j = nlohmann::json::parse(in);
  RunSummary s;
  s.variant = j.at("variant").get<std::string>();
  s.seed = j.at("seed").get<std::uint64_t>();
  s.iters = j.at("iters").get<std::size_t>();
  s.cpu_seconds = j.at("cpu_seconds").get<double>();
  s.final_rse = j.at("final_rse").is_null()
                    ? std::numeric_limits<double>::quiet_NaN()
                    : j.at("final_rse").get<double>();
  return s;
}

}  // namespace kaczmarz
