#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "moelab/em.hpp"
#include "moelab/metrics.hpp"
#include "moelab/model.hpp"

namespace moe {

/// Streaming JSON emitter with a fixed member order and 17-digit numbers.
/// Objects put one member per line; arrays stay on one line unless opened with
/// `multiline`.
class JsonWriter {
 public:
  JsonWriter& begin_object();
  JsonWriter& end_object();
  JsonWriter& begin_array(bool multiline = false);
  JsonWriter& end_array();
  JsonWriter& key(std::string_view k);

  JsonWriter& value(double v);
  JsonWriter& value(std::int64_t v);
  JsonWriter& value(std::uint64_t v);
  JsonWriter& value(int v) { return value(static_cast<std::int64_t>(v)); }
  JsonWriter& value(bool v);
  JsonWriter& value(std::string_view v);
  JsonWriter& value(const char* v) { return value(std::string_view(v)); }
  JsonWriter& numbers(const std::vector<double>& v);

  /// The finished document, newline-terminated.
  std::string str() const { return out_ + "\n"; }

 private:
  struct Frame {
    bool array;
    bool multiline;
    int count;
  };
  void before_value();
  void newline();

  std::string out_;
  std::vector<Frame> stack_;
  bool after_key_ = false;
};

void write_gate(JsonWriter& w, const GateSpec& gate);
/// tau, gate, atoms, then "schema": 1 if asked.
void write_measure(JsonWriter& w, const MixingMeasure& g, bool with_schema = false);
void write_loss_report(JsonWriter& w, const LossReport& rep);

/// Standalone measure document, ending with "schema": 1.
std::string measure_to_json(const MixingMeasure& g);
std::string fit_result_to_json(const FitResult& fit);
std::string loss_report_to_json(const LossReport& rep);

GateSpec gate_from_json(const nlohmann::json& j);
/// The pinned flag is not stored; pass it in.
MixingMeasure measure_from_json(const nlohmann::json& j, bool pinned = false);
nlohmann::json parse_json(const std::string& text, const std::string& what);
MixingMeasure load_measure(const std::string& path, bool pinned = false);

}  // namespace moe
