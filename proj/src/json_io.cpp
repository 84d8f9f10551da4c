#include "moelab/json_io.hpp"

#include <cmath>

#include "moelab/csv_io.hpp"
#include "moelab/errors.hpp"

namespace moe {

namespace {

std::string escape(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\u%04x", c);
          out += buf;
        } else {
          out += c;
        }
    }
  }
  return out + "\"";
}

const nlohmann::json& require(const nlohmann::json& j, const char* name, const std::string& where) {
  if (!j.is_object() || !j.contains(name)) throw ArgumentError(where + ": missing field '" + name + "'");
  return j.at(name);
}

double number(const nlohmann::json& j, const std::string& where) {
  if (!j.is_number()) throw ArgumentError(where + " must be a number");
  return j.get<double>();
}

Vec number_list(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array()) throw ArgumentError(where + " must be an array of numbers");
  Vec out;
  for (const auto& e : j) out.push_back(number(e, where));
  return out;
}

}  // namespace

void JsonWriter::newline() {
  out_ += '\n';
  out_.append(2 * stack_.size(), ' ');
}

void JsonWriter::before_value() {
  if (after_key_) {
    after_key_ = false;
    return;
  }
  if (stack_.empty()) return;
  Frame& f = stack_.back();
  if (f.count++ > 0) out_ += f.multiline ? "," : ", ";
  if (f.multiline) newline();
}

JsonWriter& JsonWriter::begin_object() {
  before_value();
  out_ += '{';
  stack_.push_back({false, true, 0});
  return *this;
}

JsonWriter& JsonWriter::end_object() {
  const bool had = stack_.back().count > 0;
  stack_.pop_back();
  if (had) newline();
  out_ += '}';
  return *this;
}

JsonWriter& JsonWriter::begin_array(bool multiline) {
  before_value();
  out_ += '[';
  stack_.push_back({true, multiline, 0});
  return *this;
}

JsonWriter& JsonWriter::end_array() {
  const Frame f = stack_.back();
  stack_.pop_back();
  if (f.multiline && f.count > 0) newline();
  out_ += ']';
  return *this;
}

JsonWriter& JsonWriter::key(std::string_view k) {
  Frame& f = stack_.back();
  if (f.count++ > 0) out_ += ',';
  newline();
  out_ += escape(k);
  out_ += ": ";
  after_key_ = true;
  return *this;
}

JsonWriter& JsonWriter::value(double v) {
  before_value();
  out_ += std::isfinite(v) ? format_double(v) : "null";
  return *this;
}

JsonWriter& JsonWriter::value(std::int64_t v) {
  before_value();
  out_ += std::to_string(v);
  return *this;
}

JsonWriter& JsonWriter::value(std::uint64_t v) {
  before_value();
  out_ += std::to_string(v);
  return *this;
}

JsonWriter& JsonWriter::value(bool v) {
  before_value();
  out_ += v ? "true" : "false";
  return *this;
}

JsonWriter& JsonWriter::value(std::string_view v) {
  before_value();
  out_ += escape(v);
  return *this;
}

JsonWriter& JsonWriter::numbers(const std::vector<double>& v) {
  begin_array();
  for (double e : v) value(e);
  return end_array();
}

void write_gate(JsonWriter& w, const GateSpec& gate) {
  w.begin_object();
  if (gate.is_linear()) {
    w.key("kind").value("linear");
  } else {
    const Activation& act = gate.activation();
    switch (act.name()) {
      case Activation::Name::Sigmoid: w.key("kind").value("sigmoid"); break;
      case Activation::Name::Gelu: w.key("kind").value("gelu"); break;
      case Activation::Name::Power: w.key("kind").value("power").key("p").value(act.exponent()); break;
      case Activation::Name::Identity: w.key("kind").value("power").key("p").value(1); break;
    }
  }
  w.end_object();
}

void write_measure(JsonWriter& w, const MixingMeasure& g, bool with_schema) {
  w.begin_object();
  w.key("tau").value(g.tau());
  w.key("gate");
  write_gate(w, g.gate());
  w.key("atoms").begin_array(true);
  for (const Atom& a : g.atoms()) {
    w.begin_object();
    w.key("beta0").value(a.beta0);
    w.key("beta1").numbers(a.beta1);
    w.key("a").numbers(a.a);
    w.key("b").value(a.b);
    w.key("nu").value(a.nu);
    w.end_object();
  }
  w.end_array();
  if (with_schema) w.key("schema").value(1);
  w.end_object();
}

void write_loss_report(JsonWriter& w, const LossReport& rep) {
  w.begin_object();
  w.key("kind").value(rep.kind.label());
  w.key("value").value(rep.value);
  w.key("cells").begin_array(true);
  for (std::size_t j = 0; j < rep.per_cell.size(); ++j) {
    const CellTerm& t = rep.per_cell[j];
    w.begin_object();
    w.key("component").value(j);
    w.key("atoms").begin_array();
    for (std::size_t i : rep.assignment.cells[j]) w.value(i);
    w.end_array();
    w.key("weight_discrepancy").value(t.weight_discrepancy);
    w.key("parameter_term").value(t.parameter_term);
    w.key("empty").value(t.empty);
    w.end_object();
  }
  w.end_array();
  w.key("empty_cells").value(rep.empty_cells);
  w.key("distances").begin_array(true);
  for (const auto& row : rep.assignment.distances) w.numbers(row);
  w.end_array();
  w.end_object();
}

std::string measure_to_json(const MixingMeasure& g) {
  JsonWriter w;
  write_measure(w, g, true);
  return w.str();
}

std::string fit_result_to_json(const FitResult& fit) {
  JsonWriter w;
  w.begin_object();
  w.key("measure");
  write_measure(w, fit.measure);
  w.key("loglik_trace").numbers(fit.loglik_trace);
  w.key("converged").value(fit.converged);
  w.key("iters").value(fit.iters);
  w.key("diagnostics").begin_object();
  w.key("reseeds").value(fit.reseeds);
  w.key("ridge_fallbacks").value(fit.ridge_fallbacks);
  w.key("underflow_rows").value(fit.underflow_rows);
  w.key("stalled").value(fit.stalled);
  w.key("irls_steps").value(fit.irls_steps);
  w.end_object();
  w.key("schema").value(1);
  w.end_object();
  return w.str();
}

std::string loss_report_to_json(const LossReport& rep) {
  JsonWriter w;
  w.begin_object();
  w.key("report");
  write_loss_report(w, rep);
  w.key("schema").value(1);
  w.end_object();
  return w.str();
}

GateSpec gate_from_json(const nlohmann::json& j) {
  if (j.is_string()) return gate_from_json(nlohmann::json{{"kind", j}});
  const auto& kind_j = require(j, "kind", "gate");
  if (!kind_j.is_string()) throw ArgumentError("gate.kind must be a string");
  const std::string kind = kind_j.get<std::string>();
  for (const auto& [k, v] : j.items())
    if (k != "kind" && k != "p") throw ArgumentError("gate: unknown key '" + k + "'");
  if (kind == "linear") return GateSpec::linear();
  if (kind == "sigmoid") return GateSpec::activated(Activation::sigmoid());
  if (kind == "gelu") return GateSpec::activated(Activation::gelu());
  if (kind == "identity") return GateSpec::activated(Activation::identity());
  if (kind == "power") {
    const auto& p = require(j, "p", "gate");
    if (!p.is_number_integer()) throw ArgumentError("gate.p must be an integer");
    return GateSpec::activated(Activation::power(p.get<int>()));
  }
  throw ArgumentError("gate: unknown kind '" + kind + "'");
}

MixingMeasure measure_from_json(const nlohmann::json& j, bool pinned) {
  if (!j.is_object()) throw ArgumentError("measure must be a JSON object");
  for (const auto& [k, v] : j.items())
    if (k != "tau" && k != "gate" && k != "atoms" && k != "schema") throw ArgumentError("measure: unknown key '" + k + "'");
  const double tau = number(require(j, "tau", "measure"), "measure.tau");
  const GateSpec gate = j.contains("gate") ? gate_from_json(j.at("gate")) : GateSpec::linear();
  const auto& atoms_j = require(j, "atoms", "measure");
  if (!atoms_j.is_array()) throw ArgumentError("measure.atoms must be an array");
  std::vector<Atom> atoms;
  for (std::size_t i = 0; i < atoms_j.size(); ++i) {
    const auto& a = atoms_j[i];
    const std::string where = "measure.atoms[" + std::to_string(i) + "]";
    for (const auto& [k, v] : a.items())
      if (k != "beta0" && k != "beta1" && k != "a" && k != "b" && k != "nu")
        throw ArgumentError(where + ": unknown key '" + k + "'");
    Atom atom;
    atom.beta0 = number(require(a, "beta0", where), where + ".beta0");
    atom.beta1 = number_list(require(a, "beta1", where), where + ".beta1");
    atom.a = number_list(require(a, "a", where), where + ".a");
    atom.b = number(require(a, "b", where), where + ".b");
    atom.nu = number(require(a, "nu", where), where + ".nu");
    atoms.push_back(std::move(atom));
  }
  return MixingMeasure(std::move(atoms), tau, gate, pinned);
}

nlohmann::json parse_json(const std::string& text, const std::string& what) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ArgumentError(what + ": invalid JSON (" + e.what() + ")");
  }
}

MixingMeasure load_measure(const std::string& path, bool pinned) {
  return measure_from_json(parse_json(read_text_file(path), path), pinned);
}

}  // namespace moe
