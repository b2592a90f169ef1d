#include "affine/model_io.hpp"

#include <fstream>
#include <set>

#include "affine/errors.hpp"

namespace affine {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& field, const std::string& what) {
  throw Error(ErrorKind::Usage, "model schema", "field '" + field + "': " + what);
}

double number(const json& j, const std::string& field) {
  if (!j.is_number()) fail(field, "expected a number");
  return j.get<double>();
}

Vec vector_of(const json& j, int size, const std::string& field) {
  if (!j.is_array()) fail(field, "expected an array");
  if (static_cast<int>(j.size()) != size) {
    fail(field, "expected " + std::to_string(size) + " entries, got " + std::to_string(j.size()));
  }
  Vec v(size);
  for (int k = 0; k < size; ++k) v(k) = number(j[k], field + "[" + std::to_string(k) + "]");
  return v;
}

Mat matrix_of(const json& j, int size, const std::string& field) {
  if (!j.is_array()) fail(field, "expected an array of rows");
  if (static_cast<int>(j.size()) != size) {
    fail(field, "expected " + std::to_string(size) + " rows, got " + std::to_string(j.size()));
  }
  Mat a(size, size);
  for (int r = 0; r < size; ++r) a.row(r) = vector_of(j[r], size, field + "[" + std::to_string(r) + "]").transpose();
  return a;
}

JumpMeasure measure_of(const json& j, int d, const std::string& field) {
  if (!j.is_object()) fail(field, "expected an object");
  for (const auto& [key, value] : j.items()) {
    if (key != "atoms") fail(field + "." + key, "unknown key");
  }
  if (!j.contains("atoms")) return {};
  const auto& atoms_json = j.at("atoms");
  if (!atoms_json.is_array()) fail(field + ".atoms", "expected an array");
  std::vector<Atom> atoms;
  for (std::size_t k = 0; k < atoms_json.size(); ++k) {
    const std::string name = field + ".atoms[" + std::to_string(k) + "]";
    const auto& aj = atoms_json[k];
    if (!aj.is_object() || !aj.contains("mass") || !aj.contains("point")) fail(name, "expected {mass, point}");
    for (const auto& [key, value] : aj.items()) {
      if (key != "mass" && key != "point") fail(name + "." + key, "unknown key");
    }
    atoms.push_back({number(aj.at("mass"), name + ".mass"), vector_of(aj.at("point"), d, name + ".point")});
  }
  return JumpMeasure(std::move(atoms));
}

json vector_json(const Vec& v) {
  json out = json::array();
  for (int k = 0; k < v.size(); ++k) out.push_back(v(k));
  return out;
}

json matrix_json(const Mat& a) {
  json out = json::array();
  for (int r = 0; r < a.rows(); ++r) out.push_back(vector_json(a.row(r).transpose()));
  return out;
}

json measure_json(const JumpMeasure& measure) {
  json out = json::object();
  if (measure.is_zero()) return out;
  json atoms = json::array();
  for (const auto& atom : measure.atoms()) atoms.push_back({{"mass", atom.mass}, {"point", vector_json(atom.point)}});
  out["atoms"] = atoms;
  return out;
}

}  // namespace

AffineModel model_from_json(const json& j) {
  if (!j.is_object()) fail("<root>", "expected an object");
  static const std::set<std::string> known = {"m", "n", "a", "alpha", "b", "beta", "nu", "mu"};
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) fail(key, "unknown key");
  }
  for (const char* key : {"m", "n", "a", "b", "beta"}) {
    if (!j.contains(key)) fail(key, "missing");
  }
  if (!j.at("m").is_number_integer() || !j.at("n").is_number_integer()) fail("m/n", "expected integers");
  AffineModel model;
  model.m = j.at("m").get<int>();
  model.n = j.at("n").get<int>();
  if (model.m < 0 || model.n < 0 || model.d() < 1 || model.d() > kMaxDim) {
    fail("m/n", "need m, n >= 0 and 1 <= m + n <= " + std::to_string(kMaxDim));
  }
  const int d = model.d();
  model.a = matrix_of(j.at("a"), d, "a");
  model.b = vector_of(j.at("b"), d, "b");
  model.beta = matrix_of(j.at("beta"), d, "beta");
  if (model.m > 0 && !j.contains("alpha")) fail("alpha", "missing (m > 0)");
  if (j.contains("alpha")) {
    const auto& aj = j.at("alpha");
    if (!aj.is_array() || static_cast<int>(aj.size()) != model.m) {
      fail("alpha", "expected " + std::to_string(model.m) + " matrices of size " + std::to_string(d) + "x" +
                        std::to_string(d));
    }
    for (int i = 0; i < model.m; ++i) model.alpha.push_back(matrix_of(aj[i], d, "alpha[" + std::to_string(i) + "]"));
  }
  if (j.contains("nu")) model.nu = measure_of(j.at("nu"), d, "nu");
  model.mu.assign(model.m, JumpMeasure{});
  if (j.contains("mu")) {
    const auto& mj = j.at("mu");
    if (!mj.is_array() || static_cast<int>(mj.size()) != model.m) {
      fail("mu", "expected " + std::to_string(model.m) + " measures");
    }
    for (int i = 0; i < model.m; ++i) model.mu[i] = measure_of(mj[i], d, "mu[" + std::to_string(i) + "]");
  }
  return model;
}

json model_to_json(const AffineModel& model) {
  json out;
  out["m"] = model.m;
  out["n"] = model.n;
  out["a"] = matrix_json(model.a);
  json alpha = json::array();
  for (const auto& a : model.alpha) alpha.push_back(matrix_json(a));
  out["alpha"] = alpha;
  out["b"] = vector_json(model.b);
  out["beta"] = matrix_json(model.beta);
  out["nu"] = measure_json(model.nu);
  json mu = json::array();
  for (const auto& measure : model.mu) mu.push_back(measure_json(measure));
  out["mu"] = mu;
  return out;
}

AffineModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Usage, "model file", "cannot open model file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Usage, "model file", "malformed JSON in " + path.string() + ": " + e.what());
  }
  return model_from_json(j);
}

json to_json(const ValidationReport& report) {
  json violations = json::array();
  for (const auto& v : report.violations) {
    violations.push_back({{"condition", v.condition}, {"detail", v.detail}, {"indices", v.indices}});
  }
  return {{"ok", report.ok}, {"violations", violations}};
}

}  // namespace affine
