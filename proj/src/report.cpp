#include "cospadi/report.hpp"

#include <charconv>
#include <fstream>

#include "json.hpp"

#include "cospadi/codec.hpp"
#include "cospadi/error.hpp"
#include "cospadi/kernels.hpp"

namespace cospadi {

namespace {

std::string number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string quoted(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

double relative(double err, double reference) {
  if (reference > 0.0) return err / reference;
  return err;  // reference output is zero: report the absolute error
}

}  // namespace

const std::vector<std::string>& RunReport::csv_columns() {
  static const std::vector<std::string> columns = {
      "name",           "method",       "gamma_target", "gamma_achieved",
      "k",              "s_or_r",       "activation_error_fro",
      "relative_activation_error",      "weight_error_fro",
      "k_active",       "multiply_count", "iterations", "wall_seconds"};
  return columns;
}

std::string csv_header() {
  std::string out;
  for (const auto& c : RunReport::csv_columns()) {
    if (!out.empty()) out += ',';
    out += c;
  }
  return out;
}

std::string csv_line(const RunRow& r) {
  return quoted(r.name) + ',' + quoted(r.method) + ',' + number(r.gamma_target) + ',' +
         number(r.gamma_achieved) + ',' + std::to_string(r.k) + ',' + std::to_string(r.s_or_r) +
         ',' + number(r.activation_error_fro) + ',' + number(r.relative_activation_error) + ',' +
         number(r.weight_error_fro) + ',' + std::to_string(r.k_active) + ',' +
         std::to_string(r.multiply_count) + ',' + std::to_string(r.iterations) + ',' +
         number(r.wall_seconds);
}

std::string RunReport::to_csv() const {
  std::string out = csv_header() + '\n';
  for (const auto& r : rows) out += csv_line(r) + '\n';
  return out;
}

std::string RunReport::to_json() const {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    arr.push_back({{"name", r.name},
                   {"method", r.method},
                   {"gamma_target", r.gamma_target},
                   {"gamma_achieved", r.gamma_achieved},
                   {"k", r.k},
                   {"s_or_r", r.s_or_r},
                   {"activation_error_fro", r.activation_error_fro},
                   {"relative_activation_error", r.relative_activation_error},
                   {"weight_error_fro", r.weight_error_fro},
                   {"k_active", r.k_active},
                   {"multiply_count", r.multiply_count},
                   {"iterations", r.iterations},
                   {"wall_seconds", r.wall_seconds}});
  }
  return nlohmann::ordered_json{{"rows", arr}}.dump(2) + '\n';
}

void RunReport::write(const std::filesystem::path& prefix) const {
  auto with_ext = [&](const char* ext) {
    auto p = prefix;
    p += ext;
    return p;
  };
  const std::string csv = to_csv();
  const std::string json = to_json();
  write_file_bytes(with_ext(".csv"), std::span(reinterpret_cast<const std::uint8_t*>(csv.data()), csv.size()));
  write_file_bytes(with_ext(".json"), std::span(reinterpret_cast<const std::uint8_t*>(json.data()), json.size()));
}

RunRow evaluate_sparse(const std::string& name, const std::string& method, const DenseMatrix& w,
                       const DenseMatrix& x, const Dictionary& d, const SparseCodes& codes,
                       const SizingPlan& plan, int iterations, double wall_seconds) {
  if (w.rows() != d.dim() || w.cols() != codes.cols())
    throw ShapeError("evaluate: weights of '" + name + "' do not match the factorization shape");
  const auto result = apply_compressed(x, d, codes);
  const DenseMatrix reference = matmul(x, w);
  RunRow row;
  row.name = name;
  row.method = method;
  row.gamma_target = plan.gamma_target;
  row.gamma_achieved = plan.gamma_achieved;
  row.k = codes.k();
  row.s_or_r = codes.s();
  row.activation_error_fro = (reference - result.y).frobenius_norm();
  row.relative_activation_error = relative(row.activation_error_fro, reference.frobenius_norm());
  row.weight_error_fro = (w - multiply_codes(d.atoms, codes)).frobenius_norm();
  row.k_active = result.count.k_active;
  row.multiply_count = result.count.total;
  row.iterations = iterations;
  row.wall_seconds = wall_seconds;
  return row;
}

RunRow evaluate_lowrank(const std::string& name, const std::string& method, const DenseMatrix& w,
                        const DenseMatrix& x, const DenseMatrix& b, const DenseMatrix& c,
                        const SizingPlan& plan, double wall_seconds) {
  if (w.rows() != b.rows() || w.cols() != c.cols())
    throw ShapeError("evaluate: weights of '" + name + "' do not match the factorization shape");
  const auto result = apply_lowrank(x, b, c);
  const DenseMatrix reference = matmul(x, w);
  RunRow row;
  row.name = name;
  row.method = method;
  row.gamma_target = plan.gamma_target;
  row.gamma_achieved = plan.gamma_achieved;
  row.k = 0;
  row.s_or_r = b.cols();
  row.activation_error_fro = (reference - result.y).frobenius_norm();
  row.relative_activation_error = relative(row.activation_error_fro, reference.frobenius_norm());
  row.weight_error_fro = (w - matmul(b, c)).frobenius_norm();
  row.k_active = result.count.k_active;
  row.multiply_count = result.count.total;
  row.wall_seconds = wall_seconds;
  return row;
}

}  // namespace cospadi
