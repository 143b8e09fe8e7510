#include "invlab/serialize.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include <fmt/format.h>
#include <fmt/ostream.h>

namespace invlab {

namespace {

constexpr const char* kDatasetMagic = "INVLAB-DATASET 1";
constexpr const char* kModelMagic = "INVLAB-MODEL 1";

void expect_magic(std::istream& in, const char* magic) {
  std::string line;
  std::getline(in, line);
  if (line != magic) throw InvalidArgument(fmt::format("bad header '{}', expected '{}'", line, magic));
}

double read_value(std::istream& in) {
  std::string tok;
  if (!(in >> tok)) throw InvalidArgument("truncated matrix data");
  try {
    size_t used = 0;
    double v = std::stod(tok, &used);
    if (used != tok.size()) throw InvalidArgument(fmt::format("bad number '{}'", tok));
    return v;
  } catch (const std::logic_error&) {
    throw InvalidArgument(fmt::format("bad number '{}'", tok));
  }
}

}  // namespace

void write_dataset(std::ostream& out, const LabeledDataset& data) {
  fmt::print(out, "{}\n{} {}\n", kDatasetMagic, data.dim(), data.size());
  for (int i = 0; i < data.size(); ++i) {
    fmt::print(out, "{} {}", static_cast<int>(data.y()[i]), data.env()[i]);
    for (int k = 0; k < data.dim(); ++k) fmt::print(out, " {:.17g}", data.x()(i, k));
    out << '\n';
  }
}

LabeledDataset read_dataset(std::istream& in) {
  expect_magic(in, kDatasetMagic);
  long d = 0, n = 0;
  if (!(in >> d >> n) || d < 0 || n < 0) throw InvalidArgument("bad dataset dimensions");
  RowMat x(n, d);
  Vec y(n);
  std::vector<int> env(n);
  for (long i = 0; i < n; ++i) {
    y[i] = read_value(in);
    env[i] = static_cast<int>(read_value(in));
    for (long k = 0; k < d; ++k) x(i, k) = read_value(in);
  }
  return LabeledDataset(std::move(x), std::move(y), std::move(env));
}

void write_model(std::ostream& out, const LinearModel& model) {
  fmt::print(out, "{}\n{} 1\n", kModelMagic, model.dim());
  for (int k = 0; k < model.dim(); ++k) fmt::print(out, "{}{:.17g}", k ? " " : "", model.w()[k]);
  out << '\n';
}

LinearModel read_model(std::istream& in) {
  expect_magic(in, kModelMagic);
  long d = 0, n = 0;
  if (!(in >> d >> n) || d < 1 || n != 1) throw InvalidArgument("bad model dimensions");
  Vec w(d);
  for (long k = 0; k < d; ++k) w[k] = read_value(in);
  return LinearModel(std::move(w));
}

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument(fmt::format("cannot write '{}'", path));
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument(fmt::format("cannot read '{}'", path));
  return in;
}

}  // namespace

void save_dataset(const std::string& path, const LabeledDataset& data) {
  auto out = open_out(path);
  write_dataset(out, data);
}

LabeledDataset load_dataset(const std::string& path) {
  auto in = open_in(path);
  return read_dataset(in);
}

void save_model(const std::string& path, const LinearModel& model) {
  auto out = open_out(path);
  write_model(out, model);
}

LinearModel load_model(const std::string& path) {
  auto in = open_in(path);
  return read_model(in);
}

void export_dataset_csv(std::ostream& out, const LabeledDataset& data) {
  out << "y,env";
  for (int k = 0; k < data.dim(); ++k) fmt::print(out, ",x{}", k + 1);
  out << '\n';
  for (int i = 0; i < data.size(); ++i) {
    fmt::print(out, "{},{}", static_cast<int>(data.y()[i]), data.env()[i]);
    for (int k = 0; k < data.dim(); ++k) fmt::print(out, ",{:.17g}", data.x()(i, k));
    out << '\n';
  }
}

}  // namespace invlab
