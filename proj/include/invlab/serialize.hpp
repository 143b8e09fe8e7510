#pragma once

#include <iosfwd>
#include <string>

#include "invlab/core_model.hpp"

namespace invlab {

// Text matrix format, one token stream:
//   line 1: magic ("INVLAB-DATASET 1" or "INVLAB-MODEL 1")
//   line 2: d N
//   then N rows. Dataset rows are "y env x_1 ... x_d"; a model is one row
//   "w_1 ... w_d" with N = 1. Values use 17 significant digits, so a
//   write/read round trip is exact.
void write_dataset(std::ostream& out, const LabeledDataset& data);
LabeledDataset read_dataset(std::istream& in);
void write_model(std::ostream& out, const LinearModel& model);
LinearModel read_model(std::istream& in);

void save_dataset(const std::string& path, const LabeledDataset& data);
LabeledDataset load_dataset(const std::string& path);
void save_model(const std::string& path, const LinearModel& model);
LinearModel load_model(const std::string& path);

// Header "y,env,x1,...,xd" then one row per sample.
void export_dataset_csv(std::ostream& out, const LabeledDataset& data);

}  // namespace invlab
