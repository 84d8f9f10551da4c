#pragma once

#include <string>

#include "moelab/dataset.hpp"

namespace moe {

/// 17 significant digits ("%.17g"); round-trips every finite double.
std::string format_double(double v);

/// Header x_0,...,x_{d-1},y then one row per point.
std::string dataset_to_csv(const Dataset& data);
Dataset dataset_from_csv(const std::string& text);

void save_dataset_csv(const std::string& path, const Dataset& data);
Dataset load_dataset_csv(const std::string& path);

std::string read_text_file(const std::string& path);
/// Throws IoError when the path cannot be written.
void write_text_file(const std::string& path, const std::string& content);

}  // namespace moe
